//! Seeded synthetic datasets used by tests, examples and the bundled CLI
//! fixture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{format_num, make_tabular, Column, TabularBatch, TabularSchema, TimeseriesWindow};
use crate::error::Result;

pub const CAPITAL_GAIN_THRESHOLD: f64 = 5000.0;
pub const INCOME_LABELS: [&str; 2] = ["<=50K", ">50K"];
const OCCUPATIONS: [&str; 4] = ["clerical", "craft", "professional", "service"];

/// How the income label is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncomeRule {
    /// `>50K` exactly when capital gain exceeds the threshold.
    CapitalGainOnly,
    /// Capital gain above the threshold, or a long-hours graduate aged 30+.
    Mixed,
}

pub fn income_schema() -> TabularSchema {
    TabularSchema::new(
        vec![
            Column::continuous("age"),
            Column::continuous("education_num"),
            Column::continuous("hours_per_week"),
            Column::continuous("capital_gain"),
            Column::categorical("sex", ["Female", "Male"]),
            Column::categorical("occupation", OCCUPATIONS),
            Column::categorical("income", INCOME_LABELS),
        ],
        Some("income".into()),
    )
    .expect("static schema is valid")
}

/// Header plus string records, ready to be written as CSV.
pub fn income_records(n: usize, seed: u64, rule: IncomeRule) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let header = income_schema().columns().iter().map(|c| c.name.clone()).collect();
    let rows = (0..n)
        .map(|_| {
            let age = rng.random_range(18..=70) as f64;
            let education = rng.random_range(6..=16) as f64;
            let hours = (rng.random_range(20..=60) / 5 * 5) as f64;
            let gain = if rng.random::<f64>() < 0.25 {
                (rng.random_range(500..=15000) / 250 * 250) as f64
            } else {
                0.0
            };
            let sex = if rng.random::<bool>() { "Male" } else { "Female" };
            let occupation = OCCUPATIONS[rng.random_range(0..OCCUPATIONS.len())];
            let high = match rule {
                IncomeRule::CapitalGainOnly => gain > CAPITAL_GAIN_THRESHOLD,
                IncomeRule::Mixed => {
                    gain > CAPITAL_GAIN_THRESHOLD || (education >= 13.0 && hours >= 45.0 && age >= 30.0)
                }
            };
            vec![
                format_num(age),
                format_num(education),
                format_num(hours),
                format_num(gain),
                sex.to_string(),
                occupation.to_string(),
                INCOME_LABELS[usize::from(high)].to_string(),
            ]
        })
        .collect();
    (header, rows)
}

pub fn income_batch(n: usize, seed: u64, rule: IncomeRule) -> Result<TabularBatch> {
    let (_, rows) = income_records(n, seed, rule);
    make_tabular(income_schema(), &rows)
}

/// A noisy periodic metric and a window of it with one spike at `spike`.
pub fn spiky_series(train_len: usize, window_len: usize, spike: usize, seed: u64) -> Result<(TimeseriesWindow, TimeseriesWindow)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = |i: usize| 1.0 + 0.3 * (i as f64 * 0.5).sin() + 0.05 * (rng.random::<f64>() - 0.5);
    let train: Vec<f64> = (0..train_len).map(&mut point).collect();
    let mut window: Vec<f64> = (train_len..train_len + window_len).map(&mut point).collect();
    window[spike] += 3.0;
    let ts = |a: usize, b: usize| (a as i64..b as i64).map(|t| t * 3600).collect();
    Ok((
        crate::data::make_timeseries(ts(0, train_len), train, "metric")?,
        crate::data::make_timeseries(ts(train_len, train_len + window_len), window, "metric")?,
    ))
}
