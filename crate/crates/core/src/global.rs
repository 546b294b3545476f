//! Global explainers: partial dependence, accumulated local effects and
//! Morris elementary-effects screening.
//!
//! All three evaluate the model only through [`Pipeline`] batch calls.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Row, TabularBatch};
use crate::error::{Error, Result};
use crate::pipeline::Pipeline;
use crate::stats;

pub const DEFAULT_GRID_SIZE: usize = 20;
pub const DEFAULT_ALE_BINS: usize = 10;
pub const DEFAULT_MORRIS_TRAJECTORIES: usize = 10;
pub const DEFAULT_MORRIS_LEVELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpResult {
    pub feature: String,
    pub outputs: Vec<String>,
    pub grid: Vec<Cell>,
    /// `means[g][k]`: average output `k` with the feature forced to `grid[g]`.
    pub means: Vec<Vec<f64>>,
    /// Individual conditional expectation curves for the first
    /// `ice_rows` background rows: `ice[row][g][k]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ice: Vec<Vec<Vec<f64>>>,
    pub ice_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleResult {
    pub feature: String,
    pub outputs: Vec<String>,
    pub edges: Vec<f64>,
    /// `effects[e][k]`: centered accumulated effect at `edges[e]`.
    pub effects: Vec<Vec<f64>>,
    /// Rows per bin; `counts.len() == edges.len() - 1`.
    pub counts: Vec<usize>,
}

impl AleResult {
    /// Count-weighted mean of the bin-midpoint effects (zero after centering).
    pub fn weighted_mean(&self, k: usize) -> f64 {
        let n: usize = self.counts.iter().sum();
        let s: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(b, &c)| c as f64 * (self.effects[b][k] + self.effects[b + 1][k]) / 2.0)
            .sum();
        s / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorrisResult {
    pub features: Vec<String>,
    pub outputs: Vec<String>,
    /// `mu[j][k]`, likewise for `mu_star` and `sigma`.
    pub mu: Vec<Vec<f64>>,
    pub mu_star: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub trajectories: usize,
    pub levels: usize,
    pub bounds: Vec<(f64, f64)>,
}

fn output_names(pipe: &Pipeline) -> Vec<String> {
    (0..pipe.model().n_outputs())
        .map(|k| pipe.model().output_label(k))
        .collect()
}

/// Grid for a feature: all categories, or `grid_size` quantiles of the
/// background column with duplicates removed.
pub fn pdp_grid(pipe: &Pipeline, background: &TabularBatch, p: usize, grid_size: usize) -> Result<Vec<Cell>> {
    let col = pipe.feature_column(p);
    match col.kind {
        ColumnKind::Categorical => Ok(col.categories.iter().cloned().map(Cell::Cat).collect()),
        ColumnKind::Continuous => {
            let values = background.numeric_column(pipe.source_index(p));
            if values.is_empty() {
                return Err(Error::Data(format!("feature `{}` has no values", col.name)));
            }
            let s = stats::sorted(&values);
            let g = grid_size.max(1);
            let mut grid: Vec<f64> = if g == 1 {
                vec![stats::quantile_sorted(&s, 0.5)]
            } else {
                (0..g)
                    .map(|i| stats::quantile_sorted(&s, i as f64 / (g - 1) as f64))
                    .collect()
            };
            grid.dedup();
            Ok(grid.into_iter().map(Cell::Num).collect())
        }
    }
}

pub fn pdp(
    pipe: &Pipeline,
    background: &TabularBatch,
    feature: &str,
    grid_size: usize,
    ice_rows: usize,
) -> Result<PdpResult> {
    if background.is_empty() {
        return Err(Error::Precondition("PDP needs a non-empty background".into()));
    }
    let p = pipe.feature_position(feature)?;
    let src = pipe.source_index(p);
    let grid = pdp_grid(pipe, background, p, grid_size)?;
    let n = background.n_rows();
    let mut rows: Vec<Row> = Vec::with_capacity(grid.len() * n);
    for g in &grid {
        for r in background.rows() {
            let mut row = r.clone();
            row[src] = g.clone();
            rows.push(row);
        }
    }
    let preds = pipe.predict_rows(&rows)?;
    let k = pipe.model().n_outputs();
    let means = preds
        .chunks(n)
        .map(|block| {
            let mut m = vec![0.0; k];
            for out in block {
                for (acc, v) in m.iter_mut().zip(out) {
                    *acc += v;
                }
            }
            m.iter_mut().for_each(|v| *v /= n as f64);
            m
        })
        .collect();
    let ice_rows = ice_rows.min(n);
    let ice = (0..ice_rows)
        .map(|r| (0..grid.len()).map(|g| preds[g * n + r].clone()).collect())
        .collect();
    Ok(PdpResult {
        feature: feature.to_string(),
        outputs: output_names(pipe),
        grid,
        means,
        ice,
        ice_rows,
    })
}

pub fn ale(pipe: &Pipeline, background: &TabularBatch, feature: &str, n_bins: usize) -> Result<AleResult> {
    let p = pipe.feature_position(feature)?;
    let col = pipe.feature_column(p);
    if col.kind != ColumnKind::Continuous {
        return Err(Error::InvalidArgument(format!(
            "ALE is not supported for categorical feature `{feature}`"
        )));
    }
    if n_bins == 0 {
        return Err(Error::InvalidArgument("ALE needs at least one bin".into()));
    }
    let src = pipe.source_index(p);
    let values = background.numeric_column(src);
    let mut distinct = stats::sorted(&values);
    distinct.dedup();
    if distinct.len() < n_bins {
        return Err(Error::Precondition(format!(
            "ALE with {n_bins} bins needs at least {n_bins} distinct values of `{feature}`, found {}",
            distinct.len()
        )));
    }
    let edges = stats::quantile_edges(&values, n_bins);
    let n_b = edges.len() - 1;
    // Right-closed bins (e_k, e_k+1]; the first bin also holds e_0.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_b];
    for (i, row) in background.rows().iter().enumerate() {
        if let Some(v) = row[src].as_f64() {
            let b = edges[1..n_b].iter().filter(|&&e| e < v).count();
            members[b].push(i);
        }
    }
    let mut rows: Vec<Row> = Vec::new();
    for (b, idx) in members.iter().enumerate() {
        for &i in idx {
            for edge in [edges[b + 1], edges[b]] {
                let mut row = background.row(i).clone();
                row[src] = Cell::Num(edge);
                rows.push(row);
            }
        }
    }
    let preds = pipe.predict_rows(&rows)?;
    let k = pipe.model().n_outputs();
    let mut acc = vec![vec![0.0; k]];
    let mut cursor = 0;
    for idx in &members {
        let mut local = vec![0.0; k];
        for _ in idx {
            let (hi, lo) = (&preds[cursor], &preds[cursor + 1]);
            for o in 0..k {
                local[o] += hi[o] - lo[o];
            }
            cursor += 2;
        }
        if !idx.is_empty() {
            local.iter_mut().for_each(|v| *v /= idx.len() as f64);
        }
        let prev = acc.last().unwrap();
        acc.push(prev.iter().zip(&local).map(|(a, l)| a + l).collect());
    }
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let total: usize = counts.iter().sum();
    for o in 0..k {
        let centre: f64 = counts
            .iter()
            .enumerate()
            .map(|(b, &c)| c as f64 * (acc[b][o] + acc[b + 1][o]) / 2.0)
            .sum::<f64>()
            / total as f64;
        acc.iter_mut().for_each(|a| a[o] -= centre);
    }
    Ok(AleResult {
        feature: feature.to_string(),
        outputs: output_names(pipe),
        edges,
        effects: acc,
        counts,
    })
}

/// Per-feature `(min, max)` of the training columns, in feature order.
pub fn default_bounds(pipe: &Pipeline, train: &TabularBatch) -> Result<Vec<(f64, f64)>> {
    (0..pipe.n_features())
        .map(|p| {
            let values = train.numeric_column(pipe.source_index(p));
            if values.is_empty() {
                return Err(Error::Data(format!(
                    "feature `{}` has no numeric values for bounds",
                    pipe.feature_column(p).name
                )));
            }
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok((lo, hi))
        })
        .collect()
}

/// Morris one-at-a-time screening over `r` random trajectories on a
/// `p`-level grid. Each trajectory starts at a grid point from which every
/// coordinate can take one upward step of `delta = p / (2 (p - 1))`.
pub fn morris(
    pipe: &Pipeline,
    bounds: &[(f64, f64)],
    r: usize,
    p: usize,
    seed: u64,
) -> Result<MorrisResult> {
    let d = pipe.n_features();
    if let Some(j) = (0..d).find(|&j| pipe.feature_column(j).kind != ColumnKind::Continuous) {
        return Err(Error::InvalidArgument(format!(
            "Morris screening needs continuous features; `{}` is categorical",
            pipe.feature_column(j).name
        )));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("Morris needs r >= 1".into()));
    }
    if p < 2 || !p.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("Morris levels must be even and >= 2, got {p}")));
    }
    if bounds.len() != d {
        return Err(Error::InvalidArgument(format!("{} bounds for {d} features", bounds.len())));
    }
    let delta = p as f64 / (2.0 * (p - 1) as f64);
    let base_levels = p / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = pipe.schema().len();
    let to_row = |unit: &[f64]| -> Row {
        let mut row = vec![Cell::Missing; width];
        for (j, &u) in unit.iter().enumerate() {
            let (lo, hi) = bounds[j];
            row[pipe.source_index(j)] = Cell::Num(lo + u * (hi - lo));
        }
        row
    };
    let mut rows = Vec::with_capacity(r * (d + 1));
    let mut orders = Vec::with_capacity(r);
    for _ in 0..r {
        let mut x: Vec<f64> = (0..d)
            .map(|_| rng.random_range(0..base_levels) as f64 / (p - 1) as f64)
            .collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut rng);
        rows.push(to_row(&x));
        for &j in &order {
            x[j] += delta;
            rows.push(to_row(&x));
        }
        orders.push(order);
    }
    let preds = pipe.predict_rows(&rows)?;
    let k = pipe.model().n_outputs();
    let mut effects = vec![vec![Vec::with_capacity(r); k]; d];
    for (t, order) in orders.iter().enumerate() {
        let base = t * (d + 1);
        for (step, &j) in order.iter().enumerate() {
            let (before, after) = (&preds[base + step], &preds[base + step + 1]);
            for o in 0..k {
                effects[j][o].push((after[o] - before[o]) / delta);
            }
        }
    }
    let summarize = |f: &dyn Fn(&[f64]) -> f64| -> Vec<Vec<f64>> {
        effects.iter().map(|per| per.iter().map(|e| f(e)).collect()).collect()
    };
    Ok(MorrisResult {
        features: pipe.feature_names(),
        outputs: output_names(pipe),
        mu: summarize(&|e| stats::mean(e)),
        mu_star: summarize(&|e| e.iter().map(|v| v.abs()).sum::<f64>() / e.len() as f64),
        sigma: summarize(&|e| stats::std_pop(e)),
        trajectories: r,
        levels: p,
        bounds: bounds.to_vec(),
    })
}
