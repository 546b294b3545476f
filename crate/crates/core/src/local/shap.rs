use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{resolve_output, FeatureAttribution};
use crate::data::{Row, TabularBatch};
use crate::error::{Error, Result};
use crate::pipeline::Pipeline;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    /// Coalition budget. When `2^d - 2` fits, every coalition is enumerated
    /// and the result is the exact Shapley value.
    pub n_coalitions: usize,
    /// Background rows used by the value function.
    pub max_background: usize,
    pub output: Option<usize>,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            n_coalitions: 2048,
            max_background: 100,
            output: None,
        }
    }
}

/// Shapley kernel weight of one coalition of `size` present features.
pub fn shap_kernel_weight(d: usize, size: usize) -> f64 {
    (d - 1) as f64 / (stats::binomial(d, size) * size as f64 * (d - size) as f64)
}

/// Coalitions as presence masks plus their regression weights.
fn plan_coalitions(d: usize, budget: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<bool>>, Vec<f64>) {
    let exact = d < 63 && (1u64 << d) - 2 <= budget as u64;
    let mut masks = Vec::new();
    let mut weights = Vec::new();
    if exact {
        for bits in 1..(1u64 << d) - 1 {
            let mask: Vec<bool> = (0..d).map(|j| bits >> j & 1 == 1).collect();
            let s = mask.iter().filter(|&&b| b).count();
            masks.push(mask);
            weights.push(shap_kernel_weight(d, s));
        }
        return (masks, weights);
    }
    // Fully enumerate the heaviest size pairs (s, d - s) while they fit.
    let mut remaining = budget;
    let mut full_sizes = HashSet::new();
    for s in 1..=d / 2 {
        let count = if 2 * s == d {
            stats::binomial(d, s)
        } else {
            2.0 * stats::binomial(d, s)
        };
        if count > remaining as f64 {
            break;
        }
        for size in [s, d - s] {
            if !full_sizes.insert(size) {
                continue;
            }
            for combo in combinations(d, size) {
                let mut mask = vec![false; d];
                combo.iter().for_each(|&j| mask[j] = true);
                masks.push(mask);
                weights.push(shap_kernel_weight(d, size));
            }
        }
        remaining -= count as usize;
    }
    // Sample the rest: size proportional to its kernel mass, members uniform,
    // so every sampled coalition carries the same share of that mass.
    let open: Vec<usize> = (1..d).filter(|s| !full_sizes.contains(s)).collect();
    if open.is_empty() || remaining == 0 {
        return (masks, weights);
    }
    let mass: Vec<f64> = open
        .iter()
        .map(|&s| stats::binomial(d, s) * shap_kernel_weight(d, s))
        .collect();
    let total_mass: f64 = mass.iter().sum();
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut sampled = Vec::new();
    let mut attempts = 0;
    while sampled.len() < remaining && attempts < 20 * remaining {
        attempts += 1;
        let mut u = rng.random::<f64>() * total_mass;
        let mut pick = open.len() - 1;
        for (i, m) in mass.iter().enumerate() {
            if u < *m {
                pick = i;
                break;
            }
            u -= m;
        }
        let mut mask = vec![false; d];
        for j in sample(rng, d, open[pick]) {
            mask[j] = true;
        }
        let complement: Vec<bool> = mask.iter().map(|b| !b).collect();
        for m in [mask, complement] {
            if sampled.len() < remaining && seen.insert(m.clone()) {
                sampled.push(m);
            }
        }
    }
    let share = total_mass / sampled.len() as f64;
    for m in sampled {
        masks.push(m);
        weights.push(share);
    }
    (masks, weights)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// KernelSHAP over source features.
///
/// A coalition keeps the instance's values for present features and takes
/// absent ones from each background row; its value is the mean output over
/// the (first `max_background`) background rows. The weighted least-squares
/// fit is constrained so that `base + sum(phi) = f(instance)` holds exactly.
pub fn kernel_shap(
    pipe: &Pipeline,
    background: &TabularBatch,
    instance: &Row,
    cfg: &ShapConfig,
    seed: u64,
) -> Result<FeatureAttribution> {
    let d = pipe.n_features();
    if d == 0 {
        return Err(Error::InvalidArgument("KernelSHAP needs at least one feature".into()));
    }
    if background.is_empty() {
        return Err(Error::Precondition("KernelSHAP needs a non-empty background".into()));
    }
    let bg = &background.rows()[..background.n_rows().min(cfg.max_background.max(1))];
    let fx_all = pipe.predict_row(instance)?;
    let k = resolve_output(pipe, &fx_all, cfg.output)?;
    let fx = fx_all[k];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (masks, weights) = if d == 1 {
        (Vec::new(), Vec::new())
    } else {
        plan_coalitions(d, cfg.n_coalitions, &mut rng)
    };
    let sources: Vec<usize> = (0..d).map(|p| pipe.source_index(p)).collect();
    let mut rows = Vec::with_capacity((masks.len() + 1) * bg.len());
    rows.extend(bg.iter().cloned());
    for mask in &masks {
        for b in bg {
            let mut row = b.clone();
            for (p, &present) in mask.iter().enumerate() {
                if present {
                    row[sources[p]] = instance[sources[p]].clone();
                }
            }
            rows.push(row);
        }
    }
    let preds = pipe.predict_rows(&rows)?;
    let values: Vec<f64> = preds
        .chunks(bg.len())
        .map(|block| block.iter().map(|r| r[k]).sum::<f64>() / bg.len() as f64)
        .collect();
    let base = values[0];
    let delta = fx - base;

    let phi = if d == 1 {
        vec![delta]
    } else {
        // Eliminate the last feature via the efficiency constraint.
        let m = masks.len();
        let mut a = DMatrix::<f64>::zeros(m, d - 1);
        let mut b = DVector::<f64>::zeros(m);
        for (i, mask) in masks.iter().enumerate() {
            let sw = weights[i].sqrt();
            let zl = f64::from(u8::from(mask[d - 1]));
            for j in 0..d - 1 {
                a[(i, j)] = sw * (f64::from(u8::from(mask[j])) - zl);
            }
            b[i] = sw * (values[i + 1] - base - zl * delta);
        }
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::Model(format!("KernelSHAP solve failed: {e}")))?;
        let mut phi: Vec<f64> = sol.iter().copied().collect();
        phi.push(delta - phi.iter().sum::<f64>());
        phi
    };
    Ok(FeatureAttribution::build("shap", pipe, instance, k, fx, Some(base), phi))
}
