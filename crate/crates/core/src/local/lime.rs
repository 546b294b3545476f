use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{resolve_output, FeatureAttribution};
use crate::data::{Cell, ColumnKind, Row, TabularBatch};
use crate::error::{Error, Result};
use crate::pipeline::Pipeline;
use crate::stats;

const RIDGE_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Keep only the `top_k` largest |scores|; `None` keeps all.
    pub top_k: Option<usize>,
    /// Kernel width on the binary representation; defaults to 0.75 sqrt(d).
    pub kernel_width: Option<f64>,
    pub output: Option<usize>,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            top_k: None,
            kernel_width: None,
            output: None,
        }
    }
}

/// Tabular LIME with quartile discretization.
///
/// Samples draw each feature independently from its empirical training
/// marginal. The interpretable representation marks whether a sampled
/// feature shares the instance's quartile (or category). A weighted ridge
/// fit on that binary matrix gives the scores.
pub fn lime_explain(
    pipe: &Pipeline,
    train: &TabularBatch,
    instance: &Row,
    cfg: &LimeConfig,
    seed: u64,
) -> Result<FeatureAttribution> {
    let d = pipe.n_features();
    if cfg.n_samples < d + 2 {
        return Err(Error::InvalidArgument(format!(
            "LIME needs at least d + 2 = {} samples, got {}",
            d + 2,
            cfg.n_samples
        )));
    }
    if train.is_empty() {
        return Err(Error::Precondition("LIME needs training rows to sample from".into()));
    }
    let sources: Vec<usize> = (0..d).map(|p| pipe.source_index(p)).collect();
    let edges: Vec<Option<Vec<f64>>> = (0..d)
        .map(|p| match pipe.feature_column(p).kind {
            ColumnKind::Continuous => {
                let v = train.numeric_column(sources[p]);
                (!v.is_empty()).then(|| stats::quantile_edges(&v, 4))
            }
            ColumnKind::Categorical => None,
        })
        .collect();
    let same = |p: usize, a: &Cell, b: &Cell| -> bool {
        match (&edges[p], a, b) {
            (Some(e), Cell::Num(x), Cell::Num(y)) => stats::bin_of(e, *x) == stats::bin_of(e, *y),
            (None, Cell::Cat(x), Cell::Cat(y)) => x == y,
            _ => false,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n_samples;
    let mut rows = Vec::with_capacity(n);
    let mut z = DMatrix::<f64>::zeros(n, d);
    rows.push(instance.clone());
    for p in 0..d {
        z[(0, p)] = 1.0;
    }
    for i in 1..n {
        let mut row = instance.clone();
        for p in 0..d {
            let donor = rng.random_range(0..train.n_rows());
            let cell = train.row(donor)[sources[p]].clone();
            if same(p, &cell, &instance[sources[p]]) {
                z[(i, p)] = 1.0;
            }
            row[sources[p]] = cell;
        }
        rows.push(row);
    }
    let preds = pipe.predict_rows(&rows)?;
    let k = resolve_output(pipe, &preds[0], cfg.output)?;
    let y = DVector::from_iterator(n, preds.iter().map(|r| r[k]));

    let width = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let dist = d as f64 - z.row(i).sum();
            (-(dist * dist) / (width * width)).exp()
        })
        .collect();
    let scores = weighted_ridge(&z, &y, &weights, RIDGE_PENALTY)?;
    let mut scores: Vec<f64> = scores.iter().copied().collect();
    if let Some(top) = cfg.top_k {
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| scores[b].abs().total_cmp(&scores[a].abs()));
        for &p in order.iter().skip(top) {
            scores[p] = 0.0;
        }
    }
    Ok(FeatureAttribution::build("lime", pipe, instance, k, preds[0][k], None, scores))
}

/// Weighted ridge regression with an unpenalized intercept; returns the
/// slope coefficients.
fn weighted_ridge(x: &DMatrix<f64>, y: &DVector<f64>, w: &[f64], alpha: f64) -> Result<DVector<f64>> {
    let (n, d) = x.shape();
    let wsum: f64 = w.iter().sum();
    let xm: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| w[i] * x[(i, j)]).sum::<f64>() / wsum)
        .collect();
    let ym = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / wsum;
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for i in 0..n {
        for a in 0..d {
            let xa = x[(i, a)] - xm[a];
            rhs[a] += w[i] * xa * (y[i] - ym);
            for b in 0..d {
                gram[(a, b)] += w[i] * xa * (x[(i, b)] - xm[b]);
            }
        }
    }
    for a in 0..d {
        gram[(a, a)] += alpha;
    }
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Model("LIME ridge system is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TabularSchema;
    use crate::models::{FnModel, Task};
    use crate::preprocessing::FittedTransform;

    fn setup(f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> (Pipeline, TabularBatch) {
        let names = ["a", "b", "c"];
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.61).sin(), (t * 1.7).cos(), ((t * 0.29).sin() * 3.0).fract()]
            })
            .collect();
        let train = TabularBatch::from_matrix(&names, &rows).unwrap();
        let schema = TabularSchema::continuous(&names).unwrap();
        let h = FnModel::new(Some(3), 1, f).handle(Task::Regression);
        (Pipeline::new(FittedTransform::identity(&schema).unwrap(), h).unwrap(), train)
    }

    #[test]
    fn quartile_indicator_model_singles_out_its_feature() {
        let (_, train) = setup(|_| vec![0.0]);
        let upper = stats::quantile_edges(&train.numeric_column(1), 4)[3];
        let (pipe, _) = setup(move |x| vec![f64::from(u8::from(x[1] >= upper))]);
        let instance = vec![Cell::Num(0.1), Cell::Num(0.99), Cell::Num(0.2)];
        let r = lime_explain(&pipe, &train, &instance, &LimeConfig::default(), 3).unwrap();
        let s: Vec<f64> = r.scores().iter().map(|v| v.abs()).collect();
        assert!(s[1] > 0.0);
        assert!(s[0] < s[1] / 2.0 && s[2] < s[1] / 2.0, "{s:?}");
    }

    #[test]
    fn constant_model_scores_zero() {
        let (pipe, train) = setup(|_| vec![2.0]);
        let instance = train.row(5).clone();
        let r = lime_explain(&pipe, &train, &instance, &LimeConfig { n_samples: 500, ..Default::default() }, 1).unwrap();
        assert!(r.scores().iter().all(|s| s.abs() < 1e-9));
    }

    #[test]
    fn top_k_keeps_one_score() {
        let (pipe, train) = setup(|x| vec![x[0] + 2.0 * x[1] - x[2]]);
        let instance = train.row(7).clone();
        let cfg = LimeConfig { n_samples: 500, top_k: Some(1), ..Default::default() };
        let r = lime_explain(&pipe, &train, &instance, &cfg, 1).unwrap();
        assert_eq!(r.scores().iter().filter(|s| **s != 0.0).count(), 1);
    }

    #[test]
    fn too_few_samples_rejected() {
        let (pipe, train) = setup(|x| vec![x[0]]);
        let cfg = LimeConfig { n_samples: 4, ..Default::default() };
        assert!(lime_explain(&pipe, &train, &train.row(0).clone(), &cfg, 0).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let (pipe, train) = setup(|x| vec![x[0] * x[1]]);
        let cfg = LimeConfig { n_samples: 300, ..Default::default() };
        let a = lime_explain(&pipe, &train, &train.row(3).clone(), &cfg, 9).unwrap();
        let b = lime_explain(&pipe, &train, &train.row(3).clone(), &cfg, 9).unwrap();
        assert_eq!(a, b);
    }
}
