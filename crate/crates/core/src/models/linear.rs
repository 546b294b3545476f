use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::stats;

/// One weight vector and bias per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLinear")]
pub struct LinearModel {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Deserialize)]
struct RawLinear {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl TryFrom<RawLinear> for LinearModel {
    type Error = Error;
    fn try_from(raw: RawLinear) -> Result<Self> {
        LinearModel::new(raw.weights, raw.bias)
    }
}

impl LinearModel {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != bias.len() {
            return Err(Error::Model(format!(
                "{} weight vectors but {} biases",
                weights.len(),
                bias.len()
            )));
        }
        let d = weights[0].len();
        if weights.iter().any(|w| w.len() != d) {
            return Err(Error::Model("ragged weight vectors".into()));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Model("non-finite linear parameters".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Ordinary least squares with intercept, solved by SVD.
    pub fn fit_least_squares(x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let n = x.len();
        let d = x[0].len();
        let a = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[i][j] } else { 1.0 });
        let b = DVector::from_column_slice(y);
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::Model(format!("least squares failed: {e}")))?;
        Self::new(vec![sol.as_slice()[..d].to_vec()], vec![sol[d]])
    }

    /// Multinomial logistic regression (softmax over one logit per class)
    /// trained by full-batch Adam on mean cross-entropy plus L2.
    pub fn fit_logistic(x: &[Vec<f64>], labels: &[usize], n_classes: usize, cfg: &TrainConfig) -> Self {
        let n = x.len() as f64;
        let d = x[0].len();
        let k = n_classes.max(2);
        let n_params = k * (d + 1);
        let mut params = vec![0.0; n_params];
        let mut adam = Adam::new(n_params, cfg.learning_rate);
        let mut grad = vec![0.0; n_params];
        for _ in 0..cfg.max_iter {
            grad.fill(0.0);
            for (row, &label) in x.iter().zip(labels) {
                let mut p: Vec<f64> = (0..k)
                    .map(|c| {
                        let w = &params[c * (d + 1)..(c + 1) * (d + 1)];
                        w[d] + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect();
                stats::softmax_in_place(&mut p);
                for c in 0..k {
                    let err = (p[c] - f64::from(u8::from(c == label))) / n;
                    let g = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
                    for (gi, xi) in g.iter_mut().zip(row) {
                        *gi += err * xi;
                    }
                    g[d] += err;
                }
            }
            for c in 0..k {
                for j in 0..d {
                    let i = c * (d + 1) + j;
                    grad[i] += cfg.l2 * params[i];
                }
            }
            if grad.iter().all(|g| g.abs() < cfg.tol) {
                break;
            }
            adam.step(&mut params, &grad);
        }
        let weights = (0..k)
            .map(|c| params[c * (d + 1)..c * (d + 1) + d].to_vec())
            .collect();
        let bias = (0..k).map(|c| params[c * (d + 1) + d]).collect();
        Self { weights, bias }
    }

    pub(crate) fn output(&self, k: usize, x: &[f64]) -> f64 {
        let mut acc = self.bias[k];
        for (w, v) in self.weights[k].iter().zip(x) {
            acc += w * v;
        }
        acc
    }
}

impl Model for LinearModel {
    fn n_inputs(&self) -> Option<usize> {
        Some(self.weights[0].len())
    }

    fn n_outputs(&self) -> usize {
        self.weights.len()
    }

    fn predict_raw(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(x
            .iter()
            .map(|r| (0..self.weights.len()).map(|k| self.output(k, r)).collect())
            .collect())
    }

    fn jacobian_raw(&self, _x: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(self.weights.clone())
    }

    fn differentiable(&self) -> bool {
        true
    }

    fn as_linear(&self) -> Option<&LinearModel> {
        Some(self)
    }

    fn to_spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Linear(self.clone()))
    }
}

pub(super) struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub(super) fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub(super) fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}
