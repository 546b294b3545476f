use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::Adam;
use super::{Model, ModelSpec, Targets, Task, TrainConfig};
use crate::error::{Error, Result};
use crate::stats;

/// Fully connected network: tanh on hidden layers, identity on the output.
/// `weights[l]` is row-major `sizes[l+1] x sizes[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMlp")]
pub struct MlpModel {
    pub task: Task,
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawMlp {
    task: Task,
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl TryFrom<RawMlp> for MlpModel {
    type Error = Error;
    fn try_from(raw: RawMlp) -> Result<Self> {
        MlpModel::new(raw.task, raw.sizes, raw.weights, raw.biases)
    }
}

impl MlpModel {
    pub fn new(
        task: Task,
        sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Model("an MLP needs at least input and output layers".into()));
        }
        let layers = sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::Model("MLP parameter count does not match layer sizes".into()));
        }
        for l in 0..layers {
            if weights[l].len() != sizes[l] * sizes[l + 1] || biases[l].len() != sizes[l + 1] {
                return Err(Error::Model(format!("MLP layer {l} has incompatible dimensions")));
            }
        }
        if weights.iter().chain(&biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Model("non-finite MLP parameters".into()));
        }
        Ok(Self {
            task,
            sizes,
            weights,
            biases,
        })
    }

    /// Glorot-uniform initialization from a seed; biases start at zero.
    pub fn random(sizes: &[usize], task: Task, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let a = (6.0 / (sizes[l] + sizes[l + 1]) as f64).sqrt();
            weights.push(
                (0..sizes[l] * sizes[l + 1])
                    .map(|_| rng.random_range(-a..a))
                    .collect(),
            );
            biases.push(vec![0.0; sizes[l + 1]]);
        }
        Self {
            task,
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Activations of every layer, input first.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let prev = &acts[l];
            let w = &self.weights[l];
            let mut next = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let mut z = self.biases[l][o];
                for i in 0..n_in {
                    z += w[o * n_in + i] * prev[i];
                }
                next.push(if l + 1 < layers { z.tanh() } else { z });
            }
            acts.push(next);
        }
        acts
    }

    /// Trained by full-batch Adam: cross-entropy on softmax outputs for
    /// classification, mean squared error for regression.
    pub fn fit(x: &[Vec<f64>], targets: &Targets, cfg: &TrainConfig) -> Self {
        let d = x[0].len();
        let (task, k) = match targets {
            Targets::Classes { names, .. } => (Task::Classification, names.len().max(2)),
            Targets::Values(_) => (Task::Regression, 1),
        };
        let mut sizes = vec![d];
        sizes.extend(cfg.hidden.iter().copied().filter(|&h| h > 0));
        sizes.push(k);
        let mut model = Self::random(&sizes, task, cfg.seed);
        let layers = sizes.len() - 1;
        let n_params: usize = (0..layers).map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1]).sum();
        let mut adam = Adam::new(n_params, cfg.learning_rate);
        let n = x.len() as f64;
        let mut grad = vec![0.0; n_params];
        let mut params = vec![0.0; n_params];
        for _ in 0..cfg.max_iter {
            grad.fill(0.0);
            for (r, row) in x.iter().enumerate() {
                let acts = model.forward(row);
                let out = &acts[layers];
                let mut delta: Vec<f64> = match targets {
                    Targets::Classes { labels, .. } => {
                        let mut p = out.clone();
                        stats::softmax_in_place(&mut p);
                        p[labels[r]] -= 1.0;
                        p
                    }
                    Targets::Values(y) => vec![out[0] - y[r]],
                };
                delta.iter_mut().for_each(|v| *v /= n);
                let mut offset = n_params;
                for l in (0..layers).rev() {
                    let (n_in, n_out) = (sizes[l], sizes[l + 1]);
                    offset -= n_in * n_out + n_out;
                    let prev = &acts[l];
                    for o in 0..n_out {
                        for i in 0..n_in {
                            grad[offset + o * n_in + i] += delta[o] * prev[i];
                        }
                        grad[offset + n_in * n_out + o] += delta[o];
                    }
                    if l > 0 {
                        let w = &model.weights[l];
                        delta = (0..n_in)
                            .map(|i| {
                                let s: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                                s * (1.0 - prev[i] * prev[i])
                            })
                            .collect();
                    }
                }
            }
            model.write_params(&mut params);
            for (g, p) in grad.iter_mut().zip(&params) {
                *g += cfg.l2 * p;
            }
            if grad.iter().all(|g| g.abs() < cfg.tol) {
                break;
            }
            adam.step(&mut params, &grad);
            model.read_params(&params);
        }
        model
    }

    fn write_params(&self, out: &mut [f64]) {
        let mut o = 0;
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out[o..o + w.len()].copy_from_slice(w);
            o += w.len();
            out[o..o + b.len()].copy_from_slice(b);
            o += b.len();
        }
    }

    fn read_params(&mut self, src: &[f64]) {
        let mut o = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let wl = w.len();
            w.copy_from_slice(&src[o..o + wl]);
            o += wl;
            let bl = b.len();
            b.copy_from_slice(&src[o..o + bl]);
            o += bl;
        }
    }
}

impl Model for MlpModel {
    fn n_inputs(&self) -> Option<usize> {
        Some(self.sizes[0])
    }

    fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn predict_raw(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(x.iter().map(|r| self.forward(r).pop().unwrap()).collect())
    }

    /// Forward-mode product of layer Jacobians, input side first.
    fn jacobian_raw(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        let acts = self.forward(x);
        let layers = self.weights.len();
        let d = self.sizes[0];
        // jac[o][i] = d act_l[o] / d x[i]
        let mut jac: Vec<Vec<f64>> = (0..d)
            .map(|o| (0..d).map(|i| f64::from(u8::from(o == i))).collect())
            .collect();
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.weights[l];
            let mut next = vec![vec![0.0; d]; n_out];
            for (o, row) in next.iter_mut().enumerate() {
                for (j, prev_row) in jac.iter().enumerate().take(n_in) {
                    let wij = w[o * n_in + j];
                    for (r, p) in row.iter_mut().zip(prev_row) {
                        *r += wij * p;
                    }
                }
                if l + 1 < layers {
                    let a = acts[l + 1][o];
                    row.iter_mut().for_each(|v| *v *= 1.0 - a * a);
                }
            }
            jac = next;
        }
        Some(jac)
    }

    fn differentiable(&self) -> bool {
        true
    }

    fn to_spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Mlp(self.clone()))
    }
}
