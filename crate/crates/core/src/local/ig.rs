use serde::{Deserialize, Serialize};

use super::{aggregate_slots, resolve_output, FeatureAttribution};
use crate::data::{Row, TabularBatch};
use crate::error::{Error, Result};
use crate::models::ModelHandle;
use crate::pipeline::Pipeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IgConfig {
    pub steps: usize,
    /// Baseline in encoded (model-input) space; defaults to the encoded
    /// training mean.
    pub baseline: Option<Vec<f64>>,
    pub output: Option<usize>,
}

impl Default for IgConfig {
    fn default() -> Self {
        Self {
            steps: 256,
            baseline: None,
            output: None,
        }
    }
}

/// Midpoint-rule integrated gradients of output `k` along the straight
/// path from `baseline` to `x`. Returns per-input scores and `f_k(baseline)`.
pub fn integrated_gradients(
    handle: &ModelHandle,
    x: &[f64],
    baseline: &[f64],
    steps: usize,
    k: usize,
) -> Result<(Vec<f64>, f64)> {
    if !handle.capabilities().differentiable {
        return Err(Error::NotDifferentiable);
    }
    if baseline.len() != x.len() {
        return Err(Error::Width {
            expected: x.len(),
            actual: baseline.len(),
        });
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("integrated gradients needs steps >= 1".into()));
    }
    let d = x.len();
    let mut acc = vec![0.0; d];
    let mut point = vec![0.0; d];
    for i in 0..steps {
        let alpha = (i as f64 + 0.5) / steps as f64;
        for j in 0..d {
            point[j] = baseline[j] + alpha * (x[j] - baseline[j]);
        }
        let g = handle.gradient(&point, k)?;
        for (a, gj) in acc.iter_mut().zip(&g) {
            *a += gj;
        }
    }
    let scores = (0..d)
        .map(|j| (x[j] - baseline[j]) * acc[j] / steps as f64)
        .collect();
    let base = handle.predict(&[baseline.to_vec()])?[0][k];
    Ok((scores, base))
}

/// Integrated gradients for a pipeline instance, summed per source feature.
pub fn ig_explain(
    pipe: &Pipeline,
    train: Option<&TabularBatch>,
    instance: &Row,
    cfg: &IgConfig,
) -> Result<FeatureAttribution> {
    let handle = pipe.model();
    if !handle.capabilities().differentiable {
        return Err(Error::NotDifferentiable);
    }
    let x = pipe.transform().transform_row(instance);
    let baseline = match (&cfg.baseline, train) {
        (Some(b), _) => b.clone(),
        (None, Some(train)) if !train.is_empty() => {
            let enc = pipe.transform().transform(train)?;
            let n = enc.len() as f64;
            (0..x.len())
                .map(|j| enc.iter().map(|r| r[j]).sum::<f64>() / n)
                .collect()
        }
        _ => {
            return Err(Error::Precondition(
                "integrated gradients needs a baseline or training rows".into(),
            ))
        }
    };
    let pred = handle.predict(std::slice::from_ref(&x))?.remove(0);
    let k = resolve_output(pipe, &pred, cfg.output)?;
    let (slots, base) = integrated_gradients(handle, &x, &baseline, cfg.steps, k)?;
    let scores = aggregate_slots(pipe, &slots);
    Ok(FeatureAttribution::build("ig", pipe, instance, k, pred[k], Some(base), scores))
}
