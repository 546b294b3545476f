//! Local feature-attribution explainers.
//!
//! Scores are always reported per source feature: encoded slots (e.g. the
//! one-hot columns of a categorical feature) are summed back into the
//! feature they came from.

mod glass;
mod ig;
mod lime;
mod shap;

use serde::{Deserialize, Serialize};

use crate::data::Row;
use crate::pipeline::Pipeline;

pub use glass::{glass_linear_explain, glass_tree_explain, Branch, DecisionPath, PathStep};
pub use ig::{ig_explain, integrated_gradients, IgConfig};
pub use lime::{lime_explain, LimeConfig};
pub use shap::{kernel_shap, shap_kernel_weight, ShapConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributedFeature {
    pub name: String,
    /// The instance's value, rendered for display.
    pub value: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    pub explainer: String,
    pub output_index: usize,
    pub output_label: String,
    /// Model output `output_index` at the instance.
    pub prediction: f64,
    /// Expected output over the background (SHAP) or at the baseline (IG);
    /// the intercept for glass linear models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_value: Option<f64>,
    pub features: Vec<AttributedFeature>,
}

impl FeatureAttribution {
    pub fn scores(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.score).collect()
    }

    pub fn total(&self) -> f64 {
        self.features.iter().map(|f| f.score).sum()
    }

    pub(crate) fn build(
        explainer: &str,
        pipe: &Pipeline,
        instance: &Row,
        output: usize,
        prediction: f64,
        base_value: Option<f64>,
        scores: Vec<f64>,
    ) -> Self {
        let features = scores
            .into_iter()
            .enumerate()
            .map(|(p, score)| AttributedFeature {
                name: pipe.feature_column(p).name.clone(),
                value: instance[pipe.source_index(p)].display(),
                score,
            })
            .collect();
        Self {
            explainer: explainer.to_string(),
            output_index: output,
            output_label: pipe.model().output_label(output),
            prediction,
            base_value,
            features,
        }
    }
}

/// Sums encoded-slot scores into per-feature scores.
pub(crate) fn aggregate_slots(pipe: &Pipeline, slot_scores: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pipe.n_features()];
    for (slot, s) in pipe.transform().layout().iter().zip(slot_scores) {
        out[slot.feature] += s;
    }
    out
}

/// Resolves the explained output: an explicit index, else the top class.
pub(crate) fn resolve_output(pipe: &Pipeline, prediction: &[f64], requested: Option<usize>) -> crate::Result<usize> {
    match requested {
        Some(k) if k >= prediction.len() => Err(crate::Error::InvalidArgument(format!(
            "output index {k} out of range for {} outputs",
            prediction.len()
        ))),
        Some(k) => Ok(k),
        None => Ok(pipe.default_output(prediction)),
    }
}
