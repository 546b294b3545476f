use serde::{Deserialize, Serialize};

use super::{aggregate_slots, resolve_output, FeatureAttribution};
use crate::data::Row;
use crate::error::{Error, Result};
use crate::models::TreeNode;
use crate::pipeline::Pipeline;
use crate::preprocessing::ColumnStats;

/// Linear contributions `w_k * x` per encoded slot, summed per feature.
///
/// For logistic models the contributions are on the logit scale, so
/// `prediction` is the raw linear output and `base_value` the intercept.
pub fn glass_linear_explain(pipe: &Pipeline, instance: &Row, output: Option<usize>) -> Result<FeatureAttribution> {
    let lin = pipe.model().model().as_linear().ok_or_else(|| Error::MissingCapability {
        explainer: "glass-linear".into(),
        capability: "glass-linear".into(),
    })?;
    let x = pipe.transform().transform_row(instance);
    let pred = pipe.model().predict(std::slice::from_ref(&x))?.remove(0);
    let k = resolve_output(pipe, &pred, output)?;
    let slots: Vec<f64> = lin.weights()[k].iter().zip(&x).map(|(w, v)| w * v).collect();
    let scores = aggregate_slots(pipe, &slots);
    Ok(FeatureAttribution::build(
        "glass-linear",
        pipe,
        instance,
        k,
        lin.output(k, &x),
        Some(lin.bias()[k]),
        scores,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    /// Source feature name.
    pub feature: String,
    /// Encoded input column the split reads (e.g. `color=red`).
    pub input: String,
    /// Threshold in encoded space.
    pub threshold: f64,
    /// Threshold mapped back to raw units for affinely encoded features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_threshold: Option<f64>,
    /// Encoded value of the instance at this split.
    pub value: f64,
    pub branch: Branch,
    /// Share of training rows that reached this node.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPath {
    pub steps: Vec<PathStep>,
    pub leaf_value: Vec<f64>,
    pub leaf_fraction: f64,
    pub output_labels: Vec<String>,
}

impl DecisionPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// The root-to-leaf path a tree model takes for the instance.
pub fn glass_tree_explain(pipe: &Pipeline, instance: &Row) -> Result<DecisionPath> {
    let tree = pipe.model().model().as_tree().ok_or_else(|| Error::MissingCapability {
        explainer: "glass-tree".into(),
        capability: "glass-tree".into(),
    })?;
    let x = pipe.transform().transform_row(instance);
    let nodes = tree.nodes();
    let root = nodes[0].n_samples();
    let fraction = |i: usize| {
        if root == 0 {
            1.0
        } else {
            nodes[i].n_samples() as f64 / root as f64
        }
    };
    let path = tree.path(&x);
    let layout = pipe.transform().layout();
    let mut steps = Vec::with_capacity(path.len() - 1);
    for w in path.windows(2) {
        let TreeNode::Split { feature, threshold, left, .. } = &nodes[w[0]] else {
            unreachable!("interior path nodes are splits")
        };
        let slot = &layout[*feature];
        let col = &pipe.transform().columns()[slot.feature];
        let raw_threshold = match col.stats {
            ColumnStats::Identity => Some(*threshold),
            ColumnStats::Standardize { mean, std } => Some(threshold * std + mean),
            ColumnStats::MinMax { min, max } => Some(threshold * (max - min) + min),
            _ => None,
        };
        steps.push(PathStep {
            feature: col.name.clone(),
            input: slot.name.clone(),
            threshold: *threshold,
            raw_threshold,
            value: x[*feature],
            branch: if w[1] == *left { Branch::Left } else { Branch::Right },
            fraction: fraction(w[0]),
        });
    }
    let leaf = *path.last().unwrap();
    let TreeNode::Leaf { value, .. } = &nodes[leaf] else {
        unreachable!("paths end at a leaf")
    };
    Ok(DecisionPath {
        steps,
        leaf_value: value.clone(),
        leaf_fraction: fraction(leaf),
        output_labels: (0..value.len()).map(|k| pipe.model().output_label(k)).collect(),
    })
}
