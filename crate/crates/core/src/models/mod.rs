//! The black-box prediction contract and the built-in models.
//!
//! Every explainer talks to a model through [`ModelHandle`], which only
//! promises a batched `predict` (plus an input gradient when the underlying
//! model is differentiable). Built-in models additionally expose their
//! structure for glass-box explanations.

mod detector;
mod external;
mod linear;
mod mlp;
mod tree;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub use detector::{fit_detector, Detection, ThresholdDetector};
pub use external::{spawn_external, ExternalModel};
pub use linear::LinearModel;
pub use mlp::MlpModel;
pub use tree::{TreeModel, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Classification,
    Regression,
    AnomalyScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Postprocess {
    #[default]
    None,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capabilities {
    pub differentiable: bool,
    pub glass_linear: bool,
    pub glass_tree: bool,
}

/// A model that maps a numeric matrix to raw outputs.
///
/// Implementations must be row-wise: the output for a row never depends on
/// the other rows in the batch.
pub trait Model: Send + Sync + fmt::Debug {
    /// Expected input width, if known.
    fn n_inputs(&self) -> Option<usize>;

    fn n_outputs(&self) -> usize;

    fn predict_raw(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;

    /// Jacobian of the raw outputs at `x`, one row per output.
    fn jacobian_raw(&self, _x: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn differentiable(&self) -> bool {
        false
    }

    fn as_linear(&self) -> Option<&LinearModel> {
        None
    }

    fn as_tree(&self) -> Option<&TreeModel> {
        None
    }

    /// Serializable description, for built-in models.
    fn to_spec(&self) -> Option<ModelSpec> {
        None
    }
}

/// Shared, cheaply clonable handle on a model plus its task metadata.
#[derive(Debug, Clone)]
pub struct ModelHandle {
    model: Arc<dyn Model>,
    task: Task,
    postprocess: Postprocess,
    labels: Vec<String>,
    warnings: Vec<String>,
}

impl ModelHandle {
    pub fn new(model: Arc<dyn Model>, task: Task, postprocess: Postprocess) -> Self {
        Self {
            model,
            task,
            postprocess,
            labels: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warnings.push(warning.into());
        self
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn postprocess(&self) -> Postprocess {
        self.postprocess
    }

    pub fn n_outputs(&self) -> usize {
        self.model.n_outputs()
    }

    pub fn n_inputs(&self) -> Option<usize> {
        self.model.n_inputs()
    }

    /// Output names: class labels when known, otherwise `output_<k>`.
    pub fn output_label(&self, k: usize) -> String {
        self.labels
            .get(k)
            .cloned()
            .unwrap_or_else(|| format!("output_{k}"))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn model(&self) -> &dyn Model {
        self.model.as_ref()
    }

    pub fn capabilities(&self) -> Capabilities {
        Capabilities {
            differentiable: self.model.differentiable(),
            glass_linear: self.model.as_linear().is_some(),
            glass_tree: self.model.as_tree().is_some(),
        }
    }

    fn check_width(&self, width: usize) -> Result<()> {
        match self.model.n_inputs() {
            Some(expected) if expected != width => Err(Error::Width {
                expected,
                actual: width,
            }),
            _ => Ok(()),
        }
    }

    /// Batched prediction; applies the softmax post-processing if configured.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if x.is_empty() {
            return Ok(Vec::new());
        }
        for row in x {
            self.check_width(row.len())?;
        }
        let mut out = self.model.predict_raw(x)?;
        let k = self.model.n_outputs();
        if out.len() != x.len() || out.iter().any(|r| r.len() != k) {
            return Err(Error::Model(format!(
                "model returned a malformed output matrix for {} rows",
                x.len()
            )));
        }
        if self.postprocess == Postprocess::Softmax {
            out.iter_mut().for_each(|r| stats::softmax_in_place(r));
        }
        Ok(out)
    }

    /// Gradient of (post-processed) output `k` with respect to the input.
    pub fn gradient(&self, x: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_width(x.len())?;
        if k >= self.n_outputs() {
            return Err(Error::InvalidArgument(format!("output index {k} out of range")));
        }
        let jac = self.model.jacobian_raw(x).ok_or(Error::NotDifferentiable)?;
        match self.postprocess {
            Postprocess::None => Ok(jac[k].clone()),
            Postprocess::Softmax => {
                let mut p = self.model.predict_raw(&[x.to_vec()])?.remove(0);
                stats::softmax_in_place(&mut p);
                let d = x.len();
                let mut mixed = vec![0.0; d];
                for (pj, row) in p.iter().zip(&jac) {
                    for (m, g) in mixed.iter_mut().zip(row) {
                        *m += pj * g;
                    }
                }
                Ok((0..d).map(|i| p[k] * (jac[k][i] - mixed[i])).collect())
            }
        }
    }

    pub fn to_spec(&self) -> Option<ModelSpec> {
        self.model.to_spec()
    }
}

/// Persisted form of a built-in model: `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum ModelSpec {
    Linear(LinearModel),
    Logistic(LinearModel),
    Tree(TreeModel),
    Mlp(MlpModel),
}

impl ModelSpec {
    pub fn into_handle(self) -> ModelHandle {
        match self {
            ModelSpec::Linear(m) => {
                ModelHandle::new(Arc::new(m), Task::Regression, Postprocess::None)
            }
            ModelSpec::Logistic(m) => ModelHandle::new(
                Arc::new(LogisticWrapper(m)),
                Task::Classification,
                Postprocess::Softmax,
            ),
            ModelSpec::Tree(m) => {
                let task = m.task;
                ModelHandle::new(Arc::new(m), task, Postprocess::None)
            }
            ModelSpec::Mlp(m) => {
                let task = m.task;
                let post = if task == Task::Classification {
                    Postprocess::Softmax
                } else {
                    Postprocess::None
                };
                ModelHandle::new(Arc::new(m), task, post)
            }
        }
    }
}

/// A linear model whose outputs are class logits.
#[derive(Debug, Clone)]
struct LogisticWrapper(LinearModel);

impl Model for LogisticWrapper {
    fn n_inputs(&self) -> Option<usize> {
        self.0.n_inputs()
    }
    fn n_outputs(&self) -> usize {
        self.0.n_outputs()
    }
    fn predict_raw(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.0.predict_raw(x)
    }
    fn jacobian_raw(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.0.jacobian_raw(x)
    }
    fn differentiable(&self) -> bool {
        true
    }
    fn as_linear(&self) -> Option<&LinearModel> {
        Some(&self.0)
    }
    fn to_spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Logistic(self.0.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinKind {
    Linear,
    Logistic,
    Tree,
    Mlp,
}

impl std::str::FromStr for BuiltinKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "logistic" => Ok(Self::Logistic),
            "tree" => Ok(Self::Tree),
            "mlp" => Ok(Self::Mlp),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind `{other}` (expected linear, logistic, tree, mlp)"
            ))),
        }
    }
}

/// Training targets: class indices or real values.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes { labels: Vec<usize>, names: Vec<String> },
    Values(Vec<f64>),
}

impl Targets {
    fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Values(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub learning_rate: f64,
    pub l2: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 2000,
            tol: 1e-6,
            learning_rate: 0.05,
            l2: 1e-4,
            max_depth: 6,
            min_samples_split: 2,
            hidden: vec![16],
        }
    }
}

/// Trains a built-in model. Deterministic given `config.seed`.
///
/// Classification targets with a single observed class produce a constant
/// single-leaf tree predicting that class with probability 1; the handle
/// carries a warning.
pub fn train_builtin(
    kind: BuiltinKind,
    x: &[Vec<f64>],
    targets: &Targets,
    config: &TrainConfig,
) -> Result<ModelHandle> {
    if x.is_empty() {
        return Err(Error::Data("no training rows".into()));
    }
    if targets.len() != x.len() {
        return Err(Error::Data(format!(
            "{} training rows but {} targets",
            x.len(),
            targets.len()
        )));
    }
    let d = x[0].len();
    if let Some(r) = x.iter().position(|r| r.len() != d) {
        return Err(Error::Width {
            expected: d,
            actual: x[r].len(),
        });
    }
    if let Targets::Classes { labels, names } = targets {
        let k = names.len().max(1);
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Data(format!("class index {bad} out of range")));
        }
        let first = labels[0];
        if labels.iter().all(|&l| l == first) {
            let tree = TreeModel::constant_class(d, k, first);
            return Ok(ModelSpec::Tree(tree)
                .into_handle()
                .with_labels(names.clone())
                .with_warning(format!(
                    "degenerate targets: only class `{}` observed; constant model",
                    names.get(first).cloned().unwrap_or_default()
                )));
        }
    }
    let spec = match (kind, targets) {
        (BuiltinKind::Linear, Targets::Values(y)) => ModelSpec::Linear(LinearModel::fit_least_squares(x, y)?),
        (BuiltinKind::Linear, Targets::Classes { .. }) => {
            return Err(Error::InvalidArgument(
                "linear regression needs a continuous target; use `logistic`".into(),
            ))
        }
        (BuiltinKind::Logistic, Targets::Classes { labels, names }) => {
            ModelSpec::Logistic(LinearModel::fit_logistic(x, labels, names.len(), config))
        }
        (BuiltinKind::Logistic, Targets::Values(_)) => {
            return Err(Error::InvalidArgument(
                "logistic regression needs a categorical target".into(),
            ))
        }
        (BuiltinKind::Tree, t) => ModelSpec::Tree(TreeModel::fit(x, t, config)),
        (BuiltinKind::Mlp, t) => ModelSpec::Mlp(MlpModel::fit(x, t, config)),
    };
    let handle = spec.into_handle();
    Ok(match targets {
        Targets::Classes { names, .. } => handle.with_labels(names.clone()),
        Targets::Values(_) => handle,
    })
}

/// Wraps an arbitrary row-wise closure as a black-box model. Handy for
/// synthetic models and tests.
pub struct FnModel<F> {
    n_inputs: Option<usize>,
    n_outputs: usize,
    f: F,
}

impl<F> fmt::Debug for FnModel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("n_inputs", &self.n_inputs)
            .field("n_outputs", &self.n_outputs)
            .finish()
    }
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    pub fn new(n_inputs: Option<usize>, n_outputs: usize, f: F) -> Self {
        Self {
            n_inputs,
            n_outputs,
            f,
        }
    }

    pub fn handle(self, task: Task) -> ModelHandle {
        ModelHandle::new(Arc::new(self), task, Postprocess::None)
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    fn n_inputs(&self) -> Option<usize> {
        self.n_inputs
    }
    fn n_outputs(&self) -> usize {
        self.n_outputs
    }
    fn predict_raw(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(x.iter().map(|r| (self.f)(r)).collect())
    }
}
