//! Name-based explainer registry and batch explanation runs.
//!
//! An [`ExplainerSet`] ties resolved registry entries to one model
//! pipeline, the training data, per-explainer parameters and a seed.
//! Local entries run once per instance, global and data entries once per
//! set. A failing (entry, instance) pair is stored as an error record and
//! the run continues.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::counterfactual::{mace_cf, wachter_ce, CfProblem, CounterfactualResult, MaceConfig, WachterConfig};
use crate::data::{Row, TabularBatch, TimeseriesWindow};
use crate::error::{Error, Result};
use crate::global::{self, AleResult, MorrisResult, PdpResult};
use crate::insight::{self, CorrelationResult, FeatureSelectionResult, ImbalanceResult};
use crate::local::{self, DecisionPath, FeatureAttribution, IgConfig, LimeConfig, ShapConfig};
use crate::models::{ModelHandle, ThresholdDetector};
use crate::pipeline::Pipeline;
use crate::timeseries::{self, Reference, TimeseriesAttribution, TimeseriesCf, TsCfConfig, TsShapConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Local,
    Global,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Requirement {
    /// Any model behind a pipeline.
    BlackBox,
    Differentiable,
    GlassLinear,
    GlassTree,
    Detector,
    /// Training data only.
    None,
}

impl Requirement {
    fn name(self) -> &'static str {
        match self {
            Requirement::BlackBox => "a model",
            Requirement::Differentiable => "differentiable",
            Requirement::GlassLinear => "glass-linear",
            Requirement::GlassTree => "glass-tree",
            Requirement::Detector => "an anomaly detector",
            Requirement::None => "training data",
        }
    }
}

/// One explainer result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum Explanation {
    Attribution(FeatureAttribution),
    DecisionPath(DecisionPath),
    Counterfactual(CounterfactualResult),
    Pdp(Vec<PdpResult>),
    Ale(Vec<AleResult>),
    Morris(MorrisResult),
    Correlation(CorrelationResult),
    Imbalance(ImbalanceResult),
    FeatureSelection(FeatureSelectionResult),
    TsAttribution(TimeseriesAttribution),
    TsCounterfactual(TimeseriesCf),
}

impl Explanation {
    /// True for counterfactual searches that came back empty-handed.
    pub fn is_not_found(&self) -> bool {
        match self {
            Explanation::Counterfactual(r) => !r.found,
            Explanation::TsCounterfactual(r) => !r.valid,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Ok { result: Explanation },
    Error { kind: String, message: String },
}

impl Outcome {
    fn from_result(r: Result<Explanation>) -> Self {
        match r {
            Ok(result) => Outcome::Ok { result },
            Err(e) => Outcome::Error {
                kind: format!("{:?}", e.category()).to_lowercase(),
                message: e.to_string(),
            },
        }
    }

    pub fn ok(&self) -> Option<&Explanation> {
        match self {
            Outcome::Ok { result } => Some(result),
            Outcome::Error { .. } => None,
        }
    }
}

/// An explained instance as given by the caller (before any transform).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRecord {
    Row(Row),
    Window(TimeseriesWindow),
}

/// What a set explains locally.
#[derive(Debug, Clone, Copy)]
pub enum Instance<'a> {
    Row(&'a Row),
    Window(&'a TimeseriesWindow),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub version: String,
    /// Requested explainers in registry order.
    pub explainers: Vec<String>,
    /// Feature columns of the instances (source schema order).
    #[serde(default)]
    pub columns: Vec<String>,
    /// Model output labels.
    #[serde(default)]
    pub outputs: Vec<String>,
    /// Wall-clock milliseconds per explainer; empty unless requested so
    /// that repeated runs serialize identically.
    #[serde(default)]
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub instances: Vec<InstanceRecord>,
    pub local: BTreeMap<String, Vec<Outcome>>,
    pub global: BTreeMap<String, Outcome>,
    pub metadata: RunMetadata,
}

impl ExplanationBundle {
    /// Adds the other bundle's sections; instances are kept if this bundle
    /// has none.
    pub fn merge(&mut self, other: ExplanationBundle) {
        if self.instances.is_empty() {
            self.instances = other.instances;
        }
        self.local.extend(other.local);
        self.global.extend(other.global);
        self.metadata.timings_ms.extend(other.metadata.timings_ms);
    }

    pub fn has_not_found(&self) -> bool {
        self.local
            .values()
            .flatten()
            .chain(self.global.values())
            .filter_map(Outcome::ok)
            .any(Explanation::is_not_found)
    }

    pub fn has_errors(&self) -> bool {
        self.local
            .values()
            .flatten()
            .chain(self.global.values())
            .any(|o| matches!(o, Outcome::Error { .. }))
    }
}

/// Everything an explainer may read.
pub struct Context<'a> {
    pub pipeline: Option<&'a Pipeline>,
    pub train: Option<&'a TabularBatch>,
    pub detector: Option<&'a ThresholdDetector>,
    /// This explainer's entry of the params document (`null` if absent).
    pub params: &'a Value,
}

impl Context<'_> {
    pub fn pipeline(&self) -> Result<&Pipeline> {
        self.pipeline
            .ok_or_else(|| Error::Precondition("this explainer needs a model".into()))
    }

    pub fn train(&self) -> Result<&TabularBatch> {
        self.train
            .ok_or_else(|| Error::Precondition("this explainer needs training data".into()))
    }

    pub fn detector(&self) -> Result<&ThresholdDetector> {
        self.detector
            .ok_or_else(|| Error::Precondition("this explainer needs a detector".into()))
    }
}

pub fn parse_params<T: DeserializeOwned + Default>(params: &Value) -> Result<T> {
    if params.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(params.clone()).map_err(|e| Error::InvalidArgument(format!("bad parameters: {e}")))
}

pub trait Explainer: Send + Sync {
    /// Checks the parameters before anything runs.
    fn validate(&self, _params: &Value) -> Result<()> {
        Ok(())
    }

    fn explain_local(&self, _ctx: &Context, _instance: Instance, _seed: u64) -> Result<Explanation> {
        Err(Error::InvalidArgument("not a local explainer".into()))
    }

    fn explain_global(&self, _ctx: &Context, _seed: u64) -> Result<Explanation> {
        Err(Error::InvalidArgument("not a global explainer".into()))
    }
}

#[derive(Clone)]
pub struct ExplainerEntry {
    pub name: String,
    pub scope: Scope,
    pub requirement: Requirement,
    pub runner: Arc<dyn Explainer>,
}

impl std::fmt::Debug for ExplainerEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExplainerEntry")
            .field("name", &self.name)
            .field("scope", &self.scope)
            .field("requirement", &self.requirement)
            .finish()
    }
}

/// What the caller can provide; checked against entry requirements.
#[derive(Debug, Clone, Copy, Default)]
pub struct Available {
    pub model: Option<crate::models::Capabilities>,
    pub detector: bool,
    pub train: bool,
}

impl Available {
    fn satisfies(&self, r: Requirement) -> bool {
        match r {
            Requirement::BlackBox => self.model.is_some(),
            Requirement::Differentiable => self.model.is_some_and(|c| c.differentiable),
            Requirement::GlassLinear => self.model.is_some_and(|c| c.glass_linear),
            Requirement::GlassTree => self.model.is_some_and(|c| c.glass_tree),
            Requirement::Detector => self.detector,
            Requirement::None => self.train,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Registry {
    entries: Vec<ExplainerEntry>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// The built-in explainers in canonical order.
    pub fn builtin() -> Self {
        use Requirement as R;
        use Scope as S;
        let mut r = Self::empty();
        let builtins: Vec<(&str, Scope, Requirement, Arc<dyn Explainer>)> = vec![
            ("correlation", S::Data, R::None, Arc::new(Correlation)),
            ("imbalance", S::Data, R::None, Arc::new(Imbalance)),
            ("feature-selection", S::Data, R::None, Arc::new(FeatureSelection)),
            ("pdp", S::Global, R::BlackBox, Arc::new(Pdp)),
            ("ale", S::Global, R::BlackBox, Arc::new(Ale)),
            ("morris", S::Global, R::BlackBox, Arc::new(Morris)),
            ("lime", S::Local, R::BlackBox, Arc::new(Lime)),
            ("shap", S::Local, R::BlackBox, Arc::new(Shap)),
            ("ig", S::Local, R::Differentiable, Arc::new(Ig)),
            ("ce", S::Local, R::BlackBox, Arc::new(Wachter)),
            ("mace-greedy", S::Local, R::BlackBox, Arc::new(Mace)),
            ("glass-linear", S::Local, R::GlassLinear, Arc::new(GlassLinear)),
            ("glass-tree", S::Local, R::GlassTree, Arc::new(GlassTree)),
            ("ts-shap", S::Local, R::Detector, Arc::new(TsShap)),
            ("ts-ce", S::Local, R::Detector, Arc::new(TsCe)),
        ];
        for (name, scope, requirement, runner) in builtins {
            r.register(ExplainerEntry {
                name: name.into(),
                scope,
                requirement,
                runner,
            })
            .expect("built-in names are unique");
        }
        r
    }

    pub fn register(&mut self, entry: ExplainerEntry) -> Result<()> {
        if self.get(&entry.name).is_some() {
            return Err(Error::InvalidArgument(format!("explainer `{}` already registered", entry.name)));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[ExplainerEntry] {
        &self.entries
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ExplainerEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Looks names up and checks requirements; entries come back in
    /// registry order, duplicates removed.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S], available: &Available) -> Result<Vec<ExplainerEntry>> {
        for n in names {
            let n = n.as_ref();
            let entry = self.get(n).ok_or_else(|| Error::UnknownExplainer {
                name: n.to_string(),
                valid: self.names(),
            })?;
            if !available.satisfies(entry.requirement) {
                return Err(Error::MissingCapability {
                    explainer: entry.name.clone(),
                    capability: entry.requirement.name().into(),
                });
            }
        }
        Ok(self
            .entries
            .iter()
            .filter(|e| names.iter().any(|n| n.as_ref() == e.name))
            .cloned()
            .collect())
    }
}

/// Inputs for building an [`ExplainerSet`].
#[derive(Debug, Clone, Default)]
pub struct SetInputs {
    pub pipeline: Option<Pipeline>,
    pub train: Option<TabularBatch>,
    pub detector: Option<ThresholdDetector>,
    /// Object keyed by explainer name.
    pub params: Value,
    pub seed: u64,
    pub record_timings: bool,
}

pub struct ExplainerSet {
    entries: Vec<ExplainerEntry>,
    inputs: SetInputs,
}

static NULL: Value = Value::Null;

impl ExplainerSet {
    pub fn new<S: AsRef<str>>(registry: &Registry, names: &[S], inputs: SetInputs) -> Result<Self> {
        if !(inputs.params.is_null() || inputs.params.is_object()) {
            return Err(Error::InvalidArgument("params must be a JSON object keyed by explainer".into()));
        }
        let available = Available {
            model: inputs.pipeline.as_ref().map(|p| p.model().capabilities()),
            detector: inputs.detector.is_some(),
            train: inputs.train.is_some(),
        };
        let entries = registry.resolve(names, &available)?;
        let set = Self { entries, inputs };
        for e in &set.entries {
            e.runner
                .validate(set.params_for(&e.name))
                .map_err(|err| Error::InvalidArgument(format!("{}: {err}", e.name)))?;
        }
        Ok(set)
    }

    pub fn entries(&self) -> &[ExplainerEntry] {
        &self.entries
    }

    pub fn pipeline(&self) -> Option<&Pipeline> {
        self.inputs.pipeline.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.inputs.seed
    }

    fn params_for(&self, name: &str) -> &Value {
        self.inputs.params.get(name).unwrap_or(&NULL)
    }

    fn context(&self, name: &str) -> Context<'_> {
        Context {
            pipeline: self.inputs.pipeline.as_ref(),
            train: self.inputs.train.as_ref(),
            detector: self.inputs.detector.as_ref(),
            params: self.params_for(name),
        }
    }

    fn metadata(&self) -> RunMetadata {
        let pipe = self.inputs.pipeline.as_ref();
        RunMetadata {
            seed: self.inputs.seed,
            version: VERSION.into(),
            explainers: self.entries.iter().map(|e| e.name.clone()).collect(),
            columns: pipe.map(|p| p.schema().columns().iter().map(|c| c.name.clone()).collect()).unwrap_or_default(),
            outputs: pipe.map(|p| outputs(p.model())).unwrap_or_default(),
            timings_ms: BTreeMap::new(),
        }
    }

    fn timed<T>(&self, meta: &mut RunMetadata, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.inputs.record_timings {
            meta.timings_ms.insert(name.into(), start.elapsed().as_secs_f64() * 1e3);
        }
        out
    }

    /// Runs every local entry on every row of `instances`.
    pub fn explain_local(&self, instances: &TabularBatch) -> Result<ExplanationBundle> {
        if let Some(p) = &self.inputs.pipeline {
            p.transform().check_schema(instances.schema())?;
        }
        let rows: Vec<Instance> = instances.rows().iter().map(Instance::Row).collect();
        let mut bundle = self.run_local(&rows)?;
        bundle.instances = instances.rows().iter().cloned().map(InstanceRecord::Row).collect();
        Ok(bundle)
    }

    /// Runs every local entry on each time-series window.
    pub fn explain_windows(&self, windows: &[TimeseriesWindow]) -> Result<ExplanationBundle> {
        let items: Vec<Instance> = windows.iter().map(Instance::Window).collect();
        let mut bundle = self.run_local(&items)?;
        bundle.instances = windows.iter().cloned().map(InstanceRecord::Window).collect();
        Ok(bundle)
    }

    fn run_local(&self, items: &[Instance]) -> Result<ExplanationBundle> {
        let mut meta = self.metadata();
        let mut local = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.scope == Scope::Local) {
            let ctx = self.context(&e.name);
            let outcomes = self.timed(&mut meta, &e.name, || {
                items
                    .par_iter()
                    .enumerate()
                    .map(|(i, inst)| {
                        let seed = self.inputs.seed.wrapping_add(i as u64);
                        Outcome::from_result(e.runner.explain_local(&ctx, *inst, seed))
                    })
                    .collect::<Vec<_>>()
            });
            local.insert(e.name.clone(), outcomes);
        }
        Ok(ExplanationBundle {
            instances: Vec::new(),
            local,
            global: BTreeMap::new(),
            metadata: meta,
        })
    }

    /// Runs every global- and data-scope entry once.
    pub fn explain_global(&self) -> ExplanationBundle {
        let mut meta = self.metadata();
        let mut global = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.scope != Scope::Local) {
            let ctx = self.context(&e.name);
            let outcome = self.timed(&mut meta, &e.name, || {
                Outcome::from_result(e.runner.explain_global(&ctx, self.inputs.seed))
            });
            global.insert(e.name.clone(), outcome);
        }
        ExplanationBundle {
            instances: Vec::new(),
            local: BTreeMap::new(),
            global,
            metadata: meta,
        }
    }

    /// Local entries on `instances` plus all global and data entries.
    pub fn explain(&self, instances: Option<&TabularBatch>) -> Result<ExplanationBundle> {
        let mut bundle = match instances {
            Some(b) => self.explain_local(b)?,
            None => self.run_local(&[])?,
        };
        bundle.merge(self.explain_global());
        Ok(bundle)
    }
}

fn outputs(h: &ModelHandle) -> Vec<String> {
    (0..h.n_outputs()).map(|k| h.output_label(k)).collect()
}

fn row<'a>(instance: Instance<'a>) -> Result<&'a Row> {
    match instance {
        Instance::Row(r) => Ok(r),
        Instance::Window(_) => Err(Error::InvalidArgument("this explainer takes tabular rows".into())),
    }
}

fn window(instance: Instance<'_>) -> Result<&TimeseriesWindow> {
    match instance {
        Instance::Window(w) => Ok(w),
        Instance::Row(_) => Err(Error::InvalidArgument("this explainer takes time-series windows".into())),
    }
}

/// A class given by index or by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassRef {
    Index(usize),
    Label(String),
}

impl ClassRef {
    pub fn resolve(&self, h: &ModelHandle) -> Result<usize> {
        match self {
            ClassRef::Index(k) if *k < h.n_outputs() => Ok(*k),
            ClassRef::Index(k) => Err(Error::InvalidArgument(format!("class {k} out of range"))),
            ClassRef::Label(l) => (0..h.n_outputs())
                .find(|&k| h.output_label(k) == *l)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown class label `{l}`"))),
        }
    }
}

struct Correlation;

impl Explainer for Correlation {
    fn explain_global(&self, ctx: &Context, _seed: u64) -> Result<Explanation> {
        insight::correlation_matrix(ctx.train()?).map(Explanation::Correlation)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ImbalanceParams {
    target: Option<String>,
    by: Option<String>,
}

fn target_name(train: &TabularBatch, given: Option<&String>) -> Result<String> {
    given
        .cloned()
        .or_else(|| train.schema().target().map(str::to_string))
        .ok_or_else(|| Error::InvalidArgument("no target column given or declared in the schema".into()))
}

struct Imbalance;

impl Explainer for Imbalance {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<ImbalanceParams>(params).map(drop)
    }

    fn explain_global(&self, ctx: &Context, _seed: u64) -> Result<Explanation> {
        let p: ImbalanceParams = parse_params(ctx.params)?;
        let train = ctx.train()?;
        let target = target_name(train, p.target.as_ref())?;
        insight::class_imbalance(train, &target, p.by.as_deref()).map(Explanation::Imbalance)
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SelectionParams {
    target: Option<String>,
    k: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self { target: None, k: 5 }
    }
}

struct FeatureSelection;

impl Explainer for FeatureSelection {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<SelectionParams>(params).map(drop)
    }

    fn explain_global(&self, ctx: &Context, _seed: u64) -> Result<Explanation> {
        let p: SelectionParams = parse_params(ctx.params)?;
        let train = ctx.train()?;
        let target = target_name(train, p.target.as_ref())?;
        insight::select_features(train, &target, p.k).map(Explanation::FeatureSelection)
    }
}

fn features_or_all(pipe: &Pipeline, given: Option<Vec<String>>, keep: impl Fn(usize) -> bool) -> Vec<String> {
    given.unwrap_or_else(|| {
        (0..pipe.n_features())
            .filter(|&p| keep(p))
            .map(|p| pipe.feature_column(p).name.clone())
            .collect()
    })
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PdpParams {
    features: Option<Vec<String>>,
    grid_size: usize,
    ice_rows: usize,
}

impl Default for PdpParams {
    fn default() -> Self {
        Self {
            features: None,
            grid_size: global::DEFAULT_GRID_SIZE,
            ice_rows: 0,
        }
    }
}

struct Pdp;

impl Explainer for Pdp {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<PdpParams>(params).map(drop)
    }

    fn explain_global(&self, ctx: &Context, _seed: u64) -> Result<Explanation> {
        let p: PdpParams = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let train = ctx.train()?;
        features_or_all(pipe, p.features, |_| true)
            .iter()
            .map(|f| global::pdp(pipe, train, f, p.grid_size, p.ice_rows))
            .collect::<Result<_>>()
            .map(Explanation::Pdp)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AleParams {
    features: Option<Vec<String>>,
    /// When unset, each feature gets the default bin count or its number
    /// of distinct values, whichever is smaller.
    n_bins: Option<usize>,
}

struct Ale;

impl Explainer for Ale {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<AleParams>(params).map(drop)
    }

    fn explain_global(&self, ctx: &Context, _seed: u64) -> Result<Explanation> {
        let p: AleParams = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let train = ctx.train()?;
        let continuous = |i: usize| pipe.feature_column(i).kind == crate::data::ColumnKind::Continuous;
        features_or_all(pipe, p.features, continuous)
            .iter()
            .map(|f| {
                let bins = match p.n_bins {
                    Some(b) => b,
                    None => {
                        let mut v = train.numeric_column(pipe.source_index(pipe.feature_position(f)?));
                        v.sort_by(f64::total_cmp);
                        v.dedup();
                        global::DEFAULT_ALE_BINS.min(v.len()).max(1)
                    }
                };
                global::ale(pipe, train, f, bins)
            })
            .collect::<Result<_>>()
            .map(Explanation::Ale)
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MorrisParams {
    r: usize,
    p: usize,
}

impl Default for MorrisParams {
    fn default() -> Self {
        Self {
            r: global::DEFAULT_MORRIS_TRAJECTORIES,
            p: global::DEFAULT_MORRIS_LEVELS,
        }
    }
}

struct Morris;

impl Explainer for Morris {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<MorrisParams>(params).map(drop)
    }

    fn explain_global(&self, ctx: &Context, seed: u64) -> Result<Explanation> {
        let p: MorrisParams = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let bounds = global::default_bounds(pipe, ctx.train()?)?;
        global::morris(pipe, &bounds, p.r, p.p, seed).map(Explanation::Morris)
    }
}

fn output_index(pipe: &Pipeline, class: Option<&ClassRef>) -> Result<Option<usize>> {
    class.map(|c| c.resolve(pipe.model())).transpose()
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct LocalParams<C> {
    class: Option<ClassRef>,
    #[serde(flatten)]
    config: C,
}

struct Lime;

impl Explainer for Lime {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<LocalParams<LimeConfig>>(params).map(drop)
    }

    fn explain_local(&self, ctx: &Context, instance: Instance, seed: u64) -> Result<Explanation> {
        let p: LocalParams<LimeConfig> = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let mut cfg = p.config;
        cfg.output = cfg.output.or(output_index(pipe, p.class.as_ref())?);
        local::lime_explain(pipe, ctx.train()?, row(instance)?, &cfg, seed).map(Explanation::Attribution)
    }
}

struct Shap;

impl Explainer for Shap {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<LocalParams<ShapConfig>>(params).map(drop)
    }

    fn explain_local(&self, ctx: &Context, instance: Instance, seed: u64) -> Result<Explanation> {
        let p: LocalParams<ShapConfig> = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let mut cfg = p.config;
        cfg.output = cfg.output.or(output_index(pipe, p.class.as_ref())?);
        local::kernel_shap(pipe, ctx.train()?, row(instance)?, &cfg, seed).map(Explanation::Attribution)
    }
}

struct Ig;

impl Explainer for Ig {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<LocalParams<IgConfig>>(params).map(drop)
    }

    fn explain_local(&self, ctx: &Context, instance: Instance, _seed: u64) -> Result<Explanation> {
        let p: LocalParams<IgConfig> = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let mut cfg = p.config;
        cfg.output = cfg.output.or(output_index(pipe, p.class.as_ref())?);
        local::ig_explain(pipe, ctx.train, row(instance)?, &cfg).map(Explanation::Attribution)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct CfParams<C> {
    target: Option<ClassRef>,
    immutable: Vec<String>,
    lambda: Option<f64>,
    margin: Option<f64>,
    #[serde(flatten)]
    config: C,
}

impl<C> CfParams<C> {
    fn problem(&self, pipe: &Pipeline, train: &TabularBatch, instance: &Row) -> Result<CfProblem> {
        let mut problem = CfProblem::new(pipe, train, instance.clone())?
            .with_target(self.target.as_ref().map(|t| t.resolve(pipe.model())).transpose()?)
            .with_immutable(pipe, &self.immutable)?;
        if let Some(l) = self.lambda {
            problem.lambda = l;
        }
        if let Some(m) = self.margin {
            problem.margin = m;
        }
        Ok(problem)
    }
}

struct Wachter;

impl Explainer for Wachter {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<CfParams<WachterConfig>>(params).map(drop)
    }

    fn explain_local(&self, ctx: &Context, instance: Instance, _seed: u64) -> Result<Explanation> {
        let p: CfParams<WachterConfig> = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let problem = p.problem(pipe, ctx.train()?, row(instance)?)?;
        wachter_ce(pipe, &problem, &p.config).map(Explanation::Counterfactual)
    }
}

struct Mace;

impl Explainer for Mace {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<CfParams<MaceConfig>>(params).map(drop)
    }

    fn explain_local(&self, ctx: &Context, instance: Instance, _seed: u64) -> Result<Explanation> {
        let p: CfParams<MaceConfig> = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let train = ctx.train()?;
        let problem = p.problem(pipe, train, row(instance)?)?;
        mace_cf(pipe, train, &problem, &p.config).map(Explanation::Counterfactual)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GlassParams {
    class: Option<ClassRef>,
}

struct GlassLinear;

impl Explainer for GlassLinear {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<GlassParams>(params).map(drop)
    }

    fn explain_local(&self, ctx: &Context, instance: Instance, _seed: u64) -> Result<Explanation> {
        let p: GlassParams = parse_params(ctx.params)?;
        let pipe = ctx.pipeline()?;
        let out = output_index(pipe, p.class.as_ref())?;
        local::glass_linear_explain(pipe, row(instance)?, out).map(Explanation::Attribution)
    }
}

struct GlassTree;

impl Explainer for GlassTree {
    fn explain_local(&self, ctx: &Context, instance: Instance, _seed: u64) -> Result<Explanation> {
        local::glass_tree_explain(ctx.pipeline()?, row(instance)?).map(Explanation::DecisionPath)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct TsParams<C> {
    reference: Option<Reference>,
    #[serde(flatten)]
    config: C,
}

struct TsShap;

impl Explainer for TsShap {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<TsParams<TsShapConfig>>(params).map(drop)
    }

    fn explain_local(&self, ctx: &Context, instance: Instance, seed: u64) -> Result<Explanation> {
        let p: TsParams<TsShapConfig> = parse_params(ctx.params)?;
        timeseries::ts_shap_detector(ctx.detector()?, window(instance)?, p.reference.as_ref(), &p.config, seed)
            .map(Explanation::TsAttribution)
    }
}

struct TsCe;

impl Explainer for TsCe {
    fn validate(&self, params: &Value) -> Result<()> {
        parse_params::<TsParams<TsCfConfig>>(params).map(drop)
    }

    fn explain_local(&self, ctx: &Context, instance: Instance, _seed: u64) -> Result<Explanation> {
        let p: TsParams<TsCfConfig> = parse_params(ctx.params)?;
        timeseries::ts_counterfactual(ctx.detector()?, window(instance)?, p.reference.as_ref(), &p.config)
            .map(Explanation::TsCounterfactual)
    }
}
