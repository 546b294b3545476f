//! `xai`: train built-in models, run explainers and render reports.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or schema error, 4 model or
//! protocol error, 5 a counterfactual search found nothing (output is still
//! written).

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use xai_core::data::{ColumnKind, TabularBatch, TabularSchema};
use xai_core::engine::{ExplainerSet, ExplanationBundle, Outcome, Registry, SetInputs};
use xai_core::models::{fit_detector, spawn_external, train_builtin, BuiltinKind, ModelSpec, Targets, TrainConfig};
use xai_core::pipeline::Pipeline;
use xai_core::preprocessing::{FittedTransform, TransformConfig};
use xai_core::report::{fingerprint, from_json, render_report, to_json, BundleDocument, ReportSpec};
use xai_core::{Error, ErrorCategory, Result};

#[derive(Debug, Parser)]
#[command(name = "xai", version, about = "Explain tabular and time-series models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Data insights (correlation, class imbalance, feature selection).
    Analyze(AnalyzeArgs),
    /// Fit a built-in model and save it with its preprocessing.
    Train(TrainArgs),
    /// Run explainers on a tabular model.
    Explain(ExplainArgs),
    /// Explain a threshold anomaly detector on a time-series window.
    ExplainTs(ExplainTsArgs),
    /// Render a bundle as a self-contained HTML report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON: {"columns": [{"name", "kind"}], "target"}.
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "correlation,imbalance,feature-selection")]
    explainers: String,
    /// Per-explainer parameters: inline JSON object or a file path.
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// linear, logistic, tree or mlp.
    #[arg(long)]
    kind: String,
    #[command(flatten)]
    data: DataArgs,
    /// Target column; defaults to the schema's.
    #[arg(long)]
    target: Option<String>,
    /// Training options and an optional "transform" entry, as JSON.
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// A model file written by `xai train`.
    #[arg(long, conflicts_with = "model_cmd", required_unless_present = "model_cmd")]
    model: Option<PathBuf>,
    /// Command line of a subprocess model speaking the JSON-lines protocol.
    #[arg(long)]
    model_cmd: Option<String>,
    /// Comma-separated explainer names.
    #[arg(long)]
    explainers: String,
    /// Rows to explain; defaults to the first row of --data.
    #[arg(long)]
    instances: Option<PathBuf>,
    #[arg(long)]
    params: Option<String>,
    /// Falls back to $XAI_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Record per-explainer wall-clock timings (makes output run-dependent).
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExplainTsArgs {
    /// Training series CSV (timestamp,value).
    #[arg(long)]
    train: PathBuf,
    /// Window to explain, same format.
    #[arg(long)]
    window: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    kappa: f64,
    #[arg(long, default_value = "ts-shap,ts-ce")]
    explainers: String,
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    bundle: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "Explanation report")]
    title: String,
}

/// What `xai train` writes.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    model: ModelSpec,
    transform: FittedTransform,
    target: String,
    #[serde(default)]
    labels: Vec<String>,
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Usage => 2,
        ErrorCategory::Data | ErrorCategory::Other => 3,
        ErrorCategory::Model => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Train(a) => train(a).map(|()| 0),
        Command::Explain(a) => explain(a),
        Command::ExplainTs(a) => explain_ts(a),
        Command::Report(a) => report(a).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("xai: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}

fn split_names(list: &str) -> Result<Vec<String>> {
    let names: Vec<String> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::InvalidArgument("no explainers given".into()));
    }
    Ok(names)
}

fn resolve_seed(given: Option<u64>) -> Result<u64> {
    if let Some(s) = given {
        return Ok(s);
    }
    match std::env::var("XAI_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| Error::InvalidArgument(format!("XAI_SEED `{v}` is not an integer"))),
        Err(_) => Ok(0),
    }
}

fn load_data(args: &DataArgs) -> Result<TabularBatch> {
    let schema = io::read_schema(&args.schema)?;
    let batch = io::read_table(&args.data, &schema)?;
    if batch.is_empty() {
        return Err(Error::Data(format!("{}: no rows", args.data.display())));
    }
    Ok(batch)
}

/// Prints error records and picks the exit code for a finished run.
fn bundle_status(bundle: &ExplanationBundle) -> u8 {
    let mut worst: Option<u8> = None;
    let locals = bundle.local.iter().flat_map(|(n, v)| v.iter().enumerate().map(move |(i, o)| (format!("{n}[{i}]"), o)));
    let globals = bundle.global.iter().map(|(n, o)| (n.clone(), o));
    for (at, outcome) in locals.chain(globals) {
        if let Outcome::Error { kind, message } = outcome {
            eprintln!("xai: {at}: {message}");
            let code = match kind.as_str() {
                "model" => 4,
                "usage" => 2,
                _ => 3,
            };
            // Model failures outrank data failures, which outrank usage.
            let rank = |c: u8| match c {
                4 => 3,
                3 => 2,
                _ => 1,
            };
            if worst.is_none_or(|w| rank(code) > rank(w)) {
                worst = Some(code);
            }
        }
    }
    if let Some(code) = worst {
        return code;
    }
    if bundle.has_not_found() {
        eprintln!("xai: some counterfactual searches found no valid example");
        return 5;
    }
    0
}

fn write_bundle(bundle: ExplanationBundle, dataset: Option<&TabularBatch>, config: Value, out: Option<&Path>) -> Result<u8> {
    let code = bundle_status(&bundle);
    let doc = BundleDocument::new(bundle, dataset.map(fingerprint), config);
    io::emit(out, &to_json(&doc)?)?;
    Ok(code)
}

fn analyze(args: AnalyzeArgs) -> Result<u8> {
    let names = split_names(&args.explainers)?;
    let params = io::json_arg(args.params.as_deref())?;
    let data = load_data(&args.data)?;
    let inputs = SetInputs { train: Some(data.clone()), params: params.clone(), ..Default::default() };
    let set = ExplainerSet::new(&Registry::builtin(), &names, inputs)?;
    let bundle = set.explain(None)?;
    let config = json!({"command": "analyze", "explainers": names, "params": params});
    write_bundle(bundle, Some(&data), config, args.out.as_deref())
}

fn class_targets(data: &TabularBatch, target: usize) -> Result<Targets> {
    let col = data.schema().column(target);
    match col.kind {
        ColumnKind::Categorical => {
            let labels = data
                .column_cells(target)
                .map(|c| c.as_label().and_then(|l| col.category_index(l)))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Data(format!("target `{}` has missing values", col.name)))?;
            Ok(Targets::Classes { labels, names: col.categories.clone() })
        }
        ColumnKind::Continuous => {
            let values = data
                .column_cells(target)
                .map(|c| c.as_f64())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Data(format!("target `{}` has missing values", col.name)))?;
            Ok(Targets::Values(values))
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct TrainParams {
    transform: Option<TransformConfig>,
    #[serde(flatten)]
    config: TrainConfig,
}

fn train(args: TrainArgs) -> Result<()> {
    let kind: BuiltinKind = args.kind.parse()?;
    let params: TrainParams = serde_json::from_value(io::json_arg(args.params.as_deref())?)
        .map_err(|e| Error::InvalidArgument(format!("bad training parameters: {e}")))?;
    let schema: TabularSchema = io::read_schema(&args.data.schema)?;
    let target = args
        .target
        .or_else(|| schema.target().map(str::to_string))
        .ok_or_else(|| Error::InvalidArgument("no --target given and the schema declares none".into()))?;
    let schema = schema.with_target(Some(target.clone()))?;
    let data = io::read_table(&args.data.data, &schema)?;
    if data.is_empty() {
        return Err(Error::Data(format!("{}: no rows", args.data.data.display())));
    }
    let transform = FittedTransform::fit(&params.transform.unwrap_or_default(), &data)?;
    let x = transform.transform(&data)?;
    let targets = class_targets(&data, data.schema().target_index().expect("target set above"))?;
    let labels = match &targets {
        Targets::Classes { names, .. } => names.clone(),
        Targets::Values(_) => vec![target.clone()],
    };
    let mut config = params.config;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let handle = train_builtin(kind, &x, &targets, &config)?;
    for w in handle.warnings() {
        eprintln!("xai: warning: {w}");
    }
    let model = handle.to_spec().ok_or_else(|| Error::Model("trained model cannot be persisted".into()))?;
    let file = ModelFile { model, transform, target, labels };
    let text = serde_json::to_string_pretty(&file)? + "\n";
    io::write_text(&args.out, &text)
}

fn load_pipeline(args: &ExplainArgs, data: &TabularBatch, params: &mut Value) -> Result<Pipeline> {
    let transform_cfg = params.as_object_mut().and_then(|m| m.remove("transform"));
    if let Some(path) = &args.model {
        if transform_cfg.is_some() {
            eprintln!("xai: warning: params.transform is ignored for a trained model");
        }
        let file: ModelFile = io::read_json(path)?;
        file.transform.check_schema(data.schema())?;
        let handle = file.model.into_handle().with_labels(file.labels);
        return Pipeline::new(file.transform, handle);
    }
    let cmd = args.model_cmd.as_deref().expect("clap requires --model or --model-cmd");
    let argv = shlex::split(cmd).filter(|a| !a.is_empty()).ok_or_else(|| Error::InvalidArgument(format!("cannot parse --model-cmd `{cmd}`")))?;
    // External models receive raw values by default: identity for numbers,
    // category indices for labels.
    let cfg: TransformConfig = match transform_cfg {
        Some(v) => serde_json::from_value(v).map_err(|e| Error::InvalidArgument(format!("bad params.transform: {e}")))?,
        None => TransformConfig::raw(),
    };
    let transform = FittedTransform::fit(&cfg, data)?;
    let mut handle = spawn_external(&argv, Some(transform.output_width()))?;
    if let Some(t) = data.schema().target_index() {
        let col = data.schema().column(t);
        if col.kind == ColumnKind::Categorical && col.categories.len() == handle.n_outputs() {
            handle = handle.with_labels(col.categories.clone());
        }
    }
    Pipeline::new(transform, handle)
}

fn explain(args: ExplainArgs) -> Result<u8> {
    let names = split_names(&args.explainers)?;
    // Unknown names are reported before any data is read.
    let registry = Registry::builtin();
    if let Some(bad) = names.iter().find(|n| registry.get(n).is_none()) {
        return Err(Error::UnknownExplainer { name: bad.clone(), valid: registry.names() });
    }
    let seed = resolve_seed(args.seed)?;
    let mut params = io::json_arg(args.params.as_deref())?;
    let data = load_data(&args.data)?;
    let pipeline = load_pipeline(&args, &data, &mut params)?;
    let instances = match &args.instances {
        Some(p) => io::read_table(p, data.schema())?,
        None => data.select_rows([0]),
    };
    let config = json!({
        "command": "explain",
        "explainers": names,
        "model": args.model.as_ref().map(|p| p.display().to_string()),
        "model_cmd": args.model_cmd,
        "params": params,
        "seed": seed,
    });
    let inputs = SetInputs {
        pipeline: Some(pipeline),
        train: Some(data.clone()),
        params,
        seed,
        record_timings: args.timings,
        ..Default::default()
    };
    let set = ExplainerSet::new(&registry, &names, inputs)?;
    let bundle = set.explain(Some(&instances))?;
    write_bundle(bundle, Some(&data), config, args.out.as_deref())
}

fn explain_ts(args: ExplainTsArgs) -> Result<u8> {
    let names = split_names(&args.explainers)?;
    let seed = resolve_seed(args.seed)?;
    let params = io::json_arg(args.params.as_deref())?;
    let train = io::read_series(&args.train)?;
    let window = io::read_series(&args.window)?;
    let detector = fit_detector(&train, args.kappa)?;
    let config = json!({
        "command": "explain-ts",
        "explainers": names,
        "kappa": args.kappa,
        "params": params,
        "seed": seed,
    });
    let inputs = SetInputs { detector: Some(detector), params, seed, ..Default::default() };
    let set = ExplainerSet::new(&Registry::builtin(), &names, inputs)?;
    let bundle = set.explain_windows(std::slice::from_ref(&window))?;
    write_bundle(bundle, None, config, args.out.as_deref())
}

fn report(args: ReportArgs) -> Result<()> {
    let doc = from_json(&io::read_text(&args.bundle)?)?;
    let bundle = doc.bundle();
    let html = render_report(&ReportSpec::new(args.title, &bundle));
    io::write_text(&args.out, &html)
}
