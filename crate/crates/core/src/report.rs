//! Bundle documents (canonical JSON) and the static HTML comparison
//! report.
//!
//! Canonical JSON: object keys sorted, floats in shortest round-trip form,
//! two-space indentation, UTF-8, one trailing newline. Re-serializing a
//! parsed document gives the same bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::counterfactual::CounterfactualResult;
use crate::data::{format_num, TabularBatch};
use crate::engine::{ExplanationBundle, Explanation, InstanceRecord, Outcome, RunMetadata};
use crate::error::{Error, Result};
use crate::global::{AleResult, MorrisResult, PdpResult};
use crate::insight::{CorrelationResult, FeatureSelectionResult, ImbalanceResult};
use crate::local::{DecisionPath, FeatureAttribution};
use crate::timeseries::{TimeseriesAttribution, TimeseriesCf};

pub const SCHEMA_VERSION: &str = "1";

/// JSON Schema describing [`BundleDocument`].
pub const BUNDLE_SCHEMA: &str = include_str!("../schema/bundle.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub rows: usize,
    pub columns: Vec<String>,
    /// Hex SHA-256 of the rows' canonical JSON.
    pub sha256: String,
}

pub fn fingerprint(batch: &TabularBatch) -> DatasetFingerprint {
    let mut hasher = Sha256::new();
    for row in batch.rows() {
        hasher.update(serde_json::to_vec(row).expect("cells serialize"));
        hasher.update(b"\n");
    }
    DatasetFingerprint {
        rows: batch.n_rows(),
        columns: batch.schema().columns().iter().map(|c| c.name.clone()).collect(),
        sha256: hex::encode(hasher.finalize()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleDocument {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetFingerprint>,
    /// The run configuration as given by the caller.
    #[serde(default)]
    pub config: Value,
    pub instances: Vec<InstanceRecord>,
    pub local: std::collections::BTreeMap<String, Vec<Outcome>>,
    pub global: std::collections::BTreeMap<String, Outcome>,
    pub metadata: RunMetadata,
}

impl BundleDocument {
    pub fn new(bundle: ExplanationBundle, dataset: Option<DatasetFingerprint>, config: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            dataset,
            config,
            instances: bundle.instances,
            local: bundle.local,
            global: bundle.global,
            metadata: bundle.metadata,
        }
    }

    pub fn bundle(&self) -> ExplanationBundle {
        ExplanationBundle {
            instances: self.instances.clone(),
            local: self.local.clone(),
            global: self.global.clone(),
            metadata: self.metadata.clone(),
        }
    }
}

/// Canonical text of any serializable value.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Map is ordered by key, so going through Value sorts.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn to_json(doc: &BundleDocument) -> Result<String> {
    canonical_json(doc)
}

pub fn from_json(text: &str) -> Result<BundleDocument> {
    let v: Value = serde_json::from_str(text)?;
    match v.get("schema_version").and_then(Value::as_str) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => return Err(Error::Data(format!("unsupported bundle schema_version `{other}`"))),
        None => return Err(Error::Data("bundle has no schema_version".into())),
    }
    Ok(serde_json::from_value(v)?)
}

/// What to render.
#[derive(Debug, Clone)]
pub struct ReportSpec<'a> {
    pub title: String,
    pub bundle: &'a ExplanationBundle,
    /// Explainer panels in display order; defaults to the run's order.
    pub panel_order: Vec<String>,
    /// Instance indices that get a tab.
    pub tabs: Vec<usize>,
}

impl<'a> ReportSpec<'a> {
    pub fn new(title: impl Into<String>, bundle: &'a ExplanationBundle) -> Self {
        let mut panel_order = bundle.metadata.explainers.clone();
        for k in bundle.local.keys().chain(bundle.global.keys()) {
            if !panel_order.contains(k) {
                panel_order.push(k.clone());
            }
        }
        Self {
            title: title.into(),
            bundle,
            panel_order,
            tabs: (0..bundle.instances.len()).collect(),
        }
    }
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;margin:1.5rem;color:#222}\
h1{font-size:1.4rem}h2{font-size:1.15rem;margin-top:1.5rem}h3{font-size:1rem;margin:0 0 .5rem}\
.tabs button{margin-right:.3rem;padding:.3rem .8rem;border:1px solid #999;background:#f4f4f4;cursor:pointer}\
.tabs button.active{background:#333;color:#fff}\
.instance{display:none}.instance.active{display:block}\
.panels{display:flex;flex-wrap:wrap;gap:1rem}\
.panel{border:1px solid #ccc;border-radius:4px;padding:.75rem;min-width:320px;flex:1 1 360px;overflow-x:auto}\
.panel.error{border-color:#c33;background:#fff4f4}\
table{border-collapse:collapse;font-size:.85rem}td,th{border:1px solid #ddd;padding:.2rem .5rem;text-align:left}\
.num{text-align:right;font-variant-numeric:tabular-nums}.muted{color:#777;font-size:.85rem}\
svg text{font-size:11px;font-family:system-ui,sans-serif}";

const SCRIPT: &str = "function showTab(i){document.querySelectorAll('.instance').forEach(function(s){\
s.classList.toggle('active',s.dataset.index==i)});document.querySelectorAll('.tabs button').forEach(\
function(b){b.classList.toggle('active',b.dataset.index==i)})}";

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format_num(v)
    } else {
        "n/a".into()
    }
}

/// Renders the report; a pure function of the spec.
pub fn render_report(spec: &ReportSpec) -> String {
    let b = spec.bundle;
    let mut h = String::new();
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>{STYLE}</style>\n<script>{SCRIPT}</script>\n</head>\n<body>\n<h1>{}</h1>\n",
        esc(&spec.title),
        esc(&spec.title)
    );
    let local_order: Vec<&String> = spec.panel_order.iter().filter(|n| b.local.contains_key(*n)).collect();
    if !spec.tabs.is_empty() && !local_order.is_empty() {
        h.push_str("<nav class=\"tabs\">");
        for (pos, &i) in spec.tabs.iter().enumerate() {
            let active = if pos == 0 { " class=\"active\"" } else { "" };
            let _ = write!(h, "<button{active} data-index=\"{i}\" onclick=\"showTab({i})\">Instance {i}</button>");
        }
        h.push_str("</nav>\n");
        for (pos, &i) in spec.tabs.iter().enumerate() {
            let active = if pos == 0 { " active" } else { "" };
            let _ = writeln!(h, "<section class=\"instance{active}\" data-index=\"{i}\">");
            let _ = writeln!(h, "<h2>Instance {i}</h2>");
            if let Some(inst) = b.instances.get(i) {
                render_instance(&mut h, inst, &b.metadata.columns);
            }
            h.push_str("<div class=\"panels\">\n");
            for name in &local_order {
                if let Some(outcome) = b.local[*name].get(i) {
                    render_panel(&mut h, "local", name, outcome);
                }
            }
            h.push_str("</div>\n</section>\n");
        }
    }
    let global_order: Vec<&String> = spec.panel_order.iter().filter(|n| b.global.contains_key(*n)).collect();
    if !global_order.is_empty() {
        h.push_str("<section class=\"global\">\n<h2>Global explanations</h2>\n<div class=\"panels\">\n");
        for name in global_order {
            render_panel(&mut h, "global", name, &b.global[name]);
        }
        h.push_str("</div>\n</section>\n");
    }
    let _ = write!(
        h,
        "<footer class=\"muted\"><p>seed {} &middot; version {}</p></footer>\n</body>\n</html>\n",
        b.metadata.seed,
        esc(&b.metadata.version)
    );
    h
}

fn render_instance(h: &mut String, inst: &InstanceRecord, columns: &[String]) {
    match inst {
        InstanceRecord::Row(row) => {
            h.push_str("<table class=\"instance-values\"><tr>");
            for (j, _) in row.iter().enumerate() {
                let name = columns.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
                let _ = write!(h, "<th>{}</th>", esc(&name));
            }
            h.push_str("</tr><tr>");
            for cell in row {
                let _ = write!(h, "<td>{}</td>", esc(&cell.display()));
            }
            h.push_str("</tr></table>\n");
        }
        InstanceRecord::Window(w) => {
            let _ = writeln!(h, "<p class=\"muted\">Series `{}`, {} points.</p>", esc(w.name()), w.len());
        }
    }
}

fn render_panel(h: &mut String, scope: &str, name: &str, outcome: &Outcome) {
    match outcome {
        Outcome::Error { kind, message } => {
            let _ = writeln!(
                h,
                "<div class=\"panel {scope} error\" data-explainer=\"{0}\"><h3>{0}</h3><p>{1} error: {2}</p></div>",
                esc(name),
                esc(kind),
                esc(message)
            );
        }
        Outcome::Ok { result } => {
            let _ = writeln!(h, "<div class=\"panel {scope}\" data-explainer=\"{0}\"><h3>{0}</h3>", esc(name));
            match result {
                Explanation::Attribution(a) => attribution(h, a),
                Explanation::DecisionPath(p) => decision_path(h, p),
                Explanation::Counterfactual(c) => what_if(h, c),
                Explanation::Pdp(r) => r.iter().for_each(|p| pdp(h, p)),
                Explanation::Ale(r) => r.iter().for_each(|a| ale(h, a)),
                Explanation::Morris(m) => morris(h, m),
                Explanation::Correlation(c) => heatmap(h, c),
                Explanation::Imbalance(i) => imbalance(h, i),
                Explanation::FeatureSelection(f) => selection(h, f),
                Explanation::TsAttribution(t) => ts_attribution(h, t),
                Explanation::TsCounterfactual(t) => ts_cf(h, t),
            }
            h.push_str("</div>\n");
        }
    }
}

const BAR_W: f64 = 200.0;

fn attribution(h: &mut String, a: &FeatureAttribution) {
    let _ = write!(h, "<p class=\"muted\">output {} &middot; prediction {}", esc(&a.output_label), num(a.prediction));
    if let Some(b) = a.base_value {
        let _ = write!(h, " &middot; base {}", num(b));
    }
    h.push_str("</p>\n");
    let mut order: Vec<usize> = (0..a.features.len()).collect();
    order.sort_by(|&i, &j| a.features[j].score.abs().total_cmp(&a.features[i].score.abs()).then(i.cmp(&j)));
    let max = a.features.iter().map(|f| f.score.abs()).fold(0.0, f64::max);
    let row_h = 18.0;
    let height = row_h * order.len() as f64 + 4.0;
    let _ = writeln!(h, "<svg class=\"bars\" width=\"{}\" height=\"{height}\" role=\"img\">", 180.0 + 2.0 * BAR_W + 60.0);
    let mid = 180.0 + BAR_W;
    for (r, &i) in order.iter().enumerate() {
        let f = &a.features[i];
        let y = 2.0 + r as f64 * row_h;
        let w = if max > 0.0 { f.score.abs() / max * BAR_W } else { 0.0 };
        let (x, color) = if f.score >= 0.0 { (mid, "#3a7d44") } else { (mid - w, "#b83b3b") };
        let _ = writeln!(
            h,
            "<text x=\"4\" y=\"{:.1}\">{} = {}</text><rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{:.1}\" fill=\"{color}\"></rect><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            y + 13.0,
            esc(&f.name),
            esc(&f.value),
            row_h - 4.0,
            mid + BAR_W + 4.0,
            y + 13.0,
            num(f.score)
        );
    }
    let _ = writeln!(h, "<line x1=\"{mid}\" y1=\"0\" x2=\"{mid}\" y2=\"{height}\" stroke=\"#555\"></line></svg>");
}

fn decision_path(h: &mut String, p: &DecisionPath) {
    h.push_str("<ol class=\"path\">\n");
    for s in &p.steps {
        let (op, side) = match s.branch {
            crate::local::Branch::Left => ("&lt;", "left"),
            crate::local::Branch::Right => ("&ge;", "right"),
        };
        let thr = match s.raw_threshold {
            Some(r) => format!("{} (encoded {})", num(r), num(s.threshold)),
            None => num(s.threshold),
        };
        let _ = writeln!(
            h,
            "<li>{} {op} {thr} &rarr; {side} <span class=\"muted\">({:.1}% of training rows)</span></li>",
            esc(&s.input),
            s.fraction * 100.0
        );
    }
    let leaf: Vec<String> = p
        .leaf_value
        .iter()
        .zip(&p.output_labels)
        .map(|(v, l)| format!("{}: {}", esc(l), num(*v)))
        .collect();
    let _ = writeln!(h, "<li>leaf: {} <span class=\"muted\">({:.1}% of training rows)</span></li></ol>", leaf.join(", "), p.leaf_fraction * 100.0);
}

fn what_if(h: &mut String, c: &CounterfactualResult) {
    if !c.found {
        let _ = writeln!(
            h,
            "<p class=\"not-found\">No counterfactual found (best probability {}).</p>",
            num(c.best_probability)
        );
        return;
    }
    for (n, ex) in c.examples.iter().enumerate() {
        let _ = writeln!(
            h,
            "<p class=\"muted\">Example {}: {} &rarr; {} (p = {}, distance {})</p>",
            n + 1,
            esc(&c.original_label),
            esc(&ex.predicted_label),
            num(ex.probability),
            num(ex.distance)
        );
        h.push_str("<table class=\"what-if\"><tr><th>feature</th><th>from</th><th>to</th></tr>\n");
        for ch in &ex.changes {
            let _ = writeln!(
                h,
                "<tr class=\"change\"><td>{}</td><td>{}</td><td>{}</td></tr>",
                esc(&ch.feature),
                esc(&ch.old.display()),
                esc(&ch.new.display())
            );
        }
        h.push_str("</table>\n");
    }
}

const PLOT_W: f64 = 360.0;
const PLOT_H: f64 = 160.0;
const PAD: f64 = 30.0;
const COLORS: [&str; 4] = ["#2c6fbb", "#d9822b", "#3a7d44", "#8e44ad"];

/// Line chart of several series over shared x values; `dashed` marks
/// series drawn with a dash pattern.
fn line_chart(h: &mut String, xs: &[f64], series: &[(&str, &[f64], bool)], x_labels: Option<&[String]>) {
    let all = series.iter().flat_map(|(_, ys, _)| ys.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| PAD + (x - x0) / span * (PLOT_W - 2.0 * PAD);
    let py = |y: f64| PLOT_H - PAD - (y - lo) / (hi - lo) * (PLOT_H - 2.0 * PAD);
    let _ = writeln!(h, "<svg class=\"chart\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" role=\"img\">");
    let _ = writeln!(
        h,
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#999\"></line><line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{0}\" stroke=\"#999\"></line>",
        PLOT_H - PAD,
        PLOT_W - PAD
    );
    let _ = writeln!(
        h,
        "<text x=\"2\" y=\"{:.1}\">{}</text><text x=\"2\" y=\"{:.1}\">{}</text>",
        PAD,
        num(hi),
        PLOT_H - PAD,
        num(lo)
    );
    match x_labels {
        Some(labels) => {
            for (x, l) in xs.iter().zip(labels) {
                let _ = write!(h, "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>", px(*x), PLOT_H - PAD + 14.0, esc(l));
            }
        }
        None => {
            let _ = write!(
                h,
                "<text x=\"{PAD}\" y=\"{:.1}\">{}</text><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
                PLOT_H - PAD + 14.0,
                num(x0),
                PLOT_W - PAD - 20.0,
                PLOT_H - PAD + 14.0,
                num(x1)
            );
        }
    }
    h.push('\n');
    for (n, (label, ys, dashed)) in series.iter().enumerate() {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys.iter())
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y)))
            .collect();
        let color = COLORS[n % COLORS.len()];
        let dash = if *dashed { " stroke-dasharray=\"5,3\"" } else { "" };
        let _ = writeln!(
            h,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"><title>{}</title></polyline>",
            pts.join(" "),
            esc(label)
        );
    }
    h.push_str("</svg>\n");
}

fn pdp(h: &mut String, p: &PdpResult) {
    let _ = writeln!(h, "<p>{}</p>", esc(&p.feature));
    let numeric: Option<Vec<f64>> = p.grid.iter().map(|c| c.as_f64()).collect();
    let (xs, labels) = match numeric {
        Some(xs) => (xs, None),
        None => (
            (0..p.grid.len()).map(|i| i as f64).collect(),
            Some(p.grid.iter().map(|c| c.display()).collect::<Vec<_>>()),
        ),
    };
    let cols: Vec<Vec<f64>> = (0..p.outputs.len()).map(|k| p.means.iter().map(|m| m[k]).collect()).collect();
    let series: Vec<(&str, &[f64], bool)> = p.outputs.iter().zip(&cols).take(COLORS.len()).map(|(l, c)| (l.as_str(), c.as_slice(), false)).collect();
    line_chart(h, &xs, &series, labels.as_deref());
}

fn ale(h: &mut String, a: &AleResult) {
    let _ = writeln!(h, "<p>{}</p>", esc(&a.feature));
    let cols: Vec<Vec<f64>> = (0..a.outputs.len()).map(|k| a.effects.iter().map(|e| e[k]).collect()).collect();
    let series: Vec<(&str, &[f64], bool)> = a.outputs.iter().zip(&cols).take(COLORS.len()).map(|(l, c)| (l.as_str(), c.as_slice(), false)).collect();
    line_chart(h, &a.edges, &series, None);
}

fn morris(h: &mut String, m: &MorrisResult) {
    h.push_str("<table class=\"morris\"><tr><th>feature</th><th>output</th><th>mu</th><th>mu*</th><th>sigma</th></tr>\n");
    for (j, f) in m.features.iter().enumerate() {
        for (k, o) in m.outputs.iter().enumerate() {
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td>{}</td><td class=\"num\">{}</td><td class=\"num\">{}</td><td class=\"num\">{}</td></tr>",
                esc(f),
                esc(o),
                num(m.mu[j][k]),
                num(m.mu_star[j][k]),
                num(m.sigma[j][k])
            );
        }
    }
    h.push_str("</table>\n");
}

fn heatmap(h: &mut String, c: &CorrelationResult) {
    h.push_str("<table class=\"heatmap\"><tr><th></th>");
    for f in &c.features {
        let _ = write!(h, "<th>{}</th>", esc(f));
    }
    h.push_str("</tr>\n");
    for (i, f) in c.features.iter().enumerate() {
        let _ = write!(h, "<tr><th>{}</th>", esc(f));
        for v in &c.matrix[i] {
            let t = v.clamp(-1.0, 1.0);
            let (r, g, b) = if t >= 0.0 {
                (255.0 - 180.0 * t, 255.0 - 110.0 * t, 255.0)
            } else {
                (255.0, 255.0 + 180.0 * t, 255.0 + 180.0 * t)
            };
            let _ = write!(
                h,
                "<td class=\"num\" style=\"background:rgb({},{},{})\">{:.2}</td>",
                r.round(),
                g.round(),
                b.round(),
                v
            );
        }
        h.push_str("</tr>\n");
    }
    h.push_str("</table>\n");
}

fn imbalance(h: &mut String, i: &ImbalanceResult) {
    let _ = writeln!(h, "<p>target {}</p>", esc(&i.target));
    h.push_str("<table><tr><th>class</th><th>count</th><th>share</th></tr>\n");
    for ((c, n), f) in i.classes.iter().zip(&i.counts).zip(&i.frequencies) {
        let _ = writeln!(h, "<tr><td>{}</td><td class=\"num\">{n}</td><td class=\"num\">{:.3}</td></tr>", esc(c), f);
    }
    h.push_str("</table>\n");
    if let Some(t) = &i.by {
        let _ = write!(h, "<p>by {}</p><table><tr><th></th>", esc(&t.feature));
        for l in &t.levels {
            let _ = write!(h, "<th>{}</th>", esc(l));
        }
        h.push_str("</tr>\n");
        for (c, row) in i.classes.iter().zip(&t.counts) {
            let _ = write!(h, "<tr><th>{}</th>", esc(c));
            for n in row {
                let _ = write!(h, "<td class=\"num\">{n}</td>");
            }
            h.push_str("</tr>\n");
        }
        h.push_str("</table>\n");
    }
}

fn selection(h: &mut String, f: &FeatureSelectionResult) {
    let _ = writeln!(h, "<p>mutual information with {}</p>", esc(&f.target));
    h.push_str("<table><tr><th>feature</th><th>score</th><th>selected</th></tr>\n");
    for s in &f.ranking {
        let mark = if f.selected.contains(&s.feature) { "yes" } else { "" };
        let _ = writeln!(h, "<tr><td>{}</td><td class=\"num\">{}</td><td>{mark}</td></tr>", esc(&s.feature), num(s.score));
    }
    h.push_str("</table>\n");
}

fn ts_attribution(h: &mut String, t: &TimeseriesAttribution) {
    let xs: Vec<f64> = t.timestamps.iter().map(|&v| v as f64).collect();
    let top = (0..t.scores.len()).max_by(|&a, &b| t.scores[a].abs().total_cmp(&t.scores[b].abs()).then(b.cmp(&a)));
    let _ = write!(h, "<p class=\"muted\">score {} &middot; base {}", num(t.score), num(t.base_score));
    if let Some(s) = top {
        let (a, b) = t.segments[s];
        let _ = write!(
            h,
            " &middot; most important: timestamps {}..{} (&phi; = {})",
            t.timestamps[a],
            t.timestamps[b - 1],
            num(t.scores[s])
        );
    }
    h.push_str("</p>\n");
    let points = t.point_scores();
    line_chart(h, &xs, &[("values", &t.values, false), ("reference", &t.reference, true)], None);
    line_chart(h, &xs, &[("segment scores", &points, false)], None);
}

fn ts_cf(h: &mut String, t: &TimeseriesCf) {
    let xs: Vec<f64> = t.timestamps.iter().map(|&v| v as f64).collect();
    let status = if t.valid { "no longer anomalous" } else { "still anomalous (not found)" };
    let _ = writeln!(
        h,
        "<p class=\"muted\">score {} &rarr; {}: {status}; {} points modified. Dashed line: modified window.</p>",
        num(t.score_before),
        num(t.score_after),
        t.modified_indices.len()
    );
    line_chart(h, &xs, &[("original", &t.original, false), ("modified", &t.modified, true)], None);
}
