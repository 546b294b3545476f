//! Counterfactual explanations: a gradient-based solver for the sparse
//! hinge objective on continuous features, and a greedy black-box search
//! ("mace-greedy") over mixed features.
//!
//! Distances are measured in standardized units: `|x' - x| / std` per
//! continuous feature plus one per changed categorical feature.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Row, TabularBatch};
use crate::error::{Error, Result};
use crate::models::Task;
use crate::pipeline::Pipeline;
use crate::stats;

pub const LAMBDA_CAP: f64 = 1e4;
const FD_STEP: f64 = 1e-4;

/// The instance to explain plus the constraints on admissible changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfProblem {
    pub instance: Row,
    pub original_class: usize,
    /// Desired class; `None` accepts any class other than the original.
    pub target: Option<usize>,
    /// Per feature position: train `(min, max)` for continuous features.
    pub bounds: Vec<Option<(f64, f64)>>,
    /// Per feature position: train `(mean, std)` for continuous features.
    pub scales: Vec<Option<(f64, f64)>>,
    /// Feature positions that must not change.
    pub immutable: BTreeSet<usize>,
    pub lambda: f64,
    pub margin: f64,
}

impl CfProblem {
    pub fn new(pipe: &Pipeline, train: &TabularBatch, instance: Row) -> Result<Self> {
        if pipe.model().task() != Task::Classification {
            return Err(Error::InvalidArgument(
                "counterfactuals need a classification model".into(),
            ));
        }
        if train.is_empty() {
            return Err(Error::Precondition("counterfactuals need training rows".into()));
        }
        pipe.transform().check_schema(train.schema())?;
        if instance.len() != pipe.schema().len() {
            return Err(Error::Width {
                expected: pipe.schema().len(),
                actual: instance.len(),
            });
        }
        let d = pipe.n_features();
        let mut bounds = Vec::with_capacity(d);
        let mut scales = Vec::with_capacity(d);
        for p in 0..d {
            let col = train.numeric_column(pipe.source_index(p));
            if pipe.feature_column(p).kind == ColumnKind::Continuous && !col.is_empty() {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let std = stats::std_pop(&col);
                bounds.push(Some((lo, hi)));
                scales.push(Some((stats::mean(&col), if std > 0.0 { std } else { 1.0 })));
            } else {
                bounds.push(None);
                scales.push(None);
            }
        }
        let pred = pipe.predict_row(&instance)?;
        Ok(Self {
            instance,
            original_class: stats::argmax(&pred),
            target: None,
            bounds,
            scales,
            immutable: BTreeSet::new(),
            lambda: 0.1,
            margin: 0.0,
        })
    }

    pub fn with_target(mut self, target: Option<usize>) -> Self {
        self.target = target;
        self
    }

    pub fn with_immutable<S: AsRef<str>>(mut self, pipe: &Pipeline, names: &[S]) -> Result<Self> {
        for name in names {
            self.immutable.insert(pipe.feature_position(name.as_ref())?);
        }
        Ok(self)
    }

    pub fn is_valid_class(&self, class: usize) -> bool {
        match self.target {
            Some(t) => class == t,
            None => class != self.original_class,
        }
    }

    fn check(&self, n_outputs: usize) -> Result<()> {
        if let Some(t) = self.target {
            if t >= n_outputs {
                return Err(Error::InvalidArgument(format!("target class {t} out of range")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument("lambda must be positive".into()));
        }
        Ok(())
    }

    /// Standardized L1 distance plus one per changed categorical cell.
    pub fn distance(&self, pipe: &Pipeline, row: &Row) -> f64 {
        (0..self.scales.len())
            .map(|p| {
                let s = pipe.source_index(p);
                match (&self.scales[p], &self.instance[s], &row[s]) {
                    (Some((_, std)), Cell::Num(a), Cell::Num(b)) => (a - b).abs() / std,
                    (_, a, b) => f64::from(u8::from(a != b)),
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChange {
    pub feature: String,
    pub old: Cell,
    pub new: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualExample {
    pub values: Row,
    pub changes: Vec<FeatureChange>,
    pub predicted_class: usize,
    pub predicted_label: String,
    /// Probability of the predicted class.
    pub probability: f64,
    pub distance: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub method: String,
    pub original_class: usize,
    pub original_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    pub found: bool,
    pub examples: Vec<CounterfactualExample>,
    /// Best target-class probability reached (`1 - p(original)` without a
    /// target); reported mostly for unsuccessful searches.
    pub best_probability: f64,
    /// Distances of successively better valid iterates (gradient method).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
    /// Rows sent to the model.
    pub evaluations: usize,
}

fn target_score(problem: &CfProblem, probs: &[f64]) -> f64 {
    match problem.target {
        Some(t) => probs[t],
        None => 1.0 - probs[problem.original_class],
    }
}

fn example(pipe: &Pipeline, problem: &CfProblem, values: Row, probs: &[f64]) -> CounterfactualExample {
    let class = stats::argmax(probs);
    let changes = (0..pipe.n_features())
        .filter_map(|p| {
            let s = pipe.source_index(p);
            (values[s] != problem.instance[s]).then(|| FeatureChange {
                feature: pipe.feature_column(p).name.clone(),
                old: problem.instance[s].clone(),
                new: values[s].clone(),
            })
        })
        .collect();
    CounterfactualExample {
        distance: problem.distance(pipe, &values),
        values,
        changes,
        predicted_class: class,
        predicted_label: pipe.model().output_label(class),
        probability: probs[class],
        valid: problem.is_valid_class(class),
    }
}

fn result(pipe: &Pipeline, problem: &CfProblem, method: &str) -> CounterfactualResult {
    CounterfactualResult {
        method: method.into(),
        original_class: problem.original_class,
        original_label: pipe.model().output_label(problem.original_class),
        target: problem.target,
        found: false,
        examples: Vec::new(),
        best_probability: 0.0,
        trace: Vec::new(),
        evaluations: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WachterConfig {
    /// Gradient steps per value of lambda.
    pub steps: usize,
    pub learning_rate: f64,
    /// Multiplier applied to lambda after a round without a valid iterate.
    pub lambda_growth: f64,
}

impl Default for WachterConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            learning_rate: 0.01,
            lambda_growth: 2.0,
        }
    }
}

struct Objective<'a> {
    pipe: &'a Pipeline,
    problem: &'a CfProblem,
    /// Mutable feature positions and their schema indices.
    free: Vec<(usize, usize)>,
    analytic: bool,
    evaluations: usize,
}

impl Objective<'_> {
    fn row(&self, z: &[f64]) -> Row {
        let mut row = self.problem.instance.clone();
        for (i, &(p, s)) in self.free.iter().enumerate() {
            let (mean, std) = self.problem.scales[p].unwrap();
            row[s] = Cell::Num(mean + z[i] * std);
        }
        row
    }

    /// `f_y - max_{j != y} f_j` for the original class, or
    /// `max_{j != t} f_j - f_t` for a target; negative means valid.
    fn gap(&self, probs: &[f64]) -> (f64, usize, usize) {
        let (pos, avoid) = match self.problem.target {
            Some(t) => (None, t),
            None => (Some(self.problem.original_class), self.problem.original_class),
        };
        let other = (0..probs.len())
            .filter(|&j| j != avoid)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if probs[b] >= probs[j] => Some(b),
                _ => Some(j),
            })
            .unwrap_or(avoid);
        match pos {
            Some(y) => (probs[y] - probs[other], y, other),
            None => (probs[other] - probs[avoid], other, avoid),
        }
    }

    /// Probabilities at `z` and the gradient of the gap in z-space.
    fn eval(&mut self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = z.len();
        if self.analytic {
            let x = self.pipe.transform().transform_row(&self.row(z));
            self.evaluations += 1;
            let probs = self.pipe.model().predict(std::slice::from_ref(&x))?.remove(0);
            let (_, plus, minus) = self.gap(&probs);
            let gp = self.pipe.model().gradient(&x, plus)?;
            let gm = self.pipe.model().gradient(&x, minus)?;
            let grad = self
                .free
                .iter()
                .map(|&(p, _)| {
                    let slot = self.pipe.transform().columns()[p].offset;
                    let scale = self.pipe.transform().affine_scale(p).unwrap();
                    let std = self.problem.scales[p].unwrap().1;
                    (gp[slot] - gm[slot]) * scale * std
                })
                .collect();
            return Ok((probs, grad));
        }
        let mut rows = Vec::with_capacity(2 * m + 1);
        rows.push(self.row(z));
        let mut zz = z.to_vec();
        for i in 0..m {
            for sign in [1.0, -1.0] {
                zz[i] = z[i] + sign * FD_STEP;
                rows.push(self.row(&zz));
            }
            zz[i] = z[i];
        }
        self.evaluations += rows.len();
        let preds = self.pipe.predict_rows(&rows)?;
        let grad = (0..m)
            .map(|i| (self.gap(&preds[1 + 2 * i]).0 - self.gap(&preds[2 + 2 * i]).0) / (2.0 * FD_STEP))
            .collect();
        Ok((preds[0].clone(), grad))
    }
}

/// Minimizes `lambda * H(gap(x')) + |x' - x|_1` over the mutable continuous
/// features, with `H(t) = max(0, t + margin)`.
///
/// Each round runs proximal gradient steps (soft-thresholding handles the
/// L1 term) with x' clamped to the training range. Lambda starts at the
/// problem's value and grows until a round produces a valid iterate or the
/// cap is passed. The valid iterate closest to the instance is returned.
pub fn wachter_ce(pipe: &Pipeline, problem: &CfProblem, cfg: &WachterConfig) -> Result<CounterfactualResult> {
    problem.check(pipe.model().n_outputs())?;
    let mut free = Vec::new();
    for p in 0..pipe.n_features() {
        if problem.immutable.contains(&p) {
            continue;
        }
        let col = pipe.feature_column(p);
        if col.kind != ColumnKind::Continuous {
            return Err(Error::InvalidArgument(format!(
                "the gradient counterfactual method handles continuous features only; `{}` is categorical (mark it immutable or use mace-greedy)",
                col.name
            )));
        }
        let s = pipe.source_index(p);
        if problem.instance[s].as_f64().is_none() {
            return Err(Error::Data(format!("instance value of `{}` is not numeric", col.name)));
        }
        free.push((p, s));
    }
    let mut out = result(pipe, problem, "ce");
    let start = pipe.predict_row(&problem.instance)?;
    out.evaluations = 1;
    out.best_probability = target_score(problem, &start);
    if problem.is_valid_class(stats::argmax(&start)) {
        out.found = true;
        out.examples.push(example(pipe, problem, problem.instance.clone(), &start));
        return Ok(out);
    }
    let analytic = pipe.model().capabilities().differentiable
        && free.iter().all(|&(p, _)| pipe.transform().affine_scale(p).is_some());
    let z0: Vec<f64> = free
        .iter()
        .map(|&(p, s)| {
            let (mean, std) = problem.scales[p].unwrap();
            (problem.instance[s].as_f64().unwrap() - mean) / std
        })
        .collect();
    let zb: Vec<(f64, f64)> = free
        .iter()
        .map(|&(p, _)| {
            let (lo, hi) = problem.bounds[p].unwrap();
            let (mean, std) = problem.scales[p].unwrap();
            ((lo - mean) / std, (hi - mean) / std)
        })
        .collect();
    let mut obj = Objective {
        pipe,
        problem,
        free,
        analytic,
        evaluations: 0,
    };
    let lr = cfg.learning_rate;
    let mut z = z0.clone();
    let mut lambda = problem.lambda;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    while lambda <= LAMBDA_CAP {
        for _ in 0..cfg.steps {
            let (probs_here, grad) = obj.eval(&z)?;
            let active = obj.gap(&probs_here).0 + problem.margin > 0.0;
            for i in 0..z.len() {
                let step = if active { z[i] - lr * lambda * grad[i] } else { z[i] };
                let delta = step - z0[i];
                let shrunk = delta.signum() * (delta.abs() - lr).max(0.0);
                z[i] = (z0[i] + shrunk).clamp(zb[i].0, zb[i].1);
            }
            let row = obj.row(&z);
            let probs = pipe.predict_row(&row)?;
            obj.evaluations += 1;
            out.best_probability = out.best_probability.max(target_score(problem, &probs));
            if problem.is_valid_class(stats::argmax(&probs)) {
                let dist = problem.distance(pipe, &row);
                if best.as_ref().is_none_or(|(d, _, _)| dist < *d) {
                    out.trace.push(dist);
                    best = Some((dist, z.clone(), probs));
                }
            }
        }
        if best.is_some() {
            break;
        }
        lambda *= cfg.lambda_growth;
    }
    out.evaluations += obj.evaluations;
    if let Some((_, z, probs)) = best {
        out.found = true;
        out.examples.push(example(pipe, problem, obj.row(&z), &probs));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaceConfig {
    /// Most features a counterfactual may change.
    pub max_changes: usize,
    /// Diverse examples requested.
    pub n_examples: usize,
    /// Upper bound on rows sent to the model.
    pub max_evaluations: usize,
    /// Training rows used to build the continuous candidate pools.
    pub max_pool_rows: usize,
}

impl Default for MaceConfig {
    fn default() -> Self {
        Self {
            max_changes: 3,
            n_examples: 1,
            max_evaluations: 20_000,
            max_pool_rows: 1000,
        }
    }
}

struct Budget {
    used: usize,
    limit: usize,
}

impl Budget {
    fn predict(&mut self, pipe: &Pipeline, rows: &[Row]) -> Result<Option<Vec<Vec<f64>>>> {
        if self.used + rows.len() > self.limit {
            return Ok(None);
        }
        self.used += rows.len();
        pipe.predict_rows(rows).map(Some)
    }
}

/// Greedy black-box counterfactual search over mixed features.
///
/// Each greedy step scores every single-feature substitution (one batched
/// call) and commits the one with the highest target probability, ties
/// going to the earlier feature and then the earlier candidate. After the
/// class flips, changed features are reverted where validity survives and
/// continuous changes are moved to the closest candidate that still flips.
/// Further examples exclude the first feature chosen by earlier ones.
pub fn mace_cf(pipe: &Pipeline, train: &TabularBatch, problem: &CfProblem, cfg: &MaceConfig) -> Result<CounterfactualResult> {
    problem.check(pipe.model().n_outputs())?;
    let mut out = result(pipe, problem, "mace-greedy");
    let mut budget = Budget {
        used: 0,
        limit: cfg.max_evaluations,
    };
    let Some(start) = budget.predict(pipe, std::slice::from_ref(&problem.instance))? else {
        return Ok(out);
    };
    let start = &start[0];
    out.best_probability = target_score(problem, start);
    if problem.is_valid_class(stats::argmax(start)) {
        out.found = true;
        out.examples.push(example(pipe, problem, problem.instance.clone(), start));
        out.evaluations = budget.used;
        return Ok(out);
    }

    let pools = candidate_pools(pipe, train, problem, cfg, &mut budget)?;
    let mut excluded = BTreeSet::new();
    for _ in 0..cfg.n_examples.max(1) {
        let Some((first, row, probs)) = greedy(pipe, problem, cfg, &pools, &excluded, &mut budget, &mut out.best_probability)? else {
            break;
        };
        let (row, probs) = prune(pipe, problem, &pools, row, probs, &mut budget)?;
        let ex = example(pipe, problem, row, &probs);
        if !out.examples.iter().any(|e| e.values == ex.values) {
            out.examples.push(ex);
        }
        excluded.insert(first);
    }
    out.found = !out.examples.is_empty();
    out.evaluations = budget.used;
    Ok(out)
}

fn candidate_pools(
    pipe: &Pipeline,
    train: &TabularBatch,
    problem: &CfProblem,
    cfg: &MaceConfig,
    budget: &mut Budget,
) -> Result<Vec<Vec<Cell>>> {
    let pool_rows = &train.rows()[..train.n_rows().min(cfg.max_pool_rows)];
    let mut preds = None;
    let mut pools = Vec::with_capacity(pipe.n_features());
    for p in 0..pipe.n_features() {
        let s = pipe.source_index(p);
        let col = pipe.feature_column(p);
        if problem.immutable.contains(&p) {
            pools.push(Vec::new());
            continue;
        }
        let current = &problem.instance[s];
        let mut pool: Vec<Cell> = match col.kind {
            ColumnKind::Categorical => col.categories.iter().map(|c| Cell::Cat(c.clone())).collect(),
            ColumnKind::Continuous => {
                if preds.is_none() {
                    preds = Some(budget.predict(pipe, pool_rows)?.unwrap_or_default());
                }
                let preds = preds.as_ref().unwrap();
                let mut vals: Vec<f64> = pool_rows
                    .iter()
                    .zip(preds)
                    .filter(|(_, pr)| problem.is_valid_class(stats::argmax(pr)))
                    .filter_map(|(r, _)| r[s].as_f64())
                    .collect();
                if vals.is_empty() {
                    vals = train.numeric_column(s);
                }
                let sorted = stats::sorted(&vals);
                let mut deciles: Vec<f64> = Vec::new();
                if !sorted.is_empty() {
                    for k in 0..=10 {
                        let q = stats::quantile_sorted(&sorted, k as f64 / 10.0);
                        if deciles.last() != Some(&q) {
                            deciles.push(q);
                        }
                    }
                }
                deciles.into_iter().map(Cell::Num).collect()
            }
        };
        pool.retain(|c| c != current);
        pools.push(pool);
    }
    Ok(pools)
}

type Found = (usize, Row, Vec<f64>);

fn greedy(
    pipe: &Pipeline,
    problem: &CfProblem,
    cfg: &MaceConfig,
    pools: &[Vec<Cell>],
    excluded: &BTreeSet<usize>,
    budget: &mut Budget,
    best_probability: &mut f64,
) -> Result<Option<Found>> {
    let mut row = problem.instance.clone();
    let mut changed: Vec<usize> = Vec::new();
    while changed.len() < cfg.max_changes {
        let mut moves = Vec::new();
        let mut rows = Vec::new();
        for (p, pool) in pools.iter().enumerate() {
            if changed.contains(&p) || excluded.contains(&p) {
                continue;
            }
            let s = pipe.source_index(p);
            for cand in pool {
                let mut r = row.clone();
                r[s] = cand.clone();
                moves.push(p);
                rows.push(r);
            }
        }
        if rows.is_empty() {
            return Ok(None);
        }
        let Some(preds) = budget.predict(pipe, &rows)? else {
            return Ok(None);
        };
        let mut pick = 0;
        for i in 1..preds.len() {
            if target_score(problem, &preds[i]) > target_score(problem, &preds[pick]) {
                pick = i;
            }
        }
        *best_probability = best_probability.max(target_score(problem, &preds[pick]));
        changed.push(moves[pick]);
        row = rows.swap_remove(pick);
        if problem.is_valid_class(stats::argmax(&preds[pick])) {
            return Ok(Some((changed[0], row, preds[pick].clone())));
        }
    }
    Ok(None)
}

fn prune(
    pipe: &Pipeline,
    problem: &CfProblem,
    pools: &[Vec<Cell>],
    mut row: Row,
    mut probs: Vec<f64>,
    budget: &mut Budget,
) -> Result<(Row, Vec<f64>)> {
    for p in 0..pipe.n_features() {
        let s = pipe.source_index(p);
        if row[s] == problem.instance[s] {
            continue;
        }
        let mut reverted = row.clone();
        reverted[s] = problem.instance[s].clone();
        let Some(pred) = budget.predict(pipe, std::slice::from_ref(&reverted))? else {
            return Ok((row, probs));
        };
        if problem.is_valid_class(stats::argmax(&pred[0])) {
            row = reverted;
            probs = pred.into_iter().next().unwrap();
        }
    }
    // Move continuous changes to the nearest candidate that keeps validity.
    for p in 0..pipe.n_features() {
        let s = pipe.source_index(p);
        let (Some(orig), Some(cur)) = (problem.instance[s].as_f64(), row[s].as_f64()) else {
            continue;
        };
        if orig == cur {
            continue;
        }
        let closer: Vec<Cell> = pools[p]
            .iter()
            .filter(|c| c.as_f64().is_some_and(|v| (v - orig).abs() < (cur - orig).abs()))
            .cloned()
            .collect();
        if closer.is_empty() {
            continue;
        }
        let rows: Vec<Row> = closer
            .iter()
            .map(|c| {
                let mut r = row.clone();
                r[s] = c.clone();
                r
            })
            .collect();
        let Some(preds) = budget.predict(pipe, &rows)? else {
            return Ok((row, probs));
        };
        let best = rows
            .into_iter()
            .zip(preds)
            .filter(|(_, pr)| problem.is_valid_class(stats::argmax(pr)))
            .min_by(|(a, _), (b, _)| {
                let da = (a[s].as_f64().unwrap() - orig).abs();
                let db = (b[s].as_f64().unwrap() - orig).abs();
                da.total_cmp(&db)
            });
        if let Some((r, pr)) = best {
            row = r;
            probs = pr;
        }
    }
    Ok((row, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, TabularSchema};
    use crate::models::{FnModel, LinearModel, ModelSpec};
    use crate::preprocessing::{FittedTransform, TransformConfig};
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn sigmoid(t: f64) -> f64 {
        1.0 / (1.0 + (-t).exp())
    }

    /// p(y = 1) = sigmoid(w (x0 - c)); other features ignored.
    fn logistic_pipe(w: f64, c: f64, d: usize) -> (Pipeline, TabularBatch) {
        let names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        let rows: Vec<Vec<f64>> = (0..50).map(|i| (0..d).map(|j| (i as f64) * 0.2 + j as f64 - 5.0).collect()).collect();
        let train = TabularBatch::from_matrix(&names, &rows).unwrap();
        let mut w1 = vec![0.0; d];
        w1[0] = w;
        let m = LinearModel::new(vec![vec![0.0; d], w1], vec![0.0, -w * c]).unwrap();
        let schema = TabularSchema::continuous(&names).unwrap();
        let pipe = Pipeline::new(FittedTransform::identity(&schema).unwrap(), ModelSpec::Logistic(m).into_handle()).unwrap();
        (pipe, train)
    }

    fn num(v: &[f64]) -> Row {
        v.iter().map(|&x| Cell::Num(x)).collect()
    }

    #[test]
    fn already_in_target_class_is_returned_unchanged() {
        let (pipe, train) = logistic_pipe(1.5, 0.0, 1);
        let problem = CfProblem::new(&pipe, &train, num(&[2.0])).unwrap().with_target(Some(1));
        let r = wachter_ce(&pipe, &problem, &WachterConfig::default()).unwrap();
        assert!(r.found);
        assert_eq!(r.examples[0].values, num(&[2.0]));
        assert_eq!(r.examples[0].distance, 0.0);
        let m = mace_cf(&pipe, &train, &problem, &MaceConfig::default()).unwrap();
        assert!(m.found && m.examples[0].changes.is_empty());
    }

    #[test]
    fn one_dimensional_crossing_matches_grid_search() {
        let (w, c) = (1.5, 0.7);
        let (pipe, train) = logistic_pipe(w, c, 1);
        let x0 = -2.0;
        let problem = CfProblem::new(&pipe, &train, num(&[x0])).unwrap().with_target(Some(1));
        let std = problem.scales[0].unwrap().1;
        // Oracle: first grid point to the right whose predicted class is 1.
        let crossing = (0..400_000)
            .map(|i| x0 + i as f64 * 1e-5)
            .find(|&x| sigmoid(w * (x - c)) > 0.5)
            .unwrap();
        let oracle = (crossing - x0) / std;
        for analytic in [true, false] {
            let p = if analytic {
                pipe.clone()
            } else {
                let f = move |x: &[f64]| {
                    let p1 = sigmoid(w * (x[0] - c));
                    vec![1.0 - p1, p1]
                };
                let h = FnModel::new(Some(1), 2, f).handle(Task::Classification);
                Pipeline::new(pipe.transform().clone(), h).unwrap()
            };
            let r = wachter_ce(&p, &problem, &WachterConfig::default()).unwrap();
            assert!(r.found);
            let got = r.examples[0].distance;
            assert!((got - oracle).abs() / oracle <= 0.05, "analytic={analytic}: {got} vs {oracle}");
            assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn immutable_feature_is_bitwise_unchanged() {
        // Both features push towards class 1; x0 is frozen.
        let m = LinearModel::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, -1.0]).unwrap();
        let names = ["x0", "x1"];
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 * 0.1 - 2.0, 2.0 - i as f64 * 0.1]).collect();
        let train = TabularBatch::from_matrix(&names, &rows).unwrap();
        let schema = TabularSchema::continuous(&names).unwrap();
        let pipe = Pipeline::new(FittedTransform::identity(&schema).unwrap(), ModelSpec::Logistic(m).into_handle()).unwrap();
        let x0 = 0.123456789;
        let problem = CfProblem::new(&pipe, &train, num(&[x0, -1.0])).unwrap().with_immutable(&pipe, &["x0"]).unwrap();
        let r = wachter_ce(&pipe, &problem, &WachterConfig::default()).unwrap();
        assert!(r.found);
        let ex = &r.examples[0];
        assert_eq!(ex.values[0].as_f64().unwrap().to_bits(), x0.to_bits());
        assert!(ex.changes.iter().all(|c| c.feature != "x0"));
        let fresh = pipe.predict_row(&ex.values).unwrap();
        assert_eq!(stats::argmax(&fresh), ex.predicted_class);
        assert!(ex.valid);
    }

    #[test]
    fn categorical_mutable_feature_is_rejected() {
        let schema = TabularSchema::new(vec![Column::continuous("a"), Column::categorical("b", ["u", "v"])], None).unwrap();
        let train = TabularBatch::new(schema, vec![vec![Cell::Num(0.0), Cell::Cat("u".into())], vec![Cell::Num(1.0), Cell::Cat("v".into())]]).unwrap();
        let t = FittedTransform::fit(&TransformConfig::default(), &train).unwrap();
        let h = FnModel::new(Some(3), 2, |x: &[f64]| vec![1.0 - x[0].clamp(0.0, 1.0), x[0].clamp(0.0, 1.0)]).handle(Task::Classification);
        let pipe = Pipeline::new(t, h).unwrap();
        let inst = vec![Cell::Num(0.0), Cell::Cat("u".into())];
        let problem = CfProblem::new(&pipe, &train, inst).unwrap();
        assert!(matches!(wachter_ce(&pipe, &problem, &WachterConfig::default()), Err(Error::InvalidArgument(_))));
        let frozen = problem.with_immutable(&pipe, &["b"]).unwrap();
        assert!(wachter_ce(&pipe, &frozen, &WachterConfig::default()).is_ok());
    }

    #[test]
    fn unreachable_target_is_not_found() {
        let (pipe, train) = logistic_pipe(1.0, 100.0, 1);
        let problem = CfProblem::new(&pipe, &train, num(&[0.0])).unwrap();
        let cfg = WachterConfig { steps: 20, ..Default::default() };
        let r = wachter_ce(&pipe, &problem, &cfg).unwrap();
        assert!(!r.found && r.examples.is_empty());
        assert!(r.best_probability < 0.5);
    }

    #[test]
    fn wachter_is_deterministic() {
        let (pipe, train) = logistic_pipe(2.0, 1.0, 2);
        let problem = CfProblem::new(&pipe, &train, num(&[-1.0, 0.0])).unwrap();
        let a = wachter_ce(&pipe, &problem, &WachterConfig::default()).unwrap();
        let b = wachter_ce(&pipe, &problem, &WachterConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    fn income_like() -> (Pipeline, TabularBatch) {
        let schema = TabularSchema::new(
            vec![Column::continuous("age"), Column::continuous("capital_gain"), Column::categorical("sex", ["f", "m"])],
            None,
        )
        .unwrap();
        let rows: Vec<Row> = (0..60)
            .map(|i| {
                let gain = if i % 3 == 0 { 1000.0 * (i as f64) } else { 0.0 };
                vec![Cell::Num(20.0 + i as f64), Cell::Num(gain), Cell::Cat(if i % 2 == 0 { "f" } else { "m" }.into())]
            })
            .collect();
        let train = TabularBatch::new(schema, rows).unwrap();
        let t = FittedTransform::fit(&TransformConfig::raw(), &train).unwrap();
        let h = FnModel::new(Some(3), 2, |x: &[f64]| if x[1] > 5000.0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] })
            .handle(Task::Classification);
        (Pipeline::new(t, h).unwrap(), train)
    }

    #[test]
    fn capital_gain_rule_changes_only_capital_gain() {
        let (pipe, train) = income_like();
        let inst = vec![Cell::Num(39.0), Cell::Num(0.0), Cell::Cat("m".into())];
        let problem = CfProblem::new(&pipe, &train, inst).unwrap().with_target(Some(1));
        let r = mace_cf(&pipe, &train, &problem, &MaceConfig::default()).unwrap();
        assert!(r.found);
        let ex = &r.examples[0];
        assert_eq!(ex.changes.len(), 1);
        assert_eq!(ex.changes[0].feature, "capital_gain");
        let new = ex.changes[0].new.as_f64().unwrap();
        assert!(new > 5000.0);
        // It is a decile of the gains of rows predicted as class 1.
        let gains: Vec<f64> = train.numeric_column(1).into_iter().filter(|g| *g > 5000.0).collect();
        let sorted = stats::sorted(&gains);
        assert!((0..=10).any(|k| stats::quantile_sorted(&sorted, k as f64 / 10.0) == new));
    }

    fn majority() -> (Pipeline, TabularBatch) {
        let names = ["a", "b", "c"];
        let rows: Vec<Vec<f64>> = (0..8).map(|i| (0..3).map(|j| f64::from((i >> j) & 1)).collect()).collect();
        let train = TabularBatch::from_matrix(&names, &rows).unwrap();
        let schema = TabularSchema::continuous(&names).unwrap();
        let h = FnModel::new(Some(3), 2, |x: &[f64]| {
            let s: f64 = x.iter().sum();
            if s >= 2.0 { vec![0.0, 1.0] } else { vec![1.0 - s / 3.0, s / 3.0] }
        })
        .handle(Task::Classification);
        (Pipeline::new(FittedTransform::identity(&schema).unwrap(), h).unwrap(), train)
    }

    #[test]
    fn majority_vote_matches_exhaustive_minimum() {
        let (pipe, train) = majority();
        let problem = CfProblem::new(&pipe, &train, num(&[0.0, 0.0, 0.0])).unwrap().with_target(Some(1));
        let r = mace_cf(&pipe, &train, &problem, &MaceConfig::default()).unwrap();
        // Exhaustive search over {0,1}^3 for the smallest number of flips.
        let min_l0 = (0..8u32)
            .filter(|m| {
                let x: Vec<f64> = (0..3).map(|j| f64::from((m >> j) & 1)).collect();
                stats::argmax(&pipe.predict_row(&num(&x)).unwrap()) == 1
            })
            .map(|m| m.count_ones() as usize)
            .min()
            .unwrap();
        assert!(r.found);
        assert_eq!(r.examples[0].changes.len(), min_l0);
        assert_eq!(min_l0, 2);
    }

    #[test]
    fn diverse_examples_differ_in_first_feature() {
        let (pipe, train) = majority();
        let problem = CfProblem::new(&pipe, &train, num(&[0.0, 0.0, 0.0])).unwrap().with_target(Some(1));
        let cfg = MaceConfig { n_examples: 3, ..Default::default() };
        let r = mace_cf(&pipe, &train, &problem, &cfg).unwrap();
        assert!(r.examples.len() >= 2);
        for ex in &r.examples {
            assert!(ex.valid);
            assert_eq!(stats::argmax(&pipe.predict_row(&ex.values).unwrap()), 1);
        }
    }

    #[test]
    fn evaluations_stay_within_budget() {
        let (pipe, train) = majority();
        let calls = Arc::new(AtomicUsize::new(0));
        let seen = calls.clone();
        let h = FnModel::new(Some(3), 2, move |x: &[f64]| {
            seen.fetch_add(1, Ordering::SeqCst);
            let s: f64 = x.iter().sum();
            if s >= 3.0 { vec![0.0, 1.0] } else { vec![1.0 - s / 4.0, s / 4.0] }
        })
        .handle(Task::Classification);
        let pipe = Pipeline::new(pipe.transform().clone(), h).unwrap();
        let problem = CfProblem::new(&pipe, &train, num(&[0.0, 0.0, 0.0])).unwrap().with_target(Some(1));
        let before = calls.load(Ordering::SeqCst);
        for limit in [3, 10, 25, 1000] {
            calls.store(before, Ordering::SeqCst);
            let cfg = MaceConfig { max_evaluations: limit, max_changes: 3, ..Default::default() };
            let r = mace_cf(&pipe, &train, &problem, &cfg).unwrap();
            let used = calls.load(Ordering::SeqCst) - before;
            assert!(used <= limit, "{used} > {limit}");
            assert_eq!(used, r.evaluations);
            if !r.found {
                assert!(r.best_probability < 0.75);
            }
        }
    }

    proptest! {
        #[test]
        fn pruned_examples_are_valid_and_sparse(
            w in prop::collection::vec(0.1..2.0f64, 4),
            inst in prop::collection::vec(-1.0..0.0f64, 4),
        ) {
            let names = ["a", "b", "c", "d"];
            let rows: Vec<Vec<f64>> = (0..30).map(|i| (0..4).map(|j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0).collect()).collect();
            let train = TabularBatch::from_matrix(&names, &rows).unwrap();
            let schema = TabularSchema::continuous(&names).unwrap();
            let weights = w.clone();
            let h = FnModel::new(Some(4), 2, move |x: &[f64]| {
                let s: f64 = x.iter().zip(&weights).map(|(a, b)| a * b).sum();
                let p = 1.0 / (1.0 + (-(4.0 * s - 1.0)).exp());
                vec![1.0 - p, p]
            }).handle(Task::Classification);
            let pipe = Pipeline::new(FittedTransform::identity(&schema).unwrap(), h).unwrap();
            let problem = CfProblem::new(&pipe, &train, num(&inst)).unwrap();
            let cfg = MaceConfig { max_changes: 4, ..Default::default() };
            let r = mace_cf(&pipe, &train, &problem, &cfg).unwrap();
            for ex in &r.examples {
                prop_assert!(ex.valid);
                prop_assert_eq!(stats::argmax(&pipe.predict_row(&ex.values).unwrap()), ex.predicted_class);
                prop_assert!(ex.changes.len() <= 4);
            }
        }
    }
}
