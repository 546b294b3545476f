//! Data-exploration explainers: feature correlation, class imbalance and
//! mutual-information feature ranking.
//!
//! Mixed and categorical pairs are compared with Cramér's V after
//! discretizing continuous columns into 10 equal-frequency bins (columns with
//! at most 10 distinct values keep one level per value). Mutual
//! information uses the plug-in estimator in nats.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, TabularBatch};
use crate::error::{Error, Result};
use crate::stats;

const DISCRETIZE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub features: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    /// Columns with a single observed value; their rows are all zero.
    pub constant: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub feature: String,
    pub levels: Vec<String>,
    /// `counts[class][level]`.
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceResult {
    pub target: String,
    pub classes: Vec<String>,
    pub counts: Vec<usize>,
    pub frequencies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by: Option<CrossTab>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelectionResult {
    pub target: String,
    pub ranking: Vec<FeatureScore>,
    pub selected: Vec<String>,
}

/// Column codes: one level index per row, `None` when missing.
fn discretize(batch: &TabularBatch, col: usize) -> Vec<Option<usize>> {
    match batch.schema().column(col).kind {
        ColumnKind::Categorical => {
            let cats = &batch.schema().column(col).categories;
            batch
                .column_cells(col)
                .map(|c| c.as_label().and_then(|l| cats.iter().position(|x| x == l)))
                .collect()
        }
        ColumnKind::Continuous => {
            let values = batch.numeric_column(col);
            if values.is_empty() {
                return vec![None; batch.n_rows()];
            }
            let mut distinct = stats::sorted(&values);
            distinct.dedup();
            if distinct.len() <= DISCRETIZE_BINS {
                // Few distinct values: each value is its own level.
                return batch
                    .column_cells(col)
                    .map(|c| {
                        c.as_f64()
                            .map(|v| distinct.partition_point(|&d| d < v))
                    })
                    .collect();
            }
            let edges = stats::quantile_edges(&values, DISCRETIZE_BINS);
            batch
                .column_cells(col)
                .map(|c| c.as_f64().map(|v| stats::bin_of(&edges, v)))
                .collect()
        }
    }
}

/// Dense contingency table over the rows where both codes are present.
fn contingency(a: &[Option<usize>], b: &[Option<usize>]) -> Vec<Vec<f64>> {
    let mut ra: Vec<usize> = a.iter().flatten().copied().collect();
    let mut rb: Vec<usize> = b.iter().flatten().copied().collect();
    ra.sort_unstable();
    ra.dedup();
    rb.sort_unstable();
    rb.dedup();
    let ia: HashMap<usize, usize> = ra.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let ib: HashMap<usize, usize> = rb.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut table = vec![vec![0.0; rb.len()]; ra.len()];
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            table[ia[x]][ib[y]] += 1.0;
        }
    }
    // Drop levels that never co-occur with a present partner.
    table.retain(|r| r.iter().sum::<f64>() > 0.0);
    if let Some(first) = table.first() {
        let keep: Vec<bool> = (0..first.len())
            .map(|j| table.iter().map(|r| r[j]).sum::<f64>() > 0.0)
            .collect();
        for r in &mut table {
            let mut j = 0;
            r.retain(|_| {
                j += 1;
                keep[j - 1]
            });
        }
    }
    table
}

/// Cramér's V of a contingency table; 0 when either side has one level.
pub fn cramers_v(table: &[Vec<f64>]) -> f64 {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r < 2 || c < 2 {
        return 0.0;
    }
    let n: f64 = table.iter().flatten().sum();
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut chi2 = 0.0;
    for i in 0..r {
        for j in 0..c {
            let e = rows[i] * cols[j] / n;
            chi2 += (table[i][j] - e).powi(2) / e;
        }
    }
    (chi2 / (n * (r.min(c) - 1) as f64)).sqrt().min(1.0)
}

/// Plug-in mutual information (nats) of a contingency table.
pub fn mutual_information(table: &[Vec<f64>]) -> f64 {
    let n: f64 = table.iter().flatten().sum();
    if n == 0.0 {
        return 0.0;
    }
    let c = table.first().map_or(0, Vec::len);
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0.0 {
                mi += nij / n * (nij * n / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi.max(0.0)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    }
}

fn is_constant(batch: &TabularBatch, col: usize) -> bool {
    let mut present = batch.column_cells(col).filter(|c| !c.is_missing());
    match present.next() {
        None => true,
        Some(first) => present.all(|c| c == first),
    }
}

pub fn correlation_matrix(batch: &TabularBatch) -> Result<CorrelationResult> {
    if batch.n_rows() < 2 {
        return Err(Error::Precondition("correlation needs at least 2 rows".into()));
    }
    let schema = batch.schema();
    let d = schema.len();
    let constant: Vec<bool> = (0..d).map(|c| is_constant(batch, c)).collect();
    let codes: Vec<Vec<Option<usize>>> = (0..d).map(|c| discretize(batch, c)).collect();
    let mut matrix = vec![vec![0.0; d]; d];
    for i in 0..d {
        if constant[i] {
            continue;
        }
        matrix[i][i] = 1.0;
        for j in i + 1..d {
            if constant[j] {
                continue;
            }
            let both_continuous = schema.column(i).kind == ColumnKind::Continuous
                && schema.column(j).kind == ColumnKind::Continuous;
            let v = if both_continuous {
                let (x, y): (Vec<f64>, Vec<f64>) = batch
                    .rows()
                    .iter()
                    .filter_map(|r| Some((r[i].as_f64()?, r[j].as_f64()?)))
                    .unzip();
                if x.len() < 2 {
                    0.0
                } else {
                    pearson(&x, &y)
                }
            } else {
                cramers_v(&contingency(&codes[i], &codes[j]))
            };
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    Ok(CorrelationResult {
        features: schema.columns().iter().map(|c| c.name.clone()).collect(),
        matrix,
        constant,
    })
}

pub fn class_imbalance(
    batch: &TabularBatch,
    target: &str,
    by: Option<&str>,
) -> Result<ImbalanceResult> {
    let schema = batch.schema();
    let t = schema
        .index_of(target)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown target `{target}`")))?;
    if schema.column(t).kind != ColumnKind::Categorical {
        return Err(Error::InvalidArgument(format!(
            "imbalance needs a categorical target; `{target}` is continuous"
        )));
    }
    let mut classes = schema.column(t).categories.clone();
    let has_missing = batch.column_cells(t).any(Cell::is_missing);
    if has_missing {
        classes.push("n/a".into());
    }
    let class_of = |c: &Cell| -> usize {
        c.as_label()
            .and_then(|l| classes.iter().position(|x| x == l))
            .unwrap_or(classes.len() - 1)
    };
    let mut counts = vec![0usize; classes.len()];
    for cell in batch.column_cells(t) {
        counts[class_of(cell)] += 1;
    }
    let n = batch.n_rows().max(1) as f64;
    let frequencies = counts.iter().map(|&c| c as f64 / n).collect();
    let by = match by {
        None => None,
        Some(name) => {
            let f = schema
                .index_of(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown feature `{name}`")))?;
            if schema.column(f).kind != ColumnKind::Categorical {
                return Err(Error::InvalidArgument(format!(
                    "cross-tabulation needs a categorical feature; `{name}` is continuous"
                )));
            }
            let mut levels = schema.column(f).categories.clone();
            if batch.column_cells(f).any(Cell::is_missing) {
                levels.push("n/a".into());
            }
            let mut table = vec![vec![0usize; levels.len()]; classes.len()];
            for row in batch.rows() {
                let lvl = row[f]
                    .as_label()
                    .and_then(|l| levels.iter().position(|x| x == l))
                    .unwrap_or(levels.len() - 1);
                table[class_of(&row[t])][lvl] += 1;
            }
            Some(CrossTab {
                feature: name.to_string(),
                levels,
                counts: table,
            })
        }
    };
    Ok(ImbalanceResult {
        target: target.to_string(),
        classes,
        counts,
        frequencies,
        by,
    })
}

/// Ranks every non-target column by mutual information with the target.
pub fn select_features(batch: &TabularBatch, target: &str, k: usize) -> Result<FeatureSelectionResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let schema = batch.schema();
    let t = schema
        .index_of(target)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown target `{target}`")))?;
    let target_codes = discretize(batch, t);
    let mut ranking: Vec<FeatureScore> = (0..schema.len())
        .filter(|&c| c != t)
        .map(|c| FeatureScore {
            feature: schema.column(c).name.clone(),
            score: mutual_information(&contingency(&discretize(batch, c), &target_codes)),
        })
        .collect();
    // Stable sort keeps schema order among ties.
    ranking.sort_by(|a, b| b.score.total_cmp(&a.score));
    let selected = ranking.iter().take(k).map(|f| f.feature.clone()).collect();
    Ok(FeatureSelectionResult {
        target: target.to_string(),
        ranking,
        selected,
    })
}
