//! Fit/transform/inverse-transform pipeline from source cells to the numeric
//! matrix a model consumes.
//!
//! Only feature columns (every column except the schema target) are encoded.
//! Each source column maps to a contiguous block of output columns, so the
//! encoding of one column never depends on the value of another.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Row, TabularBatch, TabularSchema};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NanFill {
    #[default]
    Mean,
    Median,
    Constant(f64),
}

/// Encoding for one source column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "kebab-case")]
pub enum Directive {
    OneHot,
    Ordinal,
    Identity {
        #[serde(default)]
        nan_fill: NanFill,
    },
    Standardize {
        #[serde(default)]
        nan_fill: NanFill,
    },
    MinMax {
        #[serde(default)]
        nan_fill: NanFill,
    },
    Kbins {
        n_bins: usize,
        #[serde(default)]
        nan_fill: NanFill,
    },
}

impl Directive {
    fn kind(&self) -> ColumnKind {
        match self {
            Directive::OneHot | Directive::Ordinal => ColumnKind::Categorical,
            _ => ColumnKind::Continuous,
        }
    }

    fn nan_fill(&self) -> Option<NanFill> {
        match *self {
            Directive::OneHot | Directive::Ordinal => None,
            Directive::Identity { nan_fill }
            | Directive::Standardize { nan_fill }
            | Directive::MinMax { nan_fill }
            | Directive::Kbins { nan_fill, .. } => Some(nan_fill),
        }
    }
}

/// User-facing transform configuration: per-kind defaults plus per-column
/// overrides. Resolved against a schema into a [`TransformSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    #[serde(default = "default_categorical")]
    pub categorical: Directive,
    #[serde(default = "default_continuous")]
    pub continuous: Directive,
    #[serde(default)]
    pub columns: BTreeMap<String, Directive>,
}

fn default_categorical() -> Directive {
    Directive::OneHot
}

fn default_continuous() -> Directive {
    Directive::Standardize {
        nan_fill: NanFill::Mean,
    }
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            categorical: default_categorical(),
            continuous: default_continuous(),
            columns: BTreeMap::new(),
        }
    }
}

impl TransformConfig {
    /// Identity for continuous and ordinal for categorical columns.
    pub fn raw() -> Self {
        Self {
            categorical: Directive::Ordinal,
            continuous: Directive::Identity {
                nan_fill: NanFill::Mean,
            },
            columns: BTreeMap::new(),
        }
    }

    pub fn to_spec(&self, schema: &TabularSchema) -> Result<TransformSpec> {
        let feature_names = schema.feature_names();
        if let Some(unknown) = self.columns.keys().find(|k| !feature_names.contains(k)) {
            return Err(Error::Schema(format!(
                "transform names unknown feature column `{unknown}`"
            )));
        }
        let directives = schema
            .feature_indices()
            .into_iter()
            .map(|i| {
                let col = schema.column(i);
                let d = self.columns.get(&col.name).copied().unwrap_or(match col.kind {
                    ColumnKind::Categorical => self.categorical,
                    ColumnKind::Continuous => self.continuous,
                });
                (col.name.clone(), d)
            })
            .collect();
        Ok(TransformSpec { directives })
    }
}

/// One directive per feature column, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub directives: Vec<(String, Directive)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ColumnStats {
    OneHot { categories: Vec<String> },
    Ordinal { categories: Vec<String> },
    Identity,
    Standardize { mean: f64, std: f64 },
    MinMax { min: f64, max: f64 },
    Kbins { edges: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedColumn {
    pub name: String,
    /// Index of the column in the source schema.
    pub source: usize,
    pub directive: Directive,
    pub stats: ColumnStats,
    /// Value substituted for missing continuous cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill: Option<f64>,
    /// First output column of this block.
    pub offset: usize,
    pub width: usize,
    /// Set when a scaling degenerated to identity (zero variance or range).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Maps one output column back to its source feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    /// Position among feature columns (not the schema index).
    pub feature: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTransform {
    schema: TabularSchema,
    columns: Vec<FittedColumn>,
    layout: Vec<Slot>,
}

/// Fits per-column statistics on `train`.
///
/// Standard deviations use the population (divide-by-n) convention.
pub fn fit_transform_spec(spec: &TransformSpec, train: &TabularBatch) -> Result<FittedTransform> {
    if train.is_empty() {
        return Err(Error::Data("cannot fit a transform on an empty batch".into()));
    }
    let schema = train.schema();
    let features = schema.feature_indices();
    if spec.directives.len() != features.len() {
        return Err(Error::Schema(format!(
            "transform has {} directives for {} feature columns",
            spec.directives.len(),
            features.len()
        )));
    }
    let mut columns = Vec::with_capacity(features.len());
    let mut layout = Vec::new();
    for (pos, (&src, (name, directive))) in features.iter().zip(&spec.directives).enumerate() {
        let col = schema.column(src);
        if &col.name != name {
            return Err(Error::Schema(format!(
                "transform directive for `{name}` does not match column `{}`",
                col.name
            )));
        }
        if directive.kind() != col.kind {
            return Err(Error::Schema(format!(
                "directive {directive:?} does not apply to {:?} column `{name}`",
                col.kind
            )));
        }
        let mut warning = None;
        let mut fill = None;
        let stats = match *directive {
            Directive::OneHot => ColumnStats::OneHot {
                categories: col.categories.clone(),
            },
            Directive::Ordinal => ColumnStats::Ordinal {
                categories: col.categories.clone(),
            },
            _ => {
                let values = train.numeric_column(src);
                let fill_value = match directive.nan_fill() {
                    Some(NanFill::Constant(v)) => v,
                    Some(NanFill::Median) if !values.is_empty() => stats::median(&values),
                    Some(NanFill::Mean) if !values.is_empty() => stats::mean(&values),
                    _ => {
                        return Err(Error::Data(format!(
                            "column `{name}` has no observed values to compute a fill statistic"
                        )))
                    }
                };
                fill = Some(fill_value);
                let filled: Vec<f64> = train
                    .column_cells(src)
                    .map(|c| c.as_f64().unwrap_or(fill_value))
                    .collect();
                match *directive {
                    Directive::Identity { .. } => ColumnStats::Identity,
                    Directive::Standardize { .. } => {
                        let std = stats::std_pop(&filled);
                        if std > 0.0 {
                            ColumnStats::Standardize {
                                mean: stats::mean(&filled),
                                std,
                            }
                        } else {
                            warning = Some("zero variance; standardization replaced by identity".into());
                            ColumnStats::Identity
                        }
                    }
                    Directive::MinMax { .. } => {
                        let min = filled.iter().cloned().fold(f64::INFINITY, f64::min);
                        let max = filled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        if max > min {
                            ColumnStats::MinMax { min, max }
                        } else {
                            warning = Some("zero range; min-max scaling replaced by identity".into());
                            ColumnStats::Identity
                        }
                    }
                    Directive::Kbins { n_bins, .. } => {
                        if n_bins < 2 {
                            return Err(Error::InvalidArgument(format!(
                                "kbins for `{name}` needs n_bins >= 2"
                            )));
                        }
                        ColumnStats::Kbins {
                            edges: stats::quantile_edges(&filled, n_bins),
                        }
                    }
                    Directive::OneHot | Directive::Ordinal => unreachable!(),
                }
            }
        };
        let width = match &stats {
            ColumnStats::OneHot { categories } => categories.len(),
            _ => 1,
        };
        let offset = layout.len();
        match &stats {
            ColumnStats::OneHot { categories } => {
                for c in categories {
                    layout.push(Slot {
                        feature: pos,
                        name: format!("{name}={c}"),
                    });
                }
            }
            _ => layout.push(Slot {
                feature: pos,
                name: name.clone(),
            }),
        }
        columns.push(FittedColumn {
            name: name.clone(),
            source: src,
            directive: *directive,
            stats,
            fill,
            offset,
            width,
            warning,
        });
    }
    Ok(FittedTransform {
        schema: schema.clone(),
        columns,
        layout,
    })
}

impl FittedTransform {
    /// Fits the given config resolved against `train`'s schema.
    pub fn fit(config: &TransformConfig, train: &TabularBatch) -> Result<Self> {
        fit_transform_spec(&config.to_spec(train.schema())?, train)
    }

    /// Identity transform for an all-continuous schema; needs no statistics.
    pub fn identity(schema: &TabularSchema) -> Result<Self> {
        let mut columns = Vec::new();
        let mut layout = Vec::new();
        for (pos, src) in schema.feature_indices().into_iter().enumerate() {
            let col = schema.column(src);
            if col.kind != ColumnKind::Continuous {
                return Err(Error::Schema(format!(
                    "identity transform needs continuous columns; `{}` is categorical",
                    col.name
                )));
            }
            layout.push(Slot {
                feature: pos,
                name: col.name.clone(),
            });
            columns.push(FittedColumn {
                name: col.name.clone(),
                source: src,
                directive: Directive::Identity {
                    nan_fill: NanFill::Constant(0.0),
                },
                stats: ColumnStats::Identity,
                fill: Some(0.0),
                offset: pos,
                width: 1,
                warning: None,
            });
        }
        Ok(Self {
            schema: schema.clone(),
            columns,
            layout,
        })
    }

    pub fn schema(&self) -> &TabularSchema {
        &self.schema
    }

    pub fn columns(&self) -> &[FittedColumn] {
        &self.columns
    }

    pub fn layout(&self) -> &[Slot] {
        &self.layout
    }

    pub fn output_width(&self) -> usize {
        self.layout.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter_map(|c| c.warning.as_ref().map(|w| format!("{}: {w}", c.name)))
            .collect()
    }

    /// Derivative of the encoded value with respect to the raw value for an
    /// affinely encoded continuous feature; `None` for piecewise encodings.
    pub fn affine_scale(&self, feature: usize) -> Option<f64> {
        match &self.columns[feature].stats {
            ColumnStats::Identity => Some(1.0),
            ColumnStats::Standardize { std, .. } => Some(1.0 / std),
            ColumnStats::MinMax { min, max } => Some(1.0 / (max - min)),
            _ => None,
        }
    }

    fn encode_into(&self, col: &FittedColumn, cell: &Cell, out: &mut [f64]) {
        match &col.stats {
            ColumnStats::OneHot { categories } => {
                out.fill(0.0);
                if let Some(i) = cell
                    .as_label()
                    .and_then(|l| categories.iter().position(|c| c == l))
                {
                    out[i] = 1.0;
                }
            }
            ColumnStats::Ordinal { categories } => {
                out[0] = cell
                    .as_label()
                    .and_then(|l| categories.iter().position(|c| c == l))
                    .map_or(-1.0, |i| i as f64);
            }
            stats => {
                let v = cell.as_f64().or(col.fill).unwrap_or(0.0);
                out[0] = match stats {
                    ColumnStats::Identity => v,
                    ColumnStats::Standardize { mean, std } => (v - mean) / std,
                    ColumnStats::MinMax { min, max } => (v - min) / (max - min),
                    ColumnStats::Kbins { edges } => stats::bin_of(edges, v) as f64,
                    _ => unreachable!(),
                };
            }
        }
    }

    /// Encodes one row laid out in source-schema order.
    pub fn transform_row(&self, row: &[Cell]) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.len()];
        for col in &self.columns {
            self.encode_into(col, &row[col.source], &mut out[col.offset..col.offset + col.width]);
        }
        out
    }

    pub fn transform_rows(&self, rows: &[Row]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Encodes a batch whose columns match the fitted source schema by name.
    pub fn transform(&self, batch: &TabularBatch) -> Result<Vec<Vec<f64>>> {
        self.check_schema(batch.schema())?;
        Ok(self.transform_rows(batch.rows()))
    }

    pub fn check_schema(&self, schema: &TabularSchema) -> Result<()> {
        let same = schema.len() == self.schema.len()
            && schema
                .columns()
                .iter()
                .zip(self.schema.columns())
                .all(|(a, b)| a.name == b.name && a.kind == b.kind);
        if same {
            Ok(())
        } else {
            Err(Error::Schema(
                "batch columns do not match the fitted transform's schema".into(),
            ))
        }
    }

    fn decode(&self, col: &FittedColumn, slots: &[f64]) -> Cell {
        match &col.stats {
            ColumnStats::OneHot { categories } => {
                if categories.is_empty() || slots.iter().all(|&v| v <= 0.0) {
                    Cell::Missing
                } else {
                    Cell::Cat(categories[stats::argmax(slots)].clone())
                }
            }
            ColumnStats::Ordinal { categories } => {
                let i = slots[0].round();
                if i >= 0.0 && (i as usize) < categories.len() {
                    Cell::Cat(categories[i as usize].clone())
                } else {
                    Cell::Missing
                }
            }
            ColumnStats::Identity => Cell::Num(slots[0]),
            ColumnStats::Standardize { mean, std } => Cell::Num(slots[0] * std + mean),
            ColumnStats::MinMax { min, max } => Cell::Num(slots[0] * (max - min) + min),
            ColumnStats::Kbins { edges } => {
                if edges.len() == 1 {
                    return Cell::Num(edges[0]);
                }
                let last = edges.len() - 2;
                let b = (slots[0].round().max(0.0) as usize).min(last);
                Cell::Num((edges[b] + edges[b + 1]) / 2.0)
            }
        }
    }

    /// Decodes one encoded row into source-schema order. The target column
    /// (if any) is left missing.
    pub fn inverse_row(&self, encoded: &[f64]) -> Result<Row> {
        if encoded.len() != self.layout.len() {
            return Err(Error::Width {
                expected: self.layout.len(),
                actual: encoded.len(),
            });
        }
        let mut row = vec![Cell::Missing; self.schema.len()];
        for col in &self.columns {
            row[col.source] = self.decode(col, &encoded[col.offset..col.offset + col.width]);
        }
        Ok(row)
    }

    pub fn inverse_transform(&self, matrix: &[Vec<f64>]) -> Result<TabularBatch> {
        let rows = matrix
            .iter()
            .map(|r| self.inverse_row(r))
            .collect::<Result<Vec<_>>>()?;
        TabularBatch::new(self.schema.clone(), rows)
    }
}
