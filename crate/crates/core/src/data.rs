//! Typed containers for tabular and univariate time-series data.
//!
//! A [`TabularBatch`] is a row-major grid of [`Cell`]s together with the
//! [`TabularSchema`] describing each column. Values are validated on
//! construction and immutable afterwards.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Observed labels in first-seen order. Empty for continuous columns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl Column {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct TabularSchema {
    columns: Vec<Column>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    columns: Vec<Column>,
    #[serde(default)]
    target: Option<String>,
}

impl TryFrom<RawSchema> for TabularSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        TabularSchema::new(raw.columns, raw.target)
    }
}

impl TabularSchema {
    pub fn new(columns: Vec<Column>, target: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for col in &columns {
            if col.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", col.name)));
            }
            match col.kind {
                ColumnKind::Continuous if !col.categories.is_empty() => {
                    return Err(Error::Schema(format!(
                        "continuous column `{}` carries categories",
                        col.name
                    )));
                }
                ColumnKind::Categorical => {
                    let mut cats = HashSet::new();
                    for c in &col.categories {
                        if !cats.insert(c.as_str()) {
                            return Err(Error::Schema(format!(
                                "duplicate category `{c}` in column `{}`",
                                col.name
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        if let Some(t) = &target {
            if !seen.contains(t.as_str()) {
                return Err(Error::Schema(format!("target `{t}` is not a column")));
            }
        }
        Ok(Self { columns, target })
    }

    /// Schema of `names.len()` continuous columns and no target.
    pub fn continuous<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names.iter().map(|n| Column::continuous(n.as_ref())).collect(),
            None,
        )
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn target_index(&self) -> Option<usize> {
        self.target.as_deref().and_then(|t| self.index_of(t))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Indices of every non-target column, in schema order.
    pub fn feature_indices(&self) -> Vec<usize> {
        let t = self.target_index();
        (0..self.columns.len()).filter(|&i| Some(i) != t).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_indices()
            .into_iter()
            .map(|i| self.columns[i].name.clone())
            .collect()
    }

    pub fn with_target(mut self, target: Option<String>) -> Result<Self> {
        self.target = target;
        Self::new(self.columns, self.target)
    }
}

/// One tabular cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Cat(String),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Cell::Cat(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Human-readable rendering used in reports.
    pub fn display(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Cat(s) => s.clone(),
            Cell::Missing => "n/a".into(),
        }
    }
}

pub(crate) fn format_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub type Row = Vec<Cell>;

/// The literal cell texts treated as missing: `""` and `"n/a"` (any case).
pub fn is_missing_marker(text: &str) -> bool {
    let t = text.trim();
    t.is_empty() || t.eq_ignore_ascii_case("n/a")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBatch")]
pub struct TabularBatch {
    schema: TabularSchema,
    rows: Vec<Row>,
}

#[derive(Deserialize)]
struct RawBatch {
    schema: TabularSchema,
    rows: Vec<Row>,
}

impl TryFrom<RawBatch> for TabularBatch {
    type Error = Error;

    fn try_from(raw: RawBatch) -> Result<Self> {
        TabularBatch::new(raw.schema, raw.rows)
    }
}

impl TabularBatch {
    /// Validates typed rows against `schema`. Categorical labels that the
    /// schema does not list yet are appended to its category list.
    pub fn new(mut schema: TabularSchema, rows: Vec<Row>) -> Result<Self> {
        let width = schema.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Width {
                    expected: width,
                    actual: row.len(),
                });
            }
            for (c, cell) in row.iter().enumerate() {
                let col = &mut schema.columns[c];
                match (col.kind, cell) {
                    (_, Cell::Missing) => {}
                    (ColumnKind::Continuous, Cell::Num(v)) => {
                        if !v.is_finite() {
                            return Err(Error::Data(format!(
                                "row {r}, column `{}`: non-finite value",
                                col.name
                            )));
                        }
                    }
                    (ColumnKind::Categorical, Cell::Cat(label)) => {
                        if col.category_index(label).is_none() {
                            col.categories.push(label.clone());
                        }
                    }
                    (kind, cell) => {
                        return Err(Error::Data(format!(
                            "row {r}, column `{}`: {cell:?} is not a {kind:?} cell",
                            col.name
                        )));
                    }
                }
            }
        }
        Ok(Self { schema, rows })
    }

    /// Continuous-only batch from a numeric matrix.
    pub fn from_matrix<S: AsRef<str>>(names: &[S], matrix: &[Vec<f64>]) -> Result<Self> {
        let schema = TabularSchema::continuous(names)?;
        let rows = matrix
            .iter()
            .map(|r| r.iter().map(|&v| Cell::Num(v)).collect())
            .collect();
        Self::new(schema, rows)
    }

    pub fn schema(&self) -> &TabularSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_cells(&self, idx: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[idx])
    }

    /// Non-missing numeric values of a continuous column.
    pub fn numeric_column(&self, idx: usize) -> Vec<f64> {
        self.column_cells(idx).filter_map(Cell::as_f64).collect()
    }

    /// New batch over the same schema holding the selected rows.
    pub fn select_rows(&self, indices: impl IntoIterator<Item = usize>) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: indices.into_iter().map(|i| self.rows[i].clone()).collect(),
        }
    }

    /// Re-targets rows onto `schema` (which must be an extension of this
    /// batch's schema, e.g. the training schema) and validates them.
    pub fn with_schema(&self, schema: TabularSchema) -> Result<Self> {
        Self::new(schema, self.rows.clone())
    }
}

/// Infers column kinds from a sample of raw text rows.
///
/// A column is continuous iff every non-missing sample cell parses as a
/// real number; otherwise it is categorical with categories in first-seen
/// order.
pub fn infer_schema(
    header: &[String],
    rows: &[Vec<String>],
    target: Option<&str>,
) -> Result<TabularSchema> {
    if header.is_empty() {
        return Err(Error::Schema("empty header".into()));
    }
    if rows.is_empty() {
        return Err(Error::Schema("no sample rows to infer from".into()));
    }
    let mut columns = Vec::with_capacity(header.len());
    for (c, name) in header.iter().enumerate() {
        let mut numeric = true;
        let mut labels: Vec<String> = Vec::new();
        for row in rows {
            let text = row.get(c).map(String::as_str).unwrap_or("");
            if is_missing_marker(text) {
                continue;
            }
            if numeric && !text.trim().parse::<f64>().is_ok_and(f64::is_finite) {
                numeric = false;
            }
            if !labels.iter().any(|l| l == text) {
                labels.push(text.to_string());
            }
        }
        columns.push(if numeric {
            Column::continuous(name.clone())
        } else {
            Column::categorical(name.clone(), labels)
        });
    }
    TabularSchema::new(columns, target.map(str::to_string))
}

/// Builds a validated batch from raw text cells.
pub fn make_tabular(schema: TabularSchema, rows: &[Vec<String>]) -> Result<TabularBatch> {
    let width = schema.len();
    let mut typed = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Width {
                expected: width,
                actual: row.len(),
            });
        }
        let mut cells = Vec::with_capacity(width);
        for (col, text) in schema.columns().iter().zip(row) {
            if is_missing_marker(text) {
                cells.push(Cell::Missing);
                continue;
            }
            cells.push(match col.kind {
                ColumnKind::Continuous => {
                    let v: f64 = text.trim().parse().map_err(|_| {
                        Error::Data(format!(
                            "row {r}, column `{}`: `{text}` is not a number",
                            col.name
                        ))
                    })?;
                    Cell::Num(v)
                }
                ColumnKind::Categorical => Cell::Cat(text.clone()),
            });
        }
        typed.push(cells);
    }
    TabularBatch::new(schema, typed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct TimeseriesWindow {
    timestamps: Vec<i64>,
    values: Vec<f64>,
    name: String,
}

#[derive(Deserialize)]
struct RawWindow {
    timestamps: Vec<i64>,
    values: Vec<f64>,
    name: String,
}

impl TryFrom<RawWindow> for TimeseriesWindow {
    type Error = Error;

    fn try_from(raw: RawWindow) -> Result<Self> {
        make_timeseries(raw.timestamps, raw.values, raw.name)
    }
}

pub fn make_timeseries(
    timestamps: Vec<i64>,
    values: Vec<f64>,
    name: impl Into<String>,
) -> Result<TimeseriesWindow> {
    if timestamps.len() != values.len() {
        return Err(Error::Data(format!(
            "{} timestamps but {} values",
            timestamps.len(),
            values.len()
        )));
    }
    if timestamps.is_empty() {
        return Err(Error::Data("empty time series".into()));
    }
    if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Data(format!(
            "timestamps not strictly increasing at index {}",
            w + 1
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite value at index {i}")));
    }
    Ok(TimeseriesWindow {
        timestamps,
        values,
        name: name.into(),
    })
}

impl TimeseriesWindow {
    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same timestamps, new values. Lengths must agree.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        make_timeseries(self.timestamps.clone(), values, self.name.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn infers_continuous_and_categorical() {
        let schema = infer_schema(&s(&["a"]), &[s(&["1.5"]), s(&["2"])], None).unwrap();
        assert_eq!(schema.column(0).kind, ColumnKind::Continuous);

        let schema =
            infer_schema(&s(&["c"]), &[s(&["x"]), s(&["y"]), s(&["x"])], None).unwrap();
        assert_eq!(schema.column(0).kind, ColumnKind::Categorical);
        assert_eq!(schema.column(0).categories, vec!["x", "y"]);
    }

    #[test]
    fn missing_markers_do_not_force_categorical() {
        let rows = [s(&["1"]), s(&["n/a"]), s(&["3"]), s(&["N/A"]), s(&[""])];
        let schema = infer_schema(&s(&["m"]), &rows, None).unwrap();
        assert_eq!(schema.column(0).kind, ColumnKind::Continuous);
        let batch = make_tabular(schema, &rows).unwrap();
        let missing: Vec<bool> = batch.column_cells(0).map(Cell::is_missing).collect();
        assert_eq!(missing, vec![false, true, false, true, true]);
    }

    #[test]
    fn infer_rejects_bad_header() {
        assert!(infer_schema(&s(&["a", "a"]), &[s(&["1", "2"])], None).is_err());
        assert!(infer_schema(&s(&["a"]), &[s(&["1"])], Some("b")).is_err());
        assert!(infer_schema(&s(&[]), &[s(&[])], None).is_err());
        assert!(infer_schema(&s(&["a"]), &[], None).is_err());
    }

    #[test]
    fn make_tabular_edge_cases() {
        let schema = TabularSchema::new(
            vec![Column::continuous("x"), Column::categorical("c", ["a"])],
            None,
        )
        .unwrap();
        let empty = make_tabular(schema.clone(), &[]).unwrap();
        assert_eq!(empty.n_rows(), 0);

        let b = make_tabular(schema.clone(), &[s(&["1", "z"])]).unwrap();
        assert_eq!(b.schema().column(1).categories, vec!["a", "z"]);

        assert!(matches!(
            make_tabular(schema.clone(), &[s(&["1"])]),
            Err(Error::Width { .. })
        ));
        assert!(make_tabular(schema.clone(), &[s(&["inf", "a"])]).is_err());
        assert!(make_tabular(schema, &[s(&["NaN", "a"])]).is_err());
    }

    #[test]
    fn three_by_two_round_trips() {
        let schema = TabularSchema::new(
            vec![Column::continuous("x"), Column::categorical("c", Vec::<String>::new())],
            Some("c".into()),
        )
        .unwrap();
        let b = make_tabular(
            schema,
            &[s(&["1", "p"]), s(&["2.25", "q"]), s(&["n/a", "p"])],
        )
        .unwrap();
        assert_eq!(b.n_rows(), 3);
        let text = serde_json::to_string(&b).unwrap();
        let back: TabularBatch = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn timeseries_validation() {
        assert_eq!(make_timeseries(vec![0], vec![1.0], "m").unwrap().len(), 1);
        assert_eq!(make_timeseries(vec![0, 1], vec![1.0, 2.0], "m").unwrap().len(), 2);
        assert!(make_timeseries(vec![1, 0], vec![1.0, 2.0], "m").is_err());
        assert!(make_timeseries(vec![0, 0], vec![1.0, 2.0], "m").is_err());
        assert!(make_timeseries(vec![0], vec![1.0, 2.0], "m").is_err());
        assert!(make_timeseries(vec![0], vec![f64::NAN], "m").is_err());
        let bad = r#"{"timestamps":[2,1],"values":[1,2],"name":"m"}"#;
        assert!(serde_json::from_str::<TimeseriesWindow>(bad).is_err());
    }

    #[test]
    fn deserialization_validates() {
        let dup = r#"{"columns":[{"name":"a","kind":"continuous"},{"name":"a","kind":"continuous"}]}"#;
        assert!(serde_json::from_str::<TabularSchema>(dup).is_err());
        let bad_cell = r#"{"schema":{"columns":[{"name":"a","kind":"continuous"}]},"rows":[["x"]]}"#;
        assert!(serde_json::from_str::<TabularBatch>(bad_cell).is_err());
    }

    fn cell_strategy(kind: ColumnKind) -> BoxedStrategy<Cell> {
        match kind {
            ColumnKind::Continuous => prop_oneof![
                8 => (-1e6..1e6f64).prop_map(Cell::Num),
                1 => Just(Cell::Missing),
            ]
            .boxed(),
            ColumnKind::Categorical => prop_oneof![
                8 => "[a-d]{1,2}".prop_map(Cell::Cat),
                1 => Just(Cell::Missing),
            ]
            .boxed(),
        }
    }

    fn batch_strategy() -> impl Strategy<Value = TabularBatch> {
        prop::collection::vec(prop::bool::ANY, 1..5).prop_flat_map(|kinds| {
            let kinds: Vec<ColumnKind> = kinds
                .into_iter()
                .map(|k| if k { ColumnKind::Continuous } else { ColumnKind::Categorical })
                .collect();
            let row = kinds.iter().map(|&k| cell_strategy(k)).collect::<Vec<_>>();
            (Just(kinds), prop::collection::vec(row, 0..12)).prop_map(|(kinds, rows)| {
                let cols = kinds
                    .iter()
                    .enumerate()
                    .map(|(i, k)| match k {
                        ColumnKind::Continuous => Column::continuous(format!("f{i}")),
                        ColumnKind::Categorical => {
                            Column::categorical(format!("f{i}"), Vec::<String>::new())
                        }
                    })
                    .collect();
                TabularBatch::new(TabularSchema::new(cols, None).unwrap(), rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn batch_serialization_round_trips(b in batch_strategy()) {
            let text = serde_json::to_string(&b).unwrap();
            let back: TabularBatch = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, b);
        }

        #[test]
        fn window_serialization_round_trips(
            steps in prop::collection::vec(1i64..1000, 1..30),
            start in -1_000_000i64..1_000_000,
        ) {
            let mut t = start;
            let ts: Vec<i64> = steps.iter().map(|s| { t += s; t }).collect();
            let vals: Vec<f64> = steps.iter().map(|&s| s as f64 * 0.37 - 5.0).collect();
            let w = make_timeseries(ts, vals, "m").unwrap();
            let back: TimeseriesWindow = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
            prop_assert_eq!(back, w);
        }

        #[test]
        fn validation_rejects_exactly_bad_cells(
            cells in prop::collection::vec(
                prop_oneof![
                    (-10.0..10.0f64).prop_map(Cell::Num),
                    Just(Cell::Num(f64::NAN)),
                    Just(Cell::Num(f64::INFINITY)),
                    "[a-z]".prop_map(Cell::Cat),
                    Just(Cell::Missing),
                ],
                1..20,
            )
        ) {
            let schema = TabularSchema::continuous(&["x"]).unwrap();
            let valid = cells.iter().all(|c| match c {
                Cell::Num(v) => v.is_finite(),
                Cell::Missing => true,
                Cell::Cat(_) => false,
            });
            let rows: Vec<Row> = cells.into_iter().map(|c| vec![c]).collect();
            prop_assert_eq!(TabularBatch::new(schema, rows).is_ok(), valid);
        }

        #[test]
        fn inference_is_deterministic(labels in prop::collection::vec("[a-c1-3]{0,2}", 1..20)) {
            let rows: Vec<Vec<String>> = labels.iter().map(|l| vec![l.clone()]).collect();
            let a = infer_schema(&["h".to_string()], &rows, None).unwrap();
            let b = infer_schema(&["h".to_string()], &rows, None).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
