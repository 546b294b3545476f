//! A fitted transform composed with a model: the unit every tabular
//! explainer queries. Explainers hand it rows of source cells; it encodes
//! them and calls the model in bounded batches.

use crate::data::{Cell, Column, Row, TabularSchema};
use crate::error::{Error, Result};
use crate::models::{ModelHandle, Task};
use crate::preprocessing::FittedTransform;
use crate::stats;

pub const DEFAULT_BATCH_SIZE: usize = 4096;

#[derive(Debug, Clone)]
pub struct Pipeline {
    transform: FittedTransform,
    model: ModelHandle,
    batch_size: usize,
}

impl Pipeline {
    pub fn new(transform: FittedTransform, model: ModelHandle) -> Result<Self> {
        if let Some(n) = model.n_inputs() {
            if n != transform.output_width() {
                return Err(Error::Width {
                    expected: n,
                    actual: transform.output_width(),
                });
            }
        }
        Ok(Self {
            transform,
            model,
            batch_size: DEFAULT_BATCH_SIZE,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn transform(&self) -> &FittedTransform {
        &self.transform
    }

    pub fn model(&self) -> &ModelHandle {
        &self.model
    }

    pub fn schema(&self) -> &TabularSchema {
        self.transform.schema()
    }

    pub fn n_features(&self) -> usize {
        self.transform.n_features()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.transform.feature_names()
    }

    /// Schema index of feature position `p`.
    pub fn source_index(&self, p: usize) -> usize {
        self.transform.columns()[p].source
    }

    pub fn feature_column(&self, p: usize) -> &Column {
        self.schema().column(self.source_index(p))
    }

    pub fn feature_position(&self, name: &str) -> Result<usize> {
        self.transform
            .columns()
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature `{name}`")))
    }

    pub fn predict_encoded(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(x.len());
        for chunk in x.chunks(self.batch_size) {
            out.extend(self.model.predict(chunk)?);
        }
        Ok(out)
    }

    pub fn predict_rows(&self, rows: &[Row]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(self.batch_size) {
            out.extend(self.model.predict(&self.transform.transform_rows(chunk))?);
        }
        Ok(out)
    }

    pub fn predict_row(&self, row: &[Cell]) -> Result<Vec<f64>> {
        Ok(self.predict_rows(&[row.to_vec()])?.remove(0))
    }

    /// Output explained by default: the top class for classifiers, output 0
    /// otherwise.
    pub fn default_output(&self, prediction: &[f64]) -> usize {
        match self.model.task() {
            Task::Classification => stats::argmax(prediction),
            _ => 0,
        }
    }
}

