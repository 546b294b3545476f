//! Model-agnostic explanation engine for tabular and univariate time-series
//! models.
//!
//! The crate is organised the way a user meets it:
//!
//! * [`data`] and [`preprocessing`] turn raw tables into model inputs;
//! * [`models`] defines the black-box prediction contract plus built-in
//!   glass-box, differentiable and anomaly-detection models;
//! * [`insight`], [`global`], [`local`], [`counterfactual`] and
//!   [`timeseries`] hold the explainers;
//! * [`engine`] dispatches explainers by name and assembles an
//!   [`engine::ExplanationBundle`];
//! * [`report`] renders bundles as canonical JSON and static HTML.

pub mod counterfactual;
pub mod data;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod global;
pub mod insight;
pub mod local;
pub mod models;
pub mod pipeline;
pub mod preprocessing;
pub mod report;
pub mod stats;
pub mod timeseries;

pub use error::{Error, ErrorCategory, Result};
