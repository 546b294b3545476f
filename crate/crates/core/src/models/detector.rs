use serde::{Deserialize, Serialize};

use crate::data::TimeseriesWindow;
use crate::error::{Error, Result};
use crate::stats;

const STD_FLOOR: f64 = 1e-12;

/// Statistics-based anomaly detector: a window is anomalous when its largest
/// absolute z-score against the training series exceeds `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDetector {
    pub train_mean: f64,
    pub train_std: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub score: f64,
    pub is_anomaly: bool,
    /// Signed z-score per timestamp.
    pub deviations: Vec<f64>,
}

/// Population std of the training values, floored at 1e-12.
pub fn fit_detector(train: &TimeseriesWindow, kappa: f64) -> Result<ThresholdDetector> {
    if train.len() < 2 {
        return Err(Error::Precondition("detector needs at least 2 training points".into()));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    Ok(ThresholdDetector {
        train_mean: stats::mean(train.values()),
        train_std: stats::std_pop(train.values()).max(STD_FLOOR),
        kappa,
    })
}

impl ThresholdDetector {
    pub fn score_values(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .map(|v| ((v - self.train_mean) / self.train_std).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_anomalous(&self, values: &[f64]) -> bool {
        self.score_values(values) > self.kappa
    }

    pub fn detect(&self, window: &TimeseriesWindow) -> Detection {
        let deviations: Vec<f64> = window
            .values()
            .iter()
            .map(|v| (v - self.train_mean) / self.train_std)
            .collect();
        let score = deviations.iter().map(|d| d.abs()).fold(0.0, f64::max);
        Detection {
            score,
            is_anomaly: score > self.kappa,
            deviations,
        }
    }
}
