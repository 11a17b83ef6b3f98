use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Targets with `|y|` below this are excluded from MAPE.
pub const MAPE_ZERO_THRESHOLD: f64 = 1e-8;

/// Regression quality of one target on a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub target: String,
    /// Percent.
    pub mape: f64,
    pub mse: f64,
    /// `y - y_hat` for every row that entered the MAPE.
    pub residuals: Vec<f64>,
    pub excluded_zero_targets: usize,
}

/// MAPE (percent), MSE and residuals for paired truth/prediction vectors.
pub fn regression_metrics(target: &str, truth: &[f64], pred: &[f64]) -> Result<RegressionMetrics> {
    if truth.is_empty() || truth.len() != pred.len() {
        return Err(Error::InvalidArgument("metrics need equally sized non-empty vectors".into()));
    }
    let mse = truth.iter().zip(pred).map(|(y, p)| (y - p).powi(2)).sum::<f64>() / truth.len() as f64;
    let mut ape_sum = 0.0;
    let mut residuals = Vec::with_capacity(truth.len());
    for (y, p) in truth.iter().zip(pred) {
        if y.abs() >= MAPE_ZERO_THRESHOLD {
            ape_sum += ((y - p) / y).abs();
            residuals.push(y - p);
        }
    }
    let counted = residuals.len();
    if counted == 0 {
        return Err(Error::UndefinedMape);
    }
    Ok(RegressionMetrics {
        target: target.to_string(),
        mape: 100.0 * ape_sum / counted as f64,
        mse,
        residuals,
        excluded_zero_targets: truth.len() - counted,
    })
}
