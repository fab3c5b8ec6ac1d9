//! Two-slice Gaussian dynamic Bayesian networks over a daily panel: structure
//! learning, parameter fitting and one-day-ahead forecasts of the target.

mod dataset;
mod learn;
mod model;
mod structure;

pub use dataset::{build_slices, ci_test, Slice, TwoSliceDataset};
pub use learn::{learn_structure, Algorithm, LearnerSettings};
pub use model::{fit_parameters, GaussianDbn, NodeParams};
pub use structure::DbnStructure;

use crate::error::{Error, Result};

/// Log return implied by a forecast close, `ln(predicted / last)`.
pub fn forecast_return(predicted_close: f64, last_close: f64) -> Result<f64> {
    if !(predicted_close > 0.0 && last_close > 0.0) {
        return Err(Error::domain(format!(
            "closes must be positive, got predicted {predicted_close} and last {last_close}"
        )));
    }
    Ok((predicted_close / last_close).ln())
}
