//! Measurement results and the power-error metric that scores the model
//! against hardware ground truth.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// How a measurement was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementSource {
    /// Ground truth from a hardware power monitor at a super-provider.
    Hardware,
    /// Estimate from the device's energy model at a provider.
    Model,
}

/// One completed energy measurement.
///
/// `epsilon_w` is the power error of the model against the hardware value
/// and is present exactly when both values existed for the job, i.e. only on
/// hardware-sourced records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub job_id: String,
    /// Energy over the whole suite, joules.
    pub energy_j: f64,
    /// Suite duration, seconds.
    pub duration_s: f64,
    pub source: MeasurementSource,
    /// Power error in watts, hardware records only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_w: Option<f64>,
    /// Monotonic event index at completion time.
    pub timestamp: u64,
}

impl MeasurementRecord {
    /// Mean power over the suite, watts.
    pub fn mean_power_w(&self) -> f64 {
        self.energy_j / self.duration_s
    }
}

/// Signed power error between a measured and an estimated energy value,
/// in watts: `(E_measured - E_estimated) / delta_t`.
pub fn power_error(
    measured_j: f64,
    estimated_j: f64,
    delta_t_s: f64,
) -> Result<f64, CoreError> {
    if !measured_j.is_finite() {
        return Err(CoreError::NonFinite("measured_j"));
    }
    if !estimated_j.is_finite() {
        return Err(CoreError::NonFinite("estimated_j"));
    }
    if !delta_t_s.is_finite() {
        return Err(CoreError::NonFinite("delta_t_s"));
    }
    if delta_t_s <= 0.0 {
        return Err(CoreError::NonPositiveDuration(delta_t_s));
    }
    Ok((measured_j - estimated_j) / delta_t_s)
}
