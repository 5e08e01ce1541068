//! Per-device energy and reliability models.
//!
//! The energy model maps features to mean power in watts, so an energy
//! estimate is prediction times duration. The reliability model predicts the
//! magnitude of the energy model's power error for a request and gates
//! whether a model answer may be returned at all. Both are trained online
//! from hardware ground truth; updates are pure (old state in, new state
//! out) so the caller controls write serialization.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::features::FeatureVector;
use crate::rls::{RecursiveLeastSquares, RlsParams};

/// Reliability gate settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    /// Highest predicted |power error| (watts) still considered reliable.
    pub theta_w: f64,
    /// Hardware samples required before the gate may pass at all.
    pub min_samples: u64,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            theta_w: 0.25,
            min_samples: 30,
        }
    }
}

/// Online affine regressor from features to mean power (watts) for one
/// device model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    device_model: String,
    rls: RecursiveLeastSquares,
}

impl EnergyModel {
    pub fn new(device_model: impl Into<String>, dim: usize, params: RlsParams) -> Self {
        Self {
            device_model: device_model.into(),
            rls: RecursiveLeastSquares::new(dim, params),
        }
    }

    /// Restores a model from explicit weights (intercept first).
    pub fn with_weights(
        device_model: impl Into<String>,
        weights: Vec<f64>,
        params: RlsParams,
        sample_count: u64,
    ) -> Self {
        Self {
            device_model: device_model.into(),
            rls: RecursiveLeastSquares::with_weights(weights, params, sample_count),
        }
    }

    pub fn device_model(&self) -> &str {
        &self.device_model
    }

    pub fn dim(&self) -> usize {
        self.rls.dim()
    }

    /// Hardware samples this model has been trained on.
    pub fn sample_count(&self) -> u64 {
        self.rls.sample_count()
    }

    pub fn lambda(&self) -> f64 {
        self.rls.lambda()
    }

    pub fn weights(&self) -> &[f64] {
        self.rls.weights()
    }

    /// Predicted mean power in watts, clamped to be non-negative.
    pub fn estimate_power(&self, x: &FeatureVector) -> Result<f64, CoreError> {
        Ok(self.rls.predict(x.values())?.max(0.0))
    }

    /// Predicted energy in joules over `duration_s`.
    pub fn estimate_energy(&self, x: &FeatureVector, duration_s: f64) -> Result<f64, CoreError> {
        if !duration_s.is_finite() {
            return Err(CoreError::NonFinite("duration_s"));
        }
        if duration_s <= 0.0 {
            return Err(CoreError::NonPositiveDuration(duration_s));
        }
        Ok(self.estimate_power(x)? * duration_s)
    }

    /// One training step from a hardware measurement: the target is the
    /// observed mean power `measured_j / duration_s`. Returns the updated
    /// model; on error the old model is still valid and unchanged.
    pub fn updated(
        &self,
        x: &FeatureVector,
        measured_j: f64,
        duration_s: f64,
    ) -> Result<Self, CoreError> {
        if !measured_j.is_finite() {
            return Err(CoreError::NonFinite("measured_j"));
        }
        if !duration_s.is_finite() {
            return Err(CoreError::NonFinite("duration_s"));
        }
        if duration_s <= 0.0 {
            return Err(CoreError::NonPositiveDuration(duration_s));
        }
        Ok(Self {
            device_model: self.device_model.clone(),
            rls: self.rls.updated(x.values(), measured_j / duration_s)?,
        })
    }
}

/// Predicts |power error| of the energy model for a request and applies the
/// reliability gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityModel {
    device_model: String,
    rls: RecursiveLeastSquares,
    gate: GateParams,
}

impl ReliabilityModel {
    pub fn new(
        device_model: impl Into<String>,
        dim: usize,
        params: RlsParams,
        gate: GateParams,
    ) -> Self {
        Self {
            device_model: device_model.into(),
            rls: RecursiveLeastSquares::new(dim, params),
            gate,
        }
    }

    pub fn with_weights(
        device_model: impl Into<String>,
        weights: Vec<f64>,
        params: RlsParams,
        gate: GateParams,
        sample_count: u64,
    ) -> Self {
        Self {
            device_model: device_model.into(),
            rls: RecursiveLeastSquares::with_weights(weights, params, sample_count),
            gate,
        }
    }

    pub fn device_model(&self) -> &str {
        &self.device_model
    }

    pub fn dim(&self) -> usize {
        self.rls.dim()
    }

    pub fn sample_count(&self) -> u64 {
        self.rls.sample_count()
    }

    pub fn gate(&self) -> GateParams {
        self.gate
    }

    pub fn theta_w(&self) -> f64 {
        self.gate.theta_w
    }

    pub fn weights(&self) -> &[f64] {
        self.rls.weights()
    }

    /// Predicted |power error| in watts, clamped to be non-negative.
    pub fn predict_abs_error(&self, x: &FeatureVector) -> Result<f64, CoreError> {
        Ok(self.rls.predict(x.values())?.max(0.0))
    }

    /// Gate decision: passes iff the model has seen enough hardware samples
    /// and the predicted |power error| does not exceed theta (inclusive).
    /// A prediction that cannot be computed never passes.
    pub fn is_reliable(&self, x: &FeatureVector) -> bool {
        if self.rls.sample_count() < self.gate.min_samples {
            return false;
        }
        match self.predict_abs_error(x) {
            Ok(err) => err <= self.gate.theta_w,
            Err(_) => false,
        }
    }

    /// One training step from an observed power error; the regression target
    /// is its magnitude.
    pub fn updated(&self, x: &FeatureVector, epsilon_w: f64) -> Result<Self, CoreError> {
        if !epsilon_w.is_finite() {
            return Err(CoreError::NonFinite("epsilon_w"));
        }
        Ok(Self {
            device_model: self.device_model.clone(),
            rls: self.rls.updated(x.values(), epsilon_w.abs())?,
            gate: self.gate,
        })
    }
}
