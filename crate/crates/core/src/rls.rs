//! Recursive least squares with exponential forgetting.
//!
//! Both the energy model and the reliability model are affine regressors
//! (intercept plus one weight per feature) trained one observation at a
//! time. With forgetting factor 1 the recursion converges to the ordinary
//! least-squares solution regardless of sample order; factors below 1
//! down-weight old observations so the model can track drift.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Tuning knobs shared by every regressor in a deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlsParams {
    /// Forgetting factor in (0, 1]. 1 weights all samples equally.
    pub lambda: f64,
    /// Initial diagonal of the inverse-covariance state. Large values mean
    /// a nearly uninformative prior (tiny implicit ridge of 1/init_variance).
    pub init_variance: f64,
}

impl Default for RlsParams {
    fn default() -> Self {
        Self {
            lambda: 0.999,
            init_variance: 1e8,
        }
    }
}

/// Online affine least-squares state: weights `w` (intercept first) and the
/// inverse-covariance matrix `P`, both over the regressor `[1, x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursiveLeastSquares {
    weights: DVector<f64>,
    inverse_covariance: DMatrix<f64>,
    sample_count: u64,
    lambda: f64,
}

impl RecursiveLeastSquares {
    /// Fresh regressor for feature dimension `dim` (regressor dimension is
    /// `dim + 1` for the intercept).
    pub fn new(dim: usize, params: RlsParams) -> Self {
        let p = dim + 1;
        Self {
            weights: DVector::zeros(p),
            inverse_covariance: DMatrix::identity(p, p) * params.init_variance,
            sample_count: 0,
            lambda: params.lambda,
        }
    }

    /// Restores a regressor from explicit weights, e.g. a snapshot. `P` is
    /// reset to the prior; further updates re-estimate it.
    pub fn with_weights(weights: Vec<f64>, params: RlsParams, sample_count: u64) -> Self {
        let p = weights.len();
        Self {
            weights: DVector::from_vec(weights),
            inverse_covariance: DMatrix::identity(p, p) * params.init_variance,
            sample_count,
            lambda: params.lambda,
        }
    }

    /// Feature dimension (excluding the intercept).
    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Weights as a slice, intercept first.
    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), CoreError> {
        if x.len() != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn regressor(&self, x: &[f64]) -> DVector<f64> {
        let mut z = DVector::zeros(x.len() + 1);
        z[0] = 1.0;
        z.rows_mut(1, x.len()).copy_from_slice(x);
        z
    }

    /// Affine prediction `w . [1, x]`, unclamped.
    pub fn predict(&self, x: &[f64]) -> Result<f64, CoreError> {
        self.check_dim(x)?;
        Ok(self.regressor(x).dot(&self.weights))
    }

    /// One recursive update with target `y`; returns the new state, leaving
    /// `self` untouched. Rejects non-finite inputs.
    pub fn updated(&self, x: &[f64], y: f64) -> Result<Self, CoreError> {
        self.check_dim(x)?;
        if !y.is_finite() {
            return Err(CoreError::NonFinite("target"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("features"));
        }

        let z = self.regressor(x);
        let pz = &self.inverse_covariance * &z;
        let denom = self.lambda + z.dot(&pz);
        let gain = &pz / denom;
        let prior_error = y - z.dot(&self.weights);

        let mut next = self.clone();
        next.weights += &gain * prior_error;
        next.inverse_covariance -= &gain * pz.transpose();
        next.inverse_covariance /= self.lambda;
        // Keep P symmetric against rounding drift.
        let symmetrized = (&next.inverse_covariance + next.inverse_covariance.transpose()) * 0.5;
        next.inverse_covariance = symmetrized;
        next.sample_count += 1;
        Ok(next)
    }
}
