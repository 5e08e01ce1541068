//! Core domain logic for EMaaS: turning app manifests into feature vectors,
//! estimating energy from online per-device power models, scoring those
//! estimates against hardware ground truth, and deciding when a model answer
//! is reliable enough to return.
//!
//! Everything here is pure and deterministic: no clocks, no randomness, no
//! hidden state. Model updates return a new model value; serializing writes
//! per device is the caller's job.

mod error;
mod features;
mod measurement;
mod models;
mod rls;

pub use error::{CoreError, ValidationError};
pub use features::{
    extract_features, ApiVocabulary, AppManifest, ExecutionContext, FeatureSpace, FeatureVector,
    TestCase,
};
pub use measurement::{power_error, MeasurementRecord, MeasurementSource};
pub use models::{EnergyModel, GateParams, ReliabilityModel};
pub use rls::{RecursiveLeastSquares, RlsParams};
