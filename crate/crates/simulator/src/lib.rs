//! Desk-scale simulation of the EMaaS device farm: hidden ground-truth
//! power models in place of physical monitors, a synthetic app population,
//! peer availability dynamics, and scripted scenarios measuring routing
//! quality, hybrid accuracy and the hardware/software split.

mod appgen;
mod config;
mod ground_truth;
mod report;
mod rng;
mod scenario;

pub use appgen::{AppGenerator, AppGeneratorParams, GeneratedApp};
pub use config::{
    BusyCycleParams, ConfigError, CxMetric, DeviceConfig, GroundTruthParams, ReportParams,
    ScenarioConfig,
};
pub use ground_truth::GroundTruthPowerModel;
pub use report::{
    compare_models, ExperimentReport, JobOutcome, JobOutcomeKind, LoggedEvent, ModelSummary,
    ReplayMismatch, Rq1Report, Rq2Report, Rq3Report, Totals, REPORT_SCHEMA_VERSION,
};
pub use rng::{substream, Substream};
pub use scenario::{run_scenario, scheduler_config, vocabulary};
