//! Experiment output: per-job outcomes, the research-question metrics, the
//! final model states and the replayable input event log.

use std::collections::BTreeMap;

use emaas_scheduler::{InputEvent, Scheduler};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScenarioConfig;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// How a job ended up (or where it still was when the run stopped).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobOutcomeKind {
    Hardware,
    Model,
    Failed,
    Waiting,
    InFlight,
}

/// One job's scoring row. `reported_power_w` is what the developer got;
/// `software_power_w` is what the energy model would have answered at the
/// same moment (for hardware jobs: the estimate before the result updated
/// the model). Both are compared against the hidden true mean power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub job_id: String,
    pub device_model: String,
    pub is_ood: bool,
    pub submitted_tick: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completed_tick: Option<u64>,
    pub outcome: JobOutcomeKind,
    pub true_mean_power_w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reported_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub software_power_w: Option<f64>,
    /// Hardware samples the device's models had when this job completed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hw_samples_at_completion: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fail_reason: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub submitted: u64,
    pub completed_hardware: u64,
    pub completed_model: u64,
    pub failed: u64,
    pub waiting_at_end: u64,
    pub in_flight_at_end: u64,
}

/// Routing-quality confusion matrix against the generator's OOD label,
/// counted over completions after the per-device warm-up threshold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rq1Report {
    pub warmup_samples: u64,
    pub ood_to_hardware: u64,
    pub ood_to_model: u64,
    pub id_to_hardware: u64,
    pub id_to_model: u64,
    pub ood_hardware_fraction: Option<f64>,
    pub id_hardware_fraction: Option<f64>,
}

/// Paired accuracy of the hybrid policy vs answering everything with the
/// model, on identical jobs against the hidden true mean power.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rq2Report {
    pub jobs_scored: u64,
    pub hybrid_mae_w: Option<f64>,
    pub software_only_mae_w: Option<f64>,
    pub hybrid_mae_windows: Vec<Option<f64>>,
    pub software_only_mae_windows: Vec<Option<f64>>,
}

/// Share of completions answered by hardware over time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rq3Report {
    pub hardware_fraction_windows: Vec<Option<f64>>,
    pub first_quarter_fraction: Option<f64>,
    pub last_quarter_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub energy_samples: u64,
    pub reliability_samples: u64,
    pub energy_weights: Vec<f64>,
    pub reliability_weights: Vec<f64>,
}

/// One scheduler input event with the tick it was applied at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub tick: u64,
    pub event: InputEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub totals: Totals,
    pub rq1: Rq1Report,
    pub rq2: Rq2Report,
    pub rq3: Rq3Report,
    pub final_models: BTreeMap<String, ModelSummary>,
    pub outcomes: Vec<JobOutcome>,
    pub events: Vec<LoggedEvent>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayMismatch {
    #[error("replay rejected event {index}: {message}")]
    Rejected { index: usize, message: String },
    #[error("device {device}: {what} differs: live {live} vs replay {replay}")]
    Diverged {
        device: String,
        what: String,
        live: f64,
        replay: f64,
    },
    #[error("device {device} missing from {side}")]
    MissingDevice { device: String, side: &'static str },
}

impl ExperimentReport {
    /// Replays the embedded event log through a fresh scheduler and checks
    /// the resulting model weights against the recorded final state.
    pub fn verify_replay(&self) -> Result<(), ReplayMismatch> {
        let scheduler_cfg = crate::scenario::scheduler_config(&self.scenario);
        let mut scheduler = Scheduler::new(scheduler_cfg);
        for (index, logged) in self.events.iter().enumerate() {
            scheduler
                .apply(&logged.event)
                .map_err(|e| ReplayMismatch::Rejected {
                    index,
                    message: e.to_string(),
                })?;
        }
        compare_models(&self.final_models, &scheduler, 1e-12)
    }
}

/// Weight-by-weight comparison of recorded summaries against a scheduler.
pub fn compare_models(
    recorded: &BTreeMap<String, ModelSummary>,
    scheduler: &Scheduler,
    tolerance: f64,
) -> Result<(), ReplayMismatch> {
    for (device, summary) in recorded {
        let energy = scheduler
            .energy_model(device)
            .ok_or_else(|| ReplayMismatch::MissingDevice {
                device: device.clone(),
                side: "replay",
            })?;
        let reliability =
            scheduler
                .reliability_model(device)
                .ok_or_else(|| ReplayMismatch::MissingDevice {
                    device: device.clone(),
                    side: "replay",
                })?;
        if energy.sample_count() != summary.energy_samples {
            return Err(ReplayMismatch::Diverged {
                device: device.clone(),
                what: "energy sample count".into(),
                live: summary.energy_samples as f64,
                replay: energy.sample_count() as f64,
            });
        }
        if reliability.sample_count() != summary.reliability_samples {
            return Err(ReplayMismatch::Diverged {
                device: device.clone(),
                what: "reliability sample count".into(),
                live: summary.reliability_samples as f64,
                replay: reliability.sample_count() as f64,
            });
        }
        for (i, (&live, &replayed)) in summary
            .energy_weights
            .iter()
            .zip(energy.weights())
            .enumerate()
        {
            if (live - replayed).abs() > tolerance {
                return Err(ReplayMismatch::Diverged {
                    device: device.clone(),
                    what: format!("energy weight {i}"),
                    live,
                    replay: replayed,
                });
            }
        }
        for (i, (&live, &replayed)) in summary
            .reliability_weights
            .iter()
            .zip(reliability.weights())
            .enumerate()
        {
            if (live - replayed).abs() > tolerance {
                return Err(ReplayMismatch::Diverged {
                    device: device.clone(),
                    what: format!("reliability weight {i}"),
                    live,
                    replay: replayed,
                });
            }
        }
    }
    for device in scheduler.energy_models().keys() {
        if !recorded.contains_key(device) {
            return Err(ReplayMismatch::MissingDevice {
                device: device.clone(),
                side: "report",
            });
        }
    }
    Ok(())
}
