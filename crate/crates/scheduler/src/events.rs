use emaas_core::{AppManifest, ExecutionContext, MeasurementRecord};
use serde::{Deserialize, Serialize};

use crate::job::{Decision, JobStateKind};
use crate::peer::PeerRole;

/// The serialized inputs of the scheduler state machine. Applying the same
/// sequence of input events to a fresh scheduler always reproduces the same
/// state and the same effects, which is what makes logs replayable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputEvent {
    SubmitJob {
        job_id: String,
        manifest: AppManifest,
        context: ExecutionContext,
    },
    RegisterPeer {
        peer_id: String,
        role: PeerRole,
        device_model: String,
    },
    Heartbeat {
        peer_id: String,
    },
    PeerOffline {
        peer_id: String,
    },
    HardwareResult {
        peer_id: String,
        job_id: String,
        energy_j: f64,
        duration_s: f64,
    },
    /// Gives up on a waiting job (wait-time bound exceeded, operator cancel).
    FailWaiting {
        job_id: String,
        reason: String,
    },
}

/// Everything observable that one input event caused, in order. Effects are
/// the audit surface: invariants like "exactly one model update per hardware
/// result" are checked against them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    Transition {
        job_id: String,
        from: JobStateKind,
        to: JobStateKind,
    },
    Decided {
        job_id: String,
        #[serde(flatten)]
        decision: Decision,
        #[serde(skip_serializing_if = "Option::is_none")]
        predicted_abs_error_w: Option<f64>,
    },
    EnergyModelUpdated {
        device_model: String,
        job_id: String,
        sample_count: u64,
    },
    ReliabilityModelUpdated {
        device_model: String,
        job_id: String,
        sample_count: u64,
    },
    /// A hardware measurement completed; `estimated_j` is what the energy
    /// model predicted before it was updated with this result.
    HardwareMeasured {
        record: MeasurementRecord,
        estimated_j: f64,
    },
    /// A model estimate was returned to the developer.
    ModelEstimated {
        record: MeasurementRecord,
    },
    /// A job lost its peer and went back to the head of its device queue.
    JobRequeued {
        job_id: String,
        reason: String,
    },
}
