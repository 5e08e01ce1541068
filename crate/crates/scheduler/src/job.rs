use emaas_core::{AppManifest, ExecutionContext, MeasurementRecord, MeasurementSource};
use serde::{Deserialize, Serialize};

/// Lifecycle state of a measurement job.
///
/// Jobs assigned to a model complete within the same scheduling step, so
/// `AssignedModel` and its `Running` phase are transient. A job on a peer
/// that goes offline returns to `Waiting` at the head of its device queue;
/// the requeue is surfaced as an explicit effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Submitted,
    Waiting,
    AssignedHardware { peer_id: String },
    AssignedModel { peer_id: String },
    Running { peer_id: String, source: MeasurementSource },
    Completed { record: MeasurementRecord },
    Failed { reason: String },
}

/// State-machine node without payloads, for transition checking and traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStateKind {
    Submitted,
    Waiting,
    AssignedHardware,
    AssignedModel,
    Running,
    Completed,
    Failed,
}

impl JobState {
    pub fn kind(&self) -> JobStateKind {
        match self {
            JobState::Submitted => JobStateKind::Submitted,
            JobState::Waiting => JobStateKind::Waiting,
            JobState::AssignedHardware { .. } => JobStateKind::AssignedHardware,
            JobState::AssignedModel { .. } => JobStateKind::AssignedModel,
            JobState::Running { .. } => JobStateKind::Running,
            JobState::Completed { .. } => JobStateKind::Completed,
            JobState::Failed { .. } => JobStateKind::Failed,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, JobState::Completed { .. } | JobState::Failed { .. })
    }
}

/// The legal job transitions. Requeue-on-peer-loss (back to `Waiting`) and
/// failure edges from every non-terminal state are part of the machine.
pub fn transition_allowed(from: JobStateKind, to: JobStateKind) -> bool {
    use JobStateKind::*;
    matches!(
        (from, to),
        (Submitted, AssignedHardware)
            | (Submitted, AssignedModel)
            | (Submitted, Waiting)
            | (Submitted, Failed)
            | (Waiting, AssignedHardware)
            | (Waiting, AssignedModel)
            | (Waiting, Failed)
            | (AssignedHardware, Running)
            | (AssignedHardware, Waiting)
            | (AssignedHardware, Failed)
            | (AssignedModel, Running)
            | (AssignedModel, Failed)
            | (Running, Completed)
            | (Running, Waiting)
            | (Running, Failed)
    )
}

/// Outcome of one routing evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Decision {
    AssignHardware { peer_id: String },
    AssignModel { peer_id: String },
    Wait,
    Fail { reason: String },
}

/// One routing evaluation as recorded in a job's decision trace, including
/// what the reliability model predicted at that moment (absent while no
/// reliability model exists for the device).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub at_event: u64,
    #[serde(flatten)]
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_abs_error_w: Option<f64>,
}

/// A measurement request moving through the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub manifest: AppManifest,
    pub context: ExecutionContext,
    pub state: JobState,
    pub submitted_at: u64,
    pub decision_trace: Vec<DecisionRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_states_have_no_outgoing_edges() {
        use JobStateKind::*;
        for to in [
            Submitted,
            Waiting,
            AssignedHardware,
            AssignedModel,
            Running,
            Completed,
            Failed,
        ] {
            assert!(!transition_allowed(Completed, to));
            assert!(!transition_allowed(Failed, to));
        }
    }

    #[test]
    fn submitted_cannot_jump_to_running_or_completed() {
        assert!(!transition_allowed(
            JobStateKind::Submitted,
            JobStateKind::Running
        ));
        assert!(!transition_allowed(
            JobStateKind::Submitted,
            JobStateKind::Completed
        ));
        assert!(!transition_allowed(
            JobStateKind::Waiting,
            JobStateKind::Completed
        ));
    }
}
