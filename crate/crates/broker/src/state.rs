//! The broker's serialized core: every state-changing request locks the
//! inner state, applies its event to the scheduler, appends the event plus
//! everything it derived to the log, and flushes before acknowledging.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use emaas_core::{AppManifest, ExecutionContext, MeasurementRecord, ValidationError};
use emaas_scheduler::{
    DecisionRecord, Effect, InputEvent, JobState, JobStateKind, PeerRole, PeerState, Scheduler,
    SchedulerError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::BrokerConfig;
use crate::log::{EventBody, EventLogWriter, LogError, ModelSnapshot, PeerAction};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("unknown {what} {id}")]
    NotFound { what: &'static str, id: String },
    #[error("peer {peer_id} is not the assignee of job {job_id}")]
    NotAssignee { peer_id: String, job_id: String },
    #[error("peer {0} is already registered")]
    DuplicatePeer(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("job {job_id} failed: {reason}")]
    JobFailed { job_id: String, reason: String },
    #[error("persistence failure: {0}")]
    Log(#[from] LogError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<ValidationError> for ServiceError {
    fn from(e: ValidationError) -> Self {
        ServiceError::Validation {
            path: e.path,
            message: e.message,
        }
    }
}

impl From<SchedulerError> for ServiceError {
    fn from(e: SchedulerError) -> Self {
        match e {
            SchedulerError::DuplicatePeer(id) => ServiceError::DuplicatePeer(id),
            SchedulerError::UnknownPeer(id) => ServiceError::NotFound {
                what: "peer",
                id,
            },
            SchedulerError::UnknownJob(id) => ServiceError::NotFound { what: "job", id },
            SchedulerError::NotAssignee { peer_id, job_id } => {
                ServiceError::NotAssignee { peer_id, job_id }
            }
            SchedulerError::InvalidManifest(v) | SchedulerError::InvalidContext(v) => v.into(),
            SchedulerError::InvalidJobState { .. } | SchedulerError::DuplicateJob(_) => {
                ServiceError::Conflict(e.to_string())
            }
            SchedulerError::IllegalTransition { .. } => ServiceError::Internal(e.to_string()),
        }
    }
}

// ---- wire DTOs -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_token: Option<String>,
    pub manifest: AppManifest,
    pub context: ExecutionContext,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: String,
    pub state: JobStateKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobStatusResponse {
    pub job_id: String,
    pub state: JobStateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<MeasurementRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_position: Option<usize>,
    pub decision_trace: Vec<DecisionRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterPeerRequest {
    pub peer_id: String,
    pub role: PeerRole,
    pub device_model: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeerAck {
    pub peer_id: String,
    pub state: PeerState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeartbeatResponse {
    pub peer_id: String,
    pub state: PeerState,
    /// The work the peer should be running, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Assignment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assignment {
    pub job_id: String,
    pub manifest: AppManifest,
    pub context: ExecutionContext,
    pub suite_duration_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRequest {
    pub job_id: String,
    pub energy_j: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultResponse {
    pub record: MeasurementRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelsResponse {
    pub device_model: String,
    pub energy: ModelDto,
    pub reliability: ModelDto,
    pub theta_w: f64,
    pub min_samples: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDto {
    pub sample_count: u64,
    pub weights: Vec<f64>,
}

// ---- state -----------------------------------------------------------------

pub struct AppState {
    pub cfg: BrokerConfig,
    pub inner: Mutex<Inner>,
}

pub struct Inner {
    pub scheduler: Scheduler,
    log: EventLogWriter,
    idempotency: BTreeMap<String, String>,
    next_job: u64,
    pub last_heartbeat: BTreeMap<String, Instant>,
    events_since_snapshot: u64,
}

impl AppState {
    pub fn new(cfg: BrokerConfig, log: EventLogWriter) -> Result<Self, ValidationError> {
        let scheduler = Scheduler::new(cfg.scheduler_config()?);
        Ok(Self {
            cfg,
            inner: Mutex::new(Inner {
                scheduler,
                log,
                idempotency: BTreeMap::new(),
                next_job: 0,
                last_heartbeat: BTreeMap::new(),
                events_since_snapshot: 0,
            }),
        })
    }
}

impl Inner {
    /// Applies one scheduler event and persists it (enriched with derived
    /// values) plus every decision and model result it caused. Nothing is
    /// considered done until the log flush returns.
    fn apply_and_log(
        &mut self,
        event: InputEvent,
        request_token: Option<String>,
        snapshot_every: u64,
    ) -> Result<Vec<Effect>, ServiceError> {
        let effects = self.scheduler.apply(&event)?;

        let input_body = match &event {
            InputEvent::SubmitJob {
                job_id,
                manifest,
                context,
            } => EventBody::JobSubmitted {
                job_id: job_id.clone(),
                request_token,
                manifest: manifest.clone(),
                context: context.clone(),
            },
            InputEvent::RegisterPeer {
                peer_id,
                role,
                device_model,
            } => EventBody::PeerEvent {
                action: PeerAction::Register,
                peer_id: peer_id.clone(),
                role: Some(*role),
                device_model: Some(device_model.clone()),
            },
            InputEvent::Heartbeat { peer_id } => EventBody::PeerEvent {
                action: PeerAction::Heartbeat,
                peer_id: peer_id.clone(),
                role: None,
                device_model: None,
            },
            InputEvent::PeerOffline { peer_id } => EventBody::PeerEvent {
                action: PeerAction::Offline,
                peer_id: peer_id.clone(),
                role: None,
                device_model: None,
            },
            InputEvent::HardwareResult {
                peer_id,
                job_id,
                energy_j,
                duration_s,
            } => {
                // Enrich with the derived measurement, when one was produced.
                let measured = effects.iter().find_map(|e| match e {
                    Effect::HardwareMeasured {
                        record,
                        estimated_j,
                    } if record.job_id == *job_id => Some((record.epsilon_w, *estimated_j)),
                    _ => None,
                });
                EventBody::HardwareResult {
                    job_id: job_id.clone(),
                    peer_id: peer_id.clone(),
                    energy_j: *energy_j,
                    duration_s: *duration_s,
                    epsilon_w: measured.and_then(|(e, _)| e),
                    estimated_j: measured.map(|(_, est)| est),
                }
            }
            InputEvent::FailWaiting { .. } => {
                return Err(ServiceError::Internal(
                    "fail_waiting is not a service event".into(),
                ))
            }
        };

        self.log.append(input_body)?;
        for body in derived_events(&effects) {
            self.log.append(body)?;
        }

        self.events_since_snapshot += 1;
        if self.events_since_snapshot >= snapshot_every {
            self.append_snapshot()?;
            self.events_since_snapshot = 0;
        }
        self.log.flush()?;
        Ok(effects)
    }

    fn append_snapshot(&mut self) -> Result<(), ServiceError> {
        let mut models = BTreeMap::new();
        for (device, energy) in self.scheduler.energy_models() {
            let Some(reliability) = self.scheduler.reliability_model(device) else {
                continue;
            };
            models.insert(
                device.clone(),
                ModelSnapshot {
                    energy: energy.clone(),
                    reliability: reliability.clone(),
                },
            );
        }
        if !models.is_empty() {
            self.log.append(EventBody::ModelSnapshotRef { models })?;
        }
        Ok(())
    }

    // ---- operations --------------------------------------------------------

    pub fn submit(
        &mut self,
        req: SubmitRequest,
        snapshot_every: u64,
    ) -> Result<SubmitResponse, ServiceError> {
        req.manifest.validate()?;
        req.context.validate()?;

        if let Some(token) = &req.request_token {
            if let Some(job_id) = self.idempotency.get(token).cloned() {
                let state = self.scheduler.job(&job_id).map(|j| j.state.kind());
                return Ok(SubmitResponse {
                    job_id,
                    state: state.unwrap_or(JobStateKind::Submitted),
                });
            }
        }

        self.next_job += 1;
        let job_id = format!("job-{:06}", self.next_job);
        self.apply_and_log(
            InputEvent::SubmitJob {
                job_id: job_id.clone(),
                manifest: req.manifest,
                context: req.context,
            },
            snapshot_every,
        )?;
        if let Some(token) = req.request_token {
            self.idempotency.insert(token, job_id.clone());
        }
        let state = self
            .scheduler
            .job(&job_id)
            .map(|j| j.state.kind())
            .unwrap_or(JobStateKind::Submitted);
        Ok(SubmitResponse { job_id, state })
    }

    pub fn job_status(&self, job_id: &str) -> Result<JobStatusResponse, ServiceError> {
        let job = self.scheduler.job(job_id).ok_or_else(|| ServiceError::NotFound {
            what: "job",
            id: job_id.to_string(),
        })?;
        let (record, fail_reason) = match &job.state {
            JobState::Completed { record } => (Some(record.clone()), None),
            JobState::Failed { reason } => (None, Some(reason.clone())),
            _ => (None, None),
        };
        Ok(JobStatusResponse {
            job_id: job.job_id.clone(),
            state: job.state.kind(),
            record,
            fail_reason,
            queue_position: self.scheduler.queue_position(job_id),
            decision_trace: job.decision_trace.clone(),
        })
    }

    pub fn register_peer(
        &mut self,
        req: RegisterPeerRequest,
        snapshot_every: u64,
    ) -> Result<PeerAck, ServiceError> {
        if req.peer_id.is_empty() {
            return Err(ServiceError::Validation {
                path: "peer_id".into(),
                message: "must be non-empty".into(),
            });
        }
        if req.device_model.is_empty() {
            return Err(ServiceError::Validation {
                path: "device_model".into(),
                message: "must be non-empty".into(),
            });
        }
        self.apply_and_log(
            InputEvent::RegisterPeer {
                peer_id: req.peer_id.clone(),
                role: req.role,
                device_model: req.device_model,
            },
            snapshot_every,
        )?;
        self.last_heartbeat.insert(req.peer_id.clone(), Instant::now());
        Ok(PeerAck {
            state: self.scheduler.peer(&req.peer_id).expect("registered").state,
            peer_id: req.peer_id,
        })
    }

    pub fn heartbeat(
        &mut self,
        peer_id: &str,
        snapshot_every: u64,
    ) -> Result<HeartbeatResponse, ServiceError> {
        self.apply_and_log(
            InputEvent::Heartbeat {
                peer_id: peer_id.to_string(),
            },
            snapshot_every,
        )?;
        self.last_heartbeat.insert(peer_id.to_string(), Instant::now());

        let peer = self.scheduler.peer(peer_id).expect("heartbeat validated");
        let assignment = peer.current_job.as_ref().and_then(|job_id| {
            self.scheduler.job(job_id).map(|job| Assignment {
                job_id: job.job_id.clone(),
                manifest: job.manifest.clone(),
                context: job.context.clone(),
                suite_duration_s: job.manifest.suite_duration_s(),
            })
        });
        Ok(HeartbeatResponse {
            peer_id: peer_id.to_string(),
            state: peer.state,
            assignment,
        })
    }

    pub fn peer_offline(
        &mut self,
        peer_id: &str,
        snapshot_every: u64,
    ) -> Result<PeerAck, ServiceError> {
        self.apply_and_log(
            InputEvent::PeerOffline {
                peer_id: peer_id.to_string(),
            },
            snapshot_every,
        )?;
        Ok(PeerAck {
            peer_id: peer_id.to_string(),
            state: PeerState::Offline,
        })
    }

    pub fn submit_result(
        &mut self,
        peer_id: &str,
        req: ResultRequest,
        snapshot_every: u64,
    ) -> Result<ResultResponse, ServiceError> {
        let effects = self.apply_and_log(
            InputEvent::HardwareResult {
                peer_id: peer_id.to_string(),
                job_id: req.job_id.clone(),
                energy_j: req.energy_j,
                duration_s: req.duration_s,
            },
            snapshot_every,
        )?;
        self.last_heartbeat.insert(peer_id.to_string(), Instant::now());

        for effect in &effects {
            if let Effect::HardwareMeasured { record, .. } = effect {
                if record.job_id == req.job_id {
                    return Ok(ResultResponse {
                        record: record.clone(),
                    });
                }
            }
        }
        // The measurement was rejected and the job failed; the failure is
        // already persisted.
        let reason = match self.scheduler.job(&req.job_id).map(|j| &j.state) {
            Some(JobState::Failed { reason }) => reason.clone(),
            _ => "invalid measurement".to_string(),
        };
        Err(ServiceError::JobFailed {
            job_id: req.job_id,
            reason,
        })
    }

    pub fn models(&self, device_model: &str) -> Result<ModelsResponse, ServiceError> {
        let energy = self
            .scheduler
            .energy_model(device_model)
            .ok_or_else(|| ServiceError::NotFound {
                what: "device model",
                id: device_model.to_string(),
            })?;
        let reliability = self
            .scheduler
            .reliability_model(device_model)
            .ok_or_else(|| ServiceError::NotFound {
                what: "device model",
                id: device_model.to_string(),
            })?;
        Ok(ModelsResponse {
            device_model: device_model.to_string(),
            energy: ModelDto {
                sample_count: energy.sample_count(),
                weights: energy.weights().to_vec(),
            },
            reliability: ModelDto {
                sample_count: reliability.sample_count(),
                weights: reliability.weights().to_vec(),
            },
            theta_w: reliability.theta_w(),
            min_samples: reliability.gate().min_samples,
        })
    }

    /// Marks peers silent for longer than `timeout_s` offline. Returns how
    /// many were swept.
    pub fn sweep_stale_peers(
        &mut self,
        timeout_s: f64,
        snapshot_every: u64,
    ) -> Result<usize, ServiceError> {
        let stale: Vec<String> = self
            .scheduler
            .peers()
            .filter(|p| p.state != PeerState::Offline)
            .filter(|p| {
                self.last_heartbeat
                    .get(&p.peer_id)
                    .map(|t| t.elapsed().as_secs_f64() > timeout_s)
                    .unwrap_or(false)
            })
            .map(|p| p.peer_id.clone())
            .collect();
        let count = stale.len();
        for peer_id in stale {
            self.apply_and_log(InputEvent::PeerOffline { peer_id }, snapshot_every)?;
        }
        Ok(count)
    }
}

/// Log bodies for the derived (recomputable) events in an effect batch.
fn derived_events(effects: &[Effect]) -> Vec<EventBody> {
    effects
        .iter()
        .filter_map(|effect| match effect {
            Effect::Decided {
                job_id,
                decision,
                predicted_abs_error_w,
            } => Some(EventBody::Decision {
                job_id: job_id.clone(),
                decision: decision.clone(),
                predicted_abs_error_w: *predicted_abs_error_w,
            }),
            Effect::ModelEstimated { record } => Some(EventBody::ModelResult {
                record: record.clone(),
            }),
            _ => None,
        })
        .collect()
}
