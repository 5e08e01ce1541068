use std::collections::{BTreeMap, VecDeque};

use emaas_core::{
    power_error, EnergyModel, FeatureSpace, GateParams, MeasurementRecord, MeasurementSource,
    ReliabilityModel, RlsParams, ValidationError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Effect, InputEvent};
use crate::job::{transition_allowed, Decision, DecisionRecord, Job, JobState, JobStateKind};
use crate::peer::{PeerRecord, PeerRole, PeerState};

/// Deployment-wide scheduler settings: the feature layout shared by every
/// model, the reliability gate, and the regression knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub feature_space: FeatureSpace,
    pub gate: GateParams,
    pub rls: RlsParams,
}

/// Caller errors. These reject the event before any state changes; job-level
/// failures (bad measurements, lost peers) are effects, not errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error("peer {0} is already registered")]
    DuplicatePeer(String),
    #[error("unknown peer {0}")]
    UnknownPeer(String),
    #[error("job {0} is already known")]
    DuplicateJob(String),
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("peer {peer_id} is not assigned job {job_id}")]
    NotAssignee { peer_id: String, job_id: String },
    #[error("job {job_id} is in state {actual:?}, expected {expected}")]
    InvalidJobState {
        job_id: String,
        expected: &'static str,
        actual: JobStateKind,
    },
    #[error("invalid manifest: {0}")]
    InvalidManifest(ValidationError),
    #[error("invalid context: {0}")]
    InvalidContext(ValidationError),
    #[error("illegal transition for job {job_id}: {from:?} -> {to:?}")]
    IllegalTransition {
        job_id: String,
        from: JobStateKind,
        to: JobStateKind,
    },
}

/// Live counters exposed by the service metrics endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub completed_hardware: u64,
    pub completed_model: u64,
    pub failed: u64,
    pub waiting: u64,
    pub queue_depths: BTreeMap<String, usize>,
    pub devices: BTreeMap<String, DeviceMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub energy_samples: u64,
    pub reliability_samples: u64,
    pub theta_w: f64,
}

/// Single-writer scheduling state machine.
///
/// All mutations flow through [`Scheduler::apply`]; reads never mutate. The
/// registry (peers, jobs, queues, models) lives in ordered maps so iteration
/// order, and with it every decision, is deterministic.
#[derive(Debug, Clone)]
pub struct Scheduler {
    cfg: SchedulerConfig,
    event_index: u64,
    peers: BTreeMap<String, PeerRecord>,
    jobs: BTreeMap<String, Job>,
    wait_queues: BTreeMap<String, VecDeque<String>>,
    energy_models: BTreeMap<String, EnergyModel>,
    reliability_models: BTreeMap<String, ReliabilityModel>,
    completed_hardware: u64,
    completed_model: u64,
    failed: u64,
}

impl Scheduler {
    pub fn new(cfg: SchedulerConfig) -> Self {
        Self {
            cfg,
            event_index: 0,
            peers: BTreeMap::new(),
            jobs: BTreeMap::new(),
            wait_queues: BTreeMap::new(),
            energy_models: BTreeMap::new(),
            reliability_models: BTreeMap::new(),
            completed_hardware: 0,
            completed_model: 0,
            failed: 0,
        }
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.cfg
    }

    /// Applies one input event, returning everything it caused. Errors
    /// reject the event with no state change at all.
    pub fn apply(&mut self, event: &InputEvent) -> Result<Vec<Effect>, SchedulerError> {
        match event {
            InputEvent::SubmitJob {
                job_id,
                manifest,
                context,
            } => self.submit_job(job_id, manifest, context),
            InputEvent::RegisterPeer {
                peer_id,
                role,
                device_model,
            } => self.register_peer(peer_id, *role, device_model),
            InputEvent::Heartbeat { peer_id } => self.heartbeat(peer_id),
            InputEvent::PeerOffline { peer_id } => self.peer_offline(peer_id),
            InputEvent::HardwareResult {
                peer_id,
                job_id,
                energy_j,
                duration_s,
            } => self.hardware_result(peer_id, job_id, *energy_j, *duration_s),
            InputEvent::FailWaiting { job_id, reason } => self.fail_waiting(job_id, reason),
        }
    }

    /// Replays a recorded event stream onto a fresh scheduler, returning the
    /// per-event effects alongside the final state. Events that were valid
    /// when recorded are valid again; an error means the log does not belong
    /// to this configuration.
    pub fn replay<'a>(
        cfg: SchedulerConfig,
        events: impl IntoIterator<Item = &'a InputEvent>,
    ) -> Result<(Self, Vec<Vec<Effect>>), SchedulerError> {
        let mut scheduler = Self::new(cfg);
        let mut all = Vec::new();
        for event in events {
            all.push(scheduler.apply(event)?);
        }
        Ok((scheduler, all))
    }

    // ---- reads ------------------------------------------------------------

    pub fn event_index(&self) -> u64 {
        self.event_index
    }

    pub fn job(&self, job_id: &str) -> Option<&Job> {
        self.jobs.get(job_id)
    }

    pub fn jobs(&self) -> impl Iterator<Item = &Job> {
        self.jobs.values()
    }

    pub fn peer(&self, peer_id: &str) -> Option<&PeerRecord> {
        self.peers.get(peer_id)
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerRecord> {
        self.peers.values()
    }

    pub fn energy_model(&self, device_model: &str) -> Option<&EnergyModel> {
        self.energy_models.get(device_model)
    }

    pub fn energy_models(&self) -> &BTreeMap<String, EnergyModel> {
        &self.energy_models
    }

    pub fn reliability_model(&self, device_model: &str) -> Option<&ReliabilityModel> {
        self.reliability_models.get(device_model)
    }

    pub fn reliability_models(&self) -> &BTreeMap<String, ReliabilityModel> {
        &self.reliability_models
    }

    /// Position in the wait queue (0 = next up), for waiting jobs.
    pub fn queue_position(&self, job_id: &str) -> Option<usize> {
        let job = self.jobs.get(job_id)?;
        self.wait_queues
            .get(&job.context.device_model)?
            .iter()
            .position(|id| id == job_id)
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        let queue_depths: BTreeMap<String, usize> = self
            .wait_queues
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(d, q)| (d.clone(), q.len()))
            .collect();
        let mut devices = BTreeMap::new();
        for (device, model) in &self.energy_models {
            let rc = self.reliability_models.get(device);
            devices.insert(
                device.clone(),
                DeviceMetrics {
                    energy_samples: model.sample_count(),
                    reliability_samples: rc.map(|r| r.sample_count()).unwrap_or(0),
                    theta_w: rc.map(|r| r.theta_w()).unwrap_or(self.cfg.gate.theta_w),
                },
            );
        }
        MetricsSnapshot {
            completed_hardware: self.completed_hardware,
            completed_model: self.completed_model,
            failed: self.failed,
            waiting: self.wait_queues.values().map(|q| q.len() as u64).sum(),
            queue_depths,
            devices,
        }
    }

    /// Installs pre-trained models for a device, e.g. restored from a
    /// snapshot or seeded for an experiment.
    pub fn install_models(
        &mut self,
        device_model: &str,
        energy: EnergyModel,
        reliability: ReliabilityModel,
    ) {
        self.energy_models.insert(device_model.to_string(), energy);
        self.reliability_models
            .insert(device_model.to_string(), reliability);
    }

    // ---- event handlers ---------------------------------------------------

    fn submit_job(
        &mut self,
        job_id: &str,
        manifest: &emaas_core::AppManifest,
        context: &emaas_core::ExecutionContext,
    ) -> Result<Vec<Effect>, SchedulerError> {
        if self.jobs.contains_key(job_id) {
            return Err(SchedulerError::DuplicateJob(job_id.to_string()));
        }
        manifest
            .validate()
            .map_err(SchedulerError::InvalidManifest)?;
        context.validate().map_err(SchedulerError::InvalidContext)?;

        self.event_index += 1;
        self.jobs.insert(
            job_id.to_string(),
            Job {
                job_id: job_id.to_string(),
                manifest: manifest.clone(),
                context: context.clone(),
                state: JobState::Submitted,
                submitted_at: self.event_index,
                decision_trace: Vec::new(),
            },
        );

        let mut effects = Vec::new();
        self.route_job(job_id, &mut effects)?;
        Ok(effects)
    }

    fn register_peer(
        &mut self,
        peer_id: &str,
        role: PeerRole,
        device_model: &str,
    ) -> Result<Vec<Effect>, SchedulerError> {
        if self.peers.contains_key(peer_id) {
            return Err(SchedulerError::DuplicatePeer(peer_id.to_string()));
        }
        self.event_index += 1;
        self.peers.insert(
            peer_id.to_string(),
            PeerRecord::new(peer_id.to_string(), role, device_model.to_string()),
        );
        let mut effects = Vec::new();
        self.drain_queue(device_model, &mut effects)?;
        Ok(effects)
    }

    fn heartbeat(&mut self, peer_id: &str) -> Result<Vec<Effect>, SchedulerError> {
        let peer = self
            .peers
            .get(peer_id)
            .ok_or_else(|| SchedulerError::UnknownPeer(peer_id.to_string()))?;
        self.event_index += 1;
        let device = peer.device_model.clone();
        let mut effects = Vec::new();
        match peer.state {
            // A heartbeat from an offline peer brings it back into service.
            PeerState::Offline => {
                self.peers.get_mut(peer_id).unwrap().state = PeerState::Idle;
                self.drain_queue(&device, &mut effects)?;
            }
            // A busy peer heartbeating acknowledges its assignment.
            PeerState::Busy => {
                if let Some(job_id) = self.peers[peer_id].current_job.clone() {
                    if matches!(
                        self.jobs[&job_id].state,
                        JobState::AssignedHardware { .. }
                    ) {
                        self.transition(
                            &job_id,
                            JobState::Running {
                                peer_id: peer_id.to_string(),
                                source: MeasurementSource::Hardware,
                            },
                            &mut effects,
                        )?;
                    }
                }
            }
            PeerState::Idle => {}
        }
        Ok(effects)
    }

    fn peer_offline(&mut self, peer_id: &str) -> Result<Vec<Effect>, SchedulerError> {
        let peer = self
            .peers
            .get(peer_id)
            .ok_or_else(|| SchedulerError::UnknownPeer(peer_id.to_string()))?;
        self.event_index += 1;
        let device = peer.device_model.clone();
        let lost_job = peer.current_job.clone();
        let mut effects = Vec::new();

        {
            let peer = self.peers.get_mut(peer_id).unwrap();
            peer.state = PeerState::Offline;
            peer.current_job = None;
        }

        if let Some(job_id) = lost_job {
            // The victim goes back to the head of the queue, ahead of
            // everyone it already waited behind once.
            self.transition(&job_id, JobState::Waiting, &mut effects)?;
            self.wait_queues
                .entry(device.clone())
                .or_default()
                .push_front(job_id.clone());
            effects.push(Effect::JobRequeued {
                job_id,
                reason: "peer lost".to_string(),
            });
        }
        // Another idle peer may be able to take the head job right away.
        self.drain_queue(&device, &mut effects)?;
        Ok(effects)
    }

    fn hardware_result(
        &mut self,
        peer_id: &str,
        job_id: &str,
        energy_j: f64,
        duration_s: f64,
    ) -> Result<Vec<Effect>, SchedulerError> {
        let peer = self
            .peers
            .get(peer_id)
            .ok_or_else(|| SchedulerError::UnknownPeer(peer_id.to_string()))?;
        if !self.jobs.contains_key(job_id) {
            return Err(SchedulerError::UnknownJob(job_id.to_string()));
        }
        if peer.current_job.as_deref() != Some(job_id) {
            return Err(SchedulerError::NotAssignee {
                peer_id: peer_id.to_string(),
                job_id: job_id.to_string(),
            });
        }
        let state_kind = self.jobs[job_id].state.kind();
        if !matches!(
            state_kind,
            JobStateKind::AssignedHardware | JobStateKind::Running
        ) {
            return Err(SchedulerError::InvalidJobState {
                job_id: job_id.to_string(),
                expected: "assigned_hardware or running",
                actual: state_kind,
            });
        }

        self.event_index += 1;
        let device = self.peers[peer_id].device_model.clone();
        let mut effects = Vec::new();

        // Result arrival implies the peer ran the suite.
        if state_kind == JobStateKind::AssignedHardware {
            self.transition(
                job_id,
                JobState::Running {
                    peer_id: peer_id.to_string(),
                    source: MeasurementSource::Hardware,
                },
                &mut effects,
            )?;
        }

        let valid = energy_j.is_finite() && energy_j >= 0.0 && duration_s.is_finite()
            && duration_s > 0.0;
        if !valid {
            self.transition(
                job_id,
                JobState::Failed {
                    reason: format!(
                        "invalid measurement: energy_j={energy_j}, duration_s={duration_s}"
                    ),
                },
                &mut effects,
            )?;
            self.failed += 1;
            self.release_peer(peer_id);
            self.drain_queue(&device, &mut effects)?;
            return Ok(effects);
        }

        // Dual measurement: estimate with the current model, score it
        // against the hardware value, then feed both models.
        let dim = self.cfg.feature_space.dim();
        let rls = self.cfg.rls;
        let gate = self.cfg.gate;
        let x = self.cfg.feature_space.extract(&self.jobs[job_id].manifest);

        let energy_model = self
            .energy_models
            .entry(device.clone())
            .or_insert_with(|| EnergyModel::new(device.clone(), dim, rls));
        let estimated_j = energy_model
            .estimate_energy(&x, duration_s)
            .expect("validated duration");
        let epsilon_w = power_error(energy_j, estimated_j, duration_s).expect("validated inputs");
        let updated_energy = energy_model
            .updated(&x, energy_j, duration_s)
            .expect("validated inputs");
        let energy_samples = updated_energy.sample_count();
        self.energy_models.insert(device.clone(), updated_energy);

        let rc = self
            .reliability_models
            .entry(device.clone())
            .or_insert_with(|| ReliabilityModel::new(device.clone(), dim, rls, gate));
        let updated_rc = rc.updated(&x, epsilon_w).expect("validated inputs");
        let reliability_samples = updated_rc.sample_count();
        self.reliability_models.insert(device.clone(), updated_rc);

        effects.push(Effect::EnergyModelUpdated {
            device_model: device.clone(),
            job_id: job_id.to_string(),
            sample_count: energy_samples,
        });
        effects.push(Effect::ReliabilityModelUpdated {
            device_model: device.clone(),
            job_id: job_id.to_string(),
            sample_count: reliability_samples,
        });

        let record = MeasurementRecord {
            job_id: job_id.to_string(),
            energy_j,
            duration_s,
            source: MeasurementSource::Hardware,
            epsilon_w: Some(epsilon_w),
            timestamp: self.event_index,
        };
        effects.push(Effect::HardwareMeasured {
            record: record.clone(),
            estimated_j,
        });
        self.transition(job_id, JobState::Completed { record }, &mut effects)?;
        self.completed_hardware += 1;
        self.release_peer(peer_id);
        self.drain_queue(&device, &mut effects)?;
        Ok(effects)
    }

    fn fail_waiting(&mut self, job_id: &str, reason: &str) -> Result<Vec<Effect>, SchedulerError> {
        let job = self
            .jobs
            .get(job_id)
            .ok_or_else(|| SchedulerError::UnknownJob(job_id.to_string()))?;
        if job.state.kind() != JobStateKind::Waiting {
            return Err(SchedulerError::InvalidJobState {
                job_id: job_id.to_string(),
                expected: "waiting",
                actual: job.state.kind(),
            });
        }
        self.event_index += 1;
        let device = job.context.device_model.clone();
        if let Some(queue) = self.wait_queues.get_mut(&device) {
            queue.retain(|id| id != job_id);
        }
        let mut effects = Vec::new();
        self.transition(
            job_id,
            JobState::Failed {
                reason: reason.to_string(),
            },
            &mut effects,
        )?;
        self.failed += 1;
        Ok(effects)
    }

    // ---- routing ----------------------------------------------------------

    /// The routing policy: hardware if a matching super-provider is idle,
    /// else a model answer if the reliability gate passes and a provider is
    /// idle, else wait. Fails fast when no peer could ever serve the job.
    fn decide(&self, job: &Job) -> (Decision, Option<f64>) {
        let device = &job.context.device_model;
        let x = self.cfg.feature_space.extract(&job.manifest);
        let rc = self.reliability_models.get(device);
        let predicted = rc.and_then(|rc| rc.predict_abs_error(&x).ok());

        let mut any_peer = false;
        let mut any_super = false;
        for peer in self.peers.values() {
            if peer.device_model == *device {
                any_peer = true;
                if peer.role == PeerRole::SuperProvider {
                    any_super = true;
                }
            }
        }
        if !any_peer {
            return (
                Decision::Fail {
                    reason: "no capacity for device model".to_string(),
                },
                predicted,
            );
        }

        if let Some(peer_id) = self.idle_peer(device, PeerRole::SuperProvider) {
            return (Decision::AssignHardware { peer_id }, predicted);
        }

        let reliable = rc.map(|rc| rc.is_reliable(&x)).unwrap_or(false);
        if reliable {
            if let Some(peer_id) = self.idle_peer(device, PeerRole::Provider) {
                return (Decision::AssignModel { peer_id }, predicted);
            }
        } else if !any_super {
            // No ground truth will ever arrive, so the model can never
            // become reliable: waiting would be forever.
            return (
                Decision::Fail {
                    reason: "no capacity for device model".to_string(),
                },
                predicted,
            );
        }
        (Decision::Wait, predicted)
    }

    /// Least-recently-assigned idle peer of the given role for a device,
    /// ties broken by peer id.
    fn idle_peer(&self, device_model: &str, role: PeerRole) -> Option<String> {
        self.peers
            .values()
            .filter(|p| {
                p.device_model == device_model && p.role == role && p.state == PeerState::Idle
            })
            .min_by_key(|p| (p.last_assigned_at, p.peer_id.clone()))
            .map(|p| p.peer_id.clone())
    }

    /// Routes a submitted or waiting job and applies the decision. The
    /// caller must have removed a waiting job from its queue already.
    fn route_job(&mut self, job_id: &str, effects: &mut Vec<Effect>) -> Result<(), SchedulerError> {
        let job = self.jobs.get(job_id).expect("routing a known job");
        let (decision, predicted) = self.decide(job);
        self.record_decision(job_id, &decision, predicted, effects);

        match decision {
            Decision::AssignHardware { peer_id } => {
                self.transition(
                    job_id,
                    JobState::AssignedHardware {
                        peer_id: peer_id.clone(),
                    },
                    effects,
                )?;
                self.occupy_peer(&peer_id, job_id);
            }
            Decision::AssignModel { peer_id } => {
                self.transition(
                    job_id,
                    JobState::AssignedModel {
                        peer_id: peer_id.clone(),
                    },
                    effects,
                )?;
                self.occupy_peer(&peer_id, job_id);
                self.complete_model(job_id, &peer_id, effects)?;
            }
            Decision::Wait => {
                self.transition(job_id, JobState::Waiting, effects)?;
                self.wait_queues
                    .entry(self.jobs[job_id].context.device_model.clone())
                    .or_default()
                    .push_back(job_id.to_string());
            }
            Decision::Fail { reason } => {
                self.transition(job_id, JobState::Failed { reason }, effects)?;
                self.failed += 1;
            }
        }
        Ok(())
    }

    /// Returns a model estimate for an assigned job. Model answers are
    /// instantaneous from the broker's perspective: the job runs and
    /// completes within the scheduling step that assigned it, and no model
    /// is updated because there is no ground truth.
    fn complete_model(
        &mut self,
        job_id: &str,
        peer_id: &str,
        effects: &mut Vec<Effect>,
    ) -> Result<(), SchedulerError> {
        self.transition(
            job_id,
            JobState::Running {
                peer_id: peer_id.to_string(),
                source: MeasurementSource::Model,
            },
            effects,
        )?;

        let job = &self.jobs[job_id];
        let device = job.context.device_model.clone();
        let duration_s = job.manifest.suite_duration_s();
        let x = self.cfg.feature_space.extract(&job.manifest);

        // The routing gate only passes once hardware samples exist, so the
        // model must be present; its absence is a routing invariant bug.
        let Some(model) = self.energy_models.get(&device) else {
            self.transition(
                job_id,
                JobState::Failed {
                    reason: "routing invariant violation: no energy model for device".to_string(),
                },
                effects,
            )?;
            self.failed += 1;
            self.release_peer(peer_id);
            return Ok(());
        };
        let energy_j = model
            .estimate_energy(&x, duration_s)
            .expect("validated manifest duration");
        let record = MeasurementRecord {
            job_id: job_id.to_string(),
            energy_j,
            duration_s,
            source: MeasurementSource::Model,
            epsilon_w: None,
            timestamp: self.event_index,
        };
        effects.push(Effect::ModelEstimated {
            record: record.clone(),
        });
        self.transition(job_id, JobState::Completed { record }, effects)?;
        self.completed_model += 1;
        self.release_peer(peer_id);
        Ok(())
    }

    /// Re-routes the head of a device's wait queue for as long as decisions
    /// other than Wait come out. Only the head is ever considered: among
    /// waiting jobs for the same device, assignment order is queue order.
    fn drain_queue(
        &mut self,
        device_model: &str,
        effects: &mut Vec<Effect>,
    ) -> Result<(), SchedulerError> {
        loop {
            let Some(head) = self
                .wait_queues
                .get(device_model)
                .and_then(|q| q.front())
                .cloned()
            else {
                return Ok(());
            };
            let (decision, predicted) = self.decide(&self.jobs[&head]);
            if matches!(decision, Decision::Wait) {
                // Still stuck; the job keeps its queue position. Record the
                // re-evaluation so the decision trace shows the gate was
                // consulted again.
                self.record_decision(&head, &decision, predicted, effects);
                return Ok(());
            }
            self.wait_queues
                .get_mut(device_model)
                .expect("queue exists")
                .pop_front();
            self.record_decision(&head, &decision, predicted, effects);
            match decision {
                Decision::AssignHardware { peer_id } => {
                    self.transition(
                        &head,
                        JobState::AssignedHardware {
                            peer_id: peer_id.clone(),
                        },
                        effects,
                    )?;
                    self.occupy_peer(&peer_id, &head);
                }
                Decision::AssignModel { peer_id } => {
                    self.transition(
                        &head,
                        JobState::AssignedModel {
                            peer_id: peer_id.clone(),
                        },
                        effects,
                    )?;
                    self.occupy_peer(&peer_id, &head);
                    self.complete_model(&head, &peer_id, effects)?;
                }
                Decision::Fail { reason } => {
                    self.transition(&head, JobState::Failed { reason }, effects)?;
                    self.failed += 1;
                }
                Decision::Wait => unreachable!(),
            }
        }
    }

    // ---- bookkeeping ------------------------------------------------------

    fn record_decision(
        &mut self,
        job_id: &str,
        decision: &Decision,
        predicted_abs_error_w: Option<f64>,
        effects: &mut Vec<Effect>,
    ) {
        let at_event = self.event_index;
        effects.push(Effect::Decided {
            job_id: job_id.to_string(),
            decision: decision.clone(),
            predicted_abs_error_w,
        });
        self.jobs
            .get_mut(job_id)
            .expect("decision for known job")
            .decision_trace
            .push(DecisionRecord {
                at_event,
                decision: decision.clone(),
                predicted_abs_error_w,
            });
    }

    fn transition(
        &mut self,
        job_id: &str,
        to: JobState,
        effects: &mut Vec<Effect>,
    ) -> Result<(), SchedulerError> {
        let job = self.jobs.get_mut(job_id).expect("transition of known job");
        let from = job.state.kind();
        let to_kind = to.kind();
        if !transition_allowed(from, to_kind) {
            return Err(SchedulerError::IllegalTransition {
                job_id: job_id.to_string(),
                from,
                to: to_kind,
            });
        }
        job.state = to;
        effects.push(Effect::Transition {
            job_id: job_id.to_string(),
            from,
            to: to_kind,
        });
        Ok(())
    }

    fn occupy_peer(&mut self, peer_id: &str, job_id: &str) {
        let peer = self.peers.get_mut(peer_id).expect("assigning known peer");
        peer.state = PeerState::Busy;
        peer.current_job = Some(job_id.to_string());
        peer.last_assigned_at = self.event_index;
    }

    fn release_peer(&mut self, peer_id: &str) {
        let peer = self.peers.get_mut(peer_id).expect("releasing known peer");
        peer.state = PeerState::Idle;
        peer.current_job = None;
    }
}
