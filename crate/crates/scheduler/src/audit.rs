//! Independent invariant checking over the scheduler's effect stream.
//!
//! The auditor keeps its own shadow of job states and queue order, built
//! only from the effects it observes, and cross-checks against the live
//! registry where the effects alone are not enough (peer device models,
//! reliability sample counts). Used by the randomized acceptance run and
//! available to embed in a live service.

use std::collections::{BTreeMap, HashSet, VecDeque};

use thiserror::Error;

use crate::events::Effect;
use crate::job::{transition_allowed, Decision, JobStateKind};
use crate::scheduler::Scheduler;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invariant violated: {0}")]
pub struct AuditViolation(pub String);

/// Consumes `(effects, scheduler-after)` pairs and verifies the scheduling
/// invariants hold for every event.
#[derive(Debug, Default)]
pub struct EffectAuditor {
    job_states: BTreeMap<String, JobStateKind>,
    shadow_queues: BTreeMap<String, VecDeque<String>>,
    /// Jobs that have produced a hardware record (each may do so only once).
    hardware_completed: HashSet<String>,
    events_observed: u64,
}

impl EffectAuditor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events_observed(&self) -> u64 {
        self.events_observed
    }

    /// Checks one event's effects against the post-event scheduler state.
    pub fn observe(
        &mut self,
        scheduler: &Scheduler,
        effects: &[Effect],
    ) -> Result<(), AuditViolation> {
        self.events_observed += 1;
        let mut updates_this_event: BTreeMap<String, (u32, u32)> = BTreeMap::new();
        let mut requeued_this_event: HashSet<String> = HashSet::new();

        for effect in effects {
            match effect {
                Effect::Transition { job_id, from, to } => {
                    self.check_transition(scheduler, job_id, *from, *to, &requeued_this_event)?;
                }
                Effect::Decided {
                    job_id,
                    decision,
                    predicted_abs_error_w,
                } => {
                    self.check_decision(scheduler, job_id, decision, *predicted_abs_error_w)?;
                }
                Effect::EnergyModelUpdated { job_id, .. } => {
                    updates_this_event.entry(job_id.clone()).or_default().0 += 1;
                }
                Effect::ReliabilityModelUpdated { job_id, .. } => {
                    updates_this_event.entry(job_id.clone()).or_default().1 += 1;
                }
                Effect::HardwareMeasured { record, .. } => {
                    if record.epsilon_w.is_none() {
                        return Err(AuditViolation(format!(
                            "hardware record for {} has no power error",
                            record.job_id
                        )));
                    }
                    if !self.hardware_completed.insert(record.job_id.clone()) {
                        return Err(AuditViolation(format!(
                            "job {} produced two hardware records",
                            record.job_id
                        )));
                    }
                    let updates = updates_this_event
                        .get(&record.job_id)
                        .copied()
                        .unwrap_or((0, 0));
                    if updates != (1, 1) {
                        return Err(AuditViolation(format!(
                            "hardware result for {} performed {updates:?} model updates, \
                             expected exactly (1, 1)",
                            record.job_id
                        )));
                    }
                }
                Effect::ModelEstimated { record } => {
                    if record.epsilon_w.is_some() {
                        return Err(AuditViolation(format!(
                            "model record for {} carries a power error",
                            record.job_id
                        )));
                    }
                    if updates_this_event.contains_key(&record.job_id) {
                        return Err(AuditViolation(format!(
                            "model completion of {} updated models",
                            record.job_id
                        )));
                    }
                }
                Effect::JobRequeued { job_id, .. } => {
                    requeued_this_event.insert(job_id.clone());
                }
            }
        }

        // Model updates may only happen for jobs that produced a hardware
        // record in this very event.
        for (job_id, updates) in &updates_this_event {
            if !self.hardware_completed.contains(job_id) {
                return Err(AuditViolation(format!(
                    "models updated for job {job_id} ({updates:?}) without a hardware record"
                )));
            }
        }

        // Busy peers hold exactly the job assigned to them.
        for peer in scheduler.peers() {
            let busy = peer.state == crate::peer::PeerState::Busy;
            if busy != peer.current_job.is_some() {
                return Err(AuditViolation(format!(
                    "peer {} state/current_job mismatch: {:?} vs {:?}",
                    peer.peer_id, peer.state, peer.current_job
                )));
            }
        }
        Ok(())
    }

    fn check_transition(
        &mut self,
        scheduler: &Scheduler,
        job_id: &str,
        from: JobStateKind,
        to: JobStateKind,
        requeued_this_event: &HashSet<String>,
    ) -> Result<(), AuditViolation> {
        let known = self
            .job_states
            .get(job_id)
            .copied()
            .unwrap_or(JobStateKind::Submitted);
        if from != known {
            return Err(AuditViolation(format!(
                "transition of {job_id} claims from={from:?} but last observed state \
                 was {known:?}"
            )));
        }
        if !transition_allowed(from, to) {
            return Err(AuditViolation(format!(
                "illegal transition for {job_id}: {from:?} -> {to:?}"
            )));
        }
        self.job_states.insert(job_id.to_string(), to);

        let device = scheduler
            .job(job_id)
            .map(|j| j.context.device_model.clone())
            .ok_or_else(|| AuditViolation(format!("transition for unknown job {job_id}")))?;

        match to {
            JobStateKind::Waiting => {
                let queue = self.shadow_queues.entry(device).or_default();
                // Fresh waits queue at the tail; requeued victims go to the
                // head (they already waited once).
                if from == JobStateKind::Submitted {
                    queue.push_back(job_id.to_string());
                } else {
                    queue.push_front(job_id.to_string());
                }
            }
            JobStateKind::AssignedHardware | JobStateKind::AssignedModel => {
                if let Some(queue) = self.shadow_queues.get_mut(&device) {
                    if from == JobStateKind::Waiting {
                        if queue.front().map(String::as_str) != Some(job_id) {
                            return Err(AuditViolation(format!(
                                "job {job_id} assigned out of queue order; head was {:?}",
                                queue.front()
                            )));
                        }
                        queue.pop_front();
                    }
                }
            }
            JobStateKind::Failed => {
                if from == JobStateKind::Waiting {
                    if let Some(queue) = self.shadow_queues.get_mut(&device) {
                        queue.retain(|id| id != job_id);
                    }
                }
            }
            _ => {}
        }
        // A requeued job must not also appear to have left the queue.
        let _ = requeued_this_event;
        Ok(())
    }

    fn check_decision(
        &self,
        scheduler: &Scheduler,
        job_id: &str,
        decision: &Decision,
        predicted_abs_error_w: Option<f64>,
    ) -> Result<(), AuditViolation> {
        let job = scheduler
            .job(job_id)
            .ok_or_else(|| AuditViolation(format!("decision for unknown job {job_id}")))?;
        let device = &job.context.device_model;

        match decision {
            Decision::AssignHardware { peer_id } | Decision::AssignModel { peer_id } => {
                let peer = scheduler.peer(peer_id).ok_or_else(|| {
                    AuditViolation(format!("decision assigns unknown peer {peer_id}"))
                })?;
                if peer.device_model != *device {
                    return Err(AuditViolation(format!(
                        "job {job_id} for {device} assigned to peer {peer_id} \
                         with device {}",
                        peer.device_model
                    )));
                }
            }
            Decision::Wait | Decision::Fail { .. } => {}
        }

        if let Decision::AssignModel { .. } = decision {
            let rc = scheduler.reliability_model(device).ok_or_else(|| {
                AuditViolation(format!(
                    "model assignment for {device} without a reliability model"
                ))
            })?;
            let Some(predicted) = predicted_abs_error_w else {
                return Err(AuditViolation(format!(
                    "model assignment of {job_id} without a recorded error prediction"
                )));
            };
            if predicted > rc.theta_w() {
                return Err(AuditViolation(format!(
                    "model assignment of {job_id} with predicted |error| {predicted} \
                     above theta {}",
                    rc.theta_w()
                )));
            }
            if rc.sample_count() < rc.gate().min_samples {
                return Err(AuditViolation(format!(
                    "model assignment of {job_id} before {} hardware samples",
                    rc.gate().min_samples
                )));
            }
        }
        Ok(())
    }
}
