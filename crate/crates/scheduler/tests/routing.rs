//! Routing policy and completion behavior, end to end through the public
//! event API.

use std::collections::BTreeMap;

use emaas_core::{
    ApiVocabulary, AppManifest, EnergyModel, ExecutionContext, FeatureSpace, GateParams,
    MeasurementSource, ReliabilityModel, RlsParams, TestCase,
};
use emaas_scheduler::{
    Decision, Effect, InputEvent, JobState, JobStateKind, PeerRole, PeerState, Scheduler,
    SchedulerConfig, SchedulerError,
};

fn config() -> SchedulerConfig {
    let vocab =
        ApiVocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
    SchedulerConfig {
        feature_space: FeatureSpace::new(vocab, vec!["method_count".into()]),
        gate: GateParams {
            theta_w: 0.25,
            min_samples: 2,
        },
        rls: RlsParams::default(),
    }
}

fn manifest(duration_s: f64) -> AppManifest {
    let mut api_calls = BTreeMap::new();
    api_calls.insert("a".to_string(), 3);
    api_calls.insert("b".to_string(), 1);
    let mut complexity = BTreeMap::new();
    complexity.insert("method_count".to_string(), 120.0);
    AppManifest {
        app_id: "app-1".into(),
        api_calls,
        complexity,
        tests: vec![TestCase {
            test_id: "t0".into(),
            nominal_duration_s: duration_s,
        }],
    }
}

fn context(device: &str) -> ExecutionContext {
    ExecutionContext {
        device_model: device.into(),
        os_version: "14".into(),
        api_level: 34,
        framework: "espresso".into(),
    }
}

fn submit(s: &mut Scheduler, job_id: &str, device: &str, duration_s: f64) -> Vec<Effect> {
    s.apply(&InputEvent::SubmitJob {
        job_id: job_id.into(),
        manifest: manifest(duration_s),
        context: context(device),
    })
    .unwrap()
}

fn register(s: &mut Scheduler, peer_id: &str, role: PeerRole, device: &str) {
    s.apply(&InputEvent::RegisterPeer {
        peer_id: peer_id.into(),
        role,
        device_model: device.into(),
    })
    .unwrap();
}

/// Installs warm models for `device`: the energy model predicts
/// `power_w` everywhere and the reliability model predicts a constant
/// |error| of `abs_error_w`, with enough samples to pass the sample gate.
fn install_warm_models(s: &mut Scheduler, device: &str, power_w: f64, abs_error_w: f64) {
    let dim = s.config().feature_space.dim();
    let gate = s.config().gate;
    let rls = s.config().rls;
    let mut energy_w = vec![0.0; dim + 1];
    energy_w[0] = power_w;
    let mut rc_w = vec![0.0; dim + 1];
    rc_w[0] = abs_error_w;
    let energy = EnergyModel::with_weights(device, energy_w, rls, 10);
    let rc = ReliabilityModel::with_weights(device, rc_w, rls, gate, 10);
    s.install_models(device, energy, rc);
}

fn decisions(effects: &[Effect]) -> Vec<&Decision> {
    effects
        .iter()
        .filter_map(|e| match e {
            Effect::Decided { decision, .. } => Some(decision),
            _ => None,
        })
        .collect()
}

#[test]
fn idle_super_provider_wins_even_when_model_is_reliable() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    register(&mut s, "p-1", PeerRole::Provider, "device-x");
    install_warm_models(&mut s, "device-x", 2.0, 0.0);

    let effects = submit(&mut s, "job-1", "device-x", 10.0);
    assert_eq!(
        decisions(&effects),
        vec![&Decision::AssignHardware {
            peer_id: "sp-1".into()
        }]
    );
    assert_eq!(s.peer("sp-1").unwrap().state, PeerState::Busy);
}

#[test]
fn busy_super_with_reliable_model_assigns_provider() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-y");
    register(&mut s, "p-1", PeerRole::Provider, "device-y");
    install_warm_models(&mut s, "device-y", 1.2, 0.1);

    submit(&mut s, "job-1", "device-y", 10.0); // occupies the super-provider
    let effects = submit(&mut s, "job-2", "device-y", 10.0);
    assert_eq!(
        decisions(&effects),
        vec![&Decision::AssignModel {
            peer_id: "p-1".into()
        }]
    );

    // The model answer is immediate: estimate 1.2 W over 10 s.
    let JobState::Completed { record } = &s.job("job-2").unwrap().state else {
        panic!("model job should complete in the same step");
    };
    assert_eq!(record.source, MeasurementSource::Model);
    assert!((record.energy_j - 12.0).abs() < 1e-12);
    assert_eq!(record.epsilon_w, None);
    assert_eq!(s.peer("p-1").unwrap().state, PeerState::Idle);

    // No ground truth, so no model updates.
    assert_eq!(s.energy_model("device-y").unwrap().sample_count(), 10);
    assert_eq!(s.reliability_model("device-y").unwrap().sample_count(), 10);
}

#[test]
fn busy_super_with_unreliable_model_waits() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-y");
    register(&mut s, "p-1", PeerRole::Provider, "device-y");
    install_warm_models(&mut s, "device-y", 1.2, 0.9); // predicted error above theta

    submit(&mut s, "job-1", "device-y", 10.0);
    let effects = submit(&mut s, "job-2", "device-y", 10.0);
    assert_eq!(decisions(&effects), vec![&Decision::Wait]);
    assert_eq!(s.job("job-2").unwrap().state, JobState::Waiting);
    assert_eq!(s.queue_position("job-2"), Some(0));
}

#[test]
fn no_peers_for_device_fails_fast() {
    let mut s = Scheduler::new(config());
    let effects = submit(&mut s, "job-1", "device-z", 10.0);
    let JobState::Failed { reason } = &s.job("job-1").unwrap().state else {
        panic!("expected failure");
    };
    assert_eq!(reason, "no capacity for device model");
    assert_eq!(decisions(&effects).len(), 1);
}

#[test]
fn unreliable_model_with_no_super_provider_registered_fails_fast() {
    let mut s = Scheduler::new(config());
    register(&mut s, "p-1", PeerRole::Provider, "device-y");
    submit(&mut s, "job-1", "device-y", 10.0);
    assert!(matches!(
        s.job("job-1").unwrap().state,
        JobState::Failed { .. }
    ));
}

#[test]
fn cold_start_routes_everything_to_hardware_and_first_result_trains_models() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");

    submit(&mut s, "job-1", "device-x", 3.0);
    let effects = s
        .apply(&InputEvent::HardwareResult {
            peer_id: "sp-1".into(),
            job_id: "job-1".into(),
            energy_j: 6.0,
            duration_s: 3.0,
        })
        .unwrap();

    // Fresh model estimates 0 J, so the full measured power is the error.
    let record = effects
        .iter()
        .find_map(|e| match e {
            Effect::HardwareMeasured {
                record,
                estimated_j,
            } => {
                assert_eq!(*estimated_j, 0.0);
                Some(record)
            }
            _ => None,
        })
        .expect("hardware record");
    assert_eq!(record.epsilon_w, Some(2.0));
    assert_eq!(record.energy_j, 6.0);

    assert_eq!(s.energy_model("device-x").unwrap().sample_count(), 1);
    assert_eq!(s.reliability_model("device-x").unwrap().sample_count(), 1);
    assert_eq!(s.peer("sp-1").unwrap().state, PeerState::Idle);
}

#[test]
fn exact_estimate_yields_zero_error() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    install_warm_models(&mut s, "device-x", 2.0, 0.9);

    submit(&mut s, "job-1", "device-x", 5.0);
    let effects = s
        .apply(&InputEvent::HardwareResult {
            peer_id: "sp-1".into(),
            job_id: "job-1".into(),
            energy_j: 10.0, // exactly 2.0 W * 5 s
            duration_s: 5.0,
        })
        .unwrap();
    let record = effects
        .iter()
        .find_map(|e| match e {
            Effect::HardwareMeasured { record, .. } => Some(record),
            _ => None,
        })
        .unwrap();
    assert_eq!(record.epsilon_w, Some(0.0));
}

#[test]
fn hardware_completion_drains_waiting_job_in_same_step() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");

    submit(&mut s, "job-1", "device-x", 3.0);
    submit(&mut s, "job-2", "device-x", 4.0);
    assert_eq!(s.job("job-2").unwrap().state, JobState::Waiting);

    let effects = s
        .apply(&InputEvent::HardwareResult {
            peer_id: "sp-1".into(),
            job_id: "job-1".into(),
            energy_j: 6.0,
            duration_s: 3.0,
        })
        .unwrap();
    assert!(effects.iter().any(|e| matches!(
        e,
        Effect::Transition {
            job_id,
            from: JobStateKind::Waiting,
            to: JobStateKind::AssignedHardware,
        } if job_id == "job-2"
    )));
    assert_eq!(s.peer("sp-1").unwrap().current_job.as_deref(), Some("job-2"));
}

#[test]
fn registering_capacity_drains_waiting_job() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    submit(&mut s, "job-1", "device-x", 3.0);
    submit(&mut s, "job-2", "device-x", 3.0);

    register(&mut s, "sp-2", PeerRole::SuperProvider, "device-x");
    assert_eq!(
        s.job("job-2").unwrap().state,
        JobState::AssignedHardware {
            peer_id: "sp-2".into()
        }
    );
}

#[test]
fn offline_busy_peer_requeues_its_job_at_the_head() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    submit(&mut s, "job-1", "device-x", 3.0);
    submit(&mut s, "job-2", "device-x", 3.0);
    submit(&mut s, "job-3", "device-x", 3.0);

    let effects = s
        .apply(&InputEvent::PeerOffline {
            peer_id: "sp-1".into(),
        })
        .unwrap();
    assert!(effects.iter().any(|e| matches!(
        e,
        Effect::JobRequeued { job_id, reason } if job_id == "job-1" && reason == "peer lost"
    )));
    // The victim is now ahead of the jobs that were already waiting.
    assert_eq!(s.queue_position("job-1"), Some(0));
    assert_eq!(s.queue_position("job-2"), Some(1));
    assert_eq!(s.queue_position("job-3"), Some(2));
    assert_eq!(s.peer("sp-1").unwrap().state, PeerState::Offline);
}

#[test]
fn heartbeat_revives_offline_peer_and_acks_assignments() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    submit(&mut s, "job-1", "device-x", 3.0);
    s.apply(&InputEvent::PeerOffline {
        peer_id: "sp-1".into(),
    })
    .unwrap();
    assert_eq!(s.job("job-1").unwrap().state, JobState::Waiting);

    // Coming back picks the waiting job up again.
    let effects = s
        .apply(&InputEvent::Heartbeat {
            peer_id: "sp-1".into(),
        })
        .unwrap();
    assert!(decisions(&effects)
        .iter()
        .any(|d| matches!(d, Decision::AssignHardware { peer_id } if peer_id == "sp-1")));

    // The next heartbeat acknowledges the assignment.
    s.apply(&InputEvent::Heartbeat {
        peer_id: "sp-1".into(),
    })
    .unwrap();
    assert!(matches!(
        s.job("job-1").unwrap().state,
        JobState::Running { .. }
    ));
}

#[test]
fn heartbeat_on_idle_peer_changes_nothing() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    let effects = s
        .apply(&InputEvent::Heartbeat {
            peer_id: "sp-1".into(),
        })
        .unwrap();
    assert!(effects.is_empty());
}

#[test]
fn duplicate_register_and_unknown_peer_events_are_rejected() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    assert_eq!(
        s.apply(&InputEvent::RegisterPeer {
            peer_id: "sp-1".into(),
            role: PeerRole::Provider,
            device_model: "device-x".into(),
        }),
        Err(SchedulerError::DuplicatePeer("sp-1".into()))
    );
    assert_eq!(
        s.apply(&InputEvent::Heartbeat {
            peer_id: "ghost".into()
        }),
        Err(SchedulerError::UnknownPeer("ghost".into()))
    );
}

#[test]
fn result_from_non_assignee_is_rejected() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    register(&mut s, "sp-2", PeerRole::SuperProvider, "device-x");
    submit(&mut s, "job-1", "device-x", 3.0);
    assert!(matches!(
        s.apply(&InputEvent::HardwareResult {
            peer_id: "sp-2".into(),
            job_id: "job-1".into(),
            energy_j: 1.0,
            duration_s: 1.0,
        }),
        Err(SchedulerError::NotAssignee { .. })
    ));
}

#[test]
fn invalid_measurement_fails_the_job_and_leaves_models_alone() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    install_warm_models(&mut s, "device-x", 2.0, 0.9);
    submit(&mut s, "job-1", "device-x", 3.0);

    s.apply(&InputEvent::HardwareResult {
        peer_id: "sp-1".into(),
        job_id: "job-1".into(),
        energy_j: -1.0,
        duration_s: 3.0,
    })
    .unwrap();
    assert!(matches!(
        s.job("job-1").unwrap().state,
        JobState::Failed { .. }
    ));
    assert_eq!(s.energy_model("device-x").unwrap().sample_count(), 10);
    assert_eq!(s.peer("sp-1").unwrap().state, PeerState::Idle);

    submit(&mut s, "job-2", "device-x", 3.0);
    s.apply(&InputEvent::HardwareResult {
        peer_id: "sp-1".into(),
        job_id: "job-2".into(),
        energy_j: 6.0,
        duration_s: 0.0,
    })
    .unwrap();
    assert!(matches!(
        s.job("job-2").unwrap().state,
        JobState::Failed { .. }
    ));
    assert_eq!(s.reliability_model("device-x").unwrap().sample_count(), 10);
}

#[test]
fn fail_waiting_removes_job_from_queue() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    submit(&mut s, "job-1", "device-x", 3.0);
    submit(&mut s, "job-2", "device-x", 3.0);

    s.apply(&InputEvent::FailWaiting {
        job_id: "job-2".into(),
        reason: "wait timeout".into(),
    })
    .unwrap();
    let JobState::Failed { reason } = &s.job("job-2").unwrap().state else {
        panic!("expected failure");
    };
    assert_eq!(reason, "wait timeout");
    assert_eq!(s.queue_position("job-2"), None);
    assert_eq!(s.metrics().failed, 1);
}

#[test]
fn idle_peers_rotate_least_recently_used_with_lexicographic_ties() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-b", PeerRole::SuperProvider, "device-x");
    register(&mut s, "sp-a", PeerRole::SuperProvider, "device-x");

    // Fresh peers tie on last assignment; lexicographic order breaks it.
    submit(&mut s, "job-1", "device-x", 3.0);
    assert_eq!(s.peer("sp-a").unwrap().current_job.as_deref(), Some("job-1"));

    // Free sp-a again; now sp-b is least recently used.
    s.apply(&InputEvent::HardwareResult {
        peer_id: "sp-a".into(),
        job_id: "job-1".into(),
        energy_j: 3.0,
        duration_s: 3.0,
    })
    .unwrap();
    submit(&mut s, "job-2", "device-x", 3.0);
    assert_eq!(s.peer("sp-b").unwrap().current_job.as_deref(), Some("job-2"));
}

#[test]
fn jobs_never_route_to_peers_of_other_devices() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-x", PeerRole::SuperProvider, "device-x");
    register(&mut s, "p-y", PeerRole::Provider, "device-y");
    install_warm_models(&mut s, "device-y", 1.0, 0.0);

    // device-y has a reliable model and an idle provider; device-x's
    // super-provider must not be considered.
    let effects = submit(&mut s, "job-1", "device-y", 10.0);
    assert_eq!(
        decisions(&effects),
        vec![&Decision::AssignModel {
            peer_id: "p-y".into()
        }]
    );
}

#[test]
fn decision_trace_records_every_evaluation_with_prediction() {
    let mut s = Scheduler::new(config());
    register(&mut s, "sp-1", PeerRole::SuperProvider, "device-x");
    install_warm_models(&mut s, "device-x", 2.0, 0.9);
    submit(&mut s, "job-1", "device-x", 3.0);
    submit(&mut s, "job-2", "device-x", 3.0); // waits: super busy, gate closed

    // Completion re-evaluates job-2 (it gets the super).
    s.apply(&InputEvent::HardwareResult {
        peer_id: "sp-1".into(),
        job_id: "job-1".into(),
        energy_j: 6.0,
        duration_s: 3.0,
    })
    .unwrap();

    let trace = &s.job("job-2").unwrap().decision_trace;
    assert_eq!(trace.len(), 2);
    assert!(matches!(trace[0].decision, Decision::Wait));
    assert!(matches!(trace[1].decision, Decision::AssignHardware { .. }));
    assert!(trace.iter().all(|d| d.predicted_abs_error_w.is_some()));
}
