//! Property tests: random event sequences never produce an illegal state
//! transition, the audit invariants hold throughout, and identical event
//! sequences yield identical effect sequences.

use std::collections::BTreeMap;

use emaas_core::{
    ApiVocabulary, AppManifest, ExecutionContext, FeatureSpace, GateParams, RlsParams, TestCase,
};
use emaas_scheduler::audit::EffectAuditor;
use emaas_scheduler::{InputEvent, PeerRole, Scheduler, SchedulerConfig};
use proptest::prelude::*;

fn config() -> SchedulerConfig {
    let vocab = ApiVocabulary::new(vec!["a".into(), "b".into()]).unwrap();
    SchedulerConfig {
        feature_space: FeatureSpace::new(vocab, vec![]),
        gate: GateParams {
            theta_w: 0.6,
            min_samples: 3,
        },
        rls: RlsParams::default(),
    }
}

fn manifest(calls_a: u64, duration_s: f64) -> AppManifest {
    let mut api_calls = BTreeMap::new();
    api_calls.insert("a".to_string(), calls_a);
    api_calls.insert("b".to_string(), 1);
    AppManifest {
        app_id: format!("app-{calls_a}"),
        api_calls,
        complexity: BTreeMap::new(),
        tests: vec![TestCase {
            test_id: "t".into(),
            nominal_duration_s: duration_s,
        }],
    }
}

#[derive(Debug, Clone)]
enum Op {
    Submit { calls_a: u64 },
    Register { peer: u8, super_provider: bool },
    Heartbeat { peer: u8 },
    Offline { peer: u8 },
    Result { peer: u8, energy_j: f64 },
    FailOldestWaiting,
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0u64..20).prop_map(|calls_a| Op::Submit { calls_a }),
        (0u8..6, any::<bool>()).prop_map(|(peer, super_provider)| Op::Register {
            peer,
            super_provider
        }),
        (0u8..6).prop_map(|peer| Op::Heartbeat { peer }),
        (0u8..6).prop_map(|peer| Op::Offline { peer }),
        (0u8..6, 0.0f64..20.0).prop_map(|(peer, energy_j)| Op::Result { peer, energy_j }),
        Just(Op::FailOldestWaiting),
    ]
}

/// Turns an abstract op into a concrete event against the current state;
/// returns None when the op has no applicable target.
fn materialize(op: &Op, s: &Scheduler, next_job: &mut u64) -> Option<InputEvent> {
    let device = |peer: u8| format!("device-{}", peer % 2);
    match op {
        Op::Submit { calls_a } => {
            *next_job += 1;
            Some(InputEvent::SubmitJob {
                job_id: format!("job-{next_job}"),
                manifest: manifest(*calls_a, 3.0),
                context: ExecutionContext {
                    device_model: device((*calls_a % 6) as u8),
                    os_version: String::new(),
                    api_level: 0,
                    framework: String::new(),
                },
            })
        }
        Op::Register {
            peer,
            super_provider,
        } => Some(InputEvent::RegisterPeer {
            peer_id: format!("peer-{peer}"),
            role: if *super_provider {
                PeerRole::SuperProvider
            } else {
                PeerRole::Provider
            },
            device_model: device(*peer),
        }),
        Op::Heartbeat { peer } => Some(InputEvent::Heartbeat {
            peer_id: format!("peer-{peer}"),
        }),
        Op::Offline { peer } => Some(InputEvent::PeerOffline {
            peer_id: format!("peer-{peer}"),
        }),
        Op::Result { peer, energy_j } => {
            let peer_id = format!("peer-{peer}");
            let job_id = s.peer(&peer_id)?.current_job.clone()?;
            Some(InputEvent::HardwareResult {
                peer_id,
                job_id,
                energy_j: *energy_j,
                duration_s: 3.0,
            })
        }
        Op::FailOldestWaiting => {
            let job_id = s
                .jobs()
                .filter(|j| j.state == emaas_scheduler::JobState::Waiting)
                .map(|j| j.job_id.clone())
                .next()?;
            Some(InputEvent::FailWaiting {
                job_id,
                reason: "wait timeout".into(),
            })
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_event_sequences_hold_all_invariants(ops in proptest::collection::vec(op_strategy(), 1..120)) {
        let mut s = Scheduler::new(config());
        let mut twin = Scheduler::new(config());
        let mut auditor = EffectAuditor::new();
        let mut next_job = 0;

        for op in &ops {
            let Some(event) = materialize(op, &s, &mut next_job) else { continue };
            let result = s.apply(&event);
            let twin_result = twin.apply(&event);
            prop_assert_eq!(&result, &twin_result, "determinism");
            if let Ok(effects) = result {
                auditor.observe(&s, &effects).map_err(|v| {
                    TestCaseError::fail(format!("{v} after {event:?}"))
                })?;
            }
        }

        // Every job ends in a coherent state and queued jobs are Waiting.
        for job in s.jobs() {
            if s.queue_position(&job.job_id).is_some() {
                prop_assert_eq!(&job.state, &emaas_scheduler::JobState::Waiting);
            }
        }
    }
}
