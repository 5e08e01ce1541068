//! The discrete-tick simulation driving the scheduler: job arrivals, peer
//! availability dynamics, hardware completions, and the scoring needed for
//! the experiment reports.
//!
//! One tick is `seconds_per_tick` of simulated wall time. Hardware jobs
//! occupy their super-provider for the suite's nominal duration rounded up
//! to whole ticks; model jobs complete within the scheduling step that
//! assigned them. Per-tick phases run in a fixed order (busy cycles,
//! completions, wait timeouts, arrivals), so a seed fully determines a run.

use std::collections::BTreeMap;

use emaas_core::{ApiVocabulary, FeatureSpace, RlsParams};
use emaas_scheduler::{
    Decision, Effect, InputEvent, JobState, PeerRole, Scheduler, SchedulerConfig,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::appgen::AppGenerator;
use crate::config::{ConfigError, ScenarioConfig};
use crate::ground_truth::GroundTruthPowerModel;
use crate::report::{
    ExperimentReport, JobOutcome, JobOutcomeKind, LoggedEvent, ModelSummary, Rq1Report, Rq2Report,
    Rq3Report, Totals, REPORT_SCHEMA_VERSION,
};
use crate::rng::{substream, Substream};

/// The deterministic vocabulary a scenario uses: `api.call.000` onward, with
/// the trailing `ood_api_count` entries forming the OOD set.
pub fn vocabulary(cfg: &ScenarioConfig) -> ApiVocabulary {
    ApiVocabulary::new(
        (0..cfg.vocabulary_size)
            .map(|i| format!("api.call.{i:03}"))
            .collect(),
    )
    .expect("generated identifiers are unique")
}

/// Scheduler configuration implied by a scenario; replay must use the same.
pub fn scheduler_config(cfg: &ScenarioConfig) -> SchedulerConfig {
    let vocab = vocabulary(cfg);
    let cx_names = cfg.complexity.iter().map(|c| c.name.clone()).collect();
    SchedulerConfig {
        feature_space: FeatureSpace::new(vocab, cx_names),
        gate: cfg.gate,
        rls: RlsParams {
            lambda: cfg.lambda,
            init_variance: 1e8,
        },
    }
}

/// Draws each device's hidden true power model from the ground-truth
/// substream: intercept, API weights, complexity weights, OOV weight.
fn draw_ground_truths(
    cfg: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<String, GroundTruthPowerModel> {
    let d_api = cfg.vocabulary_size;
    let split = d_api - cfg.ood_api_count;
    let oov_index = d_api + cfg.complexity.len();
    let mut ood_indices: Vec<usize> = (split..d_api).collect();
    ood_indices.push(oov_index);

    let mut models = BTreeMap::new();
    for dev in &cfg.devices {
        let gt = &dev.ground_truth;
        let mut w_star = Vec::with_capacity(oov_index + 2);
        w_star.push(range_sample(rng, gt.intercept_range_w));
        for _ in 0..d_api {
            w_star.push(range_sample(rng, gt.api_weight_range_w));
        }
        for cx in &cfg.complexity {
            w_star.push(range_sample(rng, cx.weight_range_w));
        }
        w_star.push(range_sample(rng, gt.api_weight_range_w)); // OOV weight
        models.insert(
            dev.device_model.clone(),
            GroundTruthPowerModel {
                device_model: dev.device_model.clone(),
                w_star,
                ood_indices: ood_indices.clone(),
                ood_penalty_w: gt.ood_penalty_w,
                noise_sigma_w: gt.noise_sigma_w,
            },
        );
    }
    models
}

fn range_sample(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

struct JobMeta {
    device: String,
    is_ood: bool,
    true_mean_w: f64,
    submitted_tick: u64,
}

struct Simulation {
    cfg: ScenarioConfig,
    scheduler: Scheduler,
    feature_space: FeatureSpace,
    ground_truths: BTreeMap<String, GroundTruthPowerModel>,
    app_generator: AppGenerator,
    arrivals_rng: ChaCha8Rng,
    app_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    busy_rng: ChaCha8Rng,
    super_ids: Vec<(String, String)>, // (peer_id, device_model), fixed order
    externally_busy_until: BTreeMap<String, u64>,
    /// tick -> hardware jobs completing then, in schedule order.
    pending_hardware: BTreeMap<u64, Vec<(String, String)>>,
    job_meta: BTreeMap<String, JobMeta>,
    /// Hardware-labeled samples per device so far.
    hardware_samples: BTreeMap<String, u64>,
    next_job: u64,
    events: Vec<LoggedEvent>,
    completed: Vec<JobOutcome>,
}

/// Runs one scenario to completion and produces its report. The same config
/// (same seed) always produces a byte-identical report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ExperimentReport, ConfigError> {
    cfg.validate()?;

    let scheduler_cfg = scheduler_config(cfg);
    let feature_space = scheduler_cfg.feature_space.clone();
    let mut gt_rng = substream(cfg.seed, Substream::GroundTruth);
    let ground_truths = draw_ground_truths(cfg, &mut gt_rng);
    let cx_ranges = cfg
        .complexity
        .iter()
        .map(|c| (c.name.clone(), c.value_range))
        .collect();
    let app_generator = AppGenerator::new(
        &vocabulary(cfg),
        cfg.ood_api_count,
        cx_ranges,
        cfg.app.clone(),
    );

    let mut sim = Simulation {
        scheduler: Scheduler::new(scheduler_cfg),
        feature_space,
        ground_truths,
        app_generator,
        arrivals_rng: substream(cfg.seed, Substream::Arrivals),
        app_rng: substream(cfg.seed, Substream::AppGen),
        noise_rng: substream(cfg.seed, Substream::Noise),
        busy_rng: substream(cfg.seed, Substream::BusyCycle),
        super_ids: Vec::new(),
        externally_busy_until: BTreeMap::new(),
        pending_hardware: BTreeMap::new(),
        job_meta: BTreeMap::new(),
        hardware_samples: BTreeMap::new(),
        next_job: 0,
        events: Vec::new(),
        completed: Vec::new(),
        cfg: cfg.clone(),
    };
    sim.register_peers();
    for tick in 0..cfg.duration_events {
        sim.tick(tick);
    }
    Ok(sim.into_report())
}

impl Simulation {
    fn register_peers(&mut self) {
        let devices = self.cfg.devices.clone();
        for dev in &devices {
            for i in 0..dev.super_providers {
                let peer_id = format!("sp-{}-{i:02}", dev.device_model);
                self.super_ids
                    .push((peer_id.clone(), dev.device_model.clone()));
                self.dispatch(
                    0,
                    InputEvent::RegisterPeer {
                        peer_id,
                        role: PeerRole::SuperProvider,
                        device_model: dev.device_model.clone(),
                    },
                );
            }
            for i in 0..dev.providers {
                self.dispatch(
                    0,
                    InputEvent::RegisterPeer {
                        peer_id: format!("pr-{}-{i:02}", dev.device_model),
                        role: PeerRole::Provider,
                        device_model: dev.device_model.clone(),
                    },
                );
            }
        }
    }

    fn tick(&mut self, tick: u64) {
        self.busy_cycle_phase(tick);
        self.completion_phase(tick);
        self.timeout_phase(tick);
        self.arrival_phase(tick);
    }

    /// Super-providers pick up external measurement work when idle and come
    /// back after it ends. While externally busy they are offline to us, so
    /// routing falls back to models or waiting, as it would when another
    /// user's task holds the power monitor.
    fn busy_cycle_phase(&mut self, tick: u64) {
        let supers = self.super_ids.clone();
        for (peer_id, _) in &supers {
            if self.externally_busy_until.get(peer_id) == Some(&tick) {
                self.externally_busy_until.remove(peer_id);
                self.dispatch(
                    tick,
                    InputEvent::Heartbeat {
                        peer_id: peer_id.clone(),
                    },
                );
            }
        }
        let p = self.cfg.busy_cycle.start_probability;
        if p <= 0.0 {
            return;
        }
        for (peer_id, _) in &supers {
            if self.externally_busy_until.contains_key(peer_id) {
                continue;
            }
            let idle = self
                .scheduler
                .peer(peer_id)
                .map(|rec| rec.state == emaas_scheduler::PeerState::Idle)
                .unwrap_or(false);
            if idle && self.busy_rng.random_bool(p) {
                let (lo, hi) = self.cfg.busy_cycle.duration_ticks;
                let duration = self.busy_rng.random_range(lo..=hi);
                self.externally_busy_until
                    .insert(peer_id.clone(), tick + duration);
                self.dispatch(
                    tick,
                    InputEvent::PeerOffline {
                        peer_id: peer_id.clone(),
                    },
                );
            }
        }
    }

    fn completion_phase(&mut self, tick: u64) {
        let Some(due) = self.pending_hardware.remove(&tick) else {
            return;
        };
        for (job_id, peer_id) in due {
            let job = self.scheduler.job(&job_id).expect("scheduled job exists");
            let manifest = job.manifest.clone();
            let device = job.context.device_model.clone();
            let duration_s = manifest.suite_duration_s();
            let x = self.feature_space.extract(&manifest);
            let gt = &self.ground_truths[&device];
            let energy_j =
                gt.simulate_hardware(&manifest.app_id, &x, duration_s, &mut self.noise_rng);
            self.dispatch(
                tick,
                InputEvent::HardwareResult {
                    peer_id,
                    job_id,
                    energy_j,
                    duration_s,
                },
            );
        }
    }

    fn timeout_phase(&mut self, tick: u64) {
        let Some(max_wait) = self.cfg.max_wait_ticks else {
            return;
        };
        let expired: Vec<String> = self
            .scheduler
            .jobs()
            .filter(|j| j.state == JobState::Waiting)
            .filter(|j| {
                let submitted = self.job_meta[&j.job_id].submitted_tick;
                tick.saturating_sub(submitted) >= max_wait
            })
            .map(|j| j.job_id.clone())
            .collect();
        for job_id in expired {
            self.dispatch(
                tick,
                InputEvent::FailWaiting {
                    job_id,
                    reason: "wait timeout".into(),
                },
            );
        }
    }

    fn arrival_phase(&mut self, tick: u64) {
        if self.cfg.arrival_rate <= 0.0 {
            return;
        }
        let poisson = Poisson::new(self.cfg.arrival_rate).expect("validated rate");
        let arrivals = poisson.sample(&mut self.arrivals_rng) as u64;
        for _ in 0..arrivals {
            let device_idx = self.arrivals_rng.random_range(0..self.cfg.devices.len());
            let device = self.cfg.devices[device_idx].device_model.clone();
            let app = self.app_generator.generate(&mut self.app_rng);

            self.next_job += 1;
            let job_id = format!("job-{:06}", self.next_job);
            let x = self.feature_space.extract(&app.manifest);
            let true_mean_w =
                self.ground_truths[&device].true_mean_power_w(&app.manifest.app_id, &x);
            self.job_meta.insert(
                job_id.clone(),
                JobMeta {
                    device: device.clone(),
                    is_ood: app.is_ood,
                    true_mean_w,
                    submitted_tick: tick,
                },
            );
            self.dispatch(
                tick,
                InputEvent::SubmitJob {
                    job_id,
                    manifest: app.manifest,
                    context: emaas_core::ExecutionContext {
                        device_model: device,
                        os_version: "14".into(),
                        api_level: 34,
                        framework: "espresso".into(),
                    },
                },
            );
        }
    }

    fn dispatch(&mut self, tick: u64, event: InputEvent) {
        let effects = self
            .scheduler
            .apply(&event)
            .expect("simulation only emits valid events");
        self.events.push(LoggedEvent {
            tick,
            event,
        });
        self.process_effects(tick, &effects);
    }

    fn process_effects(&mut self, tick: u64, effects: &[Effect]) {
        for effect in effects {
            match effect {
                Effect::Decided {
                    job_id,
                    decision: Decision::AssignHardware { peer_id },
                    ..
                } => {
                    let duration_s = self
                        .scheduler
                        .job(job_id)
                        .expect("assigned job exists")
                        .manifest
                        .suite_duration_s();
                    let occupancy =
                        (duration_s / self.cfg.seconds_per_tick).ceil().max(1.0) as u64;
                    self.pending_hardware
                        .entry(tick + occupancy)
                        .or_default()
                        .push((job_id.clone(), peer_id.clone()));
                }
                Effect::HardwareMeasured {
                    record,
                    estimated_j,
                } => {
                    let meta = &self.job_meta[&record.job_id];
                    let count = self
                        .hardware_samples
                        .entry(meta.device.clone())
                        .or_default();
                    *count += 1;
                    let samples = *count;
                    self.completed.push(JobOutcome {
                        job_id: record.job_id.clone(),
                        device_model: meta.device.clone(),
                        is_ood: meta.is_ood,
                        submitted_tick: meta.submitted_tick,
                        completed_tick: Some(tick),
                        outcome: JobOutcomeKind::Hardware,
                        true_mean_power_w: meta.true_mean_w,
                        reported_power_w: Some(record.mean_power_w()),
                        software_power_w: Some(estimated_j / record.duration_s),
                        hw_samples_at_completion: Some(samples),
                        fail_reason: None,
                    });
                }
                Effect::ModelEstimated { record } => {
                    let meta = &self.job_meta[&record.job_id];
                    let samples = self
                        .hardware_samples
                        .get(&meta.device)
                        .copied()
                        .unwrap_or(0);
                    let power = record.mean_power_w();
                    self.completed.push(JobOutcome {
                        job_id: record.job_id.clone(),
                        device_model: meta.device.clone(),
                        is_ood: meta.is_ood,
                        submitted_tick: meta.submitted_tick,
                        completed_tick: Some(tick),
                        outcome: JobOutcomeKind::Model,
                        true_mean_power_w: meta.true_mean_w,
                        reported_power_w: Some(power),
                        software_power_w: Some(power),
                        hw_samples_at_completion: Some(samples),
                        fail_reason: None,
                    });
                }
                _ => {}
            }
        }
    }

    fn into_report(mut self) -> ExperimentReport {
        let mut outcomes = std::mem::take(&mut self.completed);
        let mut totals = Totals {
            submitted: self.next_job,
            ..Totals::default()
        };
        for row in &outcomes {
            match row.outcome {
                JobOutcomeKind::Hardware => totals.completed_hardware += 1,
                JobOutcomeKind::Model => totals.completed_model += 1,
                _ => {}
            }
        }

        // Rows for everything that did not complete.
        for job in self.scheduler.jobs() {
            let meta = &self.job_meta[&job.job_id];
            let (outcome, fail_reason) = match &job.state {
                JobState::Completed { .. } => continue,
                JobState::Failed { reason } => (JobOutcomeKind::Failed, Some(reason.clone())),
                JobState::Waiting => (JobOutcomeKind::Waiting, None),
                _ => (JobOutcomeKind::InFlight, None),
            };
            match outcome {
                JobOutcomeKind::Failed => totals.failed += 1,
                JobOutcomeKind::Waiting => totals.waiting_at_end += 1,
                JobOutcomeKind::InFlight => totals.in_flight_at_end += 1,
                _ => unreachable!(),
            }
            outcomes.push(JobOutcome {
                job_id: job.job_id.clone(),
                device_model: meta.device.clone(),
                is_ood: meta.is_ood,
                submitted_tick: meta.submitted_tick,
                completed_tick: None,
                outcome,
                true_mean_power_w: meta.true_mean_w,
                reported_power_w: None,
                software_power_w: None,
                hw_samples_at_completion: None,
                fail_reason,
            });
        }
        outcomes.sort_by(|a, b| a.job_id.cmp(&b.job_id));

        let rq1 = self.rq1(&outcomes);
        let rq2 = self.rq2(&outcomes);
        let rq3 = self.rq3(&outcomes);

        let mut final_models = BTreeMap::new();
        for (device, energy) in self.scheduler.energy_models() {
            let reliability = self
                .scheduler
                .reliability_model(device)
                .expect("models update together");
            final_models.insert(
                device.clone(),
                ModelSummary {
                    energy_samples: energy.sample_count(),
                    reliability_samples: reliability.sample_count(),
                    energy_weights: energy.weights().to_vec(),
                    reliability_weights: reliability.weights().to_vec(),
                },
            );
        }

        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario: self.cfg,
            totals,
            rq1,
            rq2,
            rq3,
            final_models,
            outcomes,
            events: self.events,
        }
    }

    fn rq1(&self, outcomes: &[JobOutcome]) -> Rq1Report {
        let warmup = self.cfg.report.rq1_warmup_samples;
        let mut rq1 = Rq1Report {
            warmup_samples: warmup,
            ..Rq1Report::default()
        };
        for row in outcomes {
            let Some(samples) = row.hw_samples_at_completion else {
                continue;
            };
            if samples < warmup {
                continue;
            }
            match (row.is_ood, row.outcome) {
                (true, JobOutcomeKind::Hardware) => rq1.ood_to_hardware += 1,
                (true, JobOutcomeKind::Model) => rq1.ood_to_model += 1,
                (false, JobOutcomeKind::Hardware) => rq1.id_to_hardware += 1,
                (false, JobOutcomeKind::Model) => rq1.id_to_model += 1,
                _ => {}
            }
        }
        let ood_total = rq1.ood_to_hardware + rq1.ood_to_model;
        if ood_total > 0 {
            rq1.ood_hardware_fraction = Some(rq1.ood_to_hardware as f64 / ood_total as f64);
        }
        let id_total = rq1.id_to_hardware + rq1.id_to_model;
        if id_total > 0 {
            rq1.id_hardware_fraction = Some(rq1.id_to_hardware as f64 / id_total as f64);
        }
        rq1
    }

    fn rq2(&self, outcomes: &[JobOutcome]) -> Rq2Report {
        let windows = self.cfg.report.windows;
        let mut hybrid_sums = vec![(0.0, 0u64); windows];
        let mut software_sums = vec![(0.0, 0u64); windows];
        let mut hybrid_total = 0.0;
        let mut software_total = 0.0;
        let mut scored = 0u64;
        for row in outcomes {
            let (Some(tick), Some(reported), Some(software)) =
                (row.completed_tick, row.reported_power_w, row.software_power_w)
            else {
                continue;
            };
            let hybrid_err = (reported - row.true_mean_power_w).abs();
            let software_err = (software - row.true_mean_power_w).abs();
            hybrid_total += hybrid_err;
            software_total += software_err;
            scored += 1;
            let w = self.window_of(tick, windows);
            hybrid_sums[w].0 += hybrid_err;
            hybrid_sums[w].1 += 1;
            software_sums[w].0 += software_err;
            software_sums[w].1 += 1;
        }
        let mean = |(sum, n): (f64, u64)| if n > 0 { Some(sum / n as f64) } else { None };
        Rq2Report {
            jobs_scored: scored,
            hybrid_mae_w: mean((hybrid_total, scored)),
            software_only_mae_w: mean((software_total, scored)),
            hybrid_mae_windows: hybrid_sums.into_iter().map(mean).collect(),
            software_only_mae_windows: software_sums.into_iter().map(mean).collect(),
        }
    }

    fn rq3(&self, outcomes: &[JobOutcome]) -> Rq3Report {
        let windows = self.cfg.report.windows;
        let mut hw = vec![0u64; windows];
        let mut total = vec![0u64; windows];
        let mut quarter_hw = [0u64; 4];
        let mut quarter_total = [0u64; 4];
        for row in outcomes {
            let Some(tick) = row.completed_tick else {
                continue;
            };
            let w = self.window_of(tick, windows);
            let q = self.window_of(tick, 4);
            total[w] += 1;
            quarter_total[q] += 1;
            if row.outcome == JobOutcomeKind::Hardware {
                hw[w] += 1;
                quarter_hw[q] += 1;
            }
        }
        let frac = |hw: u64, total: u64| {
            if total > 0 {
                Some(hw as f64 / total as f64)
            } else {
                None
            }
        };
        Rq3Report {
            hardware_fraction_windows: hw
                .iter()
                .zip(&total)
                .map(|(&h, &t)| frac(h, t))
                .collect(),
            first_quarter_fraction: frac(quarter_hw[0], quarter_total[0]),
            last_quarter_fraction: frac(quarter_hw[3], quarter_total[3]),
        }
    }

    fn window_of(&self, tick: u64, windows: usize) -> usize {
        let w = (tick as u128 * windows as u128 / self.cfg.duration_events as u128) as usize;
        w.min(windows - 1)
    }
}
