//! Scenario configuration: everything a simulation run needs, JSON-loadable,
//! with desk-scale defaults.

use emaas_core::GateParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appgen::AppGeneratorParams;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid scenario config: {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

/// One complexity metric: its name, the uniform range apps draw values
/// from, and the range the device's true per-unit power weight is drawn
/// from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CxMetric {
    pub name: String,
    pub value_range: (f64, f64),
    pub weight_range_w: (f64, f64),
}

/// How a device's hidden ground-truth model is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthParams {
    /// Idle/base power range, watts.
    pub intercept_range_w: (f64, f64),
    /// Per-API-frequency weight range, watts (also used for the OOV weight).
    pub api_weight_range_w: (f64, f64),
    /// Average watts added per unit of OOD frequency mass.
    pub ood_penalty_w: f64,
    /// Power monitor noise, watts.
    pub noise_sigma_w: f64,
}

impl Default for GroundTruthParams {
    fn default() -> Self {
        Self {
            intercept_range_w: (1.0, 2.5),
            api_weight_range_w: (0.0, 2.0),
            ood_penalty_w: 1.0,
            noise_sigma_w: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub device_model: String,
    pub providers: u32,
    pub super_providers: u32,
    #[serde(default)]
    pub ground_truth: GroundTruthParams,
}

/// Super-provider external load: when idle, a super-provider starts an
/// unrelated measurement task with this per-tick probability and is
/// unavailable for a uniformly drawn number of ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusyCycleParams {
    pub start_probability: f64,
    pub duration_ticks: (u64, u64),
}

impl Default for BusyCycleParams {
    fn default() -> Self {
        Self {
            start_probability: 0.5,
            duration_ticks: (5, 15),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    /// Number of equal tick windows for time-series metrics.
    pub windows: usize,
    /// Hardware samples a device needs before its completions count toward
    /// the routing-quality confusion matrix.
    pub rq1_warmup_samples: u64,
}

impl Default for ReportParams {
    fn default() -> Self {
        Self {
            windows: 20,
            rq1_warmup_samples: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Simulation length in ticks.
    pub duration_events: u64,
    /// Expected job arrivals per tick across all devices.
    pub arrival_rate: f64,
    /// Wall-clock seconds one tick represents; hardware jobs occupy their
    /// peer for ceil(suite_duration / seconds_per_tick) ticks.
    pub seconds_per_tick: f64,
    /// Waiting jobs older than this fail with a timeout. None waits forever.
    pub max_wait_ticks: Option<u64>,
    /// API vocabulary size (d_api).
    pub vocabulary_size: usize,
    /// Trailing vocabulary entries forming the OOD API set.
    pub ood_api_count: usize,
    pub complexity: Vec<CxMetric>,
    pub gate: GateParams,
    /// Forgetting factor for both online models.
    pub lambda: f64,
    pub app: AppGeneratorParams,
    pub busy_cycle: BusyCycleParams,
    pub devices: Vec<DeviceConfig>,
    pub report: ReportParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            duration_events: 5000,
            arrival_rate: 0.5,
            seconds_per_tick: 15.0,
            max_wait_ticks: Some(150),
            vocabulary_size: 32,
            ood_api_count: 8,
            complexity: vec![
                CxMetric {
                    name: "method_count".into(),
                    value_range: (50.0, 500.0),
                    weight_range_w: (0.0, 0.003),
                },
                CxMetric {
                    name: "cyclomatic_mean".into(),
                    value_range: (1.0, 8.0),
                    weight_range_w: (0.0, 0.05),
                },
            ],
            gate: GateParams::default(),
            lambda: 0.999,
            app: AppGeneratorParams::default(),
            busy_cycle: BusyCycleParams::default(),
            devices: vec![
                DeviceConfig {
                    device_model: "device-x".into(),
                    providers: 3,
                    super_providers: 1,
                    ground_truth: GroundTruthParams::default(),
                },
                DeviceConfig {
                    device_model: "device-y".into(),
                    providers: 3,
                    super_providers: 1,
                    ground_truth: GroundTruthParams::default(),
                },
            ],
            report: ReportParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(json).map_err(|e| err("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration_events == 0 {
            return Err(err("duration_events", "must be positive"));
        }
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return Err(err("arrival_rate", "must be a non-negative finite number"));
        }
        if !(self.seconds_per_tick > 0.0) || !self.seconds_per_tick.is_finite() {
            return Err(err("seconds_per_tick", "must be positive"));
        }
        if self.vocabulary_size == 0 {
            return Err(err("vocabulary_size", "must be positive"));
        }
        if self.ood_api_count >= self.vocabulary_size {
            return Err(err(
                "ood_api_count",
                "must leave at least one in-distribution identifier",
            ));
        }
        if !(0.0..=1.0).contains(&self.app.ood_fraction) {
            return Err(err("app.ood_fraction", "must be within [0, 1]"));
        }
        if self.app.ood_fraction > 0.0 && self.ood_api_count == 0 {
            return Err(err(
                "ood_api_count",
                "must be positive when app.ood_fraction > 0",
            ));
        }
        if !(self.app.zipf_s > 0.0) {
            return Err(err("app.zipf_s", "must be positive"));
        }
        if self.app.calls_range.0 > self.app.calls_range.1 {
            return Err(err("app.calls_range", "min exceeds max"));
        }
        if !(self.app.duration_range_s.0 > 0.0)
            || self.app.duration_range_s.0 >= self.app.duration_range_s.1
        {
            return Err(err("app.duration_range_s", "must be a positive range"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(err("lambda", "must be within (0, 1]"));
        }
        if !(self.gate.theta_w > 0.0) {
            return Err(err("gate.theta_w", "must be positive"));
        }
        if self.gate.min_samples == 0 {
            return Err(err("gate.min_samples", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.busy_cycle.start_probability) {
            return Err(err("busy_cycle.start_probability", "must be within [0, 1]"));
        }
        if self.busy_cycle.duration_ticks.0 > self.busy_cycle.duration_ticks.1
            || self.busy_cycle.duration_ticks.0 == 0
        {
            return Err(err("busy_cycle.duration_ticks", "must be a positive range"));
        }
        if self.devices.is_empty() {
            return Err(err("devices", "at least one device required"));
        }
        for (i, dev) in self.devices.iter().enumerate() {
            if dev.device_model.is_empty() {
                return Err(err(&format!("devices[{i}].device_model"), "must be non-empty"));
            }
            if self
                .devices
                .iter()
                .filter(|d| d.device_model == dev.device_model)
                .count()
                > 1
            {
                return Err(err(
                    &format!("devices[{i}].device_model"),
                    "duplicate device model",
                ));
            }
            let gt = &dev.ground_truth;
            if !(gt.noise_sigma_w >= 0.0) {
                return Err(err(
                    &format!("devices[{i}].ground_truth.noise_sigma_w"),
                    "must be non-negative",
                ));
            }
            if gt.intercept_range_w.0 > gt.intercept_range_w.1
                || gt.api_weight_range_w.0 > gt.api_weight_range_w.1
            {
                return Err(err(
                    &format!("devices[{i}].ground_truth"),
                    "weight ranges must be ordered",
                ));
            }
        }
        for (i, cx) in self.complexity.iter().enumerate() {
            if cx.name.is_empty() {
                return Err(err(&format!("complexity[{i}].name"), "must be non-empty"));
            }
            if cx.value_range.0 > cx.value_range.1 || cx.weight_range_w.0 > cx.weight_range_w.1 {
                return Err(err(&format!("complexity[{i}]"), "ranges must be ordered"));
            }
        }
        if self.report.windows < 4 {
            return Err(err("report.windows", "need at least 4 windows"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn json_roundtrip_preserves_config() {
        let cfg = ScenarioConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = ScenarioConfig::from_json(r#"{"seed": 7, "duration_events": 100}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.duration_events, 100);
        assert_eq!(cfg.vocabulary_size, 32);
    }

    #[test]
    fn invalid_configs_are_rejected_with_paths() {
        let mut cfg = ScenarioConfig::default();
        cfg.devices.clear();
        assert_eq!(cfg.validate().unwrap_err().path, "devices");

        let mut cfg = ScenarioConfig::default();
        cfg.app.ood_fraction = 1.5;
        assert_eq!(cfg.validate().unwrap_err().path, "app.ood_fraction");

        let mut cfg = ScenarioConfig::default();
        cfg.ood_api_count = cfg.vocabulary_size;
        assert_eq!(cfg.validate().unwrap_err().path, "ood_api_count");

        let mut cfg = ScenarioConfig::default();
        cfg.lambda = 0.0;
        assert_eq!(cfg.validate().unwrap_err().path, "lambda");
    }
}
