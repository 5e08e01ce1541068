use std::path::PathBuf;

use emaas_core::{ApiVocabulary, FeatureSpace, GateParams, RlsParams, ValidationError};
use emaas_scheduler::SchedulerConfig;
use serde::{Deserialize, Serialize};

/// A static bearer token. A token bound to a subject may only act as that
/// peer on the peer endpoints; unbound tokens are operator/developer
/// credentials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

/// Service configuration, read from a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BrokerConfig {
    pub listen_addr: String,
    pub log_path: PathBuf,
    /// API-call vocabulary fixing the feature layout for this deployment.
    pub vocabulary: Vec<String>,
    /// Complexity metric names, in feature order.
    pub cx_names: Vec<String>,
    pub gate: GateParams,
    /// Forgetting factor for the online models.
    pub lambda: f64,
    /// Bearer tokens; empty disables authentication.
    pub tokens: Vec<TokenEntry>,
    /// Peers silent for longer than this are marked offline. None disables
    /// the sweep.
    pub heartbeat_timeout_s: Option<f64>,
    /// Append a model snapshot to the log every this many applied events.
    pub snapshot_every_events: u64,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            listen_addr: "127.0.0.1:8080".into(),
            log_path: PathBuf::from("emaas-events.jsonl"),
            vocabulary: (0..32).map(|i| format!("api.call.{i:03}")).collect(),
            cx_names: vec!["method_count".into(), "cyclomatic_mean".into()],
            gate: GateParams::default(),
            lambda: 0.999,
            tokens: Vec::new(),
            heartbeat_timeout_s: Some(30.0),
            snapshot_every_events: 1000,
        }
    }
}

impl BrokerConfig {
    pub fn from_json(json: &str) -> Result<Self, ValidationError> {
        let cfg: BrokerConfig = serde_json::from_str(json)
            .map_err(|e| ValidationError::new("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.vocabulary.is_empty() {
            return Err(ValidationError::new("vocabulary", "must be non-empty"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(ValidationError::new("lambda", "must be within (0, 1]"));
        }
        if !(self.gate.theta_w > 0.0) {
            return Err(ValidationError::new("gate.theta_w", "must be positive"));
        }
        if self.gate.min_samples == 0 {
            return Err(ValidationError::new("gate.min_samples", "must be at least 1"));
        }
        if self.snapshot_every_events == 0 {
            return Err(ValidationError::new(
                "snapshot_every_events",
                "must be positive",
            ));
        }
        ApiVocabulary::new(self.vocabulary.clone())?;
        Ok(())
    }

    pub fn scheduler_config(&self) -> Result<SchedulerConfig, ValidationError> {
        let vocab = ApiVocabulary::new(self.vocabulary.clone())?;
        Ok(SchedulerConfig {
            feature_space: FeatureSpace::new(vocab, self.cx_names.clone()),
            gate: self.gate,
            rls: RlsParams {
                lambda: self.lambda,
                init_variance: 1e8,
            },
        })
    }
}
