//! Append-only JSON-lines event log.
//!
//! The log is the source of truth for a deployment: every state the service
//! ever exposes is derivable from it. Line 1 is a header carrying the
//! deployment configuration the events were produced under; every following
//! line is one `PersistedEvent` with a sequence number dense from 1.
//! State-changing API requests are acknowledged only after their events are
//! flushed here.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use emaas_core::{
    AppManifest, EnergyModel, ExecutionContext, GateParams, MeasurementRecord, ReliabilityModel,
    RlsParams,
};
use emaas_scheduler::{Decision, PeerRole};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// First line of the log file: the configuration replay must use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub vocabulary: Vec<String>,
    pub cx_names: Vec<String>,
    pub gate: GateParams,
    pub rls: RlsParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedEvent {
    pub seq: u64,
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: EventBody,
}

/// Event kinds. `JobSubmitted`, `PeerEvent` and `HardwareResult` carry the
/// inputs replay re-applies; `Decision` and `ModelResult` record what the
/// scheduler derived so replay can verify it; `ModelSnapshotRef` embeds the
/// model state for spot checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    JobSubmitted {
        job_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_token: Option<String>,
        manifest: AppManifest,
        context: ExecutionContext,
    },
    PeerEvent {
        action: PeerAction,
        peer_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        role: Option<PeerRole>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        device_model: Option<String>,
    },
    Decision {
        job_id: String,
        #[serde(flatten)]
        decision: Decision,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        predicted_abs_error_w: Option<f64>,
    },
    HardwareResult {
        job_id: String,
        peer_id: String,
        energy_j: f64,
        duration_s: f64,
        /// Derived at apply time; replay recomputes and verifies them.
        /// Absent when the measurement was rejected and the job failed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon_w: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        estimated_j: Option<f64>,
    },
    ModelResult {
        record: MeasurementRecord,
    },
    ModelSnapshotRef {
        models: BTreeMap<String, ModelSnapshot>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerAction {
    Register,
    Heartbeat,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub energy: EnergyModel,
    pub reliability: ReliabilityModel,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("log serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Appends events with dense sequence numbers and flushes to disk on
/// request; acknowledgements must not outrun the flush.
pub struct EventLogWriter {
    out: BufWriter<File>,
    next_seq: u64,
}

impl EventLogWriter {
    /// Creates a fresh log at `path` (truncating any previous file) and
    /// writes the header line.
    pub fn create(path: &Path, header: &LogHeader) -> Result<Self, LogError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(Self { out, next_seq: 1 })
    }

    pub fn append(&mut self, body: EventBody) -> Result<u64, LogError> {
        let seq = self.next_seq;
        let event = PersistedEvent {
            seq,
            schema_version: LOG_SCHEMA_VERSION,
            body,
        };
        serde_json::to_writer(&mut self.out, &event)?;
        self.out.write_all(b"\n")?;
        self.next_seq += 1;
        Ok(seq)
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Makes everything appended so far durable.
    pub fn flush(&mut self) -> Result<(), LogError> {
        self.out.flush()?;
        self.out.get_ref().sync_data()?;
        Ok(())
    }
}
