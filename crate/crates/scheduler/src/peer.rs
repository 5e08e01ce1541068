use serde::{Deserialize, Serialize};

/// What a peer contributes to the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerRole {
    /// Offers a device; measurements on it are model estimates.
    Provider,
    /// Offers a device wired to a hardware power monitor; measurements on it
    /// are ground truth.
    SuperProvider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerState {
    Idle,
    Busy,
    Offline,
}

/// A registered peer. `state == Busy` exactly when `current_job` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerRecord {
    pub peer_id: String,
    pub role: PeerRole,
    pub device_model: String,
    pub state: PeerState,
    pub current_job: Option<String>,
    /// Event index of the last assignment; used for least-recently-used
    /// tie-breaking among idle peers.
    pub last_assigned_at: u64,
}

impl PeerRecord {
    pub fn new(peer_id: String, role: PeerRole, device_model: String) -> Self {
        Self {
            peer_id,
            role,
            device_model,
            state: PeerState::Idle,
            current_job: None,
            last_assigned_at: 0,
        }
    }
}
