//! Job scheduling for EMaaS: the peer registry, the job lifecycle, and the
//! routing policy that decides between hardware measurement, model
//! estimation and waiting.
//!
//! The scheduler is a deterministic single-writer state machine. Every
//! mutation is an [`InputEvent`] applied through [`Scheduler::apply`], which
//! returns the [`Effect`]s it caused; replaying the same event sequence on a
//! fresh scheduler reproduces both state and effects exactly. Hardware
//! results drive the online model updates: each one performs exactly one
//! energy-model and one reliability-model update for its device.

pub mod audit;
mod events;
mod job;
mod peer;
mod scheduler;

pub use events::{Effect, InputEvent};
pub use job::{
    transition_allowed, Decision, DecisionRecord, Job, JobState, JobStateKind,
};
pub use peer::{PeerRecord, PeerRole, PeerState};
pub use scheduler::{
    DeviceMetrics, MetricsSnapshot, Scheduler, SchedulerConfig, SchedulerError,
};
