//! Graph-structured benchmark environment for mobile GUI agents.
//!
//! A benchmark is a finite screen-transition graph: nodes hold one or more
//! interchangeable screenshots, edges are canonical actions (optionally
//! conditioned on a bounding box). Agents are run against the graph in
//! seeded sessions, scored with milestone-based metrics, and new graphs are
//! built from recorded trajectories through the [`builder`] pipeline.
//!
//! Module map:
//! - [`graph`]: data model, manifest loading, validation and statistics.
//! - [`action`]: the nine-kind action vocabulary and output parsing.
//! - [`engine`]: sessions, transitions, episode logs and replay.
//! - [`metrics`]: SR / CR / atomic-capability scoring.
//! - [`harness`]: scripted agents and the evaluation runner.
//! - [`builder`]: trajectory ingestion, merging and annotation.

pub mod action;
pub mod builder;
pub mod digest;
pub mod engine;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod par;

pub use action::{ActionKind, ActionSpec, Direction};
pub use engine::{EpisodeLog, Observation, Session, SessionStatus, StepOutcome};
pub use geometry::{BBox, Dims, Point};
pub use graph::{GraphBenchmark, NodeId};

/// Seed used when neither the caller nor `GRAPHBENCH_SEED` provides one.
pub const DEFAULT_SEED: u64 = 2025;

/// Environment variable overriding [`DEFAULT_SEED`].
pub const SEED_ENV: &str = "GRAPHBENCH_SEED";

/// Resolves the session seed: `GRAPHBENCH_SEED` when set and numeric,
/// otherwise [`DEFAULT_SEED`].
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}
