use super::log::EpisodeLog;
use super::session::{EngineError, Session, SessionStatus};
use crate::graph::GraphBenchmark;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum ReplayVerdict {
    Identical,
    Diverged { step: usize, field: String, expected: String, actual: String },
}

impl ReplayVerdict {
    pub fn is_identical(&self) -> bool {
        matches!(self, ReplayVerdict::Identical)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("log was recorded against manifest {log}, this graph is {graph}")]
    DigestMismatch { log: String, graph: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Re-runs the logged actions in a fresh session with the logged seed and
/// compares every observation hash and outcome. The first mismatch is
/// reported with its step index.
pub fn replay(g: &GraphBenchmark, log: &EpisodeLog) -> Result<ReplayVerdict, ReplayError> {
    if log.header.manifest_digest != g.digest() {
        return Err(ReplayError::DigestMismatch {
            log: log.header.manifest_digest.clone(),
            graph: g.digest().to_string(),
        });
    }
    let mut s = Session::start(g, &log.header.task, log.header.seed)?;
    let diverged = |step: usize, field: &str, expected: String, actual: String| ReplayVerdict::Diverged {
        step,
        field: field.to_string(),
        expected,
        actual,
    };
    for (i, rec) in log.steps.iter().enumerate() {
        let obs = match s.observe() {
            Ok(o) => o,
            Err(_) => return Ok(diverged(i, "status", "running".into(), format!("{:?}", s.status()))),
        };
        let hash = obs.hash();
        if hash != rec.observation_hash {
            return Ok(diverged(i, "observation_hash", rec.observation_hash.clone(), hash));
        }
        let outcome = match s.step(&rec.action) {
            Ok(o) => o,
            Err(e) => return Ok(diverged(i, "outcome", "applied".into(), e.to_string())),
        };
        if outcome != rec.outcome {
            let json = |o| serde_json::to_string(o).unwrap_or_default();
            return Ok(diverged(i, "outcome", json(&rec.outcome), json(&outcome)));
        }
    }
    if let Some(f) = &log.footer {
        if f.status == SessionStatus::FailedAgent {
            s.fail_agent(f.reason.clone().unwrap_or_default());
        }
        if s.status() != f.status {
            return Ok(diverged(log.steps.len(), "status", format!("{:?}", f.status), format!("{:?}", s.status())));
        }
        if s.answer() != f.answer.as_deref() {
            return Ok(diverged(log.steps.len(), "answer", format!("{:?}", f.answer), format!("{:?}", s.answer())));
        }
    }
    Ok(ReplayVerdict::Identical)
}
