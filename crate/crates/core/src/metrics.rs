//! Milestone-based scoring: success rate (SR), completion rate (CR) and the
//! per-capability table (AC).
//!
//! A milestone counts towards its capability's denominator once it is
//! *activated*, i.e. every milestone in its `requires` list was reached
//! during the episode. Milestones stranded behind an earlier failure are
//! left out, and a capability that was never activated has no score.

use crate::action::ActionSpec;
use crate::engine::{EpisodeLog, SessionStatus};
use crate::graph::{Capability, Task, TaskKind};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;

/// A percentage held as integer hundredths, rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(u64);

impl Percent {
    pub fn from_ratio(r: Ratio<u128>) -> Self {
        let hundredths = (r * Ratio::from_integer(10_000u128)).round().to_integer();
        Percent(hundredths as u64)
    }

    pub fn of(num: usize, den: usize) -> Option<Self> {
        (den > 0).then(|| Self::from_ratio(Ratio::new(num as u128, den as u128)))
    }

    pub fn hundredths(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format!("{}.{:02}", self.0 / 100, self.0 % 100);
        f.pad(&s)
    }
}

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(serde::de::Error::custom(format!("percentage {v} out of range")));
        }
        Ok(Percent((v * 100.0).round() as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("log belongs to task `{log}`, not `{task}`")]
    TaskMismatch { task: String, log: String },
    #[error("log reaches milestone `{0}`, which the task does not define")]
    UnknownMilestone(String),
    #[error("log reaches milestone `{milestone}` before its prerequisite `{missing}`")]
    PrerequisiteOrder { milestone: String, missing: String },
    #[error("score for unknown task `{0}`")]
    UnknownTask(String),
    #[error("more than one score for task `{0}`")]
    DuplicateScore(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeScore {
    pub task: String,
    pub kind: TaskKind,
    pub success: bool,
    /// reached / total milestones, in [0, 1].
    pub completion: f64,
    pub total: usize,
    /// Reached milestone ids in the order they were reached.
    pub reached: Vec<String>,
    /// Milestones whose prerequisites were all reached, in task order.
    pub activated: Vec<String>,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SessionStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

/// Scores one episode from its log. Partial logs are scored as they stand.
pub fn score_episode(task: &Task, log: &EpisodeLog) -> Result<EpisodeScore, ScoreError> {
    if log.header.task != task.id {
        return Err(ScoreError::TaskMismatch { task: task.id.clone(), log: log.header.task.clone() });
    }
    let mut reached: Vec<String> = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for rec in &log.steps {
        for id in &rec.outcome.milestones_newly_reached {
            let i = task.milestone_index(id).ok_or_else(|| ScoreError::UnknownMilestone(id.clone()))?;
            if let Some(missing) = task.milestones[i].requires.iter().find(|r| !seen.contains(r.as_str())) {
                return Err(ScoreError::PrerequisiteOrder { milestone: id.clone(), missing: missing.clone() });
            }
            if seen.insert(task.milestones[i].id.as_str()) {
                reached.push(id.clone());
            }
        }
    }
    let activated: Vec<String> = task
        .milestones
        .iter()
        .filter(|m| m.requires.iter().all(|r| seen.contains(r.as_str())))
        .map(|m| m.id.clone())
        .collect();

    let answer = log.footer.as_ref().and_then(|f| f.answer.clone()).or_else(|| {
        log.steps.iter().rev().find_map(|r| match &r.action {
            ActionSpec::Complete { text } => Some(text.clone()),
            _ => None,
        })
    });
    let total = task.milestones.len();
    let all = reached.len() == total;
    let answered = match &task.answer_rule {
        None => true,
        Some(rule) => answer.as_deref().is_some_and(|a| rule.matches(a)),
    };
    Ok(EpisodeScore {
        task: task.id.clone(),
        kind: task.kind,
        success: all && answered,
        completion: if total == 0 { 1.0 } else { reached.len() as f64 / total as f64 },
        total,
        reached,
        activated,
        steps: log.steps.len(),
        status: log.footer.as_ref().map(|f| f.status),
        answer,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityScore {
    pub capability: Capability,
    pub numerator: usize,
    pub denominator: usize,
    /// `None` when the capability was never activated.
    pub ac: Option<Percent>,
}

/// Sums reached / activated milestones per capability over all episodes.
/// Every capability appears in the result; untested ones carry `ac: None`.
pub fn atomic_capability(scores: &[EpisodeScore], tasks: &[Task]) -> Result<Vec<CapabilityScore>, ScoreError> {
    let mut counts: BTreeMap<Capability, (usize, usize)> = Capability::ALL.iter().map(|&c| (c, (0, 0))).collect();
    for s in scores {
        let task = tasks.iter().find(|t| t.id == s.task).ok_or_else(|| ScoreError::UnknownTask(s.task.clone()))?;
        for m in &task.milestones {
            let entry = counts.get_mut(&m.capability).expect("all capabilities seeded");
            if s.reached.contains(&m.id) {
                entry.0 += 1;
            }
            if s.activated.contains(&m.id) {
                entry.1 += 1;
            }
        }
    }
    Ok(Capability::ALL
        .iter()
        .map(|c| {
            let (numerator, denominator) = counts[c];
            CapabilityScore { capability: *c, numerator, denominator, ac: Percent::of(numerator, denominator) }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitScore {
    pub tasks: usize,
    pub successes: usize,
    /// `None` for an empty split.
    pub sr: Option<Percent>,
    pub cr: Option<Percent>,
}

impl SplitScore {
    fn of(scores: &[&EpisodeScore]) -> Self {
        let n = scores.len();
        let successes = scores.iter().filter(|s| s.success).count();
        let cr = (n > 0).then(|| {
            let sum: Ratio<u128> = scores
                .iter()
                .map(|s| {
                    if s.total == 0 {
                        Ratio::from_integer(1)
                    } else {
                        Ratio::new(s.reached.len() as u128, s.total as u128)
                    }
                })
                .sum();
            Percent::from_ratio(sum / n as u128)
        });
        SplitScore { tasks: n, successes, sr: Percent::of(successes, n), cr }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub agent: String,
    pub seed: u64,
    pub manifest_digest: String,
    pub engine_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub meta: RunMeta,
    pub episodes: Vec<EpisodeScore>,
    pub single_app: SplitScore,
    pub cross_app: SplitScore,
    /// Computed over every task, not as the mean of the two splits.
    pub average: SplitScore,
    pub capabilities: Vec<CapabilityScore>,
    /// Reached over total milestones, pooled across all tasks.
    pub milestone_ratio: Option<Percent>,
}

/// Builds the report. Episodes are ordered by task id so the output does not
/// depend on the order scores arrive in.
pub fn aggregate(scores: &[EpisodeScore], tasks: &[Task], meta: RunMeta) -> Result<BenchmarkReport, ScoreError> {
    let mut seen = HashSet::new();
    for s in scores {
        if !seen.insert(s.task.as_str()) {
            return Err(ScoreError::DuplicateScore(s.task.clone()));
        }
        if !tasks.iter().any(|t| t.id == s.task) {
            return Err(ScoreError::UnknownTask(s.task.clone()));
        }
    }
    let mut episodes = scores.to_vec();
    episodes.sort_by(|a, b| a.task.cmp(&b.task));
    let split = |kind: Option<TaskKind>| {
        let v: Vec<&EpisodeScore> = episodes.iter().filter(|s| kind.is_none_or(|k| s.kind == k)).collect();
        SplitScore::of(&v)
    };
    let reached: usize = episodes.iter().map(|s| s.reached.len()).sum();
    let total: usize = episodes.iter().map(|s| s.total).sum();
    Ok(BenchmarkReport {
        single_app: split(Some(TaskKind::SingleApp)),
        cross_app: split(Some(TaskKind::CrossApp)),
        average: split(None),
        capabilities: atomic_capability(&episodes, tasks)?,
        milestone_ratio: Percent::of(reached, total),
        episodes,
        meta,
    })
}

fn cell(p: Option<Percent>) -> String {
    p.map_or_else(|| "-".to_string(), |p| p.to_string())
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        out += &format!("agent {}  seed {}  manifest {}\n\n", m.agent, m.seed, &m.manifest_digest);
        out += &format!("{:<12} {:>6} {:>8} {:>8}\n", "split", "tasks", "SR", "CR");
        for (name, s) in [("single-app", &self.single_app), ("cross-app", &self.cross_app), ("average", &self.average)] {
            out += &format!("{:<12} {:>6} {:>8} {:>8}\n", name, s.tasks, cell(s.sr), cell(s.cr));
        }
        out += &format!("\n{:<12} {:>8} {:>8}\n", "capability", "reached", "AC");
        for c in &self.capabilities {
            let frac = format!("{}/{}", c.numerator, c.denominator);
            out += &format!("{:<12} {:>8} {:>8}\n", c.capability.as_str(), frac, cell(c.ac));
        }
        let w = self.episodes.iter().map(|e| e.task.len()).max().unwrap_or(0).max(4);
        out += &format!("\n{:<w$} {:>7} {:>6} {:>10}  status\n", "task", "success", "steps", "completion");
        for e in &self.episodes {
            let status = e.status.map_or_else(|| "partial".to_string(), |s| format!("{s:?}"));
            out += &format!(
                "{:<w$} {:>7} {:>6} {:>10}  {}\n",
                e.task,
                if e.success { "yes" } else { "no" },
                e.steps,
                format!("{}/{}", e.reached.len(), e.total),
                status
            );
        }
        out
    }
}
