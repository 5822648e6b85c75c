use super::oracle::{JudgeVerdict, OracleError, OracleSuite};
use super::trajectory::TrajectorySet;
use crate::par::Exec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pending,
    SameNode,
    DifferentNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictSource {
    Auto,
    /// Final: no automatic pass may change it.
    Human,
}

/// A pair of screens that might be the same state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeCandidate {
    pub id: String,
    pub a: String,
    pub b: String,
    pub similarity: f64,
    pub verdict: Verdict,
    pub source: VerdictSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl MergeCandidate {
    pub fn new(a: &str, b: &str, similarity: f64) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Self {
            id: candidate_id(a, b),
            a: a.to_string(),
            b: b.to_string(),
            similarity,
            verdict: Verdict::Pending,
            source: VerdictSource::Auto,
            rationale: None,
        }
    }
}

/// Stable id for an unordered screen pair.
pub fn candidate_id(a: &str, b: &str) -> String {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    format!("mc-{}-{}", &a[..a.len().min(12)], &b[..b.len().min(12)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseConfig {
    /// Cosine threshold in (0, 1].
    pub threshold: f64,
    /// Only compare screens carrying the same app tag.
    pub partition_by_app: bool,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        Self { threshold: 0.80, partition_by_app: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseResult {
    pub candidates: Vec<MergeCandidate>,
    /// Screens left out because an oracle failed on them.
    pub excluded: Vec<(String, String)>,
}

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    if a == b {
        return Some(1.0);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Some(0.0);
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Describes and embeds every unique screen, then keeps the pairs whose
/// embeddings reach the threshold. Pairs come out in first-appearance
/// order of their screens.
pub fn coarse_screen(
    ts: &TrajectorySet,
    suite: &OracleSuite,
    cfg: &CoarseConfig,
    exec: Exec,
) -> Result<CoarseResult, OracleError> {
    if !(cfg.threshold > 0.0 && cfg.threshold <= 1.0) {
        return Err(OracleError::Config(format!("threshold {} outside (0, 1]", cfg.threshold)));
    }
    let screens = ts.screens();
    let vectors: Vec<Result<Vec<f64>, OracleError>> =
        exec.map(screens, |s| suite.describe(s).and_then(|text| suite.embed(&text)));
    let mut excluded = Vec::new();
    for (s, v) in screens.iter().zip(&vectors) {
        if let Err(e) = v {
            tracing::warn!(screen = %s.sha256, error = %e, "screen excluded from coarse screening");
            excluded.push((s.sha256.clone(), e.to_string()));
        }
    }
    let n = screens.len();
    let candidates = exec.flat_map_range(n, |i| {
        let Ok(vi) = &vectors[i] else { return Vec::new() };
        let mut out = Vec::new();
        for j in i + 1..n {
            let Ok(vj) = &vectors[j] else { continue };
            if cfg.partition_by_app && screens[i].app != screens[j].app {
                continue;
            }
            match cosine(vi, vj) {
                Some(sim) if sim >= cfg.threshold => {
                    out.push(MergeCandidate::new(&screens[i].sha256, &screens[j].sha256, sim))
                }
                Some(_) => {}
                None => tracing::warn!(a = %screens[i].sha256, b = %screens[j].sha256, "embedding sizes differ"),
            }
        }
        out
    });
    Ok(CoarseResult { candidates, excluded })
}

/// Asks the judge about every pending automatic candidate. Human verdicts
/// are never touched. Returns the ids the judge failed on; those stay
/// pending.
pub fn discriminate_nodes(
    cands: &mut [MergeCandidate],
    ts: &TrajectorySet,
    suite: &OracleSuite,
    exec: Exec,
) -> Vec<(String, String)> {
    let todo: Vec<usize> = (0..cands.len())
        .filter(|&i| cands[i].source == VerdictSource::Auto && cands[i].verdict == Verdict::Pending)
        .collect();
    let answers = exec.map(&todo, |&i| {
        let c = &cands[i];
        match (ts.screen(&c.a), ts.screen(&c.b)) {
            (Some(a), Some(b)) => suite.judge(a, b),
            _ => Err(OracleError::BadAnswer { role: super::oracle::Role::Judge, message: "unknown screen".into() }),
        }
    });
    let mut failed = Vec::new();
    for (i, ans) in todo.into_iter().zip(answers) {
        match ans {
            Ok(j) => {
                cands[i].verdict = match j.verdict {
                    JudgeVerdict::Same => Verdict::SameNode,
                    JudgeVerdict::Different => Verdict::DifferentNode,
                };
                cands[i].rationale = Some(j.rationale);
            }
            Err(e) => failed.push((cands[i].id.clone(), e.to_string())),
        }
    }
    failed
}
