use super::model::{GraphBenchmark, NodeId};
use super::search::{optimal_solution_length, reachable_from_home};
use crate::engine::{Session, SessionStatus};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One problem that keeps a graph from being evaluation-ready.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "kebab-case")]
pub enum Finding {
    /// Not reachable from HOME through edges, `open` or `navigate_home`.
    Unreachable { node: NodeId },
    /// Screens of one node disagree on pixel dimensions.
    ScreenDimsMismatch { node: NodeId },
    /// A click / long-press box does not fit every screen of its node.
    BboxOutsideScreen { node: NodeId, edge: usize },
    /// Two edges at one node share an action signature.
    DuplicateSignature { node: NodeId, first: usize, second: usize },
    MilestoneUnreachable { task: String, milestone: String, node: NodeId },
    /// No action sequence reaches every milestone in `requires` order.
    TaskInfeasible { task: String },
    GoldenPathFails { task: String, path: usize, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    /// An empty report means the graph is ready for evaluation.
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks reachability, action-equivalence across screens, signature
/// uniqueness, milestone reachability, task feasibility and the stored
/// golden paths. Findings are sorted, so the report is a pure function of
/// the graph.
pub fn validate_graph(g: &GraphBenchmark) -> ValidationReport {
    let mut findings = Vec::new();
    let reachable = reachable_from_home(g);

    for (id, node) in &g.nodes {
        if !reachable.contains(id) {
            findings.push(Finding::Unreachable { node: id.clone() });
        }
        let dims = node.screens[0].dims();
        if node.screens.iter().any(|s| s.dims() != dims) {
            findings.push(Finding::ScreenDimsMismatch { node: id.clone() });
        }
        let mut seen: HashMap<&super::model::Trigger, usize> = HashMap::new();
        for &i in g.out_edges(id) {
            let trigger = &g.edges[i].trigger;
            if let Some(b) = trigger.bbox() {
                if node.screens.iter().any(|s| !b.fits(s.dims())) {
                    findings.push(Finding::BboxOutsideScreen { node: id.clone(), edge: i });
                }
            }
            if let Some(&first) = seen.get(trigger) {
                findings.push(Finding::DuplicateSignature { node: id.clone(), first, second: i });
            } else {
                seen.insert(trigger, i);
            }
        }
    }

    for task in &g.tasks {
        for m in &task.milestones {
            for n in &m.accept {
                if !reachable.contains(n) {
                    findings.push(Finding::MilestoneUnreachable {
                        task: task.id.clone(),
                        milestone: m.id.clone(),
                        node: n.clone(),
                    });
                }
            }
        }
        if optimal_solution_length(g, task).is_none() {
            findings.push(Finding::TaskInfeasible { task: task.id.clone() });
        }
        for (pi, path) in task.golden_paths.iter().enumerate() {
            if let Err(reason) = check_golden_path(g, &task.id, path) {
                findings.push(Finding::GoldenPathFails { task: task.id.clone(), path: pi, reason });
            }
        }
    }

    findings.sort();
    ValidationReport { findings }
}

/// Runs `path` in a fresh session and demands that it reaches every
/// milestone and, for answer-rule tasks, ends with an accepted answer.
pub(crate) fn check_golden_path(
    g: &GraphBenchmark,
    task_id: &str,
    path: &[crate::action::ActionSpec],
) -> Result<(), String> {
    let mut s = Session::start(g, task_id, crate::DEFAULT_SEED).map_err(|e| e.to_string())?;
    for (i, a) in path.iter().enumerate() {
        if s.status() != SessionStatus::Running {
            return Err(format!("session ended with {:?} before step {i}", s.status()));
        }
        s.step(a).map_err(|e| format!("step {i}: {e}"))?;
    }
    if !s.all_milestones_reached() {
        return Err(format!("reached {} of {} milestones", s.reached().len(), s.task().milestones.len()));
    }
    if let Some(rule) = &s.task().answer_rule {
        match s.answer() {
            Some(ans) if rule.matches(ans) => {}
            Some(ans) => return Err(format!("answer {ans:?} rejected by rule")),
            None => return Err("task needs a final answer".into()),
        }
    }
    Ok(())
}
