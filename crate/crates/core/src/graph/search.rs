//! Breadth-first searches over the environment's move relation.

use super::model::{GraphBenchmark, NodeId, Task};
use std::collections::{BTreeSet, HashSet, VecDeque};

/// Nodes one step away from `node`: explicit non-global edges plus
/// `navigate_home` and `open(app)` for every app. `navigate_back` only
/// returns to already-visited nodes and contributes nothing new.
pub fn global_successors(g: &GraphBenchmark, node: &NodeId) -> BTreeSet<NodeId> {
    let mut out: BTreeSet<NodeId> = g
        .out_edges(node)
        .iter()
        .map(|&i| &g.edges[i])
        .filter(|e| !e.trigger.kind().is_global())
        .map(|e| e.dst.clone())
        .collect();
    out.insert(g.home.clone());
    out.extend(g.apps.values().cloned());
    out
}

pub(crate) fn reachable_from_home(g: &GraphBenchmark) -> HashSet<NodeId> {
    let mut seen = HashSet::from([g.home.clone()]);
    let mut queue = VecDeque::from([g.home.clone()]);
    while let Some(n) = queue.pop_front() {
        for m in global_successors(g, &n) {
            if seen.insert(m.clone()) {
                queue.push_back(m);
            }
        }
    }
    seen
}

fn bools_of(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask & (1 << i) != 0).collect()
}

/// Fewest steps that reach every milestone of `task` (plus one `complete`
/// when the task has an answer rule), or `None` if no action sequence
/// succeeds. Tasks with more than 64 milestones are reported infeasible.
pub fn optimal_solution_length(g: &GraphBenchmark, task: &Task) -> Option<usize> {
    let n = task.milestones.len();
    if n > 64 {
        return None;
    }
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let extra = usize::from(task.answer_rule.is_some());
    let start = (task.start.clone(), 0u64);
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some(((node, mask), depth)) = queue.pop_front() {
        let mut next: Vec<NodeId> = global_successors(g, &node).into_iter().collect();
        next.push(node.clone()); // a no-op step re-checks the current node
        for m in next {
            let reached = bools_of(mask, n);
            let new = task.newly_reached(&m, &reached).into_iter().fold(mask, |acc, i| acc | (1 << i));
            if new == full {
                return Some(depth + 1 + extra);
            }
            if seen.insert((m.clone(), new)) {
                queue.push_back(((m, new), depth + 1));
            }
        }
    }
    None
}
