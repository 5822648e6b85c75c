use crate::action::ActionSpec;
use crate::graph::{GraphBenchmark, NodeId, Trigger};

/// Finds the edge at `node` fired by `action`.
///
/// Click and long-press pick, among same-kind edges whose box contains the
/// point (edges inclusive), the one with the smallest area; equal areas
/// fall back to manifest order. Swipe matches on direction and type on the
/// edge's text rule. Global actions, `wait` and `complete` never resolve to
/// an edge.
pub fn resolve_transition(g: &GraphBenchmark, node: &NodeId, action: &ActionSpec) -> Option<usize> {
    let edges = g.out_edges(node);
    match action {
        ActionSpec::Click { .. } | ActionSpec::LongPress { .. } => edges
            .iter()
            .copied()
            .filter(|&i| g.edges[i].trigger.accepts(action))
            .min_by_key(|&i| (g.edges[i].trigger.bbox().map_or(u64::MAX, |b| b.area()), i)),
        ActionSpec::Swipe { .. } | ActionSpec::Type { .. } => edges
            .iter()
            .copied()
            .find(|&i| !matches!(g.edges[i].trigger, Trigger::Click { .. }) && g.edges[i].trigger.accepts(action)),
        ActionSpec::Wait { .. }
        | ActionSpec::Open { .. }
        | ActionSpec::NavigateBack
        | ActionSpec::NavigateHome
        | ActionSpec::Complete { .. } => None,
    }
}
