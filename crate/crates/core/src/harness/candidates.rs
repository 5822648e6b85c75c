use crate::action::ActionSpec;
use crate::graph::{GraphBenchmark, NodeId};

/// Actions a scripted agent may pick at `node`: one sample per outgoing
/// edge (box centers for clicks), the global actions, and `complete` on
/// screens with nowhere else to go. Order is deterministic.
pub fn make_candidate_actions(g: &GraphBenchmark, node: &NodeId) -> Vec<ActionSpec> {
    let mut out: Vec<ActionSpec> = Vec::new();
    for &i in g.out_edges(node) {
        let t = &g.edges[i].trigger;
        if t.kind().is_global() {
            continue;
        }
        if let Some(a) = t.sample_action() {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    let dead_end = out.is_empty();
    out.push(ActionSpec::NavigateBack);
    out.push(ActionSpec::NavigateHome);
    out.extend(g.apps.keys().map(ActionSpec::open));
    if dead_end {
        out.push(ActionSpec::complete(""));
    }
    out
}
