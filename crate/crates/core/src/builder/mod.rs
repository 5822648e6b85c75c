//! Graph construction from recorded trajectories.
//!
//! [`build_draft`] runs the whole pass: fill missing actions, box clicks,
//! screen candidate pairs by description similarity, let the judge decide,
//! apply what curators already decided, and merge. Everything the oracles
//! produced goes into the curation queue; the next pass picks up the
//! decisions.

mod annotate;
mod coarse;
mod complete;
mod curation;
mod merge;
mod oracle;
mod supplement;
mod trajectory;

pub use annotate::{annotate_bbox, annotate_missing, AnnotateError, BoxAnnotation, BoxProvenance, BoxSource, StepAnnotation};
pub use coarse::{
    candidate_id, coarse_screen, cosine, discriminate_nodes, CoarseConfig, CoarseResult, MergeCandidate, Verdict,
    VerdictSource,
};
pub use complete::{complete_actions, complete_all, PendingGap};
pub use curation::{
    BboxPayload, CurationError, CurationStore, Decision, DecisionVerdict, ItemKind, ItemStatus, QueueEntry, QueueFilter,
    QueuePage, ReviewItem,
};
pub use merge::{
    canonical_form, merge_graph, uncovered_steps, write_draft, BranchEdge, CanonicalForm, Contradiction, Draft,
    MergeConfig, MergeExtras, MergeReport, SYSTEM_APP,
};
pub use oracle::{
    pair_key, point_key, AuditEntry, Backend, BoxChoice, HttpConnector, HttpEndpoint, JudgeVerdict, Judgement, Oracle,
    OracleConfig, OracleError, OracleSuite, Prompts, Role, Selection, StubOracle,
};
pub use supplement::{cluster_points, supplement_branches, BranchProposal, SupplementConfig, SupplementError};
pub use trajectory::{
    ingest_trajectories, IngestError, Origin, ScreenAsset, TrajStep, Trajectory, TrajectorySet, TrajectorySource,
};

use crate::graph::{GraphBenchmark, LoadError};
use crate::par::Exec;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::HashMap;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub coarse: CoarseConfig,
    pub merge: MergeConfig,
    #[serde(skip)]
    pub exec: Exec,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub draft: Draft,
    /// The input with filled actions and boxes.
    pub trajectories: TrajectorySet,
    /// Final candidate list, human verdicts included.
    pub candidates: Vec<MergeCandidate>,
    pub gaps: Vec<PendingGap>,
    pub annotations: Vec<StepAnnotation>,
    /// Screens the coarse pass could not describe or embed.
    pub excluded: Vec<(String, String)>,
    /// Candidates the judge failed on.
    pub judge_failures: Vec<(String, String)>,
    /// Items newly added to the curation queue.
    pub enqueued: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Curation(#[from] CurationError),
}

/// One builder pass. Human decisions in `store` are applied before any
/// automatic step and are never overwritten; new review items are appended
/// to it.
pub fn build_draft(
    mut ts: TrajectorySet,
    suite: &OracleSuite,
    mut store: Option<&mut CurationStore>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let gaps = complete_all(&mut ts, suite);
    let annotations = annotate_missing(&mut ts, suite);
    if let Some(store) = store.as_deref() {
        let overrides = store.bbox_overrides();
        for t in &mut ts.trajectories {
            for (i, step) in t.steps.iter_mut().enumerate() {
                if let Some(b) = overrides.get(&(t.id.clone(), i)) {
                    step.bbox = *b;
                    step.bbox_origin = Origin::Human;
                }
            }
        }
    }

    let coarse = coarse_screen(&ts, suite, &cfg.coarse, cfg.exec)?;
    let mut candidates = coarse.candidates;
    let human = store.as_deref().map(CurationStore::human_verdicts).unwrap_or_default();
    let mut at: HashMap<String, usize> = candidates.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
    for h in human {
        match at.get(&h.id) {
            Some(&i) => candidates[i] = h,
            None => {
                at.insert(h.id.clone(), candidates.len());
                candidates.push(h);
            }
        }
    }
    let judge_failures = discriminate_nodes(&mut candidates, &ts, suite, cfg.exec);

    let extras = store.as_deref().map(CurationStore::extras).unwrap_or_default();
    let draft = merge_graph(&ts, &candidates, &extras, &cfg.merge)?;
    for c in &draft.report.contradictions {
        let i = at[&c.candidate];
        if candidates[i].source == VerdictSource::Auto {
            candidates[i].verdict = Verdict::Pending;
        }
    }

    let mut enqueued = 0;
    if let Some(store) = store.as_deref_mut() {
        for item in review_items(&ts, &candidates, &annotations) {
            enqueued += usize::from(store.enqueue(item)?);
        }
    }
    Ok(PipelineOutput {
        draft,
        trajectories: ts,
        candidates,
        gaps,
        annotations,
        excluded: coarse.excluded,
        judge_failures,
        enqueued,
    })
}

/// Review items for automatic merge verdicts and boxes.
pub fn review_items(ts: &TrajectorySet, candidates: &[MergeCandidate], annotations: &[StepAnnotation]) -> Vec<ReviewItem> {
    let app = |sha: &str| ts.screen(sha).and_then(|s| s.app.clone());
    let mut out = Vec::new();
    for c in candidates.iter().filter(|c| c.source == VerdictSource::Auto) {
        out.push(ReviewItem {
            id: c.id.clone(),
            kind: ItemKind::MergeCandidate,
            app: app(&c.a),
            screens: vec![c.a.clone(), c.b.clone()],
            payload: serde_json::to_value(c).expect("candidate serializes"),
        });
    }
    for a in annotations {
        let (bbox, provenance) = match &a.result {
            Ok(ann) => (Some(ann.bbox), ann.provenance.clone()),
            Err(p) => (None, p.clone()),
        };
        let payload = BboxPayload {
            trajectory: a.trajectory.clone(),
            step: a.step,
            screen: a.screen.clone(),
            point: a.point,
            bbox,
            provenance,
        };
        out.push(ReviewItem {
            id: format!("bb-{}-{}", a.trajectory, a.step),
            kind: ItemKind::Bbox,
            app: app(&a.screen),
            screens: vec![a.screen.clone()],
            payload: serde_json::to_value(payload).expect("payload serializes"),
        });
    }
    out
}

/// Queues branch proposals for curators. Returns how many were new.
pub fn enqueue_proposals(
    store: &mut CurationStore,
    g: &GraphBenchmark,
    proposals: &[BranchProposal],
) -> Result<usize, CurationError> {
    let mut n = 0;
    for p in proposals {
        let item = ReviewItem {
            id: p.id.clone(),
            kind: ItemKind::BranchProposal,
            app: g.nodes.get(&p.node).map(|n| n.app.clone()),
            screens: vec![p.screen.clone()],
            payload: json!({"node": p.node, "screen": p.screen, "bbox": p.bbox, "points": p.points}),
        };
        n += usize::from(store.enqueue(item)?);
    }
    Ok(n)
}
