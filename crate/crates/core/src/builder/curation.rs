//! Append-only review queue shared by the builder and human curators.
//!
//! Two JSON-lines files live in the store directory: `items.jsonl` (what
//! needs review) and `decisions.jsonl` (who decided what, when). Everything
//! else is derived from them on open, so the files alone reproduce every
//! decision.

use super::coarse::{MergeCandidate, Verdict, VerdictSource};
use super::merge::{BranchEdge, MergeExtras};
use crate::geometry::BBox;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

const ITEMS: &str = "items.jsonl";
const DECISIONS: &str = "decisions.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemKind {
    MergeCandidate,
    Bbox,
    BranchProposal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemStatus {
    Open,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: String,
    pub kind: ItemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app: Option<String>,
    /// Content addresses of the screens to show.
    pub screens: Vec<String>,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum DecisionVerdict {
    SameNode,
    DifferentNode,
    /// Different nodes that share the outgoing actions of `from`.
    CopyEdges { from: String, to: String },
    Approve,
    EditBbox { bbox: BBox },
    Reject,
    /// `target` is the content address of the screen the click leads to.
    AcceptBranch {
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<BBox>,
    },
}

impl DecisionVerdict {
    fn fits(&self, kind: ItemKind) -> bool {
        use DecisionVerdict::*;
        match kind {
            ItemKind::MergeCandidate => matches!(self, SameNode | DifferentNode | CopyEdges { .. }),
            ItemKind::Bbox => matches!(self, Approve | EditBbox { .. } | Reject),
            ItemKind::BranchProposal => matches!(self, AcceptBranch { .. } | Reject),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub item: String,
    pub actor: String,
    /// RFC 3339, UTC.
    pub at: String,
    #[serde(flatten)]
    pub verdict: DecisionVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    #[serde(flatten)]
    pub item: ReviewItem,
    pub status: ItemStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueFilter {
    #[serde(default)]
    pub kind: Option<ItemKind>,
    #[serde(default)]
    pub app: Option<String>,
    #[serde(default)]
    pub status: Option<ItemStatus>,
    #[serde(default)]
    pub offset: usize,
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuePage {
    pub items: Vec<QueueEntry>,
    /// Matching entries before paging.
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_offset: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("item `{}` was already decided by {}", .0.item, .0.actor)]
    Conflict(Box<Decision>),
    #[error("verdict `{verdict}` does not apply to a {kind:?} item")]
    WrongVerdict { kind: ItemKind, verdict: String },
    #[error("actor must not be empty")]
    NoActor,
    #[error("{file}:{line}: {message}")]
    Corrupt { file: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug)]
pub struct CurationStore {
    dir: PathBuf,
    items: Vec<ReviewItem>,
    index: HashMap<String, usize>,
    decisions: HashMap<String, Decision>,
    items_log: File,
    decisions_log: File,
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CurationError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| CurationError::Corrupt {
                file: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn append<T: Serialize>(f: &mut File, v: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(v).expect("record serializes");
    line.push(b'\n');
    f.write_all(&line)?;
    f.sync_data()
}

impl CurationStore {
    /// Opens or creates a store. A repeated decision in the log (which only
    /// a hand edit can produce) is ignored in favour of the first.
    pub fn open(dir: &Path) -> Result<Self, CurationError> {
        std::fs::create_dir_all(dir)?;
        let mut store = CurationStore {
            dir: dir.to_path_buf(),
            items: Vec::new(),
            index: HashMap::new(),
            decisions: HashMap::new(),
            items_log: OpenOptions::new().create(true).append(true).open(dir.join(ITEMS))?,
            decisions_log: OpenOptions::new().create(true).append(true).open(dir.join(DECISIONS))?,
        };
        for item in read_lines::<ReviewItem>(&dir.join(ITEMS))? {
            if !store.index.contains_key(&item.id) {
                store.index.insert(item.id.clone(), store.items.len());
                store.items.push(item);
            }
        }
        for d in read_lines::<Decision>(&dir.join(DECISIONS))? {
            store.decisions.entry(d.item.clone()).or_insert(d);
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Adds an item unless one with the same id exists. Returns whether it
    /// was added.
    pub fn enqueue(&mut self, item: ReviewItem) -> Result<bool, CurationError> {
        if self.index.contains_key(&item.id) {
            return Ok(false);
        }
        append(&mut self.items_log, &item)?;
        self.index.insert(item.id.clone(), self.items.len());
        self.items.push(item);
        Ok(true)
    }

    pub fn get(&self, id: &str) -> Option<QueueEntry> {
        self.index.get(id).map(|&i| self.entry(&self.items[i]))
    }

    fn entry(&self, item: &ReviewItem) -> QueueEntry {
        let decision = self.decisions.get(&item.id).cloned();
        let status = if decision.is_some() { ItemStatus::Decided } else { ItemStatus::Open };
        QueueEntry { item: item.clone(), status, decision }
    }

    /// Entries in enqueue order, open ones first.
    pub fn queue(&self, f: &QueueFilter) -> QueuePage {
        let mut matching: Vec<QueueEntry> = self
            .items
            .iter()
            .filter(|i| f.kind.is_none_or(|k| k == i.kind))
            .filter(|i| f.app.as_ref().is_none_or(|a| i.app.as_ref() == Some(a)))
            .map(|i| self.entry(i))
            .filter(|e| f.status.is_none_or(|s| s == e.status))
            .collect();
        matching.sort_by_key(|e| e.status == ItemStatus::Decided);
        let total = matching.len();
        let limit = f.limit.unwrap_or(total);
        let items: Vec<QueueEntry> = matching.into_iter().skip(f.offset).take(limit).collect();
        let end = f.offset + items.len();
        QueuePage { items, total, next_offset: (end < total).then_some(end) }
    }

    pub fn decide(&mut self, id: &str, actor: &str, verdict: DecisionVerdict) -> Result<Decision, CurationError> {
        let at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        self.decide_at(id, actor, verdict, at)
    }

    /// Records the first decision on an item; later ones are conflicts.
    pub fn decide_at(&mut self, id: &str, actor: &str, verdict: DecisionVerdict, at: String) -> Result<Decision, CurationError> {
        let item = self.index.get(id).map(|&i| &self.items[i]).ok_or_else(|| CurationError::UnknownItem(id.into()))?;
        if actor.trim().is_empty() {
            return Err(CurationError::NoActor);
        }
        if let Some(d) = self.decisions.get(id) {
            return Err(CurationError::Conflict(Box::new(d.clone())));
        }
        if !verdict.fits(item.kind) {
            let tag = serde_json::to_value(&verdict).expect("verdict serializes")["verdict"].clone();
            return Err(CurationError::WrongVerdict { kind: item.kind, verdict: tag.as_str().unwrap_or("?").into() });
        }
        let d = Decision { item: id.into(), actor: actor.into(), at, verdict };
        append(&mut self.decisions_log, &d)?;
        self.decisions.insert(id.into(), d.clone());
        Ok(d)
    }

    fn decided(&self, kind: ItemKind) -> impl Iterator<Item = (&ReviewItem, &Decision)> {
        self.items
            .iter()
            .filter(move |i| i.kind == kind)
            .filter_map(|i| self.decisions.get(&i.id).map(|d| (i, d)))
    }

    /// Human merge verdicts, as candidates. Copy-edges decisions count as
    /// different-node.
    pub fn human_verdicts(&self) -> Vec<MergeCandidate> {
        self.decided(ItemKind::MergeCandidate)
            .filter_map(|(item, d)| {
                let mut c: MergeCandidate = serde_json::from_value(item.payload.clone()).ok()?;
                c.verdict = match d.verdict {
                    DecisionVerdict::SameNode => Verdict::SameNode,
                    _ => Verdict::DifferentNode,
                };
                c.source = VerdictSource::Human;
                c.rationale = Some(format!("decided by {}", d.actor));
                Some(c)
            })
            .collect()
    }

    /// Box decisions keyed by (trajectory, step): `Some` to set, `None` to
    /// drop the box.
    pub fn bbox_overrides(&self) -> BTreeMap<(String, usize), Option<BBox>> {
        let mut out = BTreeMap::new();
        for (item, d) in self.decided(ItemKind::Bbox) {
            let Ok(p) = serde_json::from_value::<BboxPayload>(item.payload.clone()) else { continue };
            let bbox = match &d.verdict {
                DecisionVerdict::Approve => p.bbox,
                DecisionVerdict::EditBbox { bbox } => Some(*bbox),
                _ => None,
            };
            out.insert((p.trajectory, p.step), bbox);
        }
        out
    }

    /// Extra edges from copy-edges and accepted branch decisions.
    pub fn extras(&self) -> MergeExtras {
        let mut x = MergeExtras::default();
        for (_, d) in self.decided(ItemKind::MergeCandidate) {
            if let DecisionVerdict::CopyEdges { from, to } = &d.verdict {
                x.copy_edges.push((from.clone(), to.clone()));
            }
        }
        for (item, d) in self.decided(ItemKind::BranchProposal) {
            let DecisionVerdict::AcceptBranch { target, bbox } = &d.verdict else { continue };
            let (Some(screen), Some(proposed)) = (
                item.payload.get("screen").and_then(Value::as_str),
                item.payload.get("bbox").and_then(|b| serde_json::from_value::<BBox>(b.clone()).ok()),
            ) else {
                continue;
            };
            x.branches.push(BranchEdge { screen: screen.into(), bbox: bbox.unwrap_or(proposed), target: target.clone() });
        }
        x
    }
}

/// Payload of a bbox review item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BboxPayload {
    pub trajectory: String,
    pub step: usize,
    pub screen: String,
    pub point: crate::geometry::Point,
    /// The automatic box; absent when the oracles produced none.
    pub bbox: Option<BBox>,
    pub provenance: super::annotate::BoxProvenance,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn item(id: &str, kind: ItemKind, app: &str) -> ReviewItem {
        ReviewItem { id: id.into(), kind, app: Some(app.into()), screens: vec![], payload: json!({}) }
    }

    #[test]
    fn queue_order_filters_and_paging() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = CurationStore::open(dir.path()).unwrap();
        assert_eq!(s.queue(&QueueFilter::default()).total, 0);
        for (i, kind) in [ItemKind::MergeCandidate, ItemKind::Bbox, ItemKind::Bbox, ItemKind::MergeCandidate, ItemKind::Bbox]
            .into_iter()
            .enumerate()
        {
            assert!(s.enqueue(item(&format!("i{i}"), kind, if i < 3 { "A" } else { "B" })).unwrap());
        }
        assert!(!s.enqueue(item("i0", ItemKind::Bbox, "A")).unwrap());
        s.decide("i0", "ann", DecisionVerdict::SameNode).unwrap();
        s.decide("i1", "ann", DecisionVerdict::Approve).unwrap();

        let all = s.queue(&QueueFilter::default());
        let ids: Vec<&str> = all.items.iter().map(|e| e.item.id.as_str()).collect();
        assert_eq!(ids, ["i2", "i3", "i4", "i0", "i1"]);
        let open = s.queue(&QueueFilter { status: Some(ItemStatus::Open), ..Default::default() });
        assert_eq!(open.total, 3);
        let bbox = s.queue(&QueueFilter { kind: Some(ItemKind::Bbox), ..Default::default() });
        assert!(bbox.items.iter().all(|e| e.item.kind == ItemKind::Bbox));
        let b = s.queue(&QueueFilter { app: Some("B".into()), ..Default::default() });
        assert_eq!(b.total, 2);
        let page = s.queue(&QueueFilter { offset: 1, limit: Some(2), ..Default::default() });
        assert_eq!((page.items.len(), page.next_offset), (2, Some(3)));
    }

    #[test]
    fn first_decision_wins_and_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = CurationStore::open(dir.path()).unwrap();
        s.enqueue(item("b", ItemKind::Bbox, "A")).unwrap();
        let edited = BBox::new(3, 4, 50, 60).unwrap();
        s.decide_at("b", "ann", DecisionVerdict::EditBbox { bbox: edited }, "2026-01-01T00:00:00Z".into()).unwrap();
        let err = s.decide("b", "bob", DecisionVerdict::Reject).unwrap_err();
        assert!(matches!(err, CurationError::Conflict(d) if d.actor == "ann"));
        assert!(matches!(s.decide("zz", "bob", DecisionVerdict::Reject), Err(CurationError::UnknownItem(_))));
        drop(s);

        let s = CurationStore::open(dir.path()).unwrap();
        let e = s.get("b").unwrap();
        assert_eq!(e.status, ItemStatus::Decided);
        assert_eq!(e.decision.unwrap().verdict, DecisionVerdict::EditBbox { bbox: edited });
    }

    #[test]
    fn verdict_must_fit_the_item() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = CurationStore::open(dir.path()).unwrap();
        s.enqueue(item("m", ItemKind::MergeCandidate, "A")).unwrap();
        assert!(matches!(s.decide("m", "ann", DecisionVerdict::Approve), Err(CurationError::WrongVerdict { .. })));
        assert!(matches!(s.decide("m", " ", DecisionVerdict::SameNode), Err(CurationError::NoActor)));
        assert_eq!(s.get("m").unwrap().status, ItemStatus::Open);
    }
}
