//! The JSON manifest: parsing, referential checks, asset verification and
//! canonical serialization.

use super::model::{Edge, GraphBenchmark, Milestone, Node, NodeId, Task, TaskKind, TextRule, Trigger};
use crate::action::ActionSpec;
use crate::digest::sha256_hex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("schema violation at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("missing image {path}")]
    MissingImage { path: String },
    #[error("hash mismatch for {path}: manifest says {expected}, file hashes to {actual}")]
    HashMismatch { path: String, expected: String, actual: String },
    #[error("dangling node id `{id}` at {location}")]
    DanglingNode { id: String, location: String },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl LoadError {
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::Schema { .. } => "schema-violation",
            LoadError::MissingImage { .. } => "missing-image",
            LoadError::HashMismatch { .. } => "hash-mismatch",
            LoadError::DanglingNode { .. } => "dangling-node-id",
            LoadError::Io { .. } => "io",
        }
    }

    fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        LoadError::Schema { location: location.into(), message: message.into() }
    }
}

/// How image assets are treated at load.
#[derive(Debug, Clone)]
pub enum AssetCheck {
    /// Every screen image must exist under the root and hash to its digest.
    Verify(PathBuf),
    /// Structure only; used for generated graphs in tests and drafts held
    /// in memory.
    Skip,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDoc {
    pub version: u32,
    pub home: NodeId,
    pub apps: BTreeMap<String, NodeId>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub tasks: Vec<TaskDoc>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDoc {
    pub id: String,
    pub instruction: String,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NodeId>,
    pub max_steps: u32,
    pub milestones: Vec<MilestoneDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_rule: Option<TextRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub golden_paths: Vec<Vec<ActionSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MilestoneDoc {
    pub id: String,
    pub accept: Vec<NodeId>,
    pub capability: super::model::Capability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires: Option<Vec<String>>,
}

impl ManifestDoc {
    pub fn parse(src: &str) -> Result<Self, LoadError> {
        let de = &mut serde_json::Deserializer::from_str(src);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let location = e.path().to_string();
            let inner = e.into_inner();
            LoadError::schema(
                if location == "." { format!("line {} column {}", inner.line(), inner.column()) } else { location },
                inner.to_string(),
            )
        })
    }
}

/// Reads a manifest file; images resolve relative to its directory.
pub fn load_graph(manifest: &Path) -> Result<GraphBenchmark, LoadError> {
    let src = std::fs::read_to_string(manifest)
        .map_err(|e| LoadError::Io { path: manifest.display().to_string(), source: e })?;
    let root = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    GraphBenchmark::from_manifest_str(&src, AssetCheck::Verify(root))
}

impl GraphBenchmark {
    pub fn from_manifest_str(src: &str, assets: AssetCheck) -> Result<Self, LoadError> {
        Self::from_doc(ManifestDoc::parse(src)?, assets)
    }

    pub fn from_doc(doc: ManifestDoc, assets: AssetCheck) -> Result<Self, LoadError> {
        if doc.version != MANIFEST_VERSION {
            return Err(LoadError::schema("version", format!("unsupported version {}", doc.version)));
        }

        let mut nodes = BTreeMap::new();
        for (i, node) in doc.nodes.into_iter().enumerate() {
            let loc = format!("nodes[{i}]");
            if node.screens.is_empty() {
                return Err(LoadError::schema(format!("{loc}.screens"), "node needs at least one screen"));
            }
            for (j, s) in node.screens.iter().enumerate() {
                if !s.dims().is_positive() {
                    return Err(LoadError::schema(format!("{loc}.screens[{j}]"), "dimensions must be positive"));
                }
                if s.sha256.len() != 64 || !s.sha256.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
                    return Err(LoadError::schema(format!("{loc}.screens[{j}].sha256"), "expected 64 lowercase hex digits"));
                }
            }
            let id = node.id.clone();
            if nodes.insert(id.clone(), node).is_some() {
                return Err(LoadError::schema(format!("{loc}.id"), format!("duplicate node id `{id}`")));
            }
        }

        let need = |id: &NodeId, location: String| -> Result<(), LoadError> {
            if nodes.contains_key(id) {
                Ok(())
            } else {
                Err(LoadError::DanglingNode { id: id.0.clone(), location })
            }
        };
        need(&doc.home, "home".into())?;
        for (app, root) in &doc.apps {
            need(root, format!("apps.{app}"))?;
        }

        let mut edges = doc.edges;
        let mut out_edges: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (i, e) in edges.iter_mut().enumerate() {
            need(&e.src, format!("edges[{i}].src"))?;
            need(&e.dst, format!("edges[{i}].dst"))?;
            match &mut e.trigger {
                Trigger::Type { rule } => rule
                    .compile()
                    .map_err(|err| LoadError::schema(format!("edges[{i}].text"), err.to_string()))?,
                Trigger::Open { app } if !doc.apps.contains_key(app.as_str()) => {
                    return Err(LoadError::schema(format!("edges[{i}].app"), format!("unknown app `{app}`")));
                }
                _ => {}
            }
            out_edges.entry(e.src.clone()).or_default().push(i);
        }

        let mut tasks = Vec::with_capacity(doc.tasks.len());
        let mut task_ids = HashSet::new();
        for (i, t) in doc.tasks.into_iter().enumerate() {
            let loc = format!("tasks[{i}]");
            if !task_ids.insert(t.id.clone()) {
                return Err(LoadError::schema(format!("{loc}.id"), format!("duplicate task id `{}`", t.id)));
            }
            if t.max_steps == 0 {
                return Err(LoadError::schema(format!("{loc}.max_steps"), "must be positive"));
            }
            if t.milestones.is_empty() {
                return Err(LoadError::schema(format!("{loc}.milestones"), "at least one milestone required"));
            }
            let start = t.start.unwrap_or_else(|| doc.home.clone());
            need(&start, format!("{loc}.start"))?;
            let mut milestones: Vec<Milestone> = Vec::with_capacity(t.milestones.len());
            for (j, m) in t.milestones.into_iter().enumerate() {
                let mloc = format!("{loc}.milestones[{j}]");
                if milestones.iter().any(|p| p.id == m.id) {
                    return Err(LoadError::schema(format!("{mloc}.id"), format!("duplicate milestone id `{}`", m.id)));
                }
                if m.accept.is_empty() {
                    return Err(LoadError::schema(format!("{mloc}.accept"), "accept set must be non-empty"));
                }
                for (k, n) in m.accept.iter().enumerate() {
                    need(n, format!("{mloc}.accept[{k}]"))?;
                }
                let requires = match m.requires {
                    Some(r) => r,
                    None => milestones.last().map(|p| vec![p.id.clone()]).unwrap_or_default(),
                };
                for r in &requires {
                    if !milestones.iter().any(|p| &p.id == r) {
                        return Err(LoadError::schema(
                            format!("{mloc}.requires"),
                            format!("`{r}` is not an earlier milestone"),
                        ));
                    }
                }
                milestones.push(Milestone { id: m.id, accept: m.accept, capability: m.capability, requires });
            }
            let mut answer_rule = t.answer_rule;
            if let Some(rule) = answer_rule.as_mut() {
                rule.compile()
                    .map_err(|err| LoadError::schema(format!("{loc}.answer_rule"), err.to_string()))?;
            }
            tasks.push(Task {
                id: t.id,
                instruction: t.instruction,
                kind: t.kind,
                start,
                max_steps: t.max_steps,
                milestones,
                answer_rule,
                golden_paths: t.golden_paths,
            });
        }

        if let AssetCheck::Verify(root) = &assets {
            for node in nodes.values() {
                for s in &node.screens {
                    verify_screen(root, &s.image, &s.sha256)?;
                }
            }
        }

        let mut g = GraphBenchmark {
            version: doc.version,
            home: doc.home,
            apps: doc.apps,
            nodes,
            edges,
            tasks,
            meta: doc.meta,
            out_edges,
            digest: String::new(),
        };
        g.digest = sha256_hex(&serde_json::to_vec(&g.to_doc()).expect("manifest serializes"));
        Ok(g)
    }

    /// Canonical document: nodes sorted by id, defaults made explicit.
    pub fn to_doc(&self) -> ManifestDoc {
        ManifestDoc {
            version: self.version,
            home: self.home.clone(),
            apps: self.apps.clone(),
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.clone(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskDoc {
                    id: t.id.clone(),
                    instruction: t.instruction.clone(),
                    kind: t.kind,
                    start: Some(t.start.clone()),
                    max_steps: t.max_steps,
                    milestones: t
                        .milestones
                        .iter()
                        .map(|m| MilestoneDoc {
                            id: m.id.clone(),
                            accept: m.accept.clone(),
                            capability: m.capability,
                            requires: Some(m.requires.clone()),
                        })
                        .collect(),
                    answer_rule: t.answer_rule.clone(),
                    golden_paths: t.golden_paths.clone(),
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    /// Pretty canonical JSON, newline-terminated.
    pub fn to_manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn verify_screen(root: &Path, image: &str, expected: &str) -> Result<(), LoadError> {
    let path = root.join(image);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(LoadError::MissingImage { path: image.to_string() })
        }
        Err(e) => return Err(LoadError::Io { path: path.display().to_string(), source: e }),
    };
    let actual = sha256_hex(&bytes);
    if actual != expected {
        return Err(LoadError::HashMismatch { path: image.to_string(), expected: expected.to_string(), actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const H: &str = "0000000000000000000000000000000000000000000000000000000000000000";

    fn minimal() -> String {
        format!(
            r#"{{"version":1,"home":"home","apps":{{}},
                "nodes":[{{"id":"home","app":"system","screens":[{{"image":"h.png","sha256":"{H}","width":10,"height":20}}]}}],
                "edges":[],"tasks":[]}}"#
        )
    }

    #[test]
    fn smallest_legal_graph() {
        let g = GraphBenchmark::from_manifest_str(&minimal(), AssetCheck::Skip).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn dangling_edge_target_is_named() {
        let src = minimal().replace(
            r#""edges":[]"#,
            r#""edges":[{"src":"home","dst":"n99","action":"swipe","direction":"up"}]"#,
        );
        let err = GraphBenchmark::from_manifest_str(&src, AssetCheck::Skip).unwrap_err();
        assert_eq!(err.code(), "dangling-node-id");
        match err {
            LoadError::DanglingNode { id, location } => {
                assert_eq!(id, "n99");
                assert_eq!(location, "edges[0].dst");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn schema_errors_carry_location() {
        let src = minimal().replace(r#""version":1"#, r#""version":"one""#);
        let err = GraphBenchmark::from_manifest_str(&src, AssetCheck::Skip).unwrap_err();
        assert_eq!(err.code(), "schema-violation");
        assert!(err.to_string().contains("version"), "{err}");

        let src = minimal().replace(
            r#""edges":[]"#,
            r#""edges":[{"src":"home","dst":"home","action":"click","bbox":[5,5,2,9]}]"#,
        );
        let err = GraphBenchmark::from_manifest_str(&src, AssetCheck::Skip).unwrap_err();
        assert_eq!(err.code(), "schema-violation");

        let src = minimal().replace(r#""tasks":[]"#, r#""tasks":[],"extra":1"#);
        assert_eq!(GraphBenchmark::from_manifest_str(&src, AssetCheck::Skip).unwrap_err().code(), "schema-violation");
    }

    #[test]
    fn unknown_capability_rejected() {
        let src = minimal().replace(
            r#""tasks":[]"#,
            r#""tasks":[{"id":"t","instruction":"x","kind":"single_app","max_steps":3,
                "milestones":[{"id":"m","accept":["home"],"capability":"teleport"}]}]"#,
        );
        let err = GraphBenchmark::from_manifest_str(&src, AssetCheck::Skip).unwrap_err();
        assert_eq!(err.code(), "schema-violation");
        assert!(err.to_string().contains("tasks[0].milestones[0].capability"), "{err}");
    }

    #[test]
    fn requires_defaults_to_chain_and_must_point_backwards() {
        let src = minimal().replace(
            r#""tasks":[]"#,
            r#""tasks":[{"id":"t","instruction":"x","kind":"single_app","max_steps":3,
                "milestones":[{"id":"a","accept":["home"],"capability":"find"},
                              {"id":"b","accept":["home"],"capability":"find"},
                              {"id":"c","accept":["home"],"capability":"find","requires":[]}]}]"#,
        );
        let g = GraphBenchmark::from_manifest_str(&src, AssetCheck::Skip).unwrap();
        let ms = &g.tasks[0].milestones;
        assert!(ms[0].requires.is_empty());
        assert_eq!(ms[1].requires, vec!["a".to_string()]);
        assert!(ms[2].requires.is_empty());
        assert_eq!(g.tasks[0].start, NodeId::from("home"));

        let bad = src.replace(r#""capability":"find","requires":[]"#, r#""capability":"find","requires":["z"]"#);
        assert_eq!(GraphBenchmark::from_manifest_str(&bad, AssetCheck::Skip).unwrap_err().code(), "schema-violation");
    }

    #[test]
    fn asset_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let err = GraphBenchmark::from_manifest_str(&minimal(), AssetCheck::Verify(dir.path().into())).unwrap_err();
        assert_eq!(err.code(), "missing-image");

        std::fs::write(dir.path().join("h.png"), b"not the bytes").unwrap();
        let err = GraphBenchmark::from_manifest_str(&minimal(), AssetCheck::Verify(dir.path().into())).unwrap_err();
        assert_eq!(err.code(), "hash-mismatch");

        let good = minimal().replace(H, &sha256_hex(b"not the bytes"));
        GraphBenchmark::from_manifest_str(&good, AssetCheck::Verify(dir.path().into())).unwrap();
    }

    #[test]
    fn serialize_round_trip_is_stable() {
        let src = minimal().replace(
            r#""edges":[]"#,
            r#""edges":[{"src":"home","dst":"home","action":"type","text":"hi","match":"exact","note":"x"}]"#,
        );
        let g = GraphBenchmark::from_manifest_str(&src, AssetCheck::Skip).unwrap();
        let once = g.to_manifest_json();
        let g2 = GraphBenchmark::from_manifest_str(&once, AssetCheck::Skip).unwrap();
        assert_eq!(once, g2.to_manifest_json());
        assert_eq!(g.digest(), g2.digest());
        assert_eq!(g.edges, g2.edges);
    }
}
