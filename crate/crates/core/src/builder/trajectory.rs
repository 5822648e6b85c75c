use crate::action::ActionSpec;
use crate::digest::sha256_hex;
use crate::geometry::{BBox, Dims};
use crate::graph::Node;
use crate::GraphBenchmark;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectorySource {
    Bfs,
    Dfs,
    BranchSupplement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    trajectory: String,
    source: TrajectorySource,
    #[serde(default)]
    description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepLine {
    image: String,
    #[serde(default)]
    action: Option<ActionSpec>,
    #[serde(default)]
    bbox: Option<BBox>,
    #[serde(default)]
    app: Option<String>,
}

/// How a step's action or box came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    #[default]
    Recorded,
    /// Filled in by an oracle; queued for review.
    Auto,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajStep {
    /// Content address of the screenshot.
    pub screen: String,
    /// The action taken on this screen, leading to the next step's screen.
    pub action: Option<ActionSpec>,
    #[serde(default)]
    pub action_origin: Origin,
    pub bbox: Option<BBox>,
    #[serde(default)]
    pub bbox_origin: Origin,
    pub app: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub source: TrajectorySource,
    pub description: Option<String>,
    pub steps: Vec<TrajStep>,
}

/// One unique screenshot of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenAsset {
    pub sha256: String,
    /// First file seen with these bytes.
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    /// First app tag attached to the screen.
    pub app: Option<String>,
}

impl ScreenAsset {
    pub fn dims(&self) -> Dims {
        Dims::new(self.width, self.height)
    }
}

/// Trajectories plus their deduplicated screens, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
    screens: Vec<ScreenAsset>,
    index: HashMap<String, usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{file}:{line}: {message}")]
    Malformed { file: PathBuf, line: usize, message: String },
    #[error("trajectory `{trajectory}` step {step} has an action but no next screen")]
    BrokenChain { trajectory: String, step: usize },
    #[error("trajectory `{0}` needs at least two screens")]
    TooShort(String),
    #[error("missing image {0}")]
    MissingImage(PathBuf),
    #[error("trajectory `{trajectory}` step {step}: screen is {found}, earlier steps are {expected}")]
    DimMismatch { trajectory: String, step: usize, expected: Dims, found: Dims },
    #[error("duplicate trajectory id `{0}`")]
    DuplicateId(String),
    #[error("reading {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TrajectorySet {
    pub fn screens(&self) -> &[ScreenAsset] {
        &self.screens
    }

    pub fn screen(&self, sha: &str) -> Option<&ScreenAsset> {
        self.index.get(sha).map(|&i| &self.screens[i])
    }

    /// Position of a screen in first-appearance order.
    pub fn position(&self, sha: &str) -> Option<usize> {
        self.index.get(sha).copied()
    }

    /// Registers a screen, keeping the first copy of identical bytes.
    pub fn add_screen(&mut self, asset: ScreenAsset) -> usize {
        if let Some(&i) = self.index.get(&asset.sha256) {
            if self.screens[i].app.is_none() {
                self.screens[i].app = asset.app;
            }
            return i;
        }
        self.index.insert(asset.sha256.clone(), self.screens.len());
        self.screens.push(asset);
        self.screens.len() - 1
    }

    /// Checks the chain rule and per-trajectory screen size, then appends.
    pub fn push(&mut self, t: Trajectory) -> Result<(), IngestError> {
        if self.trajectories.iter().any(|o| o.id == t.id) {
            return Err(IngestError::DuplicateId(t.id));
        }
        if t.steps.len() < 2 {
            return Err(IngestError::TooShort(t.id));
        }
        if t.steps.last().is_some_and(|s| s.action.is_some()) {
            return Err(IngestError::BrokenChain { trajectory: t.id, step: t.steps.len() - 1 });
        }
        let dims = |s: &TrajStep| self.screen(&s.screen).map(ScreenAsset::dims);
        let expected = dims(&t.steps[0]).expect("screens registered before their trajectory");
        for (i, s) in t.steps.iter().enumerate() {
            let found = dims(s).expect("screens registered before their trajectory");
            if found != expected {
                return Err(IngestError::DimMismatch { trajectory: t.id, step: i, expected, found });
            }
        }
        self.trajectories.push(t);
        Ok(())
    }

    /// One two-step trajectory per edge and one action-free trajectory per
    /// multi-screen node. Merging these with the verdicts that produced `g`
    /// rebuilds `g` up to node renaming.
    pub fn from_graph(g: &GraphBenchmark, asset_root: &Path) -> Self {
        let mut ts = TrajectorySet::default();
        let step = |ts: &mut TrajectorySet, n: &Node, k: usize| {
            let s = &n.screens[k];
            ts.add_screen(ScreenAsset {
                sha256: s.sha256.clone(),
                path: asset_root.join(&s.image),
                width: s.width,
                height: s.height,
                app: Some(n.app.clone()),
            });
            TrajStep {
                screen: s.sha256.clone(),
                action: None,
                action_origin: Origin::Recorded,
                bbox: None,
                bbox_origin: Origin::Recorded,
                app: Some(n.app.clone()),
            }
        };
        let mut trajectories = Vec::new();
        for (id, n) in &g.nodes {
            let steps: Vec<TrajStep> = (0..n.screens.len()).map(|k| step(&mut ts, n, k)).collect();
            if steps.len() > 1 {
                trajectories.push(Trajectory {
                    id: format!("node-{id}"),
                    source: TrajectorySource::Bfs,
                    description: None,
                    steps,
                });
            }
        }
        for (i, e) in g.edges.iter().enumerate() {
            let Some(action) = e.trigger.sample_action() else { continue };
            let mut first = step(&mut ts, &g.nodes[&e.src], 0);
            first.action = Some(action);
            first.bbox = e.trigger.bbox();
            let second = step(&mut ts, &g.nodes[&e.dst], 0);
            trajectories.push(Trajectory {
                id: format!("edge-{i}"),
                source: TrajectorySource::Bfs,
                description: None,
                steps: vec![first, second],
            });
        }
        ts.trajectories = trajectories;
        ts
    }
}

/// Reads every `*.jsonl` file in `dir` (sorted by name). Image paths are
/// relative to `dir`; byte-identical images collapse into one screen.
pub fn ingest_trajectories(dir: &Path) -> Result<TrajectorySet, IngestError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut ts = TrajectorySet::default();
    let mut hashes: HashMap<PathBuf, (String, Dims)> = HashMap::new();
    for file in files {
        let text = std::fs::read_to_string(&file)?;
        let malformed = |line: usize, message: String| IngestError::Malformed { file: file.clone(), line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, head)) = lines.next() else { continue };
        let header: HeaderLine = serde_json::from_str(head).map_err(|e| malformed(1, e.to_string()))?;
        let mut steps = Vec::new();
        for (n, line) in lines {
            let s: StepLine = serde_json::from_str(line).map_err(|e| malformed(n + 1, e.to_string()))?;
            let path = dir.join(&s.image);
            let (sha, dims) = match hashes.get(&path) {
                Some(v) => v.clone(),
                None => {
                    let bytes = std::fs::read(&path).map_err(|_| IngestError::MissingImage(path.clone()))?;
                    let (w, h) = image::ImageReader::new(std::io::Cursor::new(&bytes))
                        .with_guessed_format()
                        .map_err(|e| IngestError::Image { path: path.clone(), message: e.to_string() })?
                        .into_dimensions()
                        .map_err(|e| IngestError::Image { path: path.clone(), message: e.to_string() })?;
                    let v = (sha256_hex(&bytes), Dims::new(w, h));
                    hashes.insert(path.clone(), v.clone());
                    v
                }
            };
            ts.add_screen(ScreenAsset {
                sha256: sha.clone(),
                path,
                width: dims.width,
                height: dims.height,
                app: s.app.clone(),
            });
            steps.push(TrajStep {
                screen: sha,
                action: s.action,
                action_origin: Origin::Recorded,
                bbox: s.bbox,
                bbox_origin: Origin::Recorded,
                app: s.app,
            });
        }
        ts.push(Trajectory { id: header.trajectory, source: header.source, description: header.description, steps })?;
    }
    Ok(ts)
}
