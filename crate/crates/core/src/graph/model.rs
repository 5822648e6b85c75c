use crate::action::{ActionKind, ActionSpec, Direction};
use crate::geometry::{BBox, Dims};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// One screenshot of a screen state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Screen {
    /// Path relative to the asset root.
    pub image: String,
    /// Lowercase hex SHA-256 of the image bytes.
    pub sha256: String,
    pub width: u32,
    pub height: u32,
}

impl Screen {
    pub fn dims(&self) -> Dims {
        Dims::new(self.width, self.height)
    }
}

/// A screen state: every screenshot in `screens` is interchangeable and
/// accepts the same actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: NodeId,
    pub app: String,
    pub screens: Vec<Screen>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl Node {
    pub fn dims(&self) -> Dims {
        self.screens[0].dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMatch {
    /// Trimmed, case-insensitive equality.
    #[default]
    Default,
    Exact,
    Regex,
}

/// Matcher for typed text and for `complete` answers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TextRule {
    #[serde(default, rename = "match", skip_serializing_if = "is_default_match")]
    pub mode: TextMatch,
    pub text: String,
    /// Sample input accepted by a regex rule, used to synthesize candidate
    /// actions for scripted agents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    #[serde(skip)]
    compiled: Option<Regex>,
}

fn is_default_match(m: &TextMatch) -> bool {
    *m == TextMatch::Default
}

impl PartialEq for TextRule {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.text == other.text && self.example == other.example
    }
}

impl Eq for TextRule {}

impl std::hash::Hash for TextRule {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.mode.hash(state);
        self.text.hash(state);
    }
}

impl TextRule {
    pub fn new(mode: TextMatch, text: impl Into<String>) -> Result<Self, regex::Error> {
        let mut r = Self { mode, text: text.into(), example: None, compiled: None };
        r.compile()?;
        Ok(r)
    }

    pub fn default_match(text: impl Into<String>) -> Self {
        Self { mode: TextMatch::Default, text: text.into(), example: None, compiled: None }
    }

    pub(crate) fn compile(&mut self) -> Result<(), regex::Error> {
        if self.mode == TextMatch::Regex && self.compiled.is_none() {
            self.compiled = Some(Regex::new(&self.text)?);
        }
        Ok(())
    }

    pub fn matches(&self, input: &str) -> bool {
        match self.mode {
            TextMatch::Default => input.trim().to_lowercase() == self.text.trim().to_lowercase(),
            TextMatch::Exact => input == self.text,
            TextMatch::Regex => match &self.compiled {
                Some(re) => re.is_match(input),
                None => Regex::new(&self.text).is_ok_and(|re| re.is_match(input)),
            },
        }
    }

    /// A string this rule accepts, if one is known.
    pub fn sample(&self) -> Option<&str> {
        match self.mode {
            TextMatch::Default | TextMatch::Exact => Some(&self.text),
            TextMatch::Regex => self.example.as_deref(),
        }
    }
}

/// The action pattern that fires an edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Trigger {
    Click { bbox: BBox },
    LongPress { bbox: BBox },
    Swipe { direction: Direction },
    Type {
        #[serde(flatten)]
        rule: TextRule,
    },
    NavigateBack,
    NavigateHome,
    Open { app: String },
}

impl Trigger {
    pub fn kind(&self) -> ActionKind {
        match self {
            Trigger::Click { .. } => ActionKind::Click,
            Trigger::LongPress { .. } => ActionKind::LongPress,
            Trigger::Swipe { .. } => ActionKind::Swipe,
            Trigger::Type { .. } => ActionKind::Type,
            Trigger::NavigateBack => ActionKind::NavigateBack,
            Trigger::NavigateHome => ActionKind::NavigateHome,
            Trigger::Open { .. } => ActionKind::Open,
        }
    }

    pub fn bbox(&self) -> Option<BBox> {
        match self {
            Trigger::Click { bbox } | Trigger::LongPress { bbox } => Some(*bbox),
            _ => None,
        }
    }

    /// A concrete action that fires this trigger, when one can be built.
    pub fn sample_action(&self) -> Option<ActionSpec> {
        Some(match self {
            Trigger::Click { bbox } => ActionSpec::Click { coordinate: bbox.center() },
            Trigger::LongPress { bbox } => ActionSpec::LongPress { coordinate: bbox.center() },
            Trigger::Swipe { direction } => ActionSpec::Swipe { direction: *direction },
            Trigger::Type { rule } => ActionSpec::Type { text: rule.sample()?.to_string() },
            Trigger::NavigateBack => ActionSpec::NavigateBack,
            Trigger::NavigateHome => ActionSpec::NavigateHome,
            Trigger::Open { app } => ActionSpec::Open { app: app.clone() },
        })
    }

    /// Whether a concrete action fires this trigger, ignoring any other
    /// edges at the node.
    pub fn accepts(&self, action: &ActionSpec) -> bool {
        match (self, action) {
            (Trigger::Click { bbox }, ActionSpec::Click { coordinate })
            | (Trigger::LongPress { bbox }, ActionSpec::LongPress { coordinate }) => bbox.contains(*coordinate),
            (Trigger::Swipe { direction: d }, ActionSpec::Swipe { direction }) => d == direction,
            (Trigger::Type { rule }, ActionSpec::Type { text }) => rule.matches(text),
            (Trigger::NavigateBack, ActionSpec::NavigateBack) | (Trigger::NavigateHome, ActionSpec::NavigateHome) => true,
            (Trigger::Open { app: a }, ActionSpec::Open { app }) => a == app,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    #[serde(flatten)]
    pub trigger: Trigger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    SingleApp,
    CrossApp,
}

/// Atomic capability tags attached to milestones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Follow,
    Pay,
    Save,
    Search,
    Share,
    Set,
    Find,
    Copy,
    Filter,
    Like,
    Send,
    Location,
    Navigation,
    Others,
    Memory,
}

impl Capability {
    pub const ALL: [Capability; 15] = [
        Capability::Follow,
        Capability::Pay,
        Capability::Save,
        Capability::Search,
        Capability::Share,
        Capability::Set,
        Capability::Find,
        Capability::Copy,
        Capability::Filter,
        Capability::Like,
        Capability::Send,
        Capability::Location,
        Capability::Navigation,
        Capability::Others,
        Capability::Memory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Follow => "follow",
            Capability::Pay => "pay",
            Capability::Save => "save",
            Capability::Search => "search",
            Capability::Share => "share",
            Capability::Set => "set",
            Capability::Find => "find",
            Capability::Copy => "copy",
            Capability::Filter => "filter",
            Capability::Like => "like",
            Capability::Send => "send",
            Capability::Location => "location",
            Capability::Navigation => "navigation",
            Capability::Others => "others",
            Capability::Memory => "memory",
        }
    }
}

impl std::str::FromStr for Capability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| s.to_string())
    }
}

impl std::fmt::Display for Capability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Milestone {
    pub id: String,
    /// Reaching any of these nodes completes the milestone.
    pub accept: Vec<NodeId>,
    pub capability: Capability,
    /// Milestones that must already be reached. Resolved at load: when the
    /// manifest omits it, the previous milestone (linear chain).
    pub requires: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub instruction: String,
    pub kind: TaskKind,
    pub start: NodeId,
    pub max_steps: u32,
    pub milestones: Vec<Milestone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_rule: Option<TextRule>,
    /// Stored reference solutions, each a full action sequence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub golden_paths: Vec<Vec<ActionSpec>>,
}

impl Task {
    pub fn milestone_index(&self, id: &str) -> Option<usize> {
        self.milestones.iter().position(|m| m.id == id)
    }
}

/// A loaded, immutable benchmark graph.
#[derive(Debug, Clone)]
pub struct GraphBenchmark {
    pub version: u32,
    pub home: NodeId,
    pub apps: BTreeMap<String, NodeId>,
    pub nodes: BTreeMap<NodeId, Node>,
    pub edges: Vec<Edge>,
    pub tasks: Vec<Task>,
    pub meta: serde_json::Map<String, serde_json::Value>,
    pub(crate) out_edges: HashMap<NodeId, Vec<usize>>,
    pub(crate) digest: String,
}

impl GraphBenchmark {
    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Indices into `edges` of the edges leaving `id`, in manifest order.
    pub fn out_edges(&self, id: &NodeId) -> &[usize] {
        self.out_edges.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// SHA-256 of the canonical manifest serialization.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn screen_count(&self) -> usize {
        self.nodes.values().map(|n| n.screens.len()).sum()
    }

    /// Finds a screen by content hash.
    pub fn screen_by_hash(&self, sha256: &str) -> Option<&Screen> {
        self.nodes.values().flat_map(|n| &n.screens).find(|s| s.sha256 == sha256)
    }
}
