//! Parser profiles: small grammars, loaded from JSON, that describe how one
//! family of agents writes actions.
//!
//! Two styles exist. `pattern` profiles list one regex per accepted surface
//! form, using the named groups `x`, `y`, `x1`..`y2` (a box, mapped to its
//! center), `direction`, `text` and `app`. `json` profiles scan the text for
//! JSON objects and map aliased keys onto action parameters.

use super::ActionKind;
use regex::Regex;
use serde::Deserialize;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("profile {name}: {message}")]
    Invalid { name: String, message: String },
    #[error("unknown parser profile `{0}`")]
    Unknown(String),
    #[error("reading profile {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing profile {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileStyle {
    Pattern,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    name: String,
    style: ProfileStyle,
    #[serde(default)]
    description: Option<String>,
    /// Surface name -> canonical kind name.
    kind_aliases: BTreeMap<String, String>,
    /// Pattern style: detects an attempted action, group `kind`.
    #[serde(default)]
    head: Option<String>,
    #[serde(default)]
    rules: Vec<RuleDoc>,
    /// Json style: keys naming the action kind, tried in order.
    #[serde(default)]
    kind_keys: Vec<String>,
    /// Json style: canonical parameter -> accepted keys.
    #[serde(default)]
    param_keys: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    kind: String,
    pattern: String,
    #[serde(default)]
    unescape: bool,
}

#[derive(Debug, Clone)]
pub struct ProfileRule {
    pub kind: ActionKind,
    pub pattern: Regex,
    /// The `text` group holds a backslash-escaped string body.
    pub unescape: bool,
}

#[derive(Debug, Clone)]
pub struct ParserProfile {
    pub name: String,
    pub style: ProfileStyle,
    pub description: Option<String>,
    pub(crate) kind_aliases: HashMap<String, ActionKind>,
    pub(crate) head: Option<Regex>,
    pub(crate) rules: Vec<ProfileRule>,
    pub(crate) kind_keys: Vec<String>,
    pub(crate) param_keys: BTreeMap<String, Vec<String>>,
}

const PARAMS: [&str; 5] = ["coordinate", "bbox", "direction", "text", "app"];

impl ParserProfile {
    pub fn from_json(src: &str) -> Result<Self, ProfileError> {
        let doc: ProfileDoc = serde_json::from_str(src).map_err(|e| ProfileError::Json {
            path: "<inline>".into(),
            source: e,
        })?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: ProfileDoc) -> Result<Self, ProfileError> {
        let invalid = |message: String| ProfileError::Invalid { name: doc.name.clone(), message };
        let kind = |s: &str| ActionKind::parse(s).ok_or_else(|| invalid(format!("unknown action kind `{s}`")));

        let mut kind_aliases = HashMap::new();
        for (alias, canonical) in &doc.kind_aliases {
            kind_aliases.insert(alias.to_ascii_lowercase(), kind(canonical)?);
        }
        let head = doc
            .head
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| invalid(format!("head: {e}")))?;
        if let Some(h) = &head {
            if !h.capture_names().flatten().any(|n| n == "kind") {
                return Err(invalid("head pattern lacks a `kind` group".into()));
            }
        }
        let mut rules = Vec::with_capacity(doc.rules.len());
        for r in &doc.rules {
            let pattern = Regex::new(&r.pattern).map_err(|e| invalid(format!("rule for {}: {e}", r.kind)))?;
            rules.push(ProfileRule { kind: kind(&r.kind)?, pattern, unescape: r.unescape });
        }
        for key in doc.param_keys.keys() {
            if !PARAMS.contains(&key.as_str()) {
                return Err(invalid(format!("unknown parameter `{key}`")));
            }
        }
        match doc.style {
            ProfileStyle::Pattern if rules.is_empty() => return Err(invalid("pattern profile without rules".into())),
            ProfileStyle::Json if doc.kind_keys.is_empty() => return Err(invalid("json profile without kind_keys".into())),
            _ => {}
        }
        Ok(Self {
            name: doc.name,
            style: doc.style,
            description: doc.description,
            kind_aliases,
            head,
            rules,
            kind_keys: doc.kind_keys,
            param_keys: doc.param_keys,
        })
    }

    pub fn resolve_kind(&self, surface: &str) -> Option<ActionKind> {
        self.kind_aliases.get(&surface.trim().to_ascii_lowercase()).copied()
    }

    /// Keys accepted for a canonical parameter (defaults to its own name).
    pub(crate) fn keys_for<'a>(&'a self, param: &'a str) -> Vec<&'a str> {
        match self.param_keys.get(param) {
            Some(keys) => keys.iter().map(String::as_str).collect(),
            None => vec![param],
        }
    }
}

/// Named set of parser profiles.
#[derive(Debug, Clone, Default)]
pub struct ProfileRegistry {
    profiles: BTreeMap<String, ParserProfile>,
}

const BUILTIN: [(&str, &str); 4] = [
    ("json", include_str!("../../../../profiles/json.json")),
    ("function-call", include_str!("../../../../profiles/function-call.json")),
    ("key-value", include_str!("../../../../profiles/key-value.json")),
    ("bbox", include_str!("../../../../profiles/bbox.json")),
];

impl ProfileRegistry {
    /// Registry holding the profiles shipped under `profiles/`.
    pub fn builtin() -> Self {
        let mut reg = Self::default();
        for (name, src) in BUILTIN {
            let p = ParserProfile::from_json(src).unwrap_or_else(|e| panic!("builtin profile {name}: {e}"));
            debug_assert_eq!(p.name, name);
            reg.insert(p);
        }
        reg
    }

    pub fn insert(&mut self, p: ParserProfile) {
        self.profiles.insert(p.name.clone(), p);
    }

    /// Adds every `*.json` profile in `dir`, replacing same-named entries.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, ProfileError> {
        let io = |e| ProfileError::Io { path: dir.display().to_string(), source: e };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in &paths {
            let src = std::fs::read_to_string(path)
                .map_err(|e| ProfileError::Io { path: path.display().to_string(), source: e })?;
            let doc: ProfileDoc = serde_json::from_str(&src)
                .map_err(|e| ProfileError::Json { path: path.display().to_string(), source: e })?;
            self.insert(ParserProfile::from_doc(doc)?);
        }
        Ok(paths.len())
    }

    pub fn get(&self, name: &str) -> Result<&ParserProfile, ProfileError> {
        self.profiles.get(name).ok_or_else(|| ProfileError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }
}
