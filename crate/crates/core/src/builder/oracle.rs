//! Pluggable judgment calls for the builder. Each role is served either by
//! a stub table (answers keyed by input hashes) or by a remote endpoint.
//! Every call is recorded in an audit trail with the hash of its input.

use super::trajectory::ScreenAsset;
use crate::action::ActionSpec;
use crate::digest::sha256_hex;
use crate::geometry::{BBox, Point};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Describer,
    Embedder,
    Judge,
    ActionCompleter,
    BoxerLarge,
    BoxerSmall,
    BoxSelector,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Describer,
        Role::Embedder,
        Role::Judge,
        Role::ActionCompleter,
        Role::BoxerLarge,
        Role::BoxerSmall,
        Role::BoxSelector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Describer => "describer",
            Role::Embedder => "embedder",
            Role::Judge => "judge",
            Role::ActionCompleter => "action_completer",
            Role::BoxerLarge => "boxer_large",
            Role::BoxerSmall => "boxer_small",
            Role::BoxSelector => "box_selector",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{role:?} has no answer for key {key}")]
    Miss { role: Role, key: String },
    #[error("{role:?} returned an unusable answer: {message}")]
    BadAnswer { role: Role, message: String },
    #[error("{role:?} is not configured")]
    Unconfigured { role: Role },
    #[error("{role:?} call failed: {message}")]
    Transport { role: Role, message: String },
    #[error("oracle config: {0}")]
    Config(String),
}

/// A backend for one or more roles. `key` is the content key the call is
/// about (screen hash, pair of hashes, ...); `input` is the full request.
pub trait Oracle: Send + Sync {
    fn call(&self, role: Role, key: &str, input: &Value) -> Result<Value, OracleError>;
}

/// Answers from a JSON table `{role: {key: answer}}`. A pure function of
/// the key.
#[derive(Debug, Clone, Default)]
pub struct StubOracle {
    table: BTreeMap<Role, BTreeMap<String, Value>>,
}

impl StubOracle {
    pub fn from_value(v: Value) -> Result<Self, OracleError> {
        serde_json::from_value(v)
            .map(|table| Self { table })
            .map_err(|e| OracleError::Config(format!("stub table: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, OracleError> {
        let src = std::fs::read_to_string(path).map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&src).map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        Self::from_value(v)
    }

    pub fn set(&mut self, role: Role, key: impl Into<String>, answer: Value) {
        self.table.entry(role).or_default().insert(key.into(), answer);
    }
}

impl Oracle for StubOracle {
    fn call(&self, role: Role, key: &str, _: &Value) -> Result<Value, OracleError> {
        self.table
            .get(&role)
            .and_then(|t| t.get(key))
            .cloned()
            .ok_or_else(|| OracleError::Miss { role, key: key.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpEndpoint {
    pub http: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Backend {
    Stub {
        /// Stub table path, relative to the config file.
        stub: PathBuf,
    },
    Http(HttpEndpoint),
}

/// Role assignments as read from `oracles.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    #[serde(flatten)]
    pub roles: BTreeMap<Role, Backend>,
    /// Directory of prompt templates; the built-in ones are used otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<PathBuf>,
}

/// Builds the client for a remote endpoint. The core crate has no HTTP
/// client; callers that want remote oracles pass one in.
pub type HttpConnector<'a> = &'a dyn Fn(&HttpEndpoint) -> Result<Arc<dyn Oracle>, OracleError>;

/// Prompt templates sent along with describer and judge requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompts {
    pub describe: String,
    pub judge: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            describe: include_str!("../../../../config/prompts/describe.txt").to_string(),
            judge: include_str!("../../../../config/prompts/judge.txt").to_string(),
        }
    }
}

impl Prompts {
    pub fn load(dir: &Path) -> Result<Self, OracleError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).map_err(|e| OracleError::Config(format!("{name}: {e}")))
        };
        Ok(Self { describe: read("describe.txt")?, judge: read("judge.txt")? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub role: Role,
    pub key: String,
    pub input_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeVerdict {
    Same,
    Different,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub verdict: JudgeVerdict,
    #[serde(default)]
    pub rationale: String,
}

/// The box selector either keeps one of the proposals or draws its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selection {
    Choice { choice: BoxChoice },
    Fresh { bbox: BBox },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxChoice {
    Large,
    Small,
}

pub fn pair_key(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}:{b}")
    } else {
        format!("{b}:{a}")
    }
}

pub fn point_key(screen: &str, p: Point) -> String {
    format!("{screen}@{},{}", p.x, p.y)
}

/// All roles with their backends and the shared audit trail.
pub struct OracleSuite {
    backends: BTreeMap<Role, Arc<dyn Oracle>>,
    prompts: Prompts,
    audit: Mutex<Vec<AuditEntry>>,
}

impl std::fmt::Debug for OracleSuite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleSuite").field("roles", &self.backends.keys().collect::<Vec<_>>()).finish()
    }
}

impl OracleSuite {
    pub fn new(prompts: Prompts) -> Self {
        Self { backends: BTreeMap::new(), prompts, audit: Mutex::new(Vec::new()) }
    }

    /// Every role answered by one stub table.
    pub fn stub(table: StubOracle) -> Self {
        let mut s = Self::new(Prompts::default());
        let shared: Arc<dyn Oracle> = Arc::new(table);
        for r in Role::ALL {
            s.set(r, shared.clone());
        }
        s
    }

    pub fn set(&mut self, role: Role, backend: Arc<dyn Oracle>) {
        self.backends.insert(role, backend);
    }

    pub fn from_config(path: &Path, http: Option<HttpConnector<'_>>) -> Result<Self, OracleError> {
        let src = std::fs::read_to_string(path).map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        let cfg: OracleConfig =
            serde_json::from_str(&src).map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let prompts = match &cfg.prompts {
            Some(dir) => Prompts::load(&base.join(dir))?,
            None => Prompts::default(),
        };
        let mut suite = Self::new(prompts);
        let mut stubs: BTreeMap<PathBuf, Arc<dyn Oracle>> = BTreeMap::new();
        for (role, backend) in &cfg.roles {
            let b = match backend {
                Backend::Stub { stub } => {
                    let p = base.join(stub);
                    match stubs.get(&p) {
                        Some(b) => b.clone(),
                        None => {
                            let b: Arc<dyn Oracle> = Arc::new(StubOracle::from_file(&p)?);
                            stubs.insert(p, b.clone());
                            b
                        }
                    }
                }
                Backend::Http(ep) => match http {
                    Some(connect) => connect(ep)?,
                    None => return Err(OracleError::Config(format!("{role:?}: remote oracles are not available here"))),
                },
            };
            suite.set(*role, b);
        }
        Ok(suite)
    }

    pub fn has(&self, role: Role) -> bool {
        self.backends.contains_key(&role)
    }

    /// Audit entries sorted by role, key and input hash, so concurrent
    /// callers still yield a stable trail.
    pub fn audit(&self) -> Vec<AuditEntry> {
        let mut v = self.audit.lock().expect("audit lock").clone();
        v.sort_by(|a, b| (a.role, &a.key, &a.input_sha256).cmp(&(b.role, &b.key, &b.input_sha256)));
        v
    }

    fn call(&self, role: Role, key: &str, input: Value) -> Result<Value, OracleError> {
        let result = match self.backends.get(&role) {
            Some(b) => b.call(role, key, &input),
            None => Err(OracleError::Unconfigured { role }),
        };
        let entry = AuditEntry {
            role,
            key: key.to_string(),
            input_sha256: sha256_hex(input.to_string().as_bytes()),
            output_sha256: result.as_ref().ok().map(|v| sha256_hex(v.to_string().as_bytes())),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        self.audit.lock().expect("audit lock").push(entry);
        result
    }

    fn decode<T: serde::de::DeserializeOwned>(role: Role, v: Value) -> Result<T, OracleError> {
        serde_json::from_value(v).map_err(|e| OracleError::BadAnswer { role, message: e.to_string() })
    }

    fn screen_input(s: &ScreenAsset) -> Value {
        json!({"sha256": s.sha256, "path": s.path, "width": s.width, "height": s.height})
    }

    pub fn describe(&self, s: &ScreenAsset) -> Result<String, OracleError> {
        let input = json!({"screen": Self::screen_input(s), "prompt": self.prompts.describe});
        Self::decode(Role::Describer, self.call(Role::Describer, &s.sha256, input)?)
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>, OracleError> {
        let key = sha256_hex(text.as_bytes());
        let v: Vec<f64> = Self::decode(Role::Embedder, self.call(Role::Embedder, &key, json!({"text": text}))?)?;
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(OracleError::BadAnswer { role: Role::Embedder, message: "empty or non-finite vector".into() });
        }
        Ok(v)
    }

    pub fn judge(&self, a: &ScreenAsset, b: &ScreenAsset) -> Result<Judgement, OracleError> {
        let input = json!({"a": Self::screen_input(a), "b": Self::screen_input(b), "prompt": self.prompts.judge});
        Self::decode(Role::Judge, self.call(Role::Judge, &pair_key(&a.sha256, &b.sha256), input)?)
    }

    /// The action leading from `before` to `after`, or `None` if the
    /// oracle cannot tell.
    pub fn complete_action(&self, before: &ScreenAsset, after: &ScreenAsset) -> Result<Option<ActionSpec>, OracleError> {
        let key = format!("{}:{}", before.sha256, after.sha256);
        let input = json!({"before": Self::screen_input(before), "after": Self::screen_input(after)});
        Self::decode(Role::ActionCompleter, self.call(Role::ActionCompleter, &key, input)?)
    }

    pub fn propose_box(&self, role: Role, s: &ScreenAsset, p: Point) -> Result<BBox, OracleError> {
        debug_assert!(matches!(role, Role::BoxerLarge | Role::BoxerSmall));
        let input = json!({"screen": Self::screen_input(s), "point": p});
        Self::decode(role, self.call(role, &point_key(&s.sha256, p), input)?)
    }

    pub fn select_box(
        &self,
        s: &ScreenAsset,
        p: Point,
        large: Option<BBox>,
        small: Option<BBox>,
    ) -> Result<Selection, OracleError> {
        let input = json!({"screen": Self::screen_input(s), "point": p, "large": large, "small": small});
        Self::decode(Role::BoxSelector, self.call(Role::BoxSelector, &point_key(&s.sha256, p), input)?)
    }
}
