//! Blocking HTTP clients for agents and oracles that live elsewhere.
//! Do not call these from inside an async runtime.

use crate::wire::PROTOCOL_VERSION;
use base64::Engine as _;
use graphbench_core::builder::{HttpEndpoint, Oracle, OracleError, Role};
use graphbench_core::harness::{Agent, AgentContext, AgentError, AgentFactory, AgentReply};
use graphbench_core::graph::Task;
use graphbench_core::{ActionSpec, Dims};
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

pub const DEFAULT_AGENT_TIMEOUT: Duration = Duration::from_secs(120);

/// An agent reached over HTTP. Each step POSTs the observation (inline
/// image), the instruction and the agent's own past actions; the reply is
/// either `{"action": ...}` or `{"text": ..., "declared_dims": ...}`.
pub struct HttpAgentFactory {
    pub url: String,
    pub timeout: Duration,
    /// Root the manifest's image paths are relative to.
    pub asset_root: PathBuf,
}

impl HttpAgentFactory {
    pub fn new(url: impl Into<String>, asset_root: PathBuf) -> Self {
        Self { url: url.into(), timeout: DEFAULT_AGENT_TIMEOUT, asset_root }
    }
}

impl AgentFactory for HttpAgentFactory {
    fn name(&self) -> String {
        format!("http:{}", self.url)
    }

    fn make(&self, task: &Task, seed: u64) -> Result<Box<dyn Agent>, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| AgentError(format!("client: {e}")))?;
        Ok(Box::new(HttpAgent {
            client,
            url: self.url.clone(),
            asset_root: self.asset_root.clone(),
            task: task.id.clone(),
            seed,
        }))
    }
}

struct HttpAgent {
    client: reqwest::blocking::Client,
    url: String,
    asset_root: PathBuf,
    task: String,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WireReply {
    Action { action: ActionSpec },
    Text {
        text: String,
        #[serde(default)]
        declared_dims: Option<Dims>,
    },
}

impl Agent for HttpAgent {
    fn act(&mut self, ctx: &AgentContext<'_>) -> Result<AgentReply, AgentError> {
        let obs = ctx.observation;
        let bytes = std::fs::read(self.asset_root.join(&obs.screen.image))
            .map_err(|e| AgentError(format!("reading screen: {e}")))?;
        let history: Vec<Value> =
            ctx.history.iter().map(|r| json!({"action": r.action, "note": r.note})).collect();
        let body = json!({
            "protocol_version": PROTOCOL_VERSION,
            "task": {"id": self.task, "instruction": ctx.task.instruction},
            "seed": self.seed,
            "observation": {
                "step_index": obs.step_index,
                "remaining_steps": obs.remaining_steps,
                "screen": {
                    "sha256": obs.screen.sha256,
                    "width": obs.screen.width,
                    "height": obs.screen.height,
                    "data_base64": base64::engine::general_purpose::STANDARD.encode(bytes),
                },
            },
            "history": history,
        });
        let res = self.client.post(&self.url).json(&body).send().map_err(|e| {
            if e.is_timeout() {
                AgentError(format!("timeout: {e}"))
            } else {
                AgentError(format!("transport: {e}"))
            }
        })?;
        if !res.status().is_success() {
            return Err(AgentError(format!("agent answered {}", res.status())));
        }
        let text = res.text().map_err(|e| AgentError(format!("transport: {e}")))?;
        // Bodies that are not a reply envelope go to the parser as-is.
        Ok(match serde_json::from_str::<WireReply>(&text) {
            Ok(WireReply::Action { action }) => AgentReply::Action(action),
            Ok(WireReply::Text { text, declared_dims }) => {
                AgentReply::Raw(graphbench_core::action::RawAgentOutput { text, declared_dims })
            }
            Err(_) => AgentReply::Raw(graphbench_core::action::RawAgentOutput::new(text)),
        })
    }
}

/// An oracle role served over HTTP: POST `{"role", "key", "input"}`, the
/// response body is the answer.
pub struct HttpOracle {
    client: reqwest::blocking::Client,
    url: String,
}

impl HttpOracle {
    pub fn new(ep: &HttpEndpoint) -> Result<Self, OracleError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(ep.timeout_secs))
            .build()
            .map_err(|e| OracleError::Config(e.to_string()))?;
        Ok(Self { client, url: ep.http.clone() })
    }
}

impl Oracle for HttpOracle {
    fn call(&self, role: Role, key: &str, input: &Value) -> Result<Value, OracleError> {
        let transport = |e: reqwest::Error| OracleError::Transport { role, message: e.to_string() };
        let res = self
            .client
            .post(&self.url)
            .json(&json!({"role": role, "key": key, "input": input}))
            .send()
            .map_err(transport)?;
        if !res.status().is_success() {
            return Err(OracleError::Transport { role, message: format!("status {}", res.status()) });
        }
        res.json().map_err(|e| OracleError::BadAnswer { role, message: e.to_string() })
    }
}

/// Connector for [`graphbench_core::builder::OracleSuite::from_config`].
pub fn connect_http_oracle(ep: &HttpEndpoint) -> Result<Arc<dyn Oracle>, OracleError> {
    Ok(Arc::new(HttpOracle::new(ep)?))
}
