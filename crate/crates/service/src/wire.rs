//! Request and response bodies of the session protocol.

use graphbench_core::action::RawAgentOutput;
use graphbench_core::engine::SessionStatus;
use graphbench_core::{ActionSpec, Dims};
use serde::{Deserialize, Serialize};

/// Sent as `protocol_version` in every JSON body and as the
/// `x-graphbench-protocol` header on every response.
pub const PROTOCOL_VERSION: &str = "graphbench-wire/1";
pub const PROTOCOL_HEADER: &str = "x-graphbench-protocol";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub task: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Parser profile for raw replies; the server default otherwise.
    #[serde(default)]
    pub profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session: String,
    pub task: String,
    pub instruction: String,
    pub seed: u64,
    pub max_steps: u32,
    pub profile: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenRef {
    pub sha256: String,
    pub width: u32,
    pub height: u32,
    /// Path of the image on this server, `/v1/images/<sha256>`.
    pub url: String,
    /// Base64 PNG bytes, when requested with `?inline=true`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_base64: Option<String>,
}

impl ScreenRef {
    pub fn dims(&self) -> Dims {
        Dims::new(self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationBody {
    pub session: String,
    pub step_index: u32,
    pub remaining_steps: u32,
    pub screen: ScreenRef,
    pub observation_hash: String,
}

/// A canonical action or untrusted text to be parsed with the session's
/// profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionRequest {
    Canonical {
        action: ActionSpec,
    },
    Raw {
        text: String,
        #[serde(default)]
        declared_dims: Option<Dims>,
    },
}

impl ActionRequest {
    pub fn raw(&self) -> Option<RawAgentOutput> {
        match self {
            ActionRequest::Raw { text, declared_dims } => {
                Some(RawAgentOutput { text: text.clone(), declared_dims: *declared_dims })
            }
            ActionRequest::Canonical { .. } => None,
        }
    }
}

/// What an agent learns from one step: no graph structure, only what a
/// device would show.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub session: String,
    /// Steps taken so far.
    pub step_index: u32,
    pub remaining_steps: u32,
    pub applied: ActionSpec,
    /// Why the reply was not applied as given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<FinalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    pub status: SessionStatus,
    pub steps: usize,
    pub success: bool,
    /// Completion rate in percent, two decimals.
    pub completion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

/// Body of `POST /v1/curation/items/{id}/decision`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub actor: String,
    #[serde(flatten)]
    pub verdict: graphbench_core::builder::DecisionVerdict,
}
