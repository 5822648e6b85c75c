use super::candidates::make_candidate_actions;
use crate::action::{ActionSpec, RawAgentOutput};
use crate::digest::sha256_parts;
use crate::engine::{Observation, StepRecord};
use crate::graph::{GraphBenchmark, NodeId, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// What an agent is shown at each step.
///
/// `graph` and `node` exist for scripted baselines; a model-backed agent
/// must only look at the task instruction and the observation.
pub struct AgentContext<'a> {
    pub task: &'a Task,
    pub observation: &'a Observation,
    pub history: &'a [StepRecord],
    pub graph: &'a GraphBenchmark,
    pub node: &'a NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentReply {
    /// Already canonical; applied as is.
    Action(ActionSpec),
    /// Free-form model output, run through the parser profile.
    Raw(RawAgentOutput),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct AgentError(pub String);

pub trait Agent: Send {
    fn act(&mut self, ctx: &AgentContext<'_>) -> Result<AgentReply, AgentError>;
}

/// Builds one fresh agent per task episode. Shared across worker threads.
pub trait AgentFactory: Sync {
    /// Identifier recorded in reports.
    fn name(&self) -> String;
    fn make(&self, task: &Task, seed: u64) -> Result<Box<dyn Agent>, AgentError>;
}

/// Replays a fixed action list, then declares completion with an empty
/// answer.
#[derive(Debug, Clone)]
pub struct ScriptAgent {
    actions: Vec<ActionSpec>,
    pos: usize,
}

impl ScriptAgent {
    pub fn new(actions: Vec<ActionSpec>) -> Self {
        Self { actions, pos: 0 }
    }
}

impl Agent for ScriptAgent {
    fn act(&mut self, _: &AgentContext<'_>) -> Result<AgentReply, AgentError> {
        let a = self.actions.get(self.pos).cloned().unwrap_or_else(|| ActionSpec::complete(""));
        self.pos += 1;
        Ok(AgentReply::Action(a))
    }
}

/// Uniform choice among the candidate actions at the current node.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, ctx: &AgentContext<'_>) -> Result<AgentReply, AgentError> {
        let cands = make_candidate_actions(ctx.graph, ctx.node);
        Ok(AgentReply::Action(cands[self.rng.random_range(0..cands.len())].clone()))
    }
}

/// A wrong action inserted into a golden path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    /// Position in the golden path at which the action is inserted.
    pub at_step: usize,
    pub action: ActionSpec,
    /// Golden actions dropped after the injected one.
    #[serde(default)]
    pub skip: usize,
}

/// Expands a golden path with injections, in `at_step` order.
pub fn inject(path: &[ActionSpec], injections: &[Injection]) -> Vec<ActionSpec> {
    let mut inj: Vec<&Injection> = injections.iter().collect();
    inj.sort_by_key(|i| i.at_step);
    let mut out = Vec::new();
    let mut skip = 0;
    let mut next = inj.into_iter().peekable();
    for (i, a) in path.iter().enumerate() {
        while let Some(j) = next.next_if(|j| j.at_step == i) {
            out.push(j.action.clone());
            skip += j.skip;
        }
        if skip > 0 {
            skip -= 1;
        } else {
            out.push(a.clone());
        }
    }
    out.extend(next.map(|j| j.action.clone()));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskScript {
    pub task: String,
    #[serde(default)]
    pub path: usize,
    #[serde(default)]
    pub actions: Option<Vec<ActionSpec>>,
    #[serde(default)]
    pub injections: Vec<Injection>,
}

/// Built-in agent selectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentSpec {
    /// Follows golden path `n` of each task.
    Oracle(usize),
    Random,
    /// Per-task scripts from a JSON file: explicit actions, or a golden
    /// path with injected mistakes.
    Scripted(PathBuf),
}

impl std::str::FromStr for AgentSpec {
    type Err = AgentError;

    /// `oracle`, `oracle:<n>`, `random`, `script:<file.json>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
        match (head, arg) {
            ("oracle", None) => Ok(AgentSpec::Oracle(0)),
            ("oracle", Some(n)) => n.parse().map(AgentSpec::Oracle).map_err(|_| AgentError(format!("bad path index `{n}`"))),
            ("random", None) => Ok(AgentSpec::Random),
            ("script", Some(p)) => Ok(AgentSpec::Scripted(PathBuf::from(p))),
            _ => Err(AgentError(format!("unknown agent `{s}` (oracle[:n], random, script:<file>)"))),
        }
    }
}

/// Factory for the built-in scripted agents.
#[derive(Debug, Clone)]
pub struct ScriptedFactory {
    spec: AgentSpec,
    scripts: Vec<TaskScript>,
}

impl ScriptedFactory {
    pub fn new(spec: AgentSpec) -> Result<Self, AgentError> {
        let scripts = match &spec {
            AgentSpec::Scripted(p) => {
                let src = std::fs::read_to_string(p).map_err(|e| AgentError(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&src).map_err(|e| AgentError(format!("{}: {e}", p.display())))?
            }
            _ => Vec::new(),
        };
        Ok(Self { spec, scripts })
    }

    pub fn with_scripts(scripts: Vec<TaskScript>) -> Self {
        Self { spec: AgentSpec::Scripted(PathBuf::from("<inline>")), scripts }
    }
}

fn golden(task: &Task, n: usize) -> Result<&Vec<ActionSpec>, AgentError> {
    task.golden_paths
        .get(n)
        .ok_or_else(|| AgentError(format!("task `{}` has no golden path {n}", task.id)))
}

/// Per-task stream for randomized agents, so tasks do not share draws.
pub fn task_seed(seed: u64, task: &str) -> u64 {
    let h = sha256_parts(&[&seed.to_le_bytes(), task.as_bytes()]);
    u64::from_str_radix(&h[..16], 16).expect("hex digest")
}

impl AgentFactory for ScriptedFactory {
    fn name(&self) -> String {
        match &self.spec {
            AgentSpec::Oracle(0) => "oracle".into(),
            AgentSpec::Oracle(n) => format!("oracle:{n}"),
            AgentSpec::Random => "random".into(),
            AgentSpec::Scripted(p) => format!("script:{}", p.display()),
        }
    }

    fn make(&self, task: &Task, seed: u64) -> Result<Box<dyn Agent>, AgentError> {
        Ok(match &self.spec {
            AgentSpec::Oracle(n) => Box::new(ScriptAgent::new(golden(task, *n)?.clone())),
            AgentSpec::Random => Box::new(RandomAgent::new(task_seed(seed, &task.id))),
            AgentSpec::Scripted(_) => {
                let s = self
                    .scripts
                    .iter()
                    .find(|s| s.task == task.id)
                    .ok_or_else(|| AgentError(format!("no script for task `{}`", task.id)))?;
                let base = match &s.actions {
                    Some(a) => a.clone(),
                    None => golden(task, s.path)?.clone(),
                };
                Box::new(ScriptAgent::new(inject(&base, &s.injections)))
            }
        })
    }
}
