//! Agents and the evaluation runner.

mod agent;
mod candidates;
mod eval;

pub use agent::{
    inject, task_seed, Agent, AgentContext, AgentError, AgentFactory, AgentReply, AgentSpec, Injection, RandomAgent,
    ScriptAgent, ScriptedFactory, TaskScript,
};
pub use candidates::make_candidate_actions;
pub use eval::{apply_reply, run_episode, run_eval, EvalConfig, EvalError, EvalRun, TaskFilter};
