use super::agent::{Agent, AgentContext, AgentFactory, AgentReply};
use crate::action::{normalize_coordinates, parse_action, ActionSpec, ParserProfile, ProfileRegistry};
use crate::engine::{replay, EngineError, EpisodeLog, LogWriter, ReplayVerdict, Session, SessionStatus, StepOutcome};
use crate::graph::{GraphBenchmark, Task, TaskKind};
use crate::metrics::{aggregate, score_episode, BenchmarkReport, RunMeta, ScoreError};
use crate::par::Exec;
use std::borrow::Borrow;
use std::path::{Path, PathBuf};

/// Which tasks an evaluation covers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TaskFilter {
    #[default]
    All,
    Kind(TaskKind),
    /// Exact ids, or prefixes when they end in `*`.
    Ids(Vec<String>),
}

impl std::str::FromStr for TaskFilter {
    type Err = String;

    /// `all` / `*`, `kind:single_app` / `kind:cross_app`, or a comma list of
    /// ids and `prefix*` patterns.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "all" || s == "*" {
            return Ok(TaskFilter::All);
        }
        if let Some(kind) = s.strip_prefix("kind:") {
            return serde_json::from_value(serde_json::Value::String(kind.to_string()))
                .map(TaskFilter::Kind)
                .map_err(|_| format!("unknown task kind `{kind}`"));
        }
        Ok(TaskFilter::Ids(s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()))
    }
}

impl TaskFilter {
    /// Matching tasks in manifest order. A pattern matching nothing is an
    /// error, so typos do not silently shrink a run.
    pub fn select<'g>(&self, g: &'g GraphBenchmark) -> Result<Vec<&'g Task>, EvalError> {
        match self {
            TaskFilter::All => Ok(g.tasks.iter().collect()),
            TaskFilter::Kind(k) => Ok(g.tasks.iter().filter(|t| t.kind == *k).collect()),
            TaskFilter::Ids(pats) => {
                let hit = |pat: &str, id: &str| match pat.strip_suffix('*') {
                    Some(prefix) => id.starts_with(prefix),
                    None => pat == id,
                };
                if let Some(p) = pats.iter().find(|p| !g.tasks.iter().any(|t| hit(p, &t.id))) {
                    return Err(EvalError::UnknownTask(p.clone()));
                }
                Ok(g.tasks.iter().filter(|t| pats.iter().any(|p| hit(p, &t.id))).collect())
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no task matches `{0}`")]
    UnknownTask(String),
    #[error("episode for task `{task}` failed replay verification: {verdict:?}")]
    ReplayMismatch { task: String, verdict: ReplayVerdict },
    #[error(transparent)]
    Replay(#[from] crate::engine::ReplayError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub filter: TaskFilter,
    pub seed: u64,
    /// Where `logs/<task>.jsonl`, `report.json` and `report.txt` go.
    pub out_dir: Option<PathBuf>,
    pub exec: Exec,
    /// Parser applied to raw agent replies.
    pub profile: ParserProfile,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            filter: TaskFilter::All,
            seed: crate::default_seed(),
            out_dir: None,
            exec: Exec::default(),
            profile: ProfileRegistry::builtin().get("json").expect("builtin json profile").clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub report: BenchmarkReport,
    /// One log per selected task, in manifest order.
    pub logs: Vec<EpisodeLog>,
}

/// Turns a reply into a canonical action. Anything unusable becomes a
/// `wait` so the episode keeps its step accounting; the reason is kept in
/// the log note.
fn interpret(reply: &AgentReply, screen: crate::Dims, profile: &ParserProfile) -> (ActionSpec, Option<String>) {
    let raw = match reply {
        AgentReply::Action(a) => return (a.clone(), None),
        AgentReply::Raw(raw) => raw,
    };
    match parse_action(raw, profile) {
        Err(e) => (ActionSpec::Wait { coordinate: None }, Some(format!("{}: {e}", e.code()))),
        Ok(p) => match raw.declared_dims {
            Some(from) if from != screen && p.action.coordinate().is_some() => {
                match normalize_coordinates(&p.action, from, screen) {
                    Ok(a) => (a, None),
                    Err(e) => (ActionSpec::Wait { coordinate: None }, Some(format!("normalize: {e}"))),
                }
            }
            _ => (p.action, None),
        },
    }
}

/// Applies an agent reply to a running session. Replies that cannot be
/// parsed or fall outside the screen are logged as `wait` steps with a
/// note, so the step budget is still charged.
pub fn apply_reply<G: Borrow<GraphBenchmark>>(
    s: &mut Session<G>,
    reply: &AgentReply,
    profile: &ParserProfile,
) -> Result<StepOutcome, EngineError> {
    let dims = s.observe()?.screen.dims();
    let raw = match reply {
        AgentReply::Raw(r) => Some(r.clone()),
        AgentReply::Action(_) => None,
    };
    let (action, note) = interpret(reply, dims, profile);
    if let Some(n) = &note {
        tracing::debug!(task = %s.task().id, step = s.step_count(), note = %n, "reply not applied");
    }
    match s.step_with(&action, raw.clone(), note) {
        Err(EngineError::NotNormalized { point, dims }) => {
            let note = format!("out-of-range: ({},{}) outside {dims}", point.x, point.y);
            s.step_with(&ActionSpec::Wait { coordinate: None }, raw, Some(note))
        }
        other => other,
    }
}

/// Runs one agent on one task until the session ends.
pub fn run_episode(
    g: &GraphBenchmark,
    task: &Task,
    agent: &mut dyn Agent,
    seed: u64,
    profile: &ParserProfile,
    mut writer: Option<&mut LogWriter>,
) -> Result<EpisodeLog, EvalError> {
    let mut s = Session::start(g, &task.id, seed)?;
    while s.status() == SessionStatus::Running {
        let obs = s.observe()?;
        let reply = {
            let ctx = AgentContext {
                task,
                observation: &obs,
                history: &s.log().steps,
                graph: g,
                node: s.current(),
            };
            agent.act(&ctx)
        };
        match reply {
            Err(e) => {
                tracing::warn!(task = %task.id, error = %e, "agent failed");
                s.fail_agent(e.0);
            }
            Ok(reply) => {
                apply_reply(&mut s, &reply, profile)?;
            }
        }
        if let Some(w) = writer.as_deref_mut() {
            w.sync(s.log()).map_err(|e| EvalError::Io { path: PathBuf::from(&task.id), source: e })?;
        }
    }
    Ok(s.into_log())
}

/// Runs `factory`'s agent over the selected tasks, verifies every log by
/// replay, scores them and writes the artifacts. Episodes are independent
/// and run under `cfg.exec`; outputs do not depend on the strategy.
pub fn run_eval(g: &GraphBenchmark, factory: &dyn AgentFactory, cfg: &EvalConfig) -> Result<EvalRun, EvalError> {
    let tasks = cfg.filter.select(g)?;
    let log_dir = cfg.out_dir.as_ref().map(|d| d.join("logs"));
    if let Some(d) = &log_dir {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }

    let logs: Vec<Result<EpisodeLog, EvalError>> = cfg.exec.map(&tasks, |task| {
        let mut writer = match &log_dir {
            Some(d) => {
                let path = d.join(format!("{}.jsonl", task.id));
                let header = crate::engine::LogHeader::new(&task.id, cfg.seed, g.digest(), task.max_steps);
                Some(LogWriter::create(&path, &header).map_err(io_err(&path))?)
            }
            None => None,
        };
        match factory.make(task, cfg.seed) {
            Ok(mut agent) => run_episode(g, task, agent.as_mut(), cfg.seed, &cfg.profile, writer.as_mut()),
            Err(e) => {
                let mut s = Session::start(g, &task.id, cfg.seed)?;
                s.fail_agent(e.0);
                if let Some(w) = writer.as_mut() {
                    w.sync(s.log()).map_err(|e| EvalError::Io { path: PathBuf::from(&task.id), source: e })?;
                }
                Ok(s.into_log())
            }
        }
    });
    let logs: Vec<EpisodeLog> = logs.into_iter().collect::<Result<_, _>>()?;

    let verdicts = cfg.exec.map(&logs, |log| replay(g, log));
    for (log, v) in logs.iter().zip(verdicts) {
        let v = v?;
        if !v.is_identical() {
            return Err(EvalError::ReplayMismatch { task: log.header.task.clone(), verdict: v });
        }
    }

    let scores = tasks
        .iter()
        .zip(&logs)
        .map(|(t, l)| score_episode(t, l))
        .collect::<Result<Vec<_>, _>>()?;
    let meta = RunMeta {
        agent: factory.name(),
        seed: cfg.seed,
        manifest_digest: g.digest().to_string(),
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let all_tasks: Vec<Task> = tasks.iter().map(|t| (*t).clone()).collect();
    let report = aggregate(&scores, &all_tasks, meta)?;

    if let Some(dir) = &cfg.out_dir {
        let p = dir.join("report.json");
        std::fs::write(&p, report.to_json()).map_err(io_err(&p))?;
        let p = dir.join("report.txt");
        std::fs::write(&p, report.to_text()).map_err(io_err(&p))?;
    }
    Ok(EvalRun { report, logs })
}
