use super::log::{EpisodeLog, LogFooter, LogHeader, StepRecord};
use super::resolve::resolve_transition;
use crate::action::{ActionSpec, RawAgentOutput};
use crate::digest::sha256_parts;
use crate::geometry::{Dims, Point};
use crate::graph::{GraphBenchmark, NodeId, Screen, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::borrow::Borrow;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    Running,
    /// Every milestone reached on a task without an answer rule.
    Completed,
    FailedMaxSteps,
    /// The agent issued `complete`.
    TerminatedByAgent,
    /// The agent timed out or errored; the episode was cut short.
    FailedAgent,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        self != SessionStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalAction {
    Home,
    Back,
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transition {
    MatchedEdge { edge: usize },
    NoOp,
    Global { action: GlobalAction },
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub applied: ActionSpec,
    pub transition: Transition,
    pub new_node: NodeId,
    pub milestones_newly_reached: Vec<String>,
    pub status_after: SessionStatus,
}

/// What the agent sees: one screenshot and its step budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub screen: Screen,
    pub step_index: u32,
    pub remaining_steps: u32,
}

impl Observation {
    /// Digest over the screenshot hash and the step counters.
    pub fn hash(&self) -> String {
        sha256_parts(&[
            self.screen.sha256.as_bytes(),
            &self.step_index.to_le_bytes(),
            &self.remaining_steps.to_le_bytes(),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("session is not running (status {0:?})")]
    NotRunning(SessionStatus),
    #[error("coordinate ({},{}) is not normalized to the current screen {dims}", point.x, point.y)]
    NotNormalized { point: Point, dims: Dims },
}

/// One agent episode on one task. `G` is any handle to the shared graph.
#[derive(Debug, Clone)]
pub struct Session<G: Borrow<GraphBenchmark> = Arc<GraphBenchmark>> {
    graph: G,
    task_index: usize,
    seed: u64,
    current: NodeId,
    nav_stack: Vec<NodeId>,
    step_count: u32,
    reached: Vec<bool>,
    reached_order: Vec<String>,
    rng: ChaCha8Rng,
    screen_index: usize,
    status: SessionStatus,
    answer: Option<String>,
    log: EpisodeLog,
}

impl<G: Borrow<GraphBenchmark>> Session<G> {
    /// Starts at the task's start node with an empty milestone set.
    pub fn start(graph: G, task_id: &str, seed: u64) -> Result<Self, EngineError> {
        let g: &GraphBenchmark = graph.borrow();
        let task_index = g
            .tasks
            .iter()
            .position(|t| t.id == task_id)
            .ok_or_else(|| EngineError::UnknownTask(task_id.to_string()))?;
        let task = &g.tasks[task_index];
        let start = task.start.clone();
        let log = EpisodeLog::new(LogHeader::new(task_id, seed, g.digest(), task.max_steps));
        let n = task.milestones.len();
        let mut s = Self {
            current: start.clone(),
            nav_stack: vec![start],
            step_count: 0,
            reached: vec![false; n],
            reached_order: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            screen_index: 0,
            status: SessionStatus::Running,
            answer: None,
            log,
            task_index,
            seed,
            graph,
        };
        s.select_screen();
        Ok(s)
    }

    pub fn graph(&self) -> &GraphBenchmark {
        self.graph.borrow()
    }

    pub fn task(&self) -> &Task {
        &self.graph().tasks[self.task_index]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn current(&self) -> &NodeId {
        &self.current
    }

    pub fn nav_stack(&self) -> &[NodeId] {
        &self.nav_stack
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn answer(&self) -> Option<&str> {
        self.answer.as_deref()
    }

    /// Reached milestone ids in the order they were reached.
    pub fn reached(&self) -> &[String] {
        &self.reached_order
    }

    pub fn all_milestones_reached(&self) -> bool {
        self.reached.iter().all(|r| *r)
    }

    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    pub fn into_log(self) -> EpisodeLog {
        self.log
    }

    /// Index into the current node's screens of the displayed screenshot.
    pub fn screen_index(&self) -> usize {
        self.screen_index
    }

    fn current_screen(&self) -> &Screen {
        &self.graph().nodes[&self.current].screens[self.screen_index]
    }

    /// Draws the displayed screenshot for a newly entered node. The draw
    /// happens on entry, never on observation, so re-observing is pure.
    fn select_screen(&mut self) {
        let n = self.graph().nodes[&self.current].screens.len();
        self.screen_index = self.rng.random_range(0..n);
    }

    pub fn observe(&self) -> Result<Observation, EngineError> {
        if self.status != SessionStatus::Running {
            return Err(EngineError::NotRunning(self.status));
        }
        Ok(self.observation())
    }

    fn observation(&self) -> Observation {
        Observation {
            screen: self.current_screen().clone(),
            step_index: self.step_count,
            remaining_steps: self.task().max_steps - self.step_count,
        }
    }

    /// Applies a canonical action with no agent transcript attached.
    pub fn step(&mut self, action: &ActionSpec) -> Result<StepOutcome, EngineError> {
        self.step_with(action, None, None)
    }

    /// Applies `action`, recording the raw agent output it came from and an
    /// optional note (e.g. a parse error that turned the step into a wait).
    pub fn step_with(
        &mut self,
        action: &ActionSpec,
        raw: Option<RawAgentOutput>,
        note: Option<String>,
    ) -> Result<StepOutcome, EngineError> {
        if self.status != SessionStatus::Running {
            return Err(EngineError::NotRunning(self.status));
        }
        let dims = self.current_screen().dims();
        if let Some(point) = action.coordinate() {
            if !dims.contains(point) {
                return Err(EngineError::NotNormalized { point, dims });
            }
        }
        let observation_hash = self.observation().hash();
        let previous = self.current.clone();

        if let ActionSpec::Complete { text } = action {
            self.answer = Some(text.clone());
        }
        let (transition, target) = {
            let g = self.graph();
            match action {
                ActionSpec::Complete { .. } => (Transition::Terminal, previous.clone()),
                ActionSpec::NavigateHome => (Transition::Global { action: GlobalAction::Home }, g.home.clone()),
                ActionSpec::NavigateBack => {
                    let target = if self.nav_stack.len() > 1 {
                        self.nav_stack[self.nav_stack.len() - 2].clone()
                    } else {
                        previous.clone()
                    };
                    (Transition::Global { action: GlobalAction::Back }, target)
                }
                ActionSpec::Open { app } => match g.apps.get(app) {
                    Some(root) => (Transition::Global { action: GlobalAction::Open }, root.clone()),
                    None => (Transition::NoOp, previous.clone()),
                },
                _ => match resolve_transition(g, &previous, action) {
                    Some(edge) => (Transition::MatchedEdge { edge }, g.edges[edge].dst.clone()),
                    None => (Transition::NoOp, previous.clone()),
                },
            }
        };

        match &transition {
            Transition::Global { action: GlobalAction::Home } => self.nav_stack = vec![target.clone()],
            Transition::Global { action: GlobalAction::Back } => {
                if self.nav_stack.len() > 1 {
                    self.nav_stack.pop();
                }
            }
            _ if target != previous => self.nav_stack.push(target.clone()),
            _ => {}
        }
        self.current = target;
        if self.current != previous {
            self.select_screen();
        }
        self.step_count += 1;

        let task = &self.graph.borrow().tasks[self.task_index];
        let newly: Vec<String> = task
            .newly_reached(&self.current, &self.reached)
            .into_iter()
            .map(|i| {
                self.reached[i] = true;
                task.milestones[i].id.clone()
            })
            .collect();
        self.reached_order.extend(newly.iter().cloned());

        if matches!(transition, Transition::Terminal) {
            self.status = SessionStatus::TerminatedByAgent;
        } else if task.answer_rule.is_none() && self.reached.iter().all(|r| *r) {
            self.status = SessionStatus::Completed;
        }
        if self.status == SessionStatus::Running && self.step_count >= task.max_steps {
            self.status = SessionStatus::FailedMaxSteps;
        }

        let outcome = StepOutcome {
            applied: action.clone(),
            transition,
            new_node: self.current.clone(),
            milestones_newly_reached: newly,
            status_after: self.status,
        };
        self.log.steps.push(StepRecord {
            index: self.step_count - 1,
            observation_hash,
            raw,
            action: action.clone(),
            outcome: outcome.clone(),
            note,
        });
        if self.status.is_terminal() {
            self.log.footer = Some(self.footer(None));
        }
        Ok(outcome)
    }

    /// Ends a running episode because the agent failed to answer.
    pub fn fail_agent(&mut self, reason: impl Into<String>) {
        if self.status == SessionStatus::Running {
            self.status = SessionStatus::FailedAgent;
            self.log.footer = Some(self.footer(Some(reason.into())));
        }
    }

    fn footer(&self, reason: Option<String>) -> LogFooter {
        LogFooter { status: self.status, answer: self.answer.clone(), reason, steps: self.step_count }
    }
}
