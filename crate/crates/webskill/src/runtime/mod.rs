//! Episode execution: the policy loop over the expanded action space.
//!
//! A policy proposes one statement per wall step. Skill calls are expanded
//! against the library and their primitives applied atomically; the
//! trajectory records the call as a single step. `stop` is a distinguished
//! statement policies may emit to end the episode; it is counted as a step.

pub mod chat;
#[cfg(test)]
mod tests;
pub mod remote;
pub mod scripted;

pub use remote::RemotePolicy;
pub use scripted::{OraclePolicy, PlanStore, ScriptedPolicy};

use crate::dsl::ast::{PrimitiveAction, Statement};
use crate::dsl::expand::expand;
use crate::dsl::printer::print_statement;
use crate::sim::{self, SimError, SiteSpec, Task};
use crate::skill_model::{SkillId, SkillLibrary, SkillSignature};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Bounded history window kept in working memory.
pub const MEMORY_WINDOW: usize = 20;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no script for task `{task}`")]
    MissingScript { task: String },
    #[error("transport failure: {detail}")]
    Transport { detail: String },
    #[error("malformed reply after {attempts} attempt(s): {detail}")]
    MalformedReply { detail: String, attempts: usize },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
}

/// Instruction, bounded interaction history, and scratch notes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkingMemory {
    pub instruction: String,
    pub window: usize,
    pub history: VecDeque<(String, String)>,
    pub notes: String,
}

impl WorkingMemory {
    pub fn new(instruction: &str, window: usize) -> Self {
        WorkingMemory {
            instruction: instruction.to_string(),
            window,
            history: VecDeque::new(),
            notes: String::new(),
        }
    }

    pub fn push(&mut self, observation_digest: String, statement: &Statement) {
        self.history
            .push_back((observation_digest, print_statement(statement)));
        while self.history.len() > self.window {
            self.history.pop_front();
        }
    }
}

/// Everything a policy sees when choosing the next action.
pub struct PolicyContext<'a> {
    pub task: &'a Task,
    pub observation: &'a sim::Observation,
    pub memory: &'a WorkingMemory,
    /// Skills resolvable on this site, with their signatures.
    pub available: &'a [(SkillId, SkillSignature)],
}

/// A pluggable action-selection backend.
pub trait PolicyBackend: Send {
    fn id(&self) -> &str;

    /// Called once per episode before the first proposal.
    fn on_reset(&mut self, _task: &Task) {}

    fn propose(&mut self, ctx: &PolicyContext<'_>) -> Result<Statement, PolicyError>;
}

/// One recorded wall step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    /// Digest of the observation the policy acted on.
    pub observation: String,
    pub statement: Statement,
    pub expansion: Vec<PrimitiveAction>,
    pub expansion_len: usize,
}

/// A finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub task: String,
    pub site: String,
    pub records: Vec<StepRecord>,
    pub terminal: String,
    pub success: bool,
    pub wall_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl Trajectory {
    pub fn statements(&self) -> Vec<Statement> {
        self.records.iter().map(|r| r.statement.clone()).collect()
    }

    /// All primitives applied, in order.
    pub fn primitives(&self) -> Vec<PrimitiveAction> {
        self.records
            .iter()
            .flat_map(|r| r.expansion.iter().cloned())
            .collect()
    }

    pub fn calls(&self) -> impl Iterator<Item = &Statement> {
        self.records
            .iter()
            .map(|r| &r.statement)
            .filter(|s| s.is_call())
    }

    pub fn uses_any_skill(&self) -> bool {
        self.calls().next().is_some()
    }
}

/// Run one episode. Policy faults are recorded on the trajectory (which is
/// then a failure); only environment-level problems are hard errors.
pub fn execute_task(
    spec: &SiteSpec,
    task: &Task,
    lib: &SkillLibrary,
    policy: &mut dyn PolicyBackend,
    horizon: usize,
) -> Result<Trajectory, RuntimeError> {
    if horizon == 0 {
        return Err(RuntimeError::ZeroHorizon);
    }
    let (mut state, mut obs) = sim::reset(spec, task)?;
    policy.on_reset(task);
    let available = lib.available_skills(&task.site);
    let mut memory = WorkingMemory::new(&task.instruction, MEMORY_WINDOW);
    let mut records: Vec<StepRecord> = Vec::new();
    let mut applied: Vec<PrimitiveAction> = Vec::new();
    let mut success = false;
    let mut fault: Option<String> = None;

    for index in 0..horizon {
        let ctx = PolicyContext {
            task,
            observation: &obs,
            memory: &memory,
            available: &available,
        };
        let statement = match policy.propose(&ctx) {
            Ok(s) => s,
            Err(e) => {
                fault = Some(e.to_string());
                break;
            }
        };
        let obs_digest = obs.digest();
        let stop = matches!(statement, Statement::Stop);

        // Expand fully before applying anything: a call either runs its whole
        // expansion or, on a resolution error, nothing at all.
        let expansion = match expand(lib, &task.site, &statement, &Default::default()) {
            Ok(e) => e,
            Err(e) => {
                fault = Some(format!(
                    "invalid statement `{}`: {e}",
                    print_statement(&statement)
                ));
                break;
            }
        };
        let mut sim_fault = None;
        for action in &expansion {
            if let Err(e) = sim::step(spec, &mut state, action) {
                sim_fault = Some(format!(
                    "statement `{}` produced a malformed action: {e}",
                    print_statement(&statement)
                ));
                break;
            }
        }
        if let Some(f) = sim_fault {
            fault = Some(f);
            break;
        }

        memory.push(obs_digest.clone(), &statement);
        applied.extend(expansion.iter().cloned());
        records.push(StepRecord {
            index,
            observation: obs_digest,
            statement,
            expansion_len: expansion.len(),
            expansion,
        });
        obs = sim::observe(spec, &state);
        if sim::check_success(spec, task, &state, &applied) {
            success = true;
            break;
        }
        if stop {
            break;
        }
    }

    if fault.is_some() {
        success = false;
    }
    Ok(Trajectory {
        id: String::new(),
        task: task.id.clone(),
        site: task.site.clone(),
        wall_steps: records.len(),
        records,
        terminal: state.digest(),
        success,
        fault,
    })
}

/// Replay a trajectory's statements through a fresh episode and compare
/// digests step by step. Returns the first divergent wall step, if any.
pub fn replay_divergence(
    spec: &SiteSpec,
    task: &Task,
    lib: &SkillLibrary,
    traj: &Trajectory,
) -> Result<ReplayReport, RuntimeError> {
    let mut policy = ScriptedPolicy::single(task.id.clone(), traj.statements());
    let horizon = traj.wall_steps.max(1);
    let rerun = execute_task(spec, task, lib, &mut policy, horizon)?;
    let mut first_divergence = None;
    for (i, (a, b)) in rerun.records.iter().zip(traj.records.iter()).enumerate() {
        if a.observation != b.observation || a.expansion != b.expansion {
            first_divergence = Some(i);
            break;
        }
    }
    if first_divergence.is_none() && rerun.records.len() != traj.records.len() {
        first_divergence = Some(rerun.records.len().min(traj.records.len()));
    }
    let terminal_match = rerun.terminal == traj.terminal;
    Ok(ReplayReport {
        terminal_match: terminal_match && first_divergence.is_none(),
        first_divergence,
        rerun_terminal: rerun.terminal,
        logged_terminal: traj.terminal.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub terminal_match: bool,
    pub first_divergence: Option<usize>,
    pub rerun_terminal: String,
    pub logged_terminal: String,
}
