//! Deterministic policy backends used by fixtures, verification, and tests.

use super::{PolicyBackend, PolicyContext, PolicyError};
use crate::dsl::ast::{Expr, Statement};
use crate::sim::{Task, TaskPlan};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Replays a fixed statement sequence per task, then stops.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    scripts: BTreeMap<String, Vec<Statement>>,
    current: Vec<Statement>,
    cursor: usize,
    known: bool,
    task: String,
}

impl ScriptedPolicy {
    pub fn new(scripts: BTreeMap<String, Vec<Statement>>) -> Self {
        ScriptedPolicy {
            scripts,
            current: Vec::new(),
            cursor: 0,
            known: false,
            task: String::new(),
        }
    }

    pub fn single(task: String, statements: Vec<Statement>) -> Self {
        let mut scripts = BTreeMap::new();
        scripts.insert(task, statements);
        ScriptedPolicy::new(scripts)
    }
}

impl PolicyBackend for ScriptedPolicy {
    fn id(&self) -> &str {
        "scripted"
    }

    fn on_reset(&mut self, task: &Task) {
        self.task = task.id.clone();
        self.cursor = 0;
        match self.scripts.get(&task.id) {
            Some(s) => {
                self.current = s.clone();
                self.known = true;
            }
            None => {
                self.current = Vec::new();
                self.known = false;
            }
        }
    }

    fn propose(&mut self, _ctx: &PolicyContext<'_>) -> Result<Statement, PolicyError> {
        if !self.known {
            return Err(PolicyError::MissingScript {
                task: self.task.clone(),
            });
        }
        let stmt = self
            .current
            .get(self.cursor)
            .cloned()
            .unwrap_or(Statement::Stop);
        self.cursor += 1;
        Ok(stmt)
    }
}

/// Shared, growable store of task plans. The task-free proposer writes plans
/// here; the oracle policy and the scripted inducer read them.
pub type PlanStore = Arc<Mutex<BTreeMap<String, TaskPlan>>>;

pub fn plan_store(plans: BTreeMap<String, TaskPlan>) -> PlanStore {
    Arc::new(Mutex::new(plans))
}

/// Witness-replaying policy that substitutes skill calls wherever the current
/// library implements a chain step (or a whole compositional default).
#[derive(Clone)]
pub struct OraclePolicy {
    store: PlanStore,
    compiled: Vec<Statement>,
    cursor: usize,
    ready: bool,
    known: bool,
    task: String,
    /// Prefer a single call to a compositional default when it is bindable.
    pub use_composites: bool,
}

impl OraclePolicy {
    pub fn new(store: PlanStore) -> Self {
        OraclePolicy {
            store,
            compiled: Vec::new(),
            cursor: 0,
            ready: false,
            known: false,
            task: String::new(),
            use_composites: false,
        }
    }

    pub fn with_composites(store: PlanStore) -> Self {
        let mut p = OraclePolicy::new(store);
        p.use_composites = true;
        p
    }

    fn compile(&mut self, ctx: &PolicyContext<'_>) {
        let plans = self.store.lock().expect("plan store lock");
        let Some(plan) = plans.get(&self.task) else {
            self.known = false;
            self.ready = true;
            return;
        };
        self.known = true;
        let names: Vec<(&str, &crate::skill_model::SkillSignature)> = ctx
            .available
            .iter()
            .map(|(id, sig)| (id.name.as_str(), sig))
            .collect();
        let has = |name: &str| names.iter().any(|(n, _)| *n == name);

        let mut out = Vec::new();
        let composite = plan
            .composite
            .as_ref()
            .filter(|c| self.use_composites && has(c));
        if let Some(comp) = composite {
            // Bind the default method's parameters from the chain values.
            let sig = names
                .iter()
                .find(|(n, _)| n == comp)
                .map(|(_, sig)| (*sig).clone())
                .expect("composite signature is available");
            let args: Vec<Expr> = sig
                .params
                .iter()
                .map(|p| {
                    let v = plan
                        .steps
                        .iter()
                        .find_map(|s| s.values.get(&p.name))
                        .cloned()
                        .expect("composite parameter appears in some chain step");
                    Expr::Lit(v)
                })
                .collect();
            for step in &plan.steps {
                out.extend(step.connector.iter().cloned());
            }
            out.push(Statement::Call {
                target: comp.clone(),
                args,
            });
        } else {
            for step in &plan.steps {
                out.extend(step.connector.iter().cloned());
                if has(&step.capability) {
                    out.push(Statement::Call {
                        target: step.capability.clone(),
                        args: step.call_args(),
                    });
                } else {
                    out.extend(step.span.iter().cloned());
                }
            }
        }
        self.compiled = out;
        self.ready = true;
    }
}

impl PolicyBackend for OraclePolicy {
    fn id(&self) -> &str {
        "oracle"
    }

    fn on_reset(&mut self, task: &Task) {
        self.task = task.id.clone();
        self.cursor = 0;
        self.ready = false;
        self.compiled.clear();
    }

    fn propose(&mut self, ctx: &PolicyContext<'_>) -> Result<Statement, PolicyError> {
        if !self.ready {
            self.compile(ctx);
        }
        if !self.known {
            return Err(PolicyError::MissingScript {
                task: self.task.clone(),
            });
        }
        let stmt = self
            .compiled
            .get(self.cursor)
            .cloned()
            .unwrap_or(Statement::Stop);
        self.cursor += 1;
        Ok(stmt)
    }
}

/// A policy that always stops immediately; the "no behavior" baseline.
#[derive(Debug, Clone, Default)]
pub struct NullPolicy;

impl PolicyBackend for NullPolicy {
    fn id(&self) -> &str {
        "null"
    }

    fn propose(&mut self, _ctx: &PolicyContext<'_>) -> Result<Statement, PolicyError> {
        Ok(Statement::Stop)
    }
}
