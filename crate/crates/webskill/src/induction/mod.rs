//! Skill induction: judge, induce (abstract interface first, then concrete
//! methods), verify by replay, and grow the library.
//!
//! The loop contract is strict: libraries only ever gain entries, every
//! accepted skill has a successful verification trajectory, and no site
//! implementation exists without its interface.

pub mod remote;
#[cfg(test)]
mod tests;
pub mod scripted;
pub mod taskfree;

pub use scripted::ScriptedInducer;
pub use taskfree::{run_task_free, GapDrivenProposer, ProposerBackend, TaskFreeOutput};

use crate::dsl::ast::{Expr, Statement, Value};
use crate::dsl::expand::{bind_args, expand_sequence};
use crate::dsl::printer::{print_interface, print_statement};
use crate::runtime::{execute_task, PolicyBackend, RuntimeError, ScriptedPolicy, Trajectory};
use crate::sim::{self, SiteSpec, Task};
use crate::skill_model::{
    validate_library, CategoryInterface, ModelError, Param, SizeBounds, SkillDef, SkillLibrary,
    SkillOrigin, SkillSignature, Violation,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InductionError {
    #[error("inducer fault: {detail}")]
    InducerFault { detail: String },
    #[error("proposal failed validation: {0:?}")]
    ValidationFailed(Vec<Violation>),
    #[error("trajectory belongs to task `{traj}`, judged against `{task}`")]
    TaskMismatch { traj: String, task: String },
    #[error("trajectory did not succeed; nothing to induce")]
    NotSuccessful,
    #[error("proposer fault: {detail}")]
    ProposerFault { detail: String },
    #[error("unknown site `{site}`")]
    UnknownSite { site: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// Immutable site lookup shared by judges and loops.
#[derive(Debug, Clone, Default)]
pub struct SiteIndex {
    sites: BTreeMap<String, SiteSpec>,
}

impl SiteIndex {
    pub fn new(specs: impl IntoIterator<Item = SiteSpec>) -> Arc<Self> {
        Arc::new(SiteIndex {
            sites: specs.into_iter().map(|s| (s.id.clone(), s)).collect(),
        })
    }

    pub fn get(&self, site: &str) -> Option<&SiteSpec> {
        self.sites.get(site)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SiteSpec> {
        self.sites.values()
    }
}

/// The abstract blueprint for a category: every capability as a signature,
/// plus the compositional default methods.
pub fn interface_schema(category: &str) -> Option<CategoryInterface> {
    let caps = sim::search::capability_defs(category);
    if caps.is_empty() {
        return None;
    }
    let doc_for = |name: &str| -> String {
        match name {
            "search" => "Search the catalog for matching items".into(),
            "open_item" => "Open a result row's item page".into(),
            "add_to_cart" => "Put the currently open item in the cart".into(),
            "checkout" => "Place an order for the cart contents".into(),
            "filter" => "Narrow the current results".into(),
            "wishlist" => "Save the currently open item for later".into(),
            "create_repo" => "Create a new repository".into(),
            "create_issue" => "Open an issue in the current repository".into(),
            "add_label" => "Label the current issue".into(),
            "star_repo" => "Star an existing repository".into(),
            _ => String::new(),
        }
    };
    let signatures: Vec<SkillSignature> = caps
        .iter()
        .map(|c| SkillSignature {
            name: c.name.to_string(),
            params: c
                .params
                .iter()
                .map(|(n, k)| Param {
                    name: (*n).to_string(),
                    kind: *k,
                })
                .collect(),
            doc: doc_for(c.name),
        })
        .collect();

    let mut defaults = Vec::new();
    for (name, chain, _) in sim::tasks::composite_defs(category) {
        // Parameters: union of the leaves' parameters, in chain order.
        let mut params: Vec<Param> = Vec::new();
        for leaf in *chain {
            let sig = signatures
                .iter()
                .find(|s| s.name == *leaf)
                .expect("chain leaves are signatures");
            for p in &sig.params {
                if !params.iter().any(|q| q.name == p.name) {
                    params.push(p.clone());
                }
            }
        }
        // Bodies reuse an earlier default where one covers a chain prefix.
        let mut body: Vec<Statement> = Vec::new();
        let mut covered = 0usize;
        for earlier in &defaults {
            let earlier: &SkillDef = earlier;
            let Some((_, echain, _)) = sim::tasks::composite_defs(category)
                .iter()
                .find(|(n, _, _)| *n == earlier.signature.name)
            else {
                continue;
            };
            if echain.len() < chain.len() && chain[..echain.len()] == **echain {
                body.push(Statement::Call {
                    target: earlier.signature.name.clone(),
                    args: earlier
                        .signature
                        .params
                        .iter()
                        .map(|p| Expr::Param(p.name.clone()))
                        .collect(),
                });
                covered = echain.len();
                break;
            }
        }
        for leaf in &chain[covered..] {
            let sig = signatures.iter().find(|s| s.name == *leaf).unwrap();
            body.push(Statement::Call {
                target: sig.name.clone(),
                args: sig
                    .params
                    .iter()
                    .map(|p| Expr::Param(p.name.clone()))
                    .collect(),
            });
        }
        defaults.push(SkillDef {
            signature: SkillSignature {
                name: name.to_string(),
                params,
                doc: format!("Composition: {}", chain.join(" then ")),
            },
            body,
            origin: SkillOrigin::Default,
            created_at: 0,
        });
    }

    Some(CategoryInterface {
        id: format!("abstract_{category}"),
        category: category.to_string(),
        abstract_signatures: signatures,
        default_methods: defaults,
    })
}

/// Judge verdict plus the reasoning trace behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub success: bool,
    pub rationale: String,
}

pub trait JudgeBackend: Send + Sync {
    fn id(&self) -> &str;
    fn verdict(&self, traj: &Trajectory, task: &Task) -> Result<JudgeVerdict, InductionError>;
}

/// The default deterministic judge: replays the recorded primitives through a
/// fresh episode, cross-checks the terminal digest, and evaluates the task's
/// success predicate on the reconstructed final state.
pub struct ProgrammaticJudge {
    sites: Arc<SiteIndex>,
}

impl ProgrammaticJudge {
    pub fn new(sites: Arc<SiteIndex>) -> Self {
        ProgrammaticJudge { sites }
    }
}

impl JudgeBackend for ProgrammaticJudge {
    fn id(&self) -> &str {
        "programmatic"
    }

    fn verdict(&self, traj: &Trajectory, task: &Task) -> Result<JudgeVerdict, InductionError> {
        if traj.task != task.id {
            return Err(InductionError::TaskMismatch {
                traj: traj.task.clone(),
                task: task.id.clone(),
            });
        }
        let spec = self
            .sites
            .get(&task.site)
            .ok_or_else(|| InductionError::UnknownSite {
                site: task.site.clone(),
            })?;
        let (mut state, _) = sim::reset(spec, task).map_err(RuntimeError::Sim)?;
        let prims = traj.primitives();
        for a in &prims {
            sim::step(spec, &mut state, a).map_err(RuntimeError::Sim)?;
        }
        let digest_match = state.digest() == traj.terminal;
        let predicate = sim::check_success(spec, task, &state, &prims);
        let success = digest_match && predicate;
        let rationale = format!(
            "predicate={predicate}; terminal digest {}",
            if digest_match { "matches" } else { "differs" }
        );
        Ok(JudgeVerdict { success, rationale })
    }
}

/// Convenience wrapper matching the loop's judging step.
pub fn judge_programmatic(
    sites: &Arc<SiteIndex>,
    traj: &Trajectory,
    task: &Task,
) -> Result<JudgeVerdict, InductionError> {
    ProgrammaticJudge::new(sites.clone()).verdict(traj, task)
}

/// One proposed concrete method, with the argument values it was observed
/// with (needed to locate and replace its span in the source trajectory).
#[derive(Debug, Clone)]
pub struct ProposedMethod {
    pub site: String,
    pub def: SkillDef,
    pub instance_args: Vec<Value>,
}

/// What an inducer wants to add to the library.
#[derive(Debug, Clone, Default)]
pub struct Proposal {
    pub interface: Option<CategoryInterface>,
    pub methods: Vec<ProposedMethod>,
}

impl Proposal {
    pub fn is_empty(&self) -> bool {
        self.interface.is_none() && self.methods.is_empty()
    }

    pub fn summary(&self) -> ProposalSummary {
        ProposalSummary {
            interface: self.interface.as_ref().map(print_interface),
            methods: self
                .methods
                .iter()
                .map(|m| MethodSummary {
                    site: m.site.clone(),
                    name: m.def.signature.name.clone(),
                    body: m
                        .def
                        .body
                        .iter()
                        .map(print_statement)
                        .collect::<Vec<_>>()
                        .join("; "),
                    args: m.instance_args.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub site: String,
    pub name: String,
    pub body: String,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposalSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interface: Option<String>,
    pub methods: Vec<MethodSummary>,
}

pub trait InducerBackend: Send {
    fn id(&self) -> &str;

    /// Analyze a successful trajectory and propose zero or more skills.
    fn propose(
        &mut self,
        traj: &Trajectory,
        lib: &SkillLibrary,
        category: &str,
    ) -> Result<Option<Proposal>, InductionError>;
}

/// Outcome of one induction attempt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposalOutcome {
    pub task: String,
    pub proposal: ProposalSummary,
    /// Id of the verification trajectory, once verification ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<String>,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
    #[serde(skip)]
    pub raw: Option<Proposal>,
}

/// Ask the inducer for a proposal and validate it structurally: abstract
/// interface first, grammar and conformance via a dry registration, and size
/// bounds. Verification (replay) happens in [`verify_and_commit`].
pub fn induce_from_trajectory(
    traj: &Trajectory,
    lib: &SkillLibrary,
    inducer: &mut dyn InducerBackend,
    category: &str,
    bounds: &SizeBounds,
) -> Result<Option<ProposalOutcome>, InductionError> {
    if !traj.success {
        return Err(InductionError::NotSuccessful);
    }
    let Some(proposal) = inducer.propose(traj, lib, category)? else {
        return Ok(None);
    };
    if proposal.is_empty() {
        return Ok(None);
    }

    // Abstract-first: no concrete method may land before its interface.
    if lib.interface_for_category(category).is_none() && proposal.interface.is_none() {
        return Err(InductionError::ValidationFailed(vec![Violation {
            skill: None,
            rule: crate::skill_model::RuleId::Conformance,
            detail: format!("no interface for `{category}` and the proposal does not add one"),
        }]));
    }

    // Dry-run the registration to catch structural problems, then validate
    // the whole candidate under the size bounds.
    let dry_step = lib.latest_created_at() + 1;
    let candidate = match apply_proposal(lib, &proposal, dry_step) {
        Ok(c) => c,
        Err(e) => {
            return Err(InductionError::ValidationFailed(vec![Violation {
                skill: None,
                rule: crate::skill_model::RuleId::Conformance,
                detail: e.to_string(),
            }]))
        }
    };
    let violations = validate_library(&candidate, bounds);
    if !violations.is_empty() {
        return Err(InductionError::ValidationFailed(violations));
    }

    Ok(Some(ProposalOutcome {
        task: traj.task.clone(),
        proposal: proposal.summary(),
        verification: None,
        accepted: false,
        rejection: None,
        raw: Some(proposal),
    }))
}

/// Register the proposal onto a copy of the library (interface first),
/// stamping everything with the given learning step.
fn apply_proposal(
    lib: &SkillLibrary,
    proposal: &Proposal,
    step: u64,
) -> Result<SkillLibrary, ModelError> {
    let mut next = lib.clone();
    if let Some(iface) = &proposal.interface {
        let mut iface = iface.clone();
        for def in &mut iface.default_methods {
            def.created_at = step;
        }
        next = next.register_interface(iface)?;
    }
    for m in &proposal.methods {
        let iface_id = next
            .interfaces()
            .find(|i| i.signature(&m.def.signature.name).is_some())
            .map(|i| i.id.clone())
            .ok_or_else(|| ModelError::UnknownInterface {
                id: format!("(for `{}`)", m.def.signature.name),
            })?;
        let mut def = m.def.clone();
        def.created_at = step;
        next = next.extend_implementation(&m.site, &iface_id, vec![def])?;
    }
    Ok(next)
}

/// Build the skill-constrained replay: the source statements with each
/// proposed method's span replaced by a call to it.
fn constrained_statements(
    source: &Trajectory,
    candidate: &SkillLibrary,
    site: &str,
    proposal: &Proposal,
) -> Result<Vec<Statement>, String> {
    let mut statements = source.statements();
    for m in &proposal.methods {
        let bindings = bind_args(&m.def.signature, &m.instance_args)
            .map_err(|e| format!("instance arguments do not bind: {e}"))?;
        let target: Vec<_> = expand_sequence(candidate, site, &m.def.body, &bindings)
            .map_err(|e| format!("proposed body does not expand: {e}"))?;
        let mut found = None;
        'outer: for i in 0..statements.len() {
            let mut acc = Vec::new();
            for j in i..statements.len() {
                let exp = expand_sequence(
                    candidate,
                    site,
                    &statements[j..j + 1],
                    &Default::default(),
                )
                .map_err(|e| format!("source statement does not expand: {e}"))?;
                acc.extend(exp);
                if acc.len() == target.len() {
                    if acc == target {
                        found = Some((i, j + 1));
                    }
                    break;
                }
                if acc.len() > target.len() {
                    break;
                }
            }
            if found.is_some() {
                break 'outer;
            }
        }
        let Some((i, j)) = found else {
            return Err(format!(
                "no contiguous span of the trajectory matches `{}`",
                m.def.signature.name
            ));
        };
        let call = Statement::Call {
            target: m.def.signature.name.clone(),
            args: m.instance_args.iter().cloned().map(Expr::Lit).collect(),
        };
        statements.splice(i..j, [call]);
    }
    Ok(statements)
}

/// Re-solve the same task with the proposed skills; commit only on a judged
/// success. Returns the (possibly unchanged) library and the verification
/// trajectory when one was run.
pub fn verify_and_commit(
    outcome: &mut ProposalOutcome,
    lib: &SkillLibrary,
    spec: &SiteSpec,
    task: &Task,
    source: &Trajectory,
    judge: &dyn JudgeBackend,
    step: u64,
) -> Result<(SkillLibrary, Option<Trajectory>), InductionError> {
    let Some(proposal) = outcome.raw.clone() else {
        outcome.rejection = Some("proposal was already consumed".into());
        return Ok((lib.clone(), None));
    };
    let candidate = match apply_proposal(lib, &proposal, step) {
        Ok(c) => c,
        Err(e) => {
            outcome.rejection = Some(e.to_string());
            return Ok((lib.clone(), None));
        }
    };
    let statements = match constrained_statements(source, &candidate, &task.site, &proposal) {
        Ok(s) => s,
        Err(reason) => {
            outcome.rejection = Some(reason);
            return Ok((lib.clone(), None));
        }
    };
    let mut policy = ScriptedPolicy::single(task.id.clone(), statements);
    let mut verification = execute_task(spec, task, &candidate, &mut policy, task.horizon)?;
    verification.id = format!("verify-{}-s{step:03}", task.id);
    outcome.verification = Some(verification.id.clone());
    let verdict = judge.verdict(&verification, task)?;
    if verdict.success {
        outcome.accepted = true;
        Ok((candidate, Some(verification)))
    } else {
        outcome.rejection = Some(format!("verification failed: {}", verdict.rationale));
        Ok((lib.clone(), Some(verification)))
    }
}

/// Everything a learning run produces.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub library: SkillLibrary,
    pub trajectories: Vec<Trajectory>,
    pub outcomes: Vec<ProposalOutcome>,
    /// Library snapshots: (learning step, library after that step).
    pub snapshots: Vec<(u64, SkillLibrary)>,
}

/// Knobs shared by both learning loops.
#[derive(Debug, Clone)]
pub struct LoopOptions {
    pub bounds: SizeBounds,
    /// First learning-step index; phases of a continual run chain this so one
    /// global counter orders every created skill.
    pub start_step: u64,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions {
            bounds: SizeBounds::default(),
            start_step: 1,
        }
    }
}

/// The task-defined learning loop: execute each task with the current
/// library, judge, induce on success, verify, and grow. Per-task problems are
/// recorded, never aborting the loop.
pub fn run_task_defined(
    tasks: &[Task],
    lib0: SkillLibrary,
    sites: &Arc<SiteIndex>,
    policy: &mut dyn PolicyBackend,
    judge: &dyn JudgeBackend,
    inducer: &mut dyn InducerBackend,
    options: &LoopOptions,
) -> Result<RunOutput, InductionError> {
    let bounds = &options.bounds;
    for task in tasks {
        if sites.get(&task.site).is_none() {
            return Err(InductionError::UnknownSite {
                site: task.site.clone(),
            });
        }
    }
    let mut out = RunOutput {
        library: lib0,
        ..RunOutput::default()
    };
    for (idx, task) in tasks.iter().enumerate() {
        let step = options.start_step + idx as u64;
        let spec = sites.get(&task.site).expect("validated above");
        let mut traj = execute_task(spec, task, &out.library, policy, task.horizon)?;
        traj.id = format!("run-s{step:03}-{}", task.id);

        let judged_success = match judge.verdict(&traj, task) {
            Ok(v) => v.success,
            Err(e) => {
                out.outcomes.push(ProposalOutcome {
                    task: task.id.clone(),
                    proposal: ProposalSummary {
                        interface: None,
                        methods: vec![],
                    },
                    verification: None,
                    accepted: false,
                    rejection: Some(format!("judge error: {e}")),
                    raw: None,
                });
                false
            }
        };

        if judged_success {
            match induce_from_trajectory(&traj, &out.library, inducer, &spec.category, bounds) {
                Ok(Some(mut outcome)) => {
                    let (lib, verification) = verify_and_commit(
                        &mut outcome,
                        &out.library,
                        spec,
                        task,
                        &traj,
                        judge,
                        step,
                    )?;
                    out.library = lib;
                    if let Some(v) = verification {
                        out.trajectories.push(v);
                    }
                    outcome.raw = None;
                    out.outcomes.push(outcome);
                }
                Ok(None) => {}
                Err(InductionError::ValidationFailed(violations)) => {
                    out.outcomes.push(ProposalOutcome {
                        task: task.id.clone(),
                        proposal: ProposalSummary {
                            interface: None,
                            methods: vec![],
                        },
                        verification: None,
                        accepted: false,
                        rejection: Some(format!(
                            "validation failed: {}",
                            violations
                                .iter()
                                .map(|v| v.to_string())
                                .collect::<Vec<_>>()
                                .join("; ")
                        )),
                        raw: None,
                    });
                }
                Err(InductionError::InducerFault { detail }) => {
                    out.outcomes.push(ProposalOutcome {
                        task: task.id.clone(),
                        proposal: ProposalSummary {
                            interface: None,
                            methods: vec![],
                        },
                        verification: None,
                        accepted: false,
                        rejection: Some(format!("inducer fault: {detail}")),
                        raw: None,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        out.trajectories.push(traj);
        out.snapshots.push((step, out.library.clone()));
    }
    Ok(out)
}
