//! The task-free loop: the agent proposes its own goals, executes them, and
//! induces skills from judged successes, carrying its last observation
//! forward per site.

use super::{
    induce_from_trajectory, verify_and_commit, InducerBackend, InductionError, JudgeBackend,
    LoopOptions, ProposalOutcome, ProposalSummary, RunOutput, SiteIndex,
};
use crate::runtime::{execute_task, PlanStore, PolicyBackend};
use crate::sim::{self, build_task, Observation, SiteSpec, Task};
use crate::skill_model::SkillLibrary;
use std::collections::BTreeMap;

pub trait ProposerBackend: Send {
    fn id(&self) -> &str;

    /// Propose the next task for `spec`, given what the agent currently sees
    /// there and the library so far.
    fn propose_task(
        &mut self,
        spec: &SiteSpec,
        observation: &Observation,
        lib: &SkillLibrary,
    ) -> Result<Task, InductionError>;
}

/// Structured exploration: unimplemented interface signatures first (the
/// abstract blueprint as an exploration schema), compositional templates once
/// the site is fully implemented, and capability discovery from observable
/// affordances when no interface exists yet.
pub struct GapDrivenProposer {
    store: PlanStore,
    counters: BTreeMap<String, usize>,
}

impl GapDrivenProposer {
    pub fn new(store: PlanStore) -> Self {
        GapDrivenProposer {
            store,
            counters: BTreeMap::new(),
        }
    }

    fn pick_capability(
        spec: &SiteSpec,
        observation: &Observation,
        lib: &SkillLibrary,
        counter: usize,
    ) -> String {
        if let Some(iface) = lib.interface_for_category(&spec.category) {
            let implemented = |name: &str| {
                lib.implementation(&spec.id, &iface.id)
                    .is_some_and(|imp| imp.methods.contains_key(name))
            };
            let gaps: Vec<&str> = spec
                .capabilities
                .iter()
                .map(String::as_str)
                .filter(|c| !implemented(c))
                .collect();
            if let Some(first) = gaps.first() {
                return first.to_string();
            }
            // Fully implemented: rotate through compositional templates.
            let composites = sim::tasks::composite_defs(&spec.category);
            if !composites.is_empty() {
                return composites[counter % composites.len()].0.to_string();
            }
            return spec.capabilities[counter % spec.capabilities.len()].clone();
        }
        // No interface yet: discover a capability from what the home page
        // affords (the first manifest entry whose opening element is visible).
        if let Ok(plans) = sim::derive_capability_plans(spec) {
            let visible: Vec<&str> = observation.nodes.iter().map(|n| n.id.as_str()).collect();
            for cap in &spec.capabilities {
                let plan = &plans[cap];
                let first = plan.connector.first().or_else(|| plan.span.first());
                let opens_here = match first {
                    Some(crate::dsl::PrimitiveAction::Click { selector })
                    | Some(crate::dsl::PrimitiveAction::Hover { selector })
                    | Some(crate::dsl::PrimitiveAction::Type { selector, .. }) => {
                        visible.contains(&selector.as_str())
                    }
                    _ => false,
                };
                if opens_here {
                    return cap.clone();
                }
            }
        }
        spec.capabilities[counter % spec.capabilities.len()].clone()
    }
}

impl ProposerBackend for GapDrivenProposer {
    fn id(&self) -> &str {
        "gap_driven"
    }

    fn propose_task(
        &mut self,
        spec: &SiteSpec,
        observation: &Observation,
        lib: &SkillLibrary,
    ) -> Result<Task, InductionError> {
        let counter = self.counters.entry(spec.id.clone()).or_insert(0);
        let seq = *counter;
        *counter += 1;
        let capability = Self::pick_capability(spec, observation, lib, seq);
        let item = if spec.catalog.is_empty() {
            String::new()
        } else {
            spec.catalog[seq % spec.catalog.len()].name.clone()
        };
        let text = if spec.text_pool.is_empty() {
            String::new()
        } else {
            spec.text_pool[seq % spec.text_pool.len()].clone()
        };
        let id = format!("x{seq:03}-{}-{capability}", spec.id);
        let (task, plan) = build_task(spec, id, &capability, &item, &text, seq)
            .map_err(|e| InductionError::ProposerFault {
                detail: e.to_string(),
            })?;
        self.store
            .lock()
            .expect("plan store lock")
            .insert(task.id.clone(), plan);
        Ok(task)
    }
}

/// Propose one task from the current observation, outside any loop.
pub fn propose_task(
    proposer: &mut dyn ProposerBackend,
    spec: &SiteSpec,
    observation: &Observation,
    lib: &SkillLibrary,
) -> Result<Task, InductionError> {
    proposer.propose_task(spec, observation, lib)
}

#[derive(Debug, Default)]
pub struct TaskFreeOutput {
    pub run: RunOutput,
    /// Every task the proposer emitted, in order.
    pub tasks: Vec<Task>,
    /// Iterations spent per site.
    pub site_iterations: BTreeMap<String, usize>,
}

/// Self-guided site choice: most unimplemented interface signatures wins;
/// ties rotate round-robin from the site after the previous pick.
fn select_site<'a>(
    pool: &'a [SiteSpec],
    lib: &SkillLibrary,
    last: Option<usize>,
) -> (usize, &'a SiteSpec) {
    let gap_count = |spec: &SiteSpec| -> usize {
        match lib.interface_for_category(&spec.category) {
            None => spec.capabilities.len(),
            Some(iface) => {
                let implemented = lib
                    .implementation(&spec.id, &iface.id)
                    .map(|imp| imp.methods.len())
                    .unwrap_or(0);
                iface.abstract_signatures.len().saturating_sub(implemented)
            }
        }
    };
    let best = pool.iter().map(gap_count).max().unwrap_or(0);
    let start = last.map(|i| (i + 1) % pool.len()).unwrap_or(0);
    for offset in 0..pool.len() {
        let idx = (start + offset) % pool.len();
        if gap_count(&pool[idx]) == best {
            return (idx, &pool[idx]);
        }
    }
    (0, &pool[0])
}

/// The task-free continual-learning loop.
#[allow(clippy::too_many_arguments)]
pub fn run_task_free(
    n_steps: usize,
    lib0: SkillLibrary,
    pool: &[SiteSpec],
    policy: &mut dyn PolicyBackend,
    judge: &dyn JudgeBackend,
    inducer: &mut dyn InducerBackend,
    proposer: &mut dyn ProposerBackend,
    options: &LoopOptions,
) -> Result<TaskFreeOutput, InductionError> {
    let bounds = &options.bounds;
    if n_steps == 0 || pool.is_empty() {
        return Ok(TaskFreeOutput {
            run: RunOutput {
                library: lib0,
                ..RunOutput::default()
            },
            tasks: Vec::new(),
            site_iterations: BTreeMap::new(),
        });
    }
    let sites = SiteIndex::new(pool.iter().cloned());
    let mut out = TaskFreeOutput {
        run: RunOutput {
            library: lib0,
            ..RunOutput::default()
        },
        tasks: Vec::new(),
        site_iterations: BTreeMap::new(),
    };
    // Last observation per site, carried across iterations.
    let mut last_obs: BTreeMap<String, Observation> = BTreeMap::new();
    let mut last_site: Option<usize> = None;

    for iteration in 0..n_steps as u64 {
        let t = options.start_step + iteration;
        let (idx, spec) = select_site(pool, &out.run.library, last_site);
        last_site = Some(idx);
        *out.site_iterations.entry(spec.id.clone()).or_insert(0) += 1;

        let obs = last_obs
            .get(&spec.id)
            .cloned()
            .unwrap_or_else(|| sim::observe(spec, &sim::initial_state(spec)));

        let task = match proposer.propose_task(spec, &obs, &out.run.library) {
            Ok(t) => t,
            Err(e) => {
                out.run.outcomes.push(ProposalOutcome {
                    task: format!("iteration-{t}"),
                    proposal: ProposalSummary {
                        interface: None,
                        methods: vec![],
                    },
                    verification: None,
                    accepted: false,
                    rejection: Some(format!("proposer fault: {e}")),
                    raw: None,
                });
                out.run.snapshots.push((t, out.run.library.clone()));
                continue;
            }
        };

        let mut traj = execute_task(spec, &task, &out.run.library, policy, task.horizon)?;
        traj.id = format!("explore-s{t:03}-{}", task.id);
        out.tasks.push(task.clone());

        let judged = judge.verdict(&traj, &task).map(|v| v.success).unwrap_or(false);
        if judged {
            match induce_from_trajectory(&traj, &out.run.library, inducer, &spec.category, bounds)
            {
                Ok(Some(mut outcome)) => {
                    let (lib, verification) = verify_and_commit(
                        &mut outcome,
                        &out.run.library,
                        spec,
                        &task,
                        &traj,
                        judge,
                        t,
                    )?;
                    out.run.library = lib;
                    if let Some(v) = verification {
                        out.run.trajectories.push(v);
                    }
                    outcome.raw = None;
                    out.run.outcomes.push(outcome);
                }
                Ok(None) => {}
                Err(InductionError::ValidationFailed(v)) => {
                    out.run.outcomes.push(ProposalOutcome {
                        task: task.id.clone(),
                        proposal: ProposalSummary {
                            interface: None,
                            methods: vec![],
                        },
                        verification: None,
                        accepted: false,
                        rejection: Some(format!("validation failed: {} violation(s)", v.len())),
                        raw: None,
                    });
                }
                Err(InductionError::InducerFault { detail }) => {
                    out.run.outcomes.push(ProposalOutcome {
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

        // Carry the final observation forward for this site.
        if let Some(spec2) = sites.get(&spec.id) {
            let mut state = sim::initial_state(spec2);
            for a in traj.primitives() {
                let _ = sim::step(spec2, &mut state, &a);
            }
            last_obs.insert(spec.id.clone(), sim::observe(spec2, &state));
        }
        out.run.trajectories.push(traj);
        out.run.snapshots.push((t, out.run.library.clone()));
    }
    Ok(out)
}

