//! Task suites over generated site families.
//!
//! Every task targets one capability (or one compositional default) and comes
//! with a plan: the capability chain, per-step argument values, connectors,
//! and parameterized spans. Plans are what the oracle policy replays and what
//! the scripted inducer extracts skills from; the tasks themselves are plain
//! (instruction, predicate, horizon) records.

use super::gen::{FILTER_KINDS, LABEL_KINDS};
use super::search::{capability_def, derive_plans_for, issue_title};
use super::{check_success, initial_state, step, Predicate, SimError, SiteSpec};
use crate::dsl::ast::{Expr, PrimitiveAction, Statement, Value};
use crate::dsl::expand::expand_sequence;
use crate::skill_model::{Param, SkillLibrary, SkillSignature};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const TASKS_SCHEMA: &str = "tasks/1";

/// One benchmark task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub instruction: String,
    pub site: String,
    pub predicate: Predicate,
    pub horizon: usize,
    /// Capability (or compositional default) this task exercises.
    pub capability: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSuite {
    pub schema: String,
    pub tasks: Vec<Task>,
}

impl TaskSuite {
    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

pub fn suite_from_parts(tasks: Vec<Task>) -> TaskSuite {
    TaskSuite {
        schema: TASKS_SCHEMA.into(),
        tasks,
    }
}

/// One capability leg of a task plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub capability: String,
    pub params: Vec<Param>,
    pub values: BTreeMap<String, Value>,
    /// Navigation statements preceding the span (concrete primitives).
    pub connector: Vec<Statement>,
    /// Concrete primitive statements implementing the capability.
    pub span: Vec<Statement>,
    /// The span with values abstracted into parameters: an induced skill body.
    pub span_template: Vec<Statement>,
}

impl PlanStep {
    /// Positional call arguments for invoking this step as a skill.
    pub fn call_args(&self) -> Vec<Expr> {
        self.params
            .iter()
            .map(|p| Expr::Lit(self.values[&p.name].clone()))
            .collect()
    }

    pub fn signature(&self) -> SkillSignature {
        SkillSignature {
            name: self.capability.clone(),
            params: self.params.clone(),
            doc: String::new(),
        }
    }
}

/// The oracle's recipe for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub task: String,
    pub site: String,
    pub category: String,
    /// Set when the task exercises a compositional default method.
    pub composite: Option<String>,
    pub steps: Vec<PlanStep>,
}

impl TaskPlan {
    /// The full primitive witness: connectors and spans in order.
    pub fn witness(&self) -> Vec<Statement> {
        let mut out = Vec::new();
        for s in &self.steps {
            out.extend(s.connector.iter().cloned());
            out.extend(s.span.iter().cloned());
        }
        out
    }

    pub fn step_for(&self, capability: &str) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.capability == capability)
    }
}

/// Compositional defaults per category: name, leaf chain, goal capability.
pub fn composite_defs(category: &str) -> &'static [(&'static str, &'static [&'static str], &'static str)] {
    match category {
        "shopping" => &[
            ("find_item", &["search", "open_item"], "open_item"),
            (
                "buy_item",
                &["search", "open_item", "add_to_cart", "checkout"],
                "checkout",
            ),
        ],
        "coding" => &[("bootstrap_repo", &["create_repo", "create_issue"], "create_issue")],
        _ => &[],
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    pub include_composites: bool,
    pub id_prefix: String,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            include_composites: false,
            id_prefix: "t".into(),
        }
    }
}

fn instruction(capability: &str, site: &str, item: &str, text: &str, kind_idx: usize) -> String {
    let filter_kind = FILTER_KINDS[kind_idx % FILTER_KINDS.len()].replace('_', " ");
    let label_kind = LABEL_KINDS[kind_idx % LABEL_KINDS.len()];
    let title = issue_title(text);
    match capability {
        "search" => format!("Search {site} for \"{item}\"."),
        "open_item" => format!("Open the product page for \"{item}\" on {site}."),
        "add_to_cart" => format!("Add \"{item}\" to the cart on {site}."),
        "checkout" => format!("Buy \"{item}\" on {site} and place the order."),
        "filter" => format!("Search {site} for \"{item}\" and filter the results to {filter_kind}."),
        "wishlist" => format!("Save \"{item}\" to the wishlist on {site}."),
        "create_repo" => format!("Create a repository named \"{text}\" on {site}."),
        "create_issue" => {
            format!("In a new repository \"{text}\" on {site}, open an issue titled \"{title}\".")
        }
        "add_label" => format!(
            "Open an issue \"{title}\" in a new repository \"{text}\" on {site} and label it {label_kind}."
        ),
        "star_repo" => format!("Create the repository \"{text}\" on {site} and star it."),
        "find_item" => format!("Find \"{item}\" on {site} and open its product page."),
        "buy_item" => format!("Purchase \"{item}\" on {site}."),
        "bootstrap_repo" => format!(
            "Set up a repository \"{text}\" on {site} with a first issue \"{title}\"."
        ),
        other => format!("Exercise {other} on {site}."),
    }
}

fn goal_for(
    spec: &SiteSpec,
    capability: &str,
    item: &str,
    text: &str,
    kind_idx: usize,
) -> Predicate {
    let leaf = composite_defs(&spec.category)
        .iter()
        .find(|(name, _, _)| *name == capability)
        .map(|(_, _, goal)| *goal)
        .unwrap_or(capability);
    super::search::capability_goal(spec, leaf, item, text, kind_idx)
}

fn chain_for(category: &str, capability: &str) -> Vec<&'static str> {
    if let Some((_, chain, _)) = composite_defs(category)
        .iter()
        .find(|(name, _, _)| *name == capability)
    {
        return chain.to_vec();
    }
    let def = capability_def(category, capability).expect("known capability");
    let mut chain: Vec<&'static str> = def.prereqs.to_vec();
    chain.push(def.name);
    chain
}

/// Build one task (plus plan) for a capability on a site.
pub fn build_task(
    spec: &SiteSpec,
    id: String,
    capability: &str,
    item: &str,
    text: &str,
    kind_idx: usize,
) -> Result<(Task, TaskPlan), SimError> {
    let canonical = derive_plans_for(spec, item, text, kind_idx)?;
    let chain = chain_for(&spec.category, capability);
    let mut steps = Vec::new();
    for leg in &chain {
        let plan = canonical
            .get(*leg)
            .ok_or_else(|| SimError::Generation(format!("no plan for `{leg}`")))?;
        steps.push(PlanStep {
            capability: plan.capability.clone(),
            params: plan.params.clone(),
            values: plan.values.clone(),
            connector: plan.connector.iter().map(|a| a.to_statement()).collect(),
            span: plan.span.iter().map(|a| a.to_statement()).collect(),
            span_template: plan.span_template.clone(),
        });
    }
    let is_composite = composite_defs(&spec.category)
        .iter()
        .any(|(name, _, _)| *name == capability);
    let plan = TaskPlan {
        task: id.clone(),
        site: spec.id.clone(),
        category: spec.category.clone(),
        composite: is_composite.then(|| capability.to_string()),
        steps,
    };
    let witness_len: usize = plan.witness().len();
    let task = Task {
        id,
        instruction: instruction(capability, &spec.id, item, text, kind_idx),
        site: spec.id.clone(),
        predicate: goal_for(spec, capability, item, text, kind_idx),
        horizon: witness_len * 2 + 4,
        capability: capability.to_string(),
    };
    verify_witness(spec, &task, &plan)?;
    Ok((task, plan))
}

/// Replay the witness and require the predicate to hold: suite generation
/// never emits an unsolvable task.
fn verify_witness(spec: &SiteSpec, task: &Task, plan: &TaskPlan) -> Result<(), SimError> {
    let mut state = initial_state(spec);
    let lib = SkillLibrary::new();
    let stmts = plan.witness();
    let prims = expand_sequence(&lib, &spec.id, &stmts, &BTreeMap::new())
        .map_err(|e| SimError::Generation(format!("witness expansion failed: {e}")))?;
    for a in &prims {
        step(spec, &mut state, a)?;
    }
    if !check_success(spec, task, &state, &prims) {
        return Err(SimError::Generation(format!(
            "witness for `{}` does not satisfy its predicate",
            task.id
        )));
    }
    Ok(())
}

fn suite_rng(seed: u64, prefix: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"suite");
    hasher.update(seed.to_le_bytes());
    hasher.update(prefix.as_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

/// Generate `count` tasks round-robin over sites, cycling capabilities so
/// every site sees every capability. Deterministic in (specs, count, opts).
pub fn generate_task_suite(
    specs: &[SiteSpec],
    count: usize,
    opts: &SuiteOptions,
) -> Result<(TaskSuite, BTreeMap<String, TaskPlan>), SimError> {
    if specs.is_empty() {
        return Err(SimError::Generation("no sites to generate tasks for".into()));
    }
    let mut rng = suite_rng(opts.seed, &opts.id_prefix);
    let mut tasks = Vec::new();
    let mut plans = BTreeMap::new();
    for k in 0..count {
        let spec = &specs[k % specs.len()];
        let mut caps: Vec<String> = spec.capabilities.clone();
        if opts.include_composites {
            caps.extend(
                composite_defs(&spec.category)
                    .iter()
                    .map(|(name, _, _)| name.to_string()),
            );
        }
        let cap = caps[(k / specs.len()) % caps.len()].clone();
        let item = if spec.catalog.is_empty() {
            String::new()
        } else {
            spec.catalog[rng.random_range(0..spec.catalog.len())].name.clone()
        };
        let text = if spec.text_pool.is_empty() {
            String::new()
        } else {
            spec.text_pool[rng.random_range(0..spec.text_pool.len())].clone()
        };
        let kind_idx = rng.random_range(0..6usize);
        let id = format!("{}{k:03}-{}-{}", opts.id_prefix, spec.id, cap);
        let (task, plan) = build_task(spec, id, &cap, &item, &text, kind_idx)?;
        plans.insert(task.id.clone(), plan);
        tasks.push(task);
    }
    Ok((suite_from_parts(tasks), plans))
}

/// Primitive action sequence of a plan witness (for digests and checks).
pub fn witness_primitives(plan: &TaskPlan) -> Vec<PrimitiveAction> {
    let lib = SkillLibrary::new();
    expand_sequence(&lib, &plan.site, &plan.witness(), &BTreeMap::new())
        .expect("witnesses are primitive-only")
}

