use super::scripted::{plan_store, NullPolicy};
use super::*;
use crate::dsl::parse_statements;
use crate::sim::{build_task, generate_site_family, SiteSpec};
use crate::skill_model::SkillLibrary;
use std::collections::BTreeMap;

fn shopping_site() -> SiteSpec {
    generate_site_family("shopping", 1, 42).unwrap().remove(0)
}

fn cart_task(spec: &SiteSpec) -> (Task, crate::sim::TaskPlan) {
    let item = spec.catalog[0].name.clone();
    build_task(spec, "add-mug".into(), "add_to_cart", &item, "", 0).unwrap()
}

/// Library holding concrete methods for the chain capabilities, built from
/// the site's own derived span templates.
fn library_with(spec: &SiteSpec, caps: &[&str]) -> SkillLibrary {
    let plans = crate::sim::derive_capability_plans(spec).unwrap();
    let schema = crate::induction::interface_schema(&spec.category).unwrap();
    let lib = SkillLibrary::new().register_interface(schema).unwrap();
    let mut methods = Vec::new();
    for cap in caps {
        let plan = &plans[*cap];
        methods.push(crate::skill_model::SkillDef {
            signature: crate::skill_model::SkillSignature {
                name: plan.capability.clone(),
                params: plan.params.clone(),
                doc: String::new(),
            },
            body: plan.span_template.clone(),
            origin: crate::skill_model::SkillOrigin::Induced,
            created_at: 1,
        });
    }
    lib.extend_implementation(&spec.id, &format!("abstract_{}", spec.category), methods)
        .unwrap()
}

#[test]
fn oracle_solves_cart_task_with_primitives_at_witness_length() {
    let spec = shopping_site();
    let (task, plan) = cart_task(&spec);
    let witness_len = plan.witness().len();
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let lib = SkillLibrary::new();
    let traj = execute_task(&spec, &task, &lib, &mut policy, task.horizon).unwrap();
    assert!(traj.success);
    assert_eq!(traj.wall_steps, witness_len);
    assert!(!traj.uses_any_skill());
}

#[test]
fn oracle_uses_skills_when_library_has_them() {
    let spec = shopping_site();
    let (task, plan) = cart_task(&spec);
    let lib = library_with(&spec, &["search", "open_item", "add_to_cart"]);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let traj = execute_task(&spec, &task, &lib, &mut policy, task.horizon).unwrap();
    assert!(traj.success);
    // Three chain steps, each a single skill call.
    assert!(traj.wall_steps <= 3, "wall steps {}", traj.wall_steps);
    assert!(traj.uses_any_skill());
}

#[test]
fn horizon_one_cuts_off_as_failure() {
    let spec = shopping_site();
    let (task, plan) = cart_task(&spec);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let lib = SkillLibrary::new();
    let traj = execute_task(&spec, &task, &lib, &mut policy, 1).unwrap();
    assert!(!traj.success);
    assert_eq!(traj.wall_steps, 1);
}

#[test]
fn empty_script_stops_immediately_and_fails() {
    let spec = shopping_site();
    let (task, _) = cart_task(&spec);
    let mut policy = ScriptedPolicy::single(task.id.clone(), vec![]);
    let lib = SkillLibrary::new();
    let traj = execute_task(&spec, &task, &lib, &mut policy, 10).unwrap();
    assert!(!traj.success);
    assert_eq!(traj.wall_steps, 1);
    assert!(matches!(traj.records[0].statement, crate::dsl::Statement::Stop));
}

#[test]
fn missing_script_is_a_recorded_policy_fault() {
    let spec = shopping_site();
    let (task, _) = cart_task(&spec);
    let mut policy = ScriptedPolicy::new(BTreeMap::new());
    let lib = SkillLibrary::new();
    let traj = execute_task(&spec, &task, &lib, &mut policy, 10).unwrap();
    assert!(!traj.success);
    assert!(traj.fault.unwrap().contains("no script"));
}

#[test]
fn invalid_selectors_waste_steps_then_fail() {
    let spec = shopping_site();
    let (task, _) = cart_task(&spec);
    let script = parse_statements("click(#bogus); click(#bogus); click(#bogus)").unwrap();
    let mut policy = ScriptedPolicy::single(task.id.clone(), script);
    let lib = SkillLibrary::new();
    let traj = execute_task(&spec, &task, &lib, &mut policy, 10).unwrap();
    assert!(!traj.success);
    assert!(traj.fault.is_none());
    assert_eq!(traj.wall_steps, 4); // 3 wasted clicks + stop
}

#[test]
fn null_policy_changes_nothing() {
    let spec = shopping_site();
    let (task, _) = cart_task(&spec);
    let mut policy = NullPolicy;
    let lib = SkillLibrary::new();
    let traj = execute_task(&spec, &task, &lib, &mut policy, 10).unwrap();
    assert!(!traj.success);
    assert_eq!(traj.wall_steps, 1);
}

#[test]
fn skill_calls_count_one_wall_step_with_full_expansion() {
    let spec = shopping_site();
    let (task, plan) = cart_task(&spec);
    let lib = library_with(&spec, &["search", "open_item", "add_to_cart"]);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan.clone())]));
    let mut policy = OraclePolicy::new(store);
    let traj = execute_task(&spec, &task, &lib, &mut policy, task.horizon).unwrap();
    let total_primitives: usize = traj.records.iter().map(|r| r.expansion_len).sum();
    assert_eq!(total_primitives, plan.witness().len());
    assert_eq!(traj.wall_steps, traj.records.len());
}

#[test]
fn statement_and_expanded_execution_reach_the_same_terminal_digest() {
    // Skill/primitive equivalence: calls vs their expansions.
    let spec = shopping_site();
    let (task, plan) = cart_task(&spec);
    let lib = library_with(&spec, &["search", "open_item", "add_to_cart"]);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let with_calls = execute_task(&spec, &task, &lib, &mut policy, task.horizon).unwrap();

    let primitive_stmts: Vec<crate::dsl::Statement> = with_calls
        .primitives()
        .iter()
        .map(|a| a.to_statement())
        .collect();
    let mut replayer = ScriptedPolicy::single(task.id.clone(), primitive_stmts);
    let expanded = execute_task(&spec, &task, &lib, &mut replayer, task.horizon).unwrap();
    assert_eq!(with_calls.terminal, expanded.terminal);
    assert_eq!(with_calls.success, expanded.success);
}

#[test]
fn replay_closure_reproduces_the_terminal_digest() {
    let spec = shopping_site();
    let (task, plan) = cart_task(&spec);
    let lib = library_with(&spec, &["search", "open_item"]);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let traj = execute_task(&spec, &task, &lib, &mut policy, task.horizon).unwrap();
    let report = replay_divergence(&spec, &task, &lib, &traj).unwrap();
    assert!(report.terminal_match, "{report:?}");
    assert_eq!(report.first_divergence, None);
}

#[test]
fn unimplemented_abstract_call_applies_nothing() {
    let spec = shopping_site();
    let (task, _) = cart_task(&spec);
    // Library with an interface but no checkout: buy_item is unbindable.
    let lib = library_with(&spec, &["search", "open_item"]);
    let script = parse_statements(&format!(
        "call buy_item(\"{}\", #missing)",
        spec.catalog[0].name
    ))
    .unwrap();
    let mut policy = ScriptedPolicy::single(task.id.clone(), script);
    let traj = execute_task(&spec, &task, &lib, &mut policy, 10).unwrap();
    assert!(!traj.success);
    assert!(traj.fault.is_some());
    assert_eq!(traj.records.len(), 0);
    // Terminal state is the untouched reset state.
    let fresh = crate::sim::initial_state(&spec);
    assert_eq!(traj.terminal, fresh.digest());
}

#[test]
fn memory_window_is_bounded() {
    let mut mem = WorkingMemory::new("task", 3);
    for i in 0..5 {
        mem.push(format!("obs{i}"), &crate::dsl::Statement::Stop);
    }
    assert_eq!(mem.history.len(), 3);
    assert_eq!(mem.history.front().unwrap().0, "obs2");
}
