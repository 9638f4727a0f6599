use super::scripted::ScriptedInducer;
use super::taskfree::{propose_task, GapDrivenProposer};
use super::*;

use crate::runtime::scripted::plan_store;
use crate::runtime::{OraclePolicy, PlanStore};
use crate::sim::{build_task, generate_site_family};

struct Fixture {
    sites: Arc<SiteIndex>,
    specs: Vec<SiteSpec>,
    store: PlanStore,
}

fn fixture(category: &str, n_sites: usize, seed: u64) -> Fixture {
    let specs = generate_site_family(category, n_sites, seed).unwrap();
    Fixture {
        sites: SiteIndex::new(specs.clone()),
        specs,
        store: plan_store(Default::default()),
    }
}

fn oracle_run(
    fx: &Fixture,
    tasks: &[Task],
    plans: BTreeMap<String, crate::sim::TaskPlan>,
    lib0: SkillLibrary,
) -> RunOutput {
    {
        let mut store = fx.store.lock().unwrap();
        store.extend(plans);
    }
    let mut policy = OraclePolicy::new(fx.store.clone());
    let judge = ProgrammaticJudge::new(fx.sites.clone());
    let mut inducer = ScriptedInducer::new(fx.store.clone());
    run_task_defined(
        tasks,
        lib0,
        &fx.sites,
        &mut policy,
        &judge,
        &mut inducer,
        &LoopOptions::default(),
    )
    .unwrap()
}

fn cart_fixture_task(fx: &Fixture) -> (Task, crate::sim::TaskPlan) {
    let spec = &fx.specs[0];
    let item = spec.catalog[0].name.clone();
    build_task(spec, "cart-task".into(), "add_to_cart", &item, "", 0).unwrap()
}

#[test]
fn programmatic_judge_agrees_with_predicate() {
    let fx = fixture("shopping", 1, 11);
    let (task, plan) = cart_fixture_task(&fx);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let traj =
        crate::runtime::execute_task(&fx.specs[0], &task, &SkillLibrary::new(), &mut policy, task.horizon)
            .unwrap();
    let verdict = judge_programmatic(&fx.sites, &traj, &task).unwrap();
    assert!(verdict.success);
    assert!(verdict.rationale.contains("predicate=true"));

    // A failing episode judges false.
    let mut null = crate::runtime::scripted::NullPolicy;
    let failed =
        crate::runtime::execute_task(&fx.specs[0], &task, &SkillLibrary::new(), &mut null, 3)
            .unwrap();
    let verdict = judge_programmatic(&fx.sites, &failed, &task).unwrap();
    assert!(!verdict.success);
}

#[test]
fn judge_flags_task_mismatch() {
    let fx = fixture("shopping", 1, 11);
    let (task, plan) = cart_fixture_task(&fx);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let traj =
        crate::runtime::execute_task(&fx.specs[0], &task, &SkillLibrary::new(), &mut policy, task.horizon)
            .unwrap();
    let mut other = task.clone();
    other.id = "different".into();
    assert!(matches!(
        judge_programmatic(&fx.sites, &traj, &other),
        Err(InductionError::TaskMismatch { .. })
    ));
}

#[test]
fn first_induction_proposes_interface_then_method() {
    let fx = fixture("shopping", 1, 11);
    let (task, plan) = cart_fixture_task(&fx);
    let run = oracle_run(
        &fx,
        &[task],
        BTreeMap::from([("cart-task".to_string(), plan)]),
        SkillLibrary::new(),
    );
    assert_eq!(run.outcomes.len(), 1);
    let outcome = &run.outcomes[0];
    assert!(outcome.accepted);
    assert!(outcome.proposal.interface.is_some(), "abstract-first");
    assert_eq!(outcome.proposal.methods.len(), 1);
    assert_eq!(outcome.proposal.methods[0].name, "add_to_cart");
    assert_eq!(run.library.interfaces().count(), 1);
}

#[test]
fn induction_with_existing_interface_adds_methods_only() {
    let fx = fixture("shopping", 1, 11);
    let lib0 = SkillLibrary::new()
        .register_interface(interface_schema("shopping").unwrap())
        .unwrap();
    let (task, plan) = cart_fixture_task(&fx);
    let run = oracle_run(
        &fx,
        &[task],
        BTreeMap::from([("cart-task".to_string(), plan)]),
        lib0,
    );
    let outcome = &run.outcomes[0];
    assert!(outcome.accepted);
    assert!(outcome.proposal.interface.is_none());
    assert_eq!(outcome.proposal.methods.len(), 1);
}

#[test]
fn undersized_method_fails_validation_with_size_violation() {
    struct TinyInducer;
    impl InducerBackend for TinyInducer {
        fn id(&self) -> &str {
            "tiny"
        }
        fn propose(
            &mut self,
            traj: &Trajectory,
            _lib: &SkillLibrary,
            category: &str,
        ) -> Result<Option<Proposal>, InductionError> {
            let mut def = crate::dsl::parse_skill_def(
                "induced skill add_to_cart() { noop }",
            )
            .unwrap();
            def.origin = SkillOrigin::Induced;
            Ok(Some(Proposal {
                interface: Some(interface_schema(category).unwrap()),
                methods: vec![ProposedMethod {
                    site: traj.site.clone(),
                    def,
                    instance_args: vec![],
                }],
            }))
        }
    }
    let fx = fixture("shopping", 1, 11);
    let (task, plan) = cart_fixture_task(&fx);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let traj =
        crate::runtime::execute_task(&fx.specs[0], &task, &SkillLibrary::new(), &mut policy, task.horizon)
            .unwrap();
    let err = induce_from_trajectory(
        &traj,
        &SkillLibrary::new(),
        &mut TinyInducer,
        "shopping",
        &SizeBounds::default(),
    )
    .unwrap_err();
    match err {
        InductionError::ValidationFailed(violations) => {
            assert!(violations
                .iter()
                .any(|v| v.rule == crate::skill_model::RuleId::Size));
        }
        other => panic!("expected ValidationFailed, got {other:?}"),
    }
}

#[test]
fn broken_skill_fails_verification_and_leaves_library_unchanged() {
    // A search skill whose expansion misses the final press("Enter") cannot
    // replay to success.
    struct BrokenInducer;
    impl InducerBackend for BrokenInducer {
        fn id(&self) -> &str {
            "broken"
        }
        fn propose(
            &mut self,
            traj: &Trajectory,
            _lib: &SkillLibrary,
            category: &str,
        ) -> Result<Option<Proposal>, InductionError> {
            let def = crate::dsl::parse_skill_def(
                "induced skill add_to_cart() { noop; noop }",
            )
            .unwrap();
            Ok(Some(Proposal {
                interface: Some(interface_schema(category).unwrap()),
                methods: vec![ProposedMethod {
                    site: traj.site.clone(),
                    def,
                    instance_args: vec![],
                }],
            }))
        }
    }
    let fx = fixture("shopping", 1, 11);
    let (task, plan) = cart_fixture_task(&fx);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let lib0 = SkillLibrary::new();
    let traj = crate::runtime::execute_task(&fx.specs[0], &task, &lib0, &mut policy, task.horizon)
        .unwrap();
    let mut outcome = induce_from_trajectory(
        &traj,
        &lib0,
        &mut BrokenInducer,
        "shopping",
        &SizeBounds::default(),
    )
    .unwrap()
    .unwrap();
    let judge = ProgrammaticJudge::new(fx.sites.clone());
    let (lib, _verification) = verify_and_commit(
        &mut outcome,
        &lib0,
        &fx.specs[0],
        &task,
        &traj,
        &judge,
        1,
    )
    .unwrap();
    assert!(!outcome.accepted);
    assert!(outcome.rejection.is_some());
    assert_eq!(lib, lib0);
}

#[test]
fn proposal_calling_unknown_skill_is_rejected_before_replay() {
    struct ForwardInducer;
    impl InducerBackend for ForwardInducer {
        fn id(&self) -> &str {
            "forward"
        }
        fn propose(
            &mut self,
            traj: &Trajectory,
            _lib: &SkillLibrary,
            category: &str,
        ) -> Result<Option<Proposal>, InductionError> {
            // Calls a signature the site has not implemented: the reference
            // cannot point to an earlier-created skill.
            let def = crate::dsl::parse_skill_def(
                "induced skill add_to_cart() { call checkout(); noop }",
            )
            .unwrap();
            Ok(Some(Proposal {
                interface: Some(interface_schema(category).unwrap()),
                methods: vec![ProposedMethod {
                    site: traj.site.clone(),
                    def,
                    instance_args: vec![],
                }],
            }))
        }
    }
    let fx = fixture("shopping", 1, 11);
    let (task, plan) = cart_fixture_task(&fx);
    let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
    let mut policy = OraclePolicy::new(store);
    let traj = crate::runtime::execute_task(
        &fx.specs[0],
        &task,
        &SkillLibrary::new(),
        &mut policy,
        task.horizon,
    )
    .unwrap();
    let err = induce_from_trajectory(
        &traj,
        &SkillLibrary::new(),
        &mut ForwardInducer,
        "shopping",
        &SizeBounds::default(),
    )
    .unwrap_err();
    assert!(matches!(err, InductionError::ValidationFailed(_)));
}

#[test]
fn three_tasks_grow_one_interface_and_three_methods() {
    let fx = fixture("shopping", 1, 42);
    let spec = &fx.specs[0];
    let item = spec.catalog[1].name.clone();
    let mut tasks = Vec::new();
    let mut plans = BTreeMap::new();
    for (i, cap) in ["search", "open_item", "add_to_cart"].iter().enumerate() {
        let (task, plan) =
            build_task(spec, format!("t{i}-{cap}"), cap, &item, "", 0).unwrap();
        plans.insert(task.id.clone(), plan);
        tasks.push(task);
    }
    let run = oracle_run(&fx, &tasks, plans, SkillLibrary::new());
    assert_eq!(run.library.interfaces().count(), 1);
    let imp = run
        .library
        .implementation(&spec.id, "abstract_shopping")
        .unwrap();
    assert_eq!(imp.methods.len(), 3);
    // Later tasks execute through previously induced skills.
    let learning: Vec<&Trajectory> = run
        .trajectories
        .iter()
        .filter(|t| t.id.starts_with("run-"))
        .collect();
    assert!(!learning[0].uses_any_skill());
    assert!(learning[1].uses_any_skill());
    assert!(learning[2].uses_any_skill());
    // Verification soundness: every accepted outcome has a verification
    // trajectory that exists and succeeded.
    for outcome in run.outcomes.iter().filter(|o| o.accepted) {
        let vid = outcome.verification.as_ref().unwrap();
        let vt = run.trajectories.iter().find(|t| &t.id == vid).unwrap();
        assert!(vt.success);
    }
}

#[test]
fn failing_policy_leaves_library_untouched() {
    let fx = fixture("shopping", 1, 42);
    let spec = &fx.specs[0];
    let item = spec.catalog[0].name.clone();
    let (task, plan) = build_task(spec, "t0-search".into(), "search", &item, "", 0).unwrap();
    {
        fx.store.lock().unwrap().insert(task.id.clone(), plan);
    }
    let mut policy = crate::runtime::scripted::NullPolicy;
    let judge = ProgrammaticJudge::new(fx.sites.clone());
    let mut inducer = ScriptedInducer::new(fx.store.clone());
    let run = run_task_defined(
        &[task],
        SkillLibrary::new(),
        &fx.sites,
        &mut policy,
        &judge,
        &mut inducer,
        &LoopOptions::default(),
    )
    .unwrap();
    assert!(run.library.is_empty());
    assert!(run.outcomes.is_empty());
}

#[test]
fn duplicate_tasks_induce_nothing_new() {
    let fx = fixture("shopping", 1, 42);
    let spec = &fx.specs[0];
    let item = spec.catalog[0].name.clone();
    let (task, plan) = build_task(spec, "t0-search".into(), "search", &item, "", 0).unwrap();
    let mut plans = BTreeMap::new();
    plans.insert(task.id.clone(), plan);
    let tasks = vec![task.clone(), task];
    let run = oracle_run(&fx, &tasks, plans, SkillLibrary::new());
    let accepted: Vec<_> = run.outcomes.iter().filter(|o| o.accepted).collect();
    assert_eq!(accepted.len(), 1);
    assert_eq!(run.library.skill_count(), {
        // interface defaults + one induced method
        let defaults = interface_schema("shopping").unwrap().default_methods.len();
        defaults + 1
    });
}

#[test]
fn gap_proposer_targets_unimplemented_signatures_first() {
    let fx = fixture("shopping", 1, 42);
    let spec = &fx.specs[0];
    // Library with interface and a search method only.
    let lib = {
        let plans = crate::sim::derive_capability_plans(spec).unwrap();
        let lib = SkillLibrary::new()
            .register_interface(interface_schema("shopping").unwrap())
            .unwrap();
        let plan = &plans["search"];
        lib.extend_implementation(
            &spec.id,
            "abstract_shopping",
            vec![crate::skill_model::SkillDef {
                signature: SkillSignature {
                    name: "search".into(),
                    params: plan.params.clone(),
                    doc: String::new(),
                },
                body: plan.span_template.clone(),
                origin: SkillOrigin::Induced,
                created_at: 1,
            }],
        )
        .unwrap()
    };
    let obs = sim::observe(spec, &sim::initial_state(spec));
    let mut proposer = GapDrivenProposer::new(fx.store.clone());
    let task = propose_task(&mut proposer, spec, &obs, &lib).unwrap();
    // First unimplemented signature in manifest order is open_item.
    assert_eq!(task.capability, "open_item");
}

#[test]
fn gap_proposer_falls_back_to_compositional_templates() {
    let fx = fixture("shopping", 1, 42);
    let spec = &fx.specs[0];
    let plans = crate::sim::derive_capability_plans(spec).unwrap();
    let mut lib = SkillLibrary::new()
        .register_interface(interface_schema("shopping").unwrap())
        .unwrap();
    let mut methods = Vec::new();
    for cap in &spec.capabilities {
        let plan = &plans[cap];
        methods.push(crate::skill_model::SkillDef {
            signature: SkillSignature {
                name: cap.clone(),
                params: plan.params.clone(),
                doc: String::new(),
            },
            body: plan.span_template.clone(),
            origin: SkillOrigin::Induced,
            created_at: 1,
        });
    }
    lib = lib
        .extend_implementation(&spec.id, "abstract_shopping", methods)
        .unwrap();
    let obs = sim::observe(spec, &sim::initial_state(spec));
    let mut proposer = GapDrivenProposer::new(fx.store.clone());
    let task = propose_task(&mut proposer, spec, &obs, &lib).unwrap();
    assert!(
        ["find_item", "buy_item"].contains(&task.capability.as_str()),
        "got {}",
        task.capability
    );
}

#[test]
fn empty_library_discovers_capabilities_from_affordances() {
    let fx = fixture("shopping", 1, 42);
    let spec = &fx.specs[0];
    let obs = sim::observe(spec, &sim::initial_state(spec));
    // Oracle: the home page affords typing into the search box, so the scan
    // should land on the site's search capability.
    assert!(obs.nodes.iter().any(|n| n.role == "textbox"));
    let mut proposer = GapDrivenProposer::new(fx.store.clone());
    let task = propose_task(&mut proposer, spec, &obs, &SkillLibrary::new()).unwrap();
    assert_eq!(task.capability, "search");
}

#[test]
fn task_free_coverage_is_monotone() {
    let fx = fixture("shopping", 1, 42);
    let mut policy = OraclePolicy::new(fx.store.clone());
    let judge = ProgrammaticJudge::new(fx.sites.clone());
    let mut inducer = ScriptedInducer::new(fx.store.clone());
    let mut proposer = GapDrivenProposer::new(fx.store.clone());
    let out = run_task_free(
        10,
        SkillLibrary::new(),
        &fx.specs,
        &mut policy,
        &judge,
        &mut inducer,
        &mut proposer,
        &LoopOptions::default(),
    )
    .unwrap();
    let mut last = 0;
    for (_, snapshot) in &out.run.snapshots {
        let count = snapshot.skill_count();
        assert!(count >= last, "library shrank");
        last = count;
    }
    // All six signatures were eventually covered.
    let imp = out
        .run
        .library
        .implementation(&fx.specs[0].id, "abstract_shopping")
        .unwrap();
    assert_eq!(imp.methods.len(), 6);
}

#[test]
fn task_free_visits_both_sites_under_round_robin_ties() {
    let fx = fixture("shopping", 2, 42);
    let mut policy = OraclePolicy::new(fx.store.clone());
    let judge = ProgrammaticJudge::new(fx.sites.clone());
    let mut inducer = ScriptedInducer::new(fx.store.clone());
    let mut proposer = GapDrivenProposer::new(fx.store.clone());
    let out = run_task_free(
        4,
        SkillLibrary::new(),
        &fx.specs,
        &mut policy,
        &judge,
        &mut inducer,
        &mut proposer,
        &LoopOptions::default(),
    )
    .unwrap();
    assert!(out.site_iterations.len() == 2);
    assert!(out.site_iterations.values().all(|&n| n >= 1));
}

#[test]
fn adversarial_judge_freezes_the_library() {
    struct NoJudge;
    impl JudgeBackend for NoJudge {
        fn id(&self) -> &str {
            "no"
        }
        fn verdict(&self, _t: &Trajectory, _task: &Task) -> Result<JudgeVerdict, InductionError> {
            Ok(JudgeVerdict {
                success: false,
                rationale: "never".into(),
            })
        }
    }
    let fx = fixture("shopping", 1, 42);
    let mut policy = OraclePolicy::new(fx.store.clone());
    let mut inducer = ScriptedInducer::new(fx.store.clone());
    let mut proposer = GapDrivenProposer::new(fx.store.clone());
    let out = run_task_free(
        5,
        SkillLibrary::new(),
        &fx.specs,
        &mut policy,
        &NoJudge,
        &mut inducer,
        &mut proposer,
        &LoopOptions::default(),
    )
    .unwrap();
    assert!(out.run.library.is_empty());
}

mod remote_backends {
    use super::super::remote::{RemoteInducer, RemoteJudge, RemoteProposer};
    use super::*;
    use crate::runtime::chat::testing::StubTransport;
    use crate::runtime::chat::{ChatClient, ChatConfig};

    fn client(replies: Vec<&str>) -> ChatClient {
        ChatClient::with_transport(ChatConfig::default(), StubTransport::new(replies))
    }

    #[test]
    fn remote_judge_parses_status_line() {
        let fx = fixture("shopping", 1, 11);
        let (task, plan) = cart_fixture_task(&fx);
        let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
        let mut policy = OraclePolicy::new(store);
        let traj = crate::runtime::execute_task(
            &fx.specs[0],
            &task,
            &SkillLibrary::new(),
            &mut policy,
            task.horizon,
        )
        .unwrap();
        let judge = RemoteJudge::new(
            client(vec!["Thoughts: looks done\nStatus: success"]),
            fx.sites.clone(),
        );
        assert!(judge.verdict(&traj, &task).unwrap().success);
        let judge = RemoteJudge::new(
            client(vec!["Thoughts: nope\nStatus: failure"]),
            fx.sites.clone(),
        );
        assert!(!judge.verdict(&traj, &task).unwrap().success);
    }

    #[test]
    fn remote_inducer_parses_fenced_blocks_and_grounds_args() {
        let fx = fixture("shopping", 1, 11);
        let spec = &fx.specs[0];
        let (task, plan) = cart_fixture_task(&fx);
        let search_step = plan.step_for("search").unwrap();
        // Craft a reply implementing search from the site's own span.
        let body: Vec<String> = search_step
            .span_template
            .iter()
            .map(crate::dsl::print_statement)
            .collect();
        let reply = format!(
            "```\nimpl abstract_shopping for {} {{\n  induced skill search(query: text) {{\n    {};\n  }}\n}}\n```",
            spec.id,
            body.join(";\n    ")
        );
        let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
        let mut policy = OraclePolicy::new(store);
        let traj = crate::runtime::execute_task(
            &fx.specs[0],
            &task,
            &SkillLibrary::new(),
            &mut policy,
            task.horizon,
        )
        .unwrap();
        let mut inducer = RemoteInducer::new(client(vec![&reply]));
        let proposal = inducer
            .propose(&traj, &SkillLibrary::new(), "shopping")
            .unwrap()
            .unwrap();
        assert_eq!(proposal.methods.len(), 1);
        let m = &proposal.methods[0];
        assert_eq!(m.def.signature.name, "search");
        assert_eq!(
            m.instance_args,
            vec![crate::dsl::Value::Text(spec.catalog[0].name.clone())]
        );
    }

    #[test]
    fn remote_inducer_rejects_ungroundable_proposals() {
        let fx = fixture("shopping", 1, 11);
        let (task, plan) = cart_fixture_task(&fx);
        let store = plan_store(BTreeMap::from([(task.id.clone(), plan)]));
        let mut policy = OraclePolicy::new(store);
        let traj = crate::runtime::execute_task(
            &fx.specs[0],
            &task,
            &SkillLibrary::new(),
            &mut policy,
            task.horizon,
        )
        .unwrap();
        let reply = format!(
            "```\nimpl abstract_shopping for {} {{\n  induced skill search(query: text) {{\n    click(#nowhere);\n    press(\"Enter\");\n  }}\n}}\n```",
            fx.specs[0].id
        );
        let mut inducer = RemoteInducer::new(client(vec![&reply]));
        assert!(matches!(
            inducer.propose(&traj, &SkillLibrary::new(), "shopping"),
            Err(InductionError::InducerFault { .. })
        ));
    }

    #[test]
    fn remote_proposer_builds_a_realizable_task() {
        let fx = fixture("shopping", 1, 11);
        let spec = &fx.specs[0];
        let obs = sim::observe(spec, &sim::initial_state(spec));
        let reply = format!(
            "{{\"capability\": \"search\", \"item\": \"{}\", \"text\": \"\"}}",
            spec.catalog[0].name
        );
        let mut proposer = RemoteProposer::new(client(vec![&reply]));
        let task = proposer
            .propose_task(spec, &obs, &SkillLibrary::new())
            .unwrap();
        assert_eq!(task.capability, "search");
        assert_eq!(task.site, spec.id);
    }
}
