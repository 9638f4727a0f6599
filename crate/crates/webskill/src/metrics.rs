//! Trajectory and library metrics: success rate, mean steps, skill
//! reusability, adoption rate, compositionality, and the efficiency-aware
//! objective, plus snapshot time-series over a learning run.
//!
//! Skill identity is the fully qualified id (`interface.name@site`, or
//! `interface.name` for default methods). A skill counts as "used" when a
//! call to it appears among a trajectory's recorded statements; calls hidden
//! inside another skill's expansion are not recorded statements and do not
//! count.

use crate::dsl::expand::count_steps;
use crate::runtime::Trajectory;
use crate::skill_model::{SkillId, SkillLibrary};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("the evaluation task set is empty")]
    EmptyTaskSet,
    #[error("the skill library is empty")]
    EmptyLibrary,
    #[error("the trajectory set is empty")]
    EmptySet,
    #[error("gamma must be non-negative, got {gamma}")]
    NegativeGamma { gamma: String },
}

/// One evaluation batch: trajectories over a task set, judged against a
/// library snapshot, with the objective penalty.
#[derive(Debug, Clone)]
pub struct EvaluationBatch<'a> {
    pub trajectories: &'a [Trajectory],
    pub library: &'a SkillLibrary,
    /// Distinct task ids the batch evaluates (T_test).
    pub task_ids: Vec<String>,
    pub gamma: f64,
}

impl<'a> EvaluationBatch<'a> {
    /// Batch over the tasks appearing in the trajectories.
    pub fn over_trajectories(
        trajectories: &'a [Trajectory],
        library: &'a SkillLibrary,
        gamma: f64,
    ) -> Self {
        let task_ids: Vec<String> = trajectories
            .iter()
            .map(|t| t.task.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        EvaluationBatch {
            trajectories,
            library,
            task_ids,
            gamma,
        }
    }
}

/// Fraction of tasks with at least one successful trajectory.
pub fn success_rate(batch: &EvaluationBatch) -> Result<f64, MetricsError> {
    if batch.task_ids.is_empty() {
        return Err(MetricsError::EmptyTaskSet);
    }
    let succeeded = batch
        .task_ids
        .iter()
        .filter(|id| {
            batch
                .trajectories
                .iter()
                .any(|t| &t.task == *id && t.success)
        })
        .count();
    Ok(succeeded as f64 / batch.task_ids.len() as f64)
}

/// Mean wall steps over successful trajectories; None when none succeeded.
/// Skill calls count as single steps by construction of wall steps.
pub fn mean_steps(batch: &EvaluationBatch) -> Option<f64> {
    let successes: Vec<usize> = batch
        .trajectories
        .iter()
        .filter(|t| t.success)
        .map(|t| count_steps(&t.statements()))
        .collect();
    if successes.is_empty() {
        return None;
    }
    Some(successes.iter().sum::<usize>() as f64 / successes.len() as f64)
}

/// Qualified ids of the skills invoked by a trajectory's recorded statements.
fn skills_used(traj: &Trajectory, lib: &SkillLibrary) -> BTreeSet<SkillId> {
    traj.calls()
        .filter_map(|stmt| {
            let name = stmt.call_target()?;
            lib.resolve(&traj.site, name).ok().map(|r| r.id.to_owned())
        })
        .collect()
}

/// Fraction of library skills invoked at least once across the batch.
pub fn skill_reusability(batch: &EvaluationBatch) -> Result<f64, MetricsError> {
    let total = batch.library.skill_count();
    if total == 0 {
        return Err(MetricsError::EmptyLibrary);
    }
    let mut used: BTreeSet<SkillId> = BTreeSet::new();
    for traj in batch.trajectories {
        used.extend(skills_used(traj, batch.library));
    }
    let known: BTreeSet<_> = batch.library.creation_log().iter().cloned().collect();
    let used_known = used.intersection(&known).count();
    Ok(used_known as f64 / total as f64)
}

/// Fraction of trajectories invoking at least one skill.
pub fn adoption_rate(batch: &EvaluationBatch) -> Result<f64, MetricsError> {
    if batch.trajectories.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let with_skill = batch
        .trajectories
        .iter()
        .filter(|t| t.uses_any_skill())
        .count();
    Ok(with_skill as f64 / batch.trajectories.len() as f64)
}

/// Statically resolvable skill targets of a skill body (distinct, set
/// semantics): sibling methods, then interface defaults. Abstract signature
/// targets inside default methods are dispatch slots, not skills.
fn static_targets(lib: &SkillLibrary, id: &SkillId) -> BTreeSet<SkillId> {
    let Some(def) = lib.lookup(id) else {
        return BTreeSet::new();
    };
    let mut out = BTreeSet::new();
    for target in def.call_targets() {
        match &id.site {
            Some(site) => {
                let sibling = lib
                    .implementation(site, &id.interface)
                    .is_some_and(|imp| imp.methods.contains_key(target));
                if sibling {
                    out.insert(SkillId::concrete(&id.interface, target, site));
                } else if lib
                    .interface_by_id(&id.interface)
                    .is_some_and(|i| i.default_method(target).is_some())
                {
                    out.insert(SkillId::default_method(&id.interface, target));
                }
            }
            None => {
                if lib
                    .interface_by_id(&id.interface)
                    .is_some_and(|i| i.default_method(target).is_some())
                {
                    out.insert(SkillId::default_method(&id.interface, target));
                }
            }
        }
    }
    out
}

/// Average number of previously created skills referenced per skill body.
pub fn compositionality(lib: &SkillLibrary) -> Result<f64, MetricsError> {
    let log = lib.creation_log();
    if log.is_empty() {
        return Err(MetricsError::EmptyLibrary);
    }
    let position = |id: &SkillId| log.iter().position(|x| x == id);
    let mut links = 0usize;
    for (i, id) in log.iter().enumerate() {
        for target in static_targets(lib, id) {
            if let Some(j) = position(&target) {
                if j < i {
                    links += 1;
                }
            }
        }
    }
    Ok(links as f64 / log.len() as f64)
}

/// Mean of `success − gamma · wall_steps` over all trajectories.
pub fn mean_objective(batch: &EvaluationBatch) -> Result<f64, MetricsError> {
    if batch.gamma < 0.0 {
        return Err(MetricsError::NegativeGamma {
            gamma: batch.gamma.to_string(),
        });
    }
    if batch.trajectories.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let sum: f64 = batch
        .trajectories
        .iter()
        .map(|t| {
            let g = if t.success { 1.0 } else { 0.0 };
            g - batch.gamma * count_steps(&t.statements()) as f64
        })
        .sum();
    Ok(sum / batch.trajectories.len() as f64)
}

/// Counts behind each ratio, for audits and oracles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub tasks: usize,
    pub tasks_succeeded: usize,
    pub trajectories: usize,
    pub successes: usize,
    pub skills: usize,
    pub skills_used: usize,
    pub trajectories_with_skill: usize,
    pub compositional_links: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub success_rate: f64,
    pub mean_steps: Option<f64>,
    pub skill_reusability: f64,
    pub adoption_rate: f64,
    pub compositionality: f64,
    pub mean_objective: f64,
    pub counts: MetricCounts,
}

/// Full report over one batch. An empty library yields zero reusability and
/// compositionality rather than an error, so snapshot series can start from
/// the empty library.
pub fn report(batch: &EvaluationBatch) -> Result<MetricsReport, MetricsError> {
    let success_rate = success_rate(batch)?;
    let mean_steps = mean_steps(batch);
    let empty_lib = batch.library.skill_count() == 0;
    let skill_reusability = if empty_lib {
        0.0
    } else {
        skill_reusability(batch)?
    };
    let compositionality = if empty_lib {
        0.0
    } else {
        compositionality(batch.library)?
    };
    let adoption_rate = adoption_rate(batch)?;
    let mean_objective = mean_objective(batch)?;

    let mut used: BTreeSet<SkillId> = BTreeSet::new();
    for traj in batch.trajectories {
        used.extend(skills_used(traj, batch.library));
    }
    let known: BTreeSet<_> = batch.library.creation_log().iter().cloned().collect();
    let log = batch.library.creation_log();
    let links: usize = log
        .iter()
        .enumerate()
        .map(|(i, id)| {
            static_targets(batch.library, id)
                .iter()
                .filter(|t| log.iter().position(|x| x == *t).is_some_and(|j| j < i))
                .count()
        })
        .sum();
    let counts = MetricCounts {
        tasks: batch.task_ids.len(),
        tasks_succeeded: batch
            .task_ids
            .iter()
            .filter(|id| batch.trajectories.iter().any(|t| &t.task == *id && t.success))
            .count(),
        trajectories: batch.trajectories.len(),
        successes: batch.trajectories.iter().filter(|t| t.success).count(),
        skills: batch.library.skill_count(),
        skills_used: used.intersection(&known).count(),
        trajectories_with_skill: batch
            .trajectories
            .iter()
            .filter(|t| t.uses_any_skill())
            .count(),
        compositional_links: links,
    };
    Ok(MetricsReport {
        success_rate,
        mean_steps,
        skill_reusability,
        adoption_rate,
        compositionality,
        mean_objective,
        counts,
    })
}

/// Fixed CSV schema for snapshot series.
pub const CSV_COLUMNS: [&str; 15] = [
    "snapshot_step",
    "success_rate",
    "mean_steps",
    "skill_reusability",
    "adoption_rate",
    "compositionality",
    "mean_objective",
    "tasks",
    "tasks_succeeded",
    "trajectories",
    "successes",
    "skills",
    "skills_used",
    "trajectories_with_skill",
    "compositional_links",
];

pub fn csv_row(step: u64, r: &MetricsReport) -> Vec<String> {
    vec![
        step.to_string(),
        format!("{:.6}", r.success_rate),
        r.mean_steps.map(|v| format!("{v:.6}")).unwrap_or_default(),
        format!("{:.6}", r.skill_reusability),
        format!("{:.6}", r.adoption_rate),
        format!("{:.6}", r.compositionality),
        format!("{:.6}", r.mean_objective),
        r.counts.tasks.to_string(),
        r.counts.tasks_succeeded.to_string(),
        r.counts.trajectories.to_string(),
        r.counts.successes.to_string(),
        r.counts.skills.to_string(),
        r.counts.skills_used.to_string(),
        r.counts.trajectories_with_skill.to_string(),
        r.counts.compositional_links.to_string(),
    ]
}

/// Re-evaluate a held-out suite against every `interval`-th library snapshot.
/// When the interval exceeds the run length, the final snapshot alone is
/// reported.
pub fn snapshot_series<E>(
    snapshots: &[(u64, SkillLibrary)],
    interval: u64,
    gamma: f64,
    mut evaluate: impl FnMut(u64, &SkillLibrary) -> Result<Vec<Trajectory>, E>,
) -> Result<Vec<(u64, MetricsReport)>, SnapshotError<E>> {
    if interval == 0 {
        return Err(SnapshotError::ZeroInterval);
    }
    let mut selected: Vec<&(u64, SkillLibrary)> = snapshots
        .iter()
        .filter(|(step, _)| step % interval == 0)
        .collect();
    if selected.is_empty() {
        if let Some(last) = snapshots.last() {
            selected.push(last);
        }
    }
    let mut out = Vec::with_capacity(selected.len());
    for (step, lib) in selected {
        let trajectories = evaluate(*step, lib).map_err(SnapshotError::Evaluate)?;
        let batch = EvaluationBatch::over_trajectories(&trajectories, lib, gamma);
        let r = report(&batch).map_err(SnapshotError::Metrics)?;
        out.push((*step, r));
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum SnapshotError<E> {
    #[error("snapshot interval must be at least 1")]
    ZeroInterval,
    #[error(transparent)]
    Metrics(MetricsError),
    #[error("holdout evaluation failed")]
    Evaluate(#[source] E),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_statements;
    use crate::runtime::StepRecord;

    fn traj(task: &str, site: &str, stmts: &str, success: bool) -> Trajectory {
        let statements = parse_statements(stmts).unwrap();
        let records: Vec<StepRecord> = statements
            .into_iter()
            .enumerate()
            .map(|(index, statement)| StepRecord {
                index,
                observation: format!("obs{index}"),
                statement,
                expansion: vec![],
                expansion_len: 0,
            })
            .collect();
        Trajectory {
            id: format!("{task}-traj"),
            task: task.into(),
            site: site.into(),
            wall_steps: records.len(),
            records,
            terminal: "t".into(),
            success,
            fault: None,
        }
    }

    fn toy_library() -> SkillLibrary {
        // k1 = search (primitives), k2 = find (calls search), k3 = buy
        // (calls find and search... via defaults).
        let src = r#"
interface abs for shopping {
  sig search(query: text)
  sig add_to_cart()
  sig checkout()

  skill find_item(query: text) {
    call search(query)
  }

  skill buy_item(query: text) {
    call find_item(query)
    call add_to_cart()
    call checkout()
  }
}
"#;
        let parsed = crate::dsl::parse_skill_file(src).unwrap();
        let crate::dsl::ParsedFile::Interface(iface) = parsed else {
            unreachable!()
        };
        let imp = crate::dsl::parse_skill_file(
            r#"
impl abs for shop {
  skill search(query: text) { click(#a); type(#a, query); press("Enter") }
  skill add_to_cart() { click(#b); click(#c) }
  skill checkout() { click(#d); click(#e) }
}
"#,
        )
        .unwrap();
        let crate::dsl::ParsedFile::Implementation(imp) = imp else {
            unreachable!()
        };
        SkillLibrary::new()
            .register_interface(iface)
            .unwrap()
            .register_implementation(imp)
            .unwrap()
    }

    #[test]
    fn success_rate_examples() {
        let lib = SkillLibrary::new();
        let trajs = vec![
            traj("a", "s", "noop", true),
            traj("b", "s", "noop", true),
            traj("c", "s", "noop", true),
            traj("d", "s", "noop", false),
        ];
        let batch = EvaluationBatch::over_trajectories(&trajs, &lib, 0.0);
        assert_eq!(success_rate(&batch).unwrap(), 0.75);

        let none: Vec<Trajectory> = vec![traj("a", "s", "noop", false)];
        let batch = EvaluationBatch::over_trajectories(&none, &lib, 0.0);
        assert_eq!(success_rate(&batch).unwrap(), 0.0);

        let empty: Vec<Trajectory> = vec![];
        let batch = EvaluationBatch::over_trajectories(&empty, &lib, 0.0);
        assert_eq!(success_rate(&batch), Err(MetricsError::EmptyTaskSet));
    }

    #[test]
    fn mean_steps_counts_calls_as_single_steps() {
        let lib = toy_library();
        let trajs = vec![
            traj("a", "shop", "click(#a); type(#a, \"x\"); press(\"Enter\")", true),
            traj("b", "shop", "call search(\"m\"); click(#b); click(#c); click(#d); click(#e)", true),
        ];
        let batch = EvaluationBatch::over_trajectories(&trajs, &lib, 0.0);
        assert_eq!(mean_steps(&batch), Some(4.0));

        let failures = vec![traj("a", "shop", "noop", false)];
        let batch = EvaluationBatch::over_trajectories(&failures, &lib, 0.0);
        assert_eq!(mean_steps(&batch), None);
    }

    #[test]
    fn skill_reusability_counts_distinct_invoked_skills() {
        let lib = toy_library();
        assert_eq!(lib.skill_count(), 5); // 2 defaults + 3 methods
        let trajs = vec![traj("a", "shop", "call search(\"m\")", true)];
        let batch = EvaluationBatch::over_trajectories(&trajs, &lib, 0.0);
        assert_eq!(skill_reusability(&batch).unwrap(), 1.0 / 5.0);

        let no_calls = vec![traj("a", "shop", "noop", true)];
        let batch = EvaluationBatch::over_trajectories(&no_calls, &lib, 0.0);
        assert_eq!(skill_reusability(&batch).unwrap(), 0.0);

        let all = vec![traj(
            "a",
            "shop",
            "call search(\"m\"); call add_to_cart(); call checkout(); call find_item(\"m\"); call buy_item(\"m\")",
            true,
        )];
        let batch = EvaluationBatch::over_trajectories(&all, &lib, 0.0);
        assert_eq!(skill_reusability(&batch).unwrap(), 1.0);

        let empty = SkillLibrary::new();
        let batch = EvaluationBatch::over_trajectories(&no_calls, &empty, 0.0);
        assert_eq!(skill_reusability(&batch), Err(MetricsError::EmptyLibrary));
    }

    #[test]
    fn default_method_calls_count_the_default_not_its_leaves() {
        let lib = toy_library();
        let trajs = vec![traj("a", "shop", "call buy_item(\"m\")", true)];
        let batch = EvaluationBatch::over_trajectories(&trajs, &lib, 0.0);
        assert_eq!(skill_reusability(&batch).unwrap(), 1.0 / 5.0);
    }

    #[test]
    fn adoption_rate_examples() {
        let lib = toy_library();
        let trajs = vec![
            traj("a", "shop", "call search(\"m\")", true),
            traj("b", "shop", "noop", true),
            traj("c", "shop", "noop", false),
            traj("d", "shop", "call checkout()", false),
            traj("e", "shop", "noop", true),
        ];
        let batch = EvaluationBatch::over_trajectories(&trajs, &lib, 0.0);
        assert_eq!(adoption_rate(&batch).unwrap(), 0.4);

        let empty: Vec<Trajectory> = vec![];
        let batch = EvaluationBatch::over_trajectories(&empty, &lib, 0.0);
        assert_eq!(adoption_rate(&batch), Err(MetricsError::EmptySet));
    }

    #[test]
    fn compositionality_counts_earlier_static_targets_once() {
        // Log order: find_item, buy_item (defaults), then the 3 methods.
        // find_item has no skill targets (search is an abstract slot);
        // buy_item statically targets find_item only → (0 + 1 + 0+0+0)/5.
        let lib = toy_library();
        assert_eq!(compositionality(&lib).unwrap(), 1.0 / 5.0);
        assert_eq!(
            compositionality(&SkillLibrary::new()),
            Err(MetricsError::EmptyLibrary)
        );
    }

    #[test]
    fn spec_compositionality_shape_holds() {
        // k1 all-primitive, k2 calls k1, k3 calls k1 and k2 → (0+1+2)/3 = 1.
        let src = r#"
impl abs for shop {
  skill search(query: text) { click(#a); type(#a, query); press("Enter") }
  skill add_to_cart() { call search("x"); click(#b) }
  skill checkout() { call search("x"); call add_to_cart(); click(#c) }
}
"#;
        let crate::dsl::ParsedFile::Implementation(imp) =
            crate::dsl::parse_skill_file(src).unwrap()
        else {
            unreachable!()
        };
        let iface = r#"
interface abs for shopping {
  sig search(query: text)
  sig add_to_cart()
  sig checkout()
}
"#;
        let crate::dsl::ParsedFile::Interface(iface) =
            crate::dsl::parse_skill_file(iface).unwrap()
        else {
            unreachable!()
        };
        let lib = SkillLibrary::new()
            .register_interface(iface)
            .unwrap()
            .register_implementation(imp)
            .unwrap();
        assert_eq!(compositionality(&lib).unwrap(), 1.0);
    }

    #[test]
    fn mean_objective_examples() {
        let lib = SkillLibrary::new();
        // gamma = 0 reduces to the success indicator mean.
        let trajs = vec![traj("a", "s", "noop", true), traj("b", "s", "noop", false)];
        let batch = EvaluationBatch::over_trajectories(&trajs, &lib, 0.0);
        assert_eq!(mean_objective(&batch).unwrap(), 0.5);

        let four = vec![traj("a", "s", "noop; noop; noop; noop", true)];
        let batch = EvaluationBatch::over_trajectories(&four, &lib, 0.01);
        assert!((mean_objective(&batch).unwrap() - 0.96).abs() < 1e-12);

        let fail = vec![traj("a", "s", "noop; noop; noop; noop", false)];
        let batch = EvaluationBatch::over_trajectories(&fail, &lib, 0.01);
        assert!((mean_objective(&batch).unwrap() + 0.04).abs() < 1e-12);

        let batch = EvaluationBatch {
            gamma: -1.0,
            ..EvaluationBatch::over_trajectories(&four, &lib, 0.0)
        };
        assert!(matches!(
            mean_objective(&batch),
            Err(MetricsError::NegativeGamma { .. })
        ));
    }

    #[test]
    fn duplicating_every_trajectory_leaves_ratios_unchanged() {
        let lib = toy_library();
        let trajs = vec![
            traj("a", "shop", "call search(\"m\")", true),
            traj("b", "shop", "noop; noop", false),
        ];
        let batch = EvaluationBatch::over_trajectories(&trajs, &lib, 0.01);
        let before = report(&batch).unwrap();
        let doubled: Vec<Trajectory> =
            trajs.iter().cloned().chain(trajs.iter().cloned()).collect();
        let batch2 = EvaluationBatch::over_trajectories(&doubled, &lib, 0.01);
        let after = report(&batch2).unwrap();
        assert_eq!(before.success_rate, after.success_rate);
        assert_eq!(before.mean_steps, after.mean_steps);
        assert_eq!(before.skill_reusability, after.skill_reusability);
        assert_eq!(before.adoption_rate, after.adoption_rate);
        assert_eq!(before.mean_objective, after.mean_objective);
    }

    #[test]
    fn snapshot_selection_counts() {
        let lib = SkillLibrary::new();
        let snapshots: Vec<(u64, SkillLibrary)> =
            (1..=100).map(|s| (s, lib.clone())).collect();
        let evaluate =
            |_: u64, _: &SkillLibrary| -> Result<Vec<Trajectory>, std::convert::Infallible> {
                Ok(vec![traj("a", "s", "noop", true)])
            };
        let series = snapshot_series(&snapshots, 5, 0.0, evaluate).unwrap();
        assert_eq!(series.len(), 20);
        let series = snapshot_series(&snapshots, 200, 0.0, evaluate).unwrap();
        assert_eq!(series.len(), 1);
        // Constant library → constant reports.
        let series = snapshot_series(&snapshots, 10, 0.0, evaluate).unwrap();
        let first = &series[0].1;
        assert!(series.iter().all(|(_, r)| r == first));
    }
}
