//! The five experiment commands: `run`, `explore`, `continual`, `metrics`,
//! and `replay`. Learning is sequential; held-out evaluation fans out over a
//! worker pool on read-only library snapshots; every file write happens on
//! the orchestrating thread.

use super::artifacts::{self, ArtifactError, AuditRecord};
use super::config::{
    ConfigError, ExperimentConfig, InducerKind, JudgeKind, Mode, PolicyKind, ProposerKind,
};
use crate::induction::{
    run_task_defined, run_task_free, GapDrivenProposer, InducerBackend, JudgeBackend,
    LoopOptions, ProgrammaticJudge, ProposerBackend, RunOutput, ScriptedInducer, SiteIndex,
};
use crate::induction::remote::{RemoteInducer, RemoteJudge, RemoteProposer};
use crate::metrics::{self, EvaluationBatch, MetricsReport};
use crate::runtime::chat::ChatClient;
use crate::runtime::{
    execute_task, replay_divergence, OraclePolicy, PlanStore, PolicyBackend, RemotePolicy,
    Trajectory,
};
use crate::sim::{
    generate_site_family, generate_task_suite, SiteSpec, SuiteOptions, Task, TaskPlan, TaskSuite,
};
use crate::skill_model::{store, SkillLibrary};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad invocation, config, or missing input files. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The experiment itself failed. Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Runtime(_) => 1,
        }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Usage(e.to_string())
    }
}

impl From<ArtifactError> for HarnessError {
    fn from(e: ArtifactError) -> Self {
        match e {
            ArtifactError::Io { .. } | ArtifactError::Missing(_) => {
                HarnessError::Usage(e.to_string())
            }
            _ => HarnessError::Runtime(e.to_string()),
        }
    }
}

fn runtime_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

/// Backend construction per the config. Policies are built fresh per episode
/// worker; judges are shared.
struct Backends {
    config: ExperimentConfig,
    sites: Arc<SiteIndex>,
    store: PlanStore,
    chat: Option<ChatClient>,
}

impl Backends {
    fn new(
        config: ExperimentConfig,
        sites: Arc<SiteIndex>,
        store: PlanStore,
    ) -> Result<Self, HarnessError> {
        let chat = config.backends.remote.clone().map(ChatClient::new);
        Ok(Backends {
            config,
            sites,
            store,
            chat,
        })
    }

    fn chat(&self) -> Result<ChatClient, HarnessError> {
        self.chat
            .clone()
            .ok_or_else(|| HarnessError::Usage("[backends.remote] is not configured".into()))
    }

    fn policy(&self) -> Result<Box<dyn PolicyBackend>, HarnessError> {
        Ok(match self.config.backends.policy {
            PolicyKind::Oracle => Box::new(OraclePolicy::new(self.store.clone())),
            PolicyKind::Remote => Box::new(RemotePolicy::new(self.chat()?)),
        })
    }

    fn judge(&self) -> Result<Box<dyn JudgeBackend>, HarnessError> {
        Ok(match self.config.backends.judge {
            JudgeKind::Programmatic => Box::new(ProgrammaticJudge::new(self.sites.clone())),
            JudgeKind::Remote => Box::new(RemoteJudge::new(self.chat()?, self.sites.clone())),
        })
    }

    fn inducer(&self) -> Result<Box<dyn InducerBackend>, HarnessError> {
        Ok(match self.config.backends.inducer {
            InducerKind::Scripted => Box::new(ScriptedInducer::new(self.store.clone())),
            InducerKind::Remote => Box::new(RemoteInducer::new(self.chat()?)),
        })
    }

    fn proposer(&self) -> Result<Box<dyn ProposerBackend>, HarnessError> {
        Ok(match self.config.backends.proposer {
            ProposerKind::Gap => Box::new(GapDrivenProposer::new(self.store.clone())),
            ProposerKind::Remote => Box::new(RemoteProposer::new(self.chat()?)),
        })
    }
}

/// Evaluate a held-out suite against one library snapshot, fanning episodes
/// out over the worker pool. Output order follows the suite.
fn evaluate_suite(
    backends: &Backends,
    suite: &TaskSuite,
    lib: &SkillLibrary,
    step: u64,
) -> Result<Vec<Trajectory>, HarnessError> {
    let results: Vec<Result<Trajectory, HarnessError>> = suite
        .tasks
        .par_iter()
        .map(|task| {
            let spec = backends
                .sites
                .get(&task.site)
                .ok_or_else(|| HarnessError::Usage(format!("unknown site `{}`", task.site)))?;
            let mut policy = backends.policy()?;
            let mut traj = execute_task(spec, task, lib, policy.as_mut(), task.horizon)
                .map_err(runtime_err)?;
            traj.id = format!("eval-s{step:03}-{}", task.id);
            Ok(traj)
        })
        .collect();
    results.into_iter().collect()
}

type SnapshotSeries = Vec<(u64, MetricsReport)>;

/// Snapshot series plus the evaluation trajectories behind each point.
fn snapshot_evaluations(
    backends: &Backends,
    holdout: &TaskSuite,
    snapshots: &[(u64, SkillLibrary)],
    interval: u64,
    gamma: f64,
) -> Result<(SnapshotSeries, Vec<Trajectory>), HarnessError> {
    let all_evals: Mutex<Vec<Trajectory>> = Mutex::new(Vec::new());
    let series = metrics::snapshot_series(snapshots, interval, gamma, |step, lib| {
        let trajs = evaluate_suite(backends, holdout, lib, step)?;
        all_evals.lock().unwrap().extend(trajs.iter().cloned());
        Ok::<_, HarnessError>(trajs)
    })
    .map_err(|e| match e {
        metrics::SnapshotError::Evaluate(inner) => inner,
        other => HarnessError::Runtime(other.to_string()),
    })?;
    Ok((series, all_evals.into_inner().unwrap()))
}

struct Prepared {
    specs: Vec<SiteSpec>,
    sites: Arc<SiteIndex>,
    learning: TaskSuite,
    holdout: TaskSuite,
    plans: BTreeMap<String, TaskPlan>,
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    let specs = generate_site_family(
        &config.family.category,
        config.family.n_sites,
        config.family.seed,
    )
    .map_err(|e| HarnessError::Usage(e.to_string()))?;
    let sites = SiteIndex::new(specs.clone());

    let (learning, mut plans) = match &config.tasks.suite_path {
        Some(path) => {
            let suite = artifacts::read_suite(path)?;
            let plans = match &config.tasks.plans_path {
                Some(p) => artifacts::read_plans(p)?,
                None if config.backends.policy == PolicyKind::Oracle => {
                    return Err(HarnessError::Usage(
                        "the oracle policy needs tasks.plans_path alongside tasks.suite_path"
                            .into(),
                    ))
                }
                None => BTreeMap::new(),
            };
            (suite, plans)
        }
        None => {
            let opts = SuiteOptions {
                seed: config.family.seed,
                include_composites: config.tasks.include_composites,
                id_prefix: "t".into(),
            };
            generate_task_suite(&specs, config.tasks.count, &opts)
                .map_err(|e| HarnessError::Runtime(e.to_string()))?
        }
    };
    let holdout_opts = SuiteOptions {
        seed: config.family.seed,
        include_composites: config.tasks.include_composites,
        id_prefix: "h".into(),
    };
    let (holdout, holdout_plans) = generate_task_suite(&specs, config.tasks.holdout, &holdout_opts)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    plans.extend(holdout_plans);
    Ok(Prepared {
        specs,
        sites,
        learning,
        holdout,
        plans,
    })
}

fn ensure_out_dir(out: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out)
        .map_err(|e| HarnessError::Usage(format!("cannot create `{}`: {e}", out.display())))
}

fn write_common(
    out: &Path,
    prepared: &Prepared,
    run: &RunOutput,
    series: &[(u64, MetricsReport)],
    evals: &[Trajectory],
    command: &str,
) -> Result<(), HarnessError> {
    artifacts::write_sites(&out.join("site_specs.json"), &prepared.specs)?;
    artifacts::write_suite(&out.join("tasks.json"), &prepared.learning)?;
    artifacts::write_suite(&out.join("holdout_tasks.json"), &prepared.holdout)?;
    artifacts::write_plans(&out.join("plans.json"), &prepared.plans)?;
    artifacts::append_trajectories(&out.join("trajectories.jsonl"), &run.trajectories)?;
    artifacts::append_trajectories(&out.join("eval_trajectories.jsonl"), evals)?;
    artifacts::append_audit(
        &out.join("audit.jsonl"),
        &artifacts::audit_outcomes(&run.outcomes),
    )?;
    store::save_library(&run.library, &out.join("library"))
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    artifacts::write_metrics_csv(&out.join("metrics.csv"), series)?;
    artifacts::write_metrics_json(&out.join("metrics.json"), series)?;
    artifacts::write_meta(out, command)?;
    Ok(())
}

fn print_series_tail(series: &[(u64, MetricsReport)]) {
    if let Some((step, r)) = series.last() {
        println!(
            "holdout @ step {step}: sr={:.3} mean_steps={} reuse={:.3} adoption={:.3} comp={:.3}",
            r.success_rate,
            r.mean_steps
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into()),
            r.skill_reusability,
            r.adoption_rate,
            r.compositionality,
        );
    }
}

/// `run`: the task-defined curriculum.
pub fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::load(config_path)?;
    config.check_mode(Mode::TaskDefined)?;
    if let Some(seed) = seed {
        config.family.seed = seed;
    }
    let out = out.unwrap_or_else(|| config.run.out_dir.clone());
    ensure_out_dir(&out)?;

    let prepared = prepare(&config)?;
    let store: PlanStore = Arc::new(Mutex::new(prepared.plans.clone()));
    let backends = Backends::new(config.clone(), prepared.sites.clone(), store)?;

    let mut policy = backends.policy()?;
    let judge = backends.judge()?;
    let mut inducer = backends.inducer()?;
    let run = run_task_defined(
        &prepared.learning.tasks,
        SkillLibrary::new(),
        &prepared.sites,
        policy.as_mut(),
        judge.as_ref(),
        inducer.as_mut(),
        &LoopOptions {
            bounds: config.bounds(),
            start_step: 1,
        },
    )
    .map_err(runtime_err)?;

    let (series, evals) = snapshot_evaluations(
        &backends,
        &prepared.holdout,
        &run.snapshots,
        config.run.snapshot_interval,
        config.run.gamma,
    )?;
    write_common(&out, &prepared, &run, &series, &evals, "run")?;
    println!(
        "run complete: {} tasks, library has {} skills ({} accepted proposals)",
        prepared.learning.tasks.len(),
        run.library.skill_count(),
        run.outcomes.iter().filter(|o| o.accepted).count()
    );
    print_series_tail(&series);
    Ok(())
}

/// `explore`: task-free self-guided exploration over the site pool.
pub fn cmd_explore(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::load(config_path)?;
    config.check_mode(Mode::TaskFree)?;
    if let Some(seed) = seed {
        config.family.seed = seed;
    }
    let out = out.unwrap_or_else(|| config.run.out_dir.clone());
    ensure_out_dir(&out)?;

    let prepared = prepare(&config)?;
    // The proposer writes plans as it invents tasks; holdout plans are known.
    let store: PlanStore = Arc::new(Mutex::new(prepared.plans.clone()));
    let backends = Backends::new(config.clone(), prepared.sites.clone(), store.clone())?;

    let mut policy = backends.policy()?;
    let judge = backends.judge()?;
    let mut inducer = backends.inducer()?;
    let mut proposer = backends.proposer()?;
    let explored = run_task_free(
        config.explore.iterations,
        SkillLibrary::new(),
        &prepared.specs,
        policy.as_mut(),
        judge.as_ref(),
        inducer.as_mut(),
        proposer.as_mut(),
        &LoopOptions {
            bounds: config.bounds(),
            start_step: 1,
        },
    )
    .map_err(runtime_err)?;

    let (series, evals) = snapshot_evaluations(
        &backends,
        &prepared.holdout,
        &explored.run.snapshots,
        config.run.snapshot_interval,
        config.run.gamma,
    )?;

    // Record the proposed tasks so replay can find them.
    let mut prepared = prepared;
    prepared.learning = crate::sim::suite_from_parts(explored.tasks.clone());
    prepared.plans = store.lock().unwrap().clone();
    write_common(&out, &prepared, &explored.run, &series, &evals, "explore")?;
    artifacts::append_audit(
        &out.join("audit.jsonl"),
        &[AuditRecord::SiteIterations {
            schema: artifacts::AUDIT_SCHEMA.into(),
            counts: explored.site_iterations.clone(),
        }],
    )?;
    println!(
        "explore complete: {} iterations over {} site(s), library has {} skills",
        config.explore.iterations,
        explored.site_iterations.len(),
        explored.run.library.skill_count()
    );
    for (site, n) in &explored.site_iterations {
        println!("  {site}: {n} iteration(s)");
    }
    print_series_tail(&series);
    Ok(())
}

/// `continual`: phases of per-site curricula; after every phase, every
/// phase-origin held-out suite is re-evaluated against the current library.
pub fn cmd_continual(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::load(config_path)?;
    config.check_mode(Mode::Continual)?;
    if let Some(seed) = seed {
        config.family.seed = seed;
    }
    if config.continual.phases.is_empty() {
        return Err(HarnessError::Usage(
            "continual mode needs at least one [[continual.phases]] entry".into(),
        ));
    }
    let out = out.unwrap_or_else(|| config.run.out_dir.clone());
    ensure_out_dir(&out)?;

    let specs = generate_site_family(
        &config.family.category,
        config.family.n_sites,
        config.family.seed,
    )
    .map_err(|e| HarnessError::Usage(e.to_string()))?;
    let sites = SiteIndex::new(specs.clone());
    for phase in &config.continual.phases {
        if sites.get(&phase.site).is_none() {
            return Err(HarnessError::Usage(format!(
                "continual plan references unknown site `{}`",
                phase.site
            )));
        }
    }

    // Per-phase curricula and per-origin holdout suites.
    let mut plans: BTreeMap<String, TaskPlan> = BTreeMap::new();
    let mut curricula: Vec<TaskSuite> = Vec::new();
    let mut holdouts: Vec<(String, TaskSuite)> = Vec::new();
    for (i, phase) in config.continual.phases.iter().enumerate() {
        let spec = sites.get(&phase.site).unwrap().clone();
        let learn_opts = SuiteOptions {
            seed: config.family.seed,
            include_composites: config.tasks.include_composites,
            id_prefix: format!("p{i}"),
        };
        let (suite, p) = generate_task_suite(std::slice::from_ref(&spec), phase.iterations, &learn_opts)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        plans.extend(p);
        curricula.push(suite);
        let holdout_opts = SuiteOptions {
            seed: config.family.seed,
            include_composites: config.tasks.include_composites,
            id_prefix: format!("h{i}"),
        };
        let (suite, p) = generate_task_suite(&[spec], config.tasks.holdout, &holdout_opts)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        plans.extend(p);
        holdouts.push((format!("h{i}_{}", phase.site), suite));
    }

    let store: PlanStore = Arc::new(Mutex::new(plans.clone()));
    let backends = Backends::new(config.clone(), sites.clone(), store)?;
    let judge = backends.judge()?;

    let mut library = SkillLibrary::new();
    let mut all = RunOutput::default();
    let mut forgetting_rows: Vec<artifacts::ForgettingRow> = Vec::new();
    let mut phase_audits = Vec::new();
    let mut next_step = 1u64;
    for (i, (phase, curriculum)) in config
        .continual
        .phases
        .iter()
        .zip(&curricula)
        .enumerate()
    {
        let mut policy = backends.policy()?;
        let mut inducer = backends.inducer()?;
        let run = run_task_defined(
            &curriculum.tasks,
            library,
            &sites,
            policy.as_mut(),
            judge.as_ref(),
            inducer.as_mut(),
            &LoopOptions {
                bounds: config.bounds(),
                start_step: next_step,
            },
        )
        .map_err(runtime_err)?;
        next_step += curriculum.tasks.len() as u64;
        library = run.library.clone();
        all.trajectories.extend(run.trajectories);
        all.outcomes.extend(run.outcomes);
        all.snapshots.extend(run.snapshots);
        phase_audits.push(AuditRecord::Phase {
            schema: artifacts::AUDIT_SCHEMA.into(),
            phase: i,
            site: phase.site.clone(),
            tasks: curriculum.tasks.len(),
        });

        // Evaluate every origin suite against the current library.
        let mut cells = Vec::new();
        for (j, (_, holdout)) in holdouts.iter().enumerate() {
            let trajs = evaluate_suite(&backends, holdout, &library, (i * 100 + j) as u64)?;
            let batch = EvaluationBatch::over_trajectories(&trajs, &library, config.run.gamma);
            let sr = metrics::success_rate(&batch).map_err(runtime_err)?;
            let steps = metrics::mean_steps(&batch);
            cells.push((sr, steps));
            let mut renamed = trajs;
            for t in &mut renamed {
                t.id = format!("phase{i}-{}", t.id);
            }
            all.trajectories.extend(renamed);
        }
        forgetting_rows.push((i, phase.site.clone(), cells));
    }
    all.library = library;

    // Artifacts: union suites so replay can resolve every task id.
    let learning = crate::sim::suite_from_parts(
        curricula.iter().flat_map(|s| s.tasks.clone()).collect(),
    );
    let holdout_union = crate::sim::suite_from_parts(
        holdouts
            .iter()
            .flat_map(|(_, s)| s.tasks.clone())
            .collect(),
    );
    let prepared = Prepared {
        specs,
        sites,
        learning,
        holdout: holdout_union,
        plans,
    };
    let (series, evals) = snapshot_evaluations(
        &backends,
        &prepared.holdout,
        &all.snapshots,
        config.run.snapshot_interval,
        config.run.gamma,
    )?;
    write_common(&out, &prepared, &all, &series, &evals, "continual")?;
    artifacts::append_audit(&out.join("audit.jsonl"), &phase_audits)?;
    let suite_names: Vec<String> = holdouts.iter().map(|(n, _)| n.clone()).collect();
    artifacts::write_forgetting_csv(&out.join("forgetting.csv"), &suite_names, &forgetting_rows)?;
    println!(
        "continual complete: {} phase(s), library has {} skills",
        config.continual.phases.len(),
        all.library.skill_count()
    );
    for (phase, site, cells) in &forgetting_rows {
        let srs: Vec<String> = cells.iter().map(|(sr, _)| format!("{sr:.3}")).collect();
        println!("  after phase {phase} ({site}): sr per suite = [{}]", srs.join(", "));
    }
    Ok(())
}

/// `metrics`: recompute a report from stored artifacts, no environment needed.
pub fn cmd_metrics(
    logs: &[PathBuf],
    library_dir: &Path,
    gamma: f64,
    out: Option<PathBuf>,
) -> Result<(), HarnessError> {
    if logs.is_empty() {
        return Err(HarnessError::Usage("no --log files given".into()));
    }
    let mut trajectories = Vec::new();
    for path in logs {
        if !path.exists() {
            return Err(HarnessError::Usage(format!(
                "log file `{}` does not exist",
                path.display()
            )));
        }
        trajectories.extend(artifacts::read_trajectories(path)?);
    }
    if trajectories.is_empty() {
        return Err(HarnessError::Runtime(
            "the provided logs contain no trajectories".into(),
        ));
    }
    let library = store::load_library(library_dir)
        .map_err(|e| HarnessError::Usage(format!("cannot load library: {e}")))?;
    let batch = EvaluationBatch::over_trajectories(&trajectories, &library, gamma);
    let report = metrics::report(&batch).map_err(runtime_err)?;
    let json = serde_json::json!({
        "schema": "metrics/1",
        "report": report,
    });
    println!("{}", serde_json::to_string_pretty(&json).unwrap());
    if let Some(out) = out {
        ensure_out_dir(&out)?;
        artifacts::write_json(&out.join("report.json"), &json)?;
        artifacts::write_metrics_csv(&out.join("report.csv"), &[(0, report)])?;
    }
    Ok(())
}

/// `replay`: re-execute a logged trajectory and verify digests match.
pub fn cmd_replay(artifacts_dir: &Path, trajectory_id: &str) -> Result<bool, HarnessError> {
    let sites_path = artifacts_dir.join("site_specs.json");
    if !sites_path.exists() {
        return Err(HarnessError::Usage(format!(
            "missing artifact `{}`",
            sites_path.display()
        )));
    }
    let specs = artifacts::read_sites(&sites_path)?;
    let sites = SiteIndex::new(specs);
    let library = {
        let dir = artifacts_dir.join("library");
        if dir.exists() {
            store::load_library(&dir).map_err(|e| HarnessError::Runtime(e.to_string()))?
        } else {
            SkillLibrary::new()
        }
    };
    let traj = artifacts::find_trajectory(artifacts_dir, trajectory_id)?;
    let mut task: Option<Task> = None;
    for name in ["tasks.json", "holdout_tasks.json"] {
        let path = artifacts_dir.join(name);
        if path.exists() {
            if let Some(t) = artifacts::read_suite(&path)?.task(&traj.task) {
                task = Some(t.clone());
                break;
            }
        }
    }
    let task = task.ok_or_else(|| {
        HarnessError::Usage(format!("task `{}` not found in suite artifacts", traj.task))
    })?;
    let spec = sites
        .get(&task.site)
        .ok_or_else(|| HarnessError::Usage(format!("unknown site `{}`", task.site)))?;
    let report = replay_divergence(spec, &task, &library, &traj).map_err(runtime_err)?;
    if report.terminal_match {
        println!("replay {trajectory_id}: match (terminal {})", report.logged_terminal);
        Ok(true)
    } else {
        match report.first_divergence {
            Some(step) => println!("replay {trajectory_id}: mismatch at step {step}"),
            None => println!(
                "replay {trajectory_id}: terminal digest mismatch ({} vs {})",
                report.rerun_terminal, report.logged_terminal
            ),
        }
        Ok(false)
    }
}
