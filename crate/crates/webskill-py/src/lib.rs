//! Python bindings: the skill library, site generation, the learning loops,
//! and metrics, behind a small `webskill_py` extension module.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use webskill::dsl;
use webskill::induction::{
    interface_schema, run_task_defined, run_task_free, GapDrivenProposer, LoopOptions,
    ProgrammaticJudge, ScriptedInducer, SiteIndex,
};
use webskill::metrics::{self, EvaluationBatch};
use webskill::runtime::scripted::plan_store;
use webskill::runtime::{execute_task, OraclePolicy, Trajectory};
use webskill::sim::{generate_site_family, generate_task_suite, SiteSpec, SuiteOptions, TaskSuite};
use webskill::skill_model::{store, validate_library, SizeBounds, SkillLibrary};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Parse one `.skill` file and return its canonical form.
#[pyfunction]
fn parse_skill_text(text: &str) -> PyResult<String> {
    match dsl::parse_skill_file(text).map_err(value_err)? {
        dsl::ParsedFile::Interface(i) => Ok(dsl::print_interface(&i)),
        dsl::ParsedFile::Implementation(i) => Ok(dsl::print_implementation(&i)),
    }
}

/// Parse a statement sequence and count its wall steps (calls count once).
#[pyfunction]
fn count_statement_steps(text: &str) -> PyResult<usize> {
    let stmts = dsl::parse_statements(text).map_err(value_err)?;
    Ok(dsl::count_steps(&stmts))
}

/// The canonical abstract interface for a category, as DSL text.
#[pyfunction]
fn category_interface(category: &str) -> PyResult<String> {
    interface_schema(category)
        .map(|i| dsl::print_interface(&i))
        .ok_or_else(|| value_err(format!("unknown category `{category}`")))
}

/// A polymorphic skill library snapshot.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Library {
    inner: SkillLibrary,
}

#[pymethods]
impl Library {
    #[new]
    fn new() -> Self {
        Library {
            inner: SkillLibrary::new(),
        }
    }

    /// Load the on-disk directory layout written by `save`.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = store::load_library(Path::new(path)).map_err(value_err)?;
        Ok(Library { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        store::save_library(&self.inner, Path::new(path)).map_err(runtime_err)
    }

    fn skill_count(&self) -> usize {
        self.inner.skill_count()
    }

    /// Qualified skill ids in creation order.
    fn skill_ids(&self) -> Vec<String> {
        self.inner
            .creation_log()
            .iter()
            .map(|id| id.to_string())
            .collect()
    }

    /// Violated invariants as printable strings; empty means well formed.
    #[pyo3(signature = (min_steps=2, max_steps=5))]
    fn validate(&self, min_steps: usize, max_steps: usize) -> Vec<String> {
        validate_library(
            &self.inner,
            &SizeBounds {
                min_steps,
                max_steps,
            },
        )
        .iter()
        .map(|v| v.to_string())
        .collect()
    }

    /// Resolve a skill for a site; returns (qualified id, body DSL text).
    fn resolve(&self, site: &str, name: &str) -> PyResult<(String, String)> {
        let r = self.inner.resolve(site, name).map_err(value_err)?;
        let body: Vec<String> = r.def.body.iter().map(dsl::print_statement).collect();
        Ok((r.id.to_owned().to_string(), body.join("\n")))
    }

    /// Expand one statement into primitive actions on a site.
    fn expand(&self, site: &str, statement: &str) -> PyResult<Vec<String>> {
        let stmt = dsl::parse_statement(statement).map_err(value_err)?;
        let prims = dsl::expand(&self.inner, site, &stmt, &BTreeMap::new()).map_err(value_err)?;
        Ok(prims
            .iter()
            .map(|a| dsl::print_statement(&a.to_statement()))
            .collect())
    }

    fn compositionality(&self) -> PyResult<f64> {
        metrics::compositionality(&self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Library(interfaces={}, implementations={}, skills={})",
            self.inner.interfaces().count(),
            self.inner.implementations().count(),
            self.inner.skill_count()
        )
    }
}

/// A generated family of same-category sites.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct SiteFamily {
    specs: Vec<SiteSpec>,
}

#[pymethods]
impl SiteFamily {
    #[staticmethod]
    fn generate(category: &str, n_sites: usize, seed: u64) -> PyResult<Self> {
        let specs = generate_site_family(category, n_sites, seed).map_err(value_err)?;
        Ok(SiteFamily { specs })
    }

    fn site_ids(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.id.clone()).collect()
    }

    fn capabilities(&self) -> Vec<String> {
        self.specs
            .first()
            .map(|s| s.capabilities.clone())
            .unwrap_or_default()
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.specs).expect("site specs serialize")
    }

    fn __repr__(&self) -> String {
        format!("SiteFamily({:?})", self.site_ids())
    }
}

/// One snapshot point of a learning run.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct SnapshotPoint {
    #[pyo3(get)]
    step: u64,
    #[pyo3(get)]
    success_rate: f64,
    #[pyo3(get)]
    mean_steps: Option<f64>,
    #[pyo3(get)]
    skill_reusability: f64,
    #[pyo3(get)]
    adoption_rate: f64,
    #[pyo3(get)]
    compositionality: f64,
    #[pyo3(get)]
    mean_objective: f64,
}

#[pymethods]
impl SnapshotPoint {
    fn __repr__(&self) -> String {
        format!(
            "SnapshotPoint(step={}, sr={:.3}, steps={:?}, reuse={:.3})",
            self.step, self.success_rate, self.mean_steps, self.skill_reusability
        )
    }
}

/// Result of a learning run driven from Python.
#[pyclass(skip_from_py_object)]
struct RunSummary {
    #[pyo3(get)]
    accepted_proposals: usize,
    #[pyo3(get)]
    trajectories: usize,
    library: SkillLibrary,
    series: Vec<(u64, metrics::MetricsReport)>,
}

#[pymethods]
impl RunSummary {
    #[getter]
    fn library(&self) -> Library {
        Library {
            inner: self.library.clone(),
        }
    }

    fn series(&self) -> Vec<SnapshotPoint> {
        self.series
            .iter()
            .map(|(step, r)| SnapshotPoint {
                step: *step,
                success_rate: r.success_rate,
                mean_steps: r.mean_steps,
                skill_reusability: r.skill_reusability,
                adoption_rate: r.adoption_rate,
                compositionality: r.compositionality,
                mean_objective: r.mean_objective,
            })
            .collect()
    }

    fn metrics_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .series
            .iter()
            .map(|(step, r)| {
                let mut v = serde_json::to_value(r).unwrap();
                v["step"] = serde_json::json!(step);
                v
            })
            .collect();
        serde_json::to_string_pretty(&rows).unwrap()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunSummary(accepted={}, trajectories={}, skills={})",
            self.accepted_proposals,
            self.trajectories,
            self.library.skill_count()
        )
    }
}

fn holdout_series(
    sites: &Arc<SiteIndex>,
    store: &webskill::runtime::PlanStore,
    holdout: &TaskSuite,
    snapshots: &[(u64, SkillLibrary)],
    interval: u64,
    gamma: f64,
) -> PyResult<Vec<(u64, metrics::MetricsReport)>> {
    metrics::snapshot_series(snapshots, interval, gamma, |_, lib| {
        let mut out = Vec::new();
        for task in &holdout.tasks {
            let spec = sites
                .get(&task.site)
                .ok_or_else(|| value_err(format!("unknown site `{}`", task.site)))?;
            let mut policy = OraclePolicy::new(store.clone());
            let traj: Trajectory =
                execute_task(spec, task, lib, &mut policy, task.horizon).map_err(runtime_err)?;
            out.push(traj);
        }
        Ok::<_, PyErr>(out)
    })
    .map_err(|e| match e {
        metrics::SnapshotError::Evaluate(inner) => inner,
        other => runtime_err(other),
    })
}

/// Run a task-defined curriculum with the deterministic backends and return
/// the per-snapshot holdout metrics.
#[pyfunction]
#[pyo3(signature = (category, n_sites, n_tasks, seed, holdout=8, snapshot_interval=1, gamma=0.01))]
fn run_curriculum(
    category: &str,
    n_sites: usize,
    n_tasks: usize,
    seed: u64,
    holdout: usize,
    snapshot_interval: u64,
    gamma: f64,
) -> PyResult<RunSummary> {
    let specs = generate_site_family(category, n_sites, seed).map_err(value_err)?;
    let opts = SuiteOptions {
        seed,
        include_composites: false,
        id_prefix: "t".into(),
    };
    let (suite, mut plans) = generate_task_suite(&specs, n_tasks, &opts).map_err(runtime_err)?;
    let holdout_opts = SuiteOptions {
        seed,
        include_composites: false,
        id_prefix: "h".into(),
    };
    let (holdout_suite, hplans) =
        generate_task_suite(&specs, holdout, &holdout_opts).map_err(runtime_err)?;
    plans.extend(hplans);

    let sites = SiteIndex::new(specs.clone());
    let store = plan_store(plans);
    let mut policy = OraclePolicy::new(store.clone());
    let judge = ProgrammaticJudge::new(sites.clone());
    let mut inducer = ScriptedInducer::new(store.clone());
    let run = run_task_defined(
        &suite.tasks,
        SkillLibrary::new(),
        &sites,
        &mut policy,
        &judge,
        &mut inducer,
        &LoopOptions::default(),
    )
    .map_err(runtime_err)?;

    let series = holdout_series(
        &sites,
        &store,
        &holdout_suite,
        &run.snapshots,
        snapshot_interval,
        gamma,
    )?;
    Ok(RunSummary {
        accepted_proposals: run.outcomes.iter().filter(|o| o.accepted).count(),
        trajectories: run.trajectories.len(),
        library: run.library,
        series,
    })
}

/// Task-free exploration with the gap-driven proposer.
#[pyfunction]
#[pyo3(signature = (category, n_sites, iterations, seed, holdout=8, snapshot_interval=1, gamma=0.01))]
fn explore(
    category: &str,
    n_sites: usize,
    iterations: usize,
    seed: u64,
    holdout: usize,
    snapshot_interval: u64,
    gamma: f64,
) -> PyResult<RunSummary> {
    let specs = generate_site_family(category, n_sites, seed).map_err(value_err)?;
    let holdout_opts = SuiteOptions {
        seed,
        include_composites: false,
        id_prefix: "h".into(),
    };
    let (holdout_suite, hplans) =
        generate_task_suite(&specs, holdout, &holdout_opts).map_err(runtime_err)?;

    let sites = SiteIndex::new(specs.clone());
    let store = plan_store(hplans);
    let mut policy = OraclePolicy::new(store.clone());
    let judge = ProgrammaticJudge::new(sites.clone());
    let mut inducer = ScriptedInducer::new(store.clone());
    let mut proposer = GapDrivenProposer::new(store.clone());
    let out = run_task_free(
        iterations,
        SkillLibrary::new(),
        &specs,
        &mut policy,
        &judge,
        &mut inducer,
        &mut proposer,
        &LoopOptions::default(),
    )
    .map_err(runtime_err)?;

    let series = holdout_series(
        &sites,
        &store,
        &holdout_suite,
        &out.run.snapshots,
        snapshot_interval,
        gamma,
    )?;
    Ok(RunSummary {
        accepted_proposals: out.run.outcomes.iter().filter(|o| o.accepted).count(),
        trajectories: out.run.trajectories.len(),
        library: out.run.library,
        series,
    })
}

/// Recompute a metrics report from a trajectory JSONL log and a library dir.
#[pyfunction]
#[pyo3(signature = (log_path, library_path, gamma=0.01))]
fn metrics_from_logs(log_path: &str, library_path: &str, gamma: f64) -> PyResult<String> {
    let trajs =
        webskill::harness::artifacts::read_trajectories(Path::new(log_path)).map_err(value_err)?;
    if trajs.is_empty() {
        return Err(runtime_err("the log contains no trajectories"));
    }
    let lib = store::load_library(Path::new(library_path)).map_err(value_err)?;
    let batch = EvaluationBatch::over_trajectories(&trajs, &lib, gamma);
    let report = metrics::report(&batch).map_err(runtime_err)?;
    Ok(serde_json::to_string_pretty(&report).unwrap())
}

#[pymodule]
fn webskill_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Library>()?;
    m.add_class::<SiteFamily>()?;
    m.add_class::<RunSummary>()?;
    m.add_class::<SnapshotPoint>()?;
    m.add_function(wrap_pyfunction!(parse_skill_text, m)?)?;
    m.add_function(wrap_pyfunction!(count_statement_steps, m)?)?;
    m.add_function(wrap_pyfunction!(category_interface, m)?)?;
    m.add_function(wrap_pyfunction!(run_curriculum, m)?)?;
    m.add_function(wrap_pyfunction!(explore, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_from_logs, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
