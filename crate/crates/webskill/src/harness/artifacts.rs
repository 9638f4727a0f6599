//! Artifact files: versioned JSON/JSONL schemas, deterministic writers, and
//! readers used by `metrics` and `replay`.
//!
//! Every analytic artifact is byte-reproducible for fixed seeds and scripted
//! backends; timestamps and host information are quarantined in `meta.json`.

use crate::dsl::ast::{PrimitiveAction, Statement};
use crate::dsl::{parse_statement, print_statement};
use crate::induction::ProposalOutcome;
use crate::runtime::{StepRecord, Trajectory};
use crate::sim::{SiteSpec, TaskPlan, TaskSuite, TASKS_SCHEMA};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const TRAJECTORY_SCHEMA: &str = "trajectory/1";
pub const AUDIT_SCHEMA: &str = "audit/1";
pub const PLANS_SCHEMA: &str = "plans/1";
pub const SITES_SCHEMA: &str = "sites/1";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Malformed {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}: schema mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("missing artifact: {0}")]
    Missing(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable artifact");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Malformed {
        path: path.to_path_buf(),
        line: 0,
        detail: e.to_string(),
    })
}

// --- site specs -------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct SitesFile {
    pub schema: String,
    pub sites: Vec<SiteSpec>,
}

pub fn write_sites(path: &Path, sites: &[SiteSpec]) -> Result<(), ArtifactError> {
    write_json(
        path,
        &SitesFile {
            schema: SITES_SCHEMA.into(),
            sites: sites.to_vec(),
        },
    )
}

pub fn read_sites(path: &Path) -> Result<Vec<SiteSpec>, ArtifactError> {
    let f: SitesFile = read_json(path)?;
    if f.schema != SITES_SCHEMA {
        return Err(ArtifactError::SchemaMismatch {
            path: path.to_path_buf(),
            expected: SITES_SCHEMA.into(),
            found: f.schema,
        });
    }
    Ok(f.sites)
}

// --- task suites and plans ---------------------------------------------------

pub fn write_suite(path: &Path, suite: &TaskSuite) -> Result<(), ArtifactError> {
    write_json(path, suite)
}

pub fn read_suite(path: &Path) -> Result<TaskSuite, ArtifactError> {
    let suite: TaskSuite = read_json(path)?;
    if suite.schema != TASKS_SCHEMA {
        return Err(ArtifactError::SchemaMismatch {
            path: path.to_path_buf(),
            expected: TASKS_SCHEMA.into(),
            found: suite.schema,
        });
    }
    Ok(suite)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlansFile {
    pub schema: String,
    pub plans: BTreeMap<String, TaskPlan>,
}

pub fn write_plans(path: &Path, plans: &BTreeMap<String, TaskPlan>) -> Result<(), ArtifactError> {
    write_json(
        path,
        &PlansFile {
            schema: PLANS_SCHEMA.into(),
            plans: plans.clone(),
        },
    )
}

pub fn read_plans(path: &Path) -> Result<BTreeMap<String, TaskPlan>, ArtifactError> {
    let f: PlansFile = read_json(path)?;
    if f.schema != PLANS_SCHEMA {
        return Err(ArtifactError::SchemaMismatch {
            path: path.to_path_buf(),
            expected: PLANS_SCHEMA.into(),
            found: f.schema,
        });
    }
    Ok(f.plans)
}

// --- trajectory logs ----------------------------------------------------------

/// JSONL: one `step` record per wall step, one `end` record per trajectory.
/// Statements and expansions are stored in DSL text form.
pub fn append_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<(), ArtifactError> {
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    for traj in trajectories {
        for r in &traj.records {
            let expansion: Vec<String> = r
                .expansion
                .iter()
                .map(|a| print_statement(&a.to_statement()))
                .collect();
            let line = json!({
                "schema": TRAJECTORY_SCHEMA,
                "kind": "step",
                "traj": traj.id,
                "task": traj.task,
                "site": traj.site,
                "index": r.index,
                "obs": r.observation,
                "statement": print_statement(&r.statement),
                "expansion": expansion,
            });
            writeln!(file, "{line}").map_err(io_err(path))?;
        }
        let mut end = json!({
            "schema": TRAJECTORY_SCHEMA,
            "kind": "end",
            "traj": traj.id,
            "task": traj.task,
            "site": traj.site,
            "success": traj.success,
            "terminal": traj.terminal,
            "wall_steps": traj.wall_steps,
        });
        if let Some(fault) = &traj.fault {
            end["fault"] = json!(fault);
        }
        writeln!(file, "{end}").map_err(io_err(path))?;
    }
    Ok(())
}

fn statement_to_action(stmt: &Statement) -> Option<PrimitiveAction> {
    let lib = crate::skill_model::SkillLibrary::new();
    crate::dsl::expand(&lib, "", stmt, &Default::default())
        .ok()
        .and_then(|mut v| if v.len() == 1 { v.pop() } else { None })
}

/// Read every trajectory from a JSONL log, in file order.
pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut order: Vec<String> = Vec::new();
    let mut open: BTreeMap<String, Trajectory> = BTreeMap::new();
    let mut done: Vec<Trajectory> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |detail: String| ArtifactError::Malformed {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail,
        };
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let schema = v["schema"].as_str().unwrap_or("");
        if schema != TRAJECTORY_SCHEMA {
            return Err(ArtifactError::SchemaMismatch {
                path: path.to_path_buf(),
                expected: TRAJECTORY_SCHEMA.into(),
                found: schema.to_string(),
            });
        }
        let id = v["traj"].as_str().unwrap_or_default().to_string();
        let entry = open.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Trajectory {
                id,
                task: v["task"].as_str().unwrap_or_default().to_string(),
                site: v["site"].as_str().unwrap_or_default().to_string(),
                records: Vec::new(),
                terminal: String::new(),
                success: false,
                wall_steps: 0,
                fault: None,
            }
        });
        match v["kind"].as_str().unwrap_or("") {
            "step" => {
                let statement = parse_statement(v["statement"].as_str().unwrap_or(""))
                    .map_err(|e| malformed(format!("bad statement: {e}")))?;
                let mut expansion = Vec::new();
                for e in v["expansion"].as_array().cloned().unwrap_or_default() {
                    let s = parse_statement(e.as_str().unwrap_or(""))
                        .map_err(|e| malformed(format!("bad expansion entry: {e}")))?;
                    let action = statement_to_action(&s)
                        .ok_or_else(|| malformed("expansion entry is not primitive".into()))?;
                    expansion.push(action);
                }
                entry.records.push(StepRecord {
                    index: v["index"].as_u64().unwrap_or(0) as usize,
                    observation: v["obs"].as_str().unwrap_or_default().to_string(),
                    statement,
                    expansion_len: expansion.len(),
                    expansion,
                });
            }
            "end" => {
                entry.success = v["success"].as_bool().unwrap_or(false);
                entry.terminal = v["terminal"].as_str().unwrap_or_default().to_string();
                entry.wall_steps = v["wall_steps"].as_u64().unwrap_or(0) as usize;
                entry.fault = v["fault"].as_str().map(str::to_string);
                let finished_id = entry.id.clone();
                if let Some(t) = open.remove(&finished_id) {
                    done.push(t);
                }
            }
            other => return Err(malformed(format!("unknown record kind `{other}`"))),
        }
    }
    // Preserve file order of completion.
    done.sort_by_key(|t| order.iter().position(|id| id == &t.id).unwrap_or(usize::MAX));
    Ok(done)
}

// --- audit trail ---------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditRecord {
    Outcome {
        schema: String,
        #[serde(flatten)]
        outcome: Box<ProposalOutcome>,
    },
    SiteIterations {
        schema: String,
        counts: BTreeMap<String, usize>,
    },
    Phase {
        schema: String,
        phase: usize,
        site: String,
        tasks: usize,
    },
}

pub fn append_audit(path: &Path, records: &[AuditRecord]) -> Result<(), ArtifactError> {
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    for r in records {
        let line = serde_json::to_string(r).expect("audit record serializes");
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

pub fn audit_outcomes(outcomes: &[ProposalOutcome]) -> Vec<AuditRecord> {
    outcomes
        .iter()
        .map(|o| AuditRecord::Outcome {
            schema: AUDIT_SCHEMA.into(),
            outcome: Box::new(o.clone()),
        })
        .collect()
}

// --- metrics outputs ------------------------------------------------------------

pub fn write_metrics_csv(
    path: &Path,
    series: &[(u64, crate::metrics::MetricsReport)],
) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ArtifactError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    w.write_record(crate::metrics::CSV_COLUMNS)
        .map_err(|e| ArtifactError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
    for (step, report) in series {
        w.write_record(crate::metrics::csv_row(*step, report))
            .map_err(|e| ArtifactError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e),
            })?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsFile {
    pub schema: String,
    pub series: Vec<MetricsPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsPoint {
    pub step: u64,
    #[serde(flatten)]
    pub report: crate::metrics::MetricsReport,
}

pub fn write_metrics_json(
    path: &Path,
    series: &[(u64, crate::metrics::MetricsReport)],
) -> Result<(), ArtifactError> {
    write_json(
        path,
        &MetricsFile {
            schema: "metrics/1".into(),
            series: series
                .iter()
                .map(|(step, report)| MetricsPoint {
                    step: *step,
                    report: report.clone(),
                })
                .collect(),
        },
    )
}

/// Wall-clock and host details live here and only here, so every other
/// artifact hashes identically across runs.
pub fn write_meta(dir: &Path, command: &str) -> Result<(), ArtifactError> {
    let path = dir.join("meta.json");
    let meta = json!({
        "command": command,
        "unix_time": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_json(&path, &meta)
}

/// One forgetting-table row: (phase index, phase site, per-suite cells of
/// (success rate, mean steps)).
pub type ForgettingRow = (usize, String, Vec<(f64, Option<f64>)>);

/// Forgetting table: one row per phase, SR and mean-steps columns per origin
/// suite, plus the SR delta against the previous phase.
pub fn write_forgetting_csv(
    path: &Path,
    suites: &[String],
    rows: &[ForgettingRow],
) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ArtifactError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    let mut header = vec!["phase".to_string(), "phase_site".to_string()];
    for s in suites {
        header.push(format!("{s}_sr"));
        header.push(format!("{s}_mean_steps"));
        header.push(format!("{s}_delta_sr"));
    }
    w.write_record(&header).map_err(|e| ArtifactError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    let mut prev: Option<&Vec<(f64, Option<f64>)>> = None;
    for (phase, site, cells) in rows {
        let mut record = vec![phase.to_string(), site.clone()];
        for (i, (sr, steps)) in cells.iter().enumerate() {
            record.push(format!("{sr:.6}"));
            record.push(steps.map(|v| format!("{v:.6}")).unwrap_or_default());
            let delta = prev.map(|p| sr - p[i].0).unwrap_or(0.0);
            record.push(format!("{delta:.6}"));
        }
        w.write_record(&record).map_err(|e| ArtifactError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
        prev = Some(cells);
    }
    w.flush().map_err(io_err(path))
}

/// Find a trajectory by id across the artifact dir's logs.
pub fn find_trajectory(dir: &Path, id: &str) -> Result<Trajectory, ArtifactError> {
    for name in ["trajectories.jsonl", "eval_trajectories.jsonl"] {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        if let Some(t) = read_trajectories(&path)?.into_iter().find(|t| t.id == id) {
            return Ok(t);
        }
    }
    Err(ArtifactError::Missing(format!(
        "trajectory `{id}` not found under {}",
        dir.display()
    )))
}
