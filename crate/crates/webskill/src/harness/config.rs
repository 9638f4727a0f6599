//! Experiment configuration: one TOML file plus environment variables for
//! API keys only.
//!
//! ```toml
//! mode = "task-defined"            # optional; must match the subcommand
//!
//! [family]
//! category = "shopping"            # shopping | coding
//! n_sites = 3
//! seed = 42
//!
//! [tasks]
//! count = 20                       # learning curriculum size
//! holdout = 8                      # held-out evaluation suite size
//! include_composites = false
//! # suite_path = "tasks.json"      # optional externally provided suite
//! # plans_path = "plans.json"      # sidecar required by the oracle policy
//!
//! [backends]
//! policy = "oracle"                # oracle | remote
//! judge = "programmatic"           # programmatic | remote
//! inducer = "scripted"             # scripted | remote
//! proposer = "gap"                 # gap | remote
//!
//! [backends.remote]                # only read when something is remote
//! endpoint = "http://host:8000/v1/chat/completions"
//! model = "some-model"
//! api_key_env = "WEBSKILL_API_KEY"
//! retries = 2
//!
//! [run]
//! snapshot_interval = 1
//! gamma = 0.01
//! min_steps = 2
//! max_steps = 5
//! out_dir = "out"
//!
//! [explore]
//! iterations = 30
//!
//! [[continual.phases]]
//! site = "shopping0"
//! iterations = 6
//! ```

use crate::runtime::chat::ChatConfig;
use crate::skill_model::SizeBounds;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config `{path}`: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TaskDefined,
    TaskFree,
    Continual,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub category: String,
    pub n_sites: usize,
    pub seed: u64,
}

fn default_holdout() -> usize {
    8
}

fn default_count() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TasksConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_holdout")]
    pub holdout: usize,
    #[serde(default)]
    pub include_composites: bool,
    #[serde(default)]
    pub suite_path: Option<PathBuf>,
    #[serde(default)]
    pub plans_path: Option<PathBuf>,
}

impl Default for TasksConfig {
    fn default() -> Self {
        TasksConfig {
            count: 20,
            holdout: default_holdout(),
            include_composites: false,
            suite_path: None,
            plans_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Oracle,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeKind {
    Programmatic,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InducerKind {
    Scripted,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposerKind {
    Gap,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendsConfig {
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default = "default_judge")]
    pub judge: JudgeKind,
    #[serde(default = "default_inducer")]
    pub inducer: InducerKind,
    #[serde(default = "default_proposer")]
    pub proposer: ProposerKind,
    #[serde(default)]
    pub remote: Option<ChatConfig>,
}

fn default_policy() -> PolicyKind {
    PolicyKind::Oracle
}
fn default_judge() -> JudgeKind {
    JudgeKind::Programmatic
}
fn default_inducer() -> InducerKind {
    InducerKind::Scripted
}
fn default_proposer() -> ProposerKind {
    ProposerKind::Gap
}

impl Default for BackendsConfig {
    fn default() -> Self {
        BackendsConfig {
            policy: default_policy(),
            judge: default_judge(),
            inducer: default_inducer(),
            proposer: default_proposer(),
            remote: None,
        }
    }
}

impl BackendsConfig {
    pub fn any_remote(&self) -> bool {
        self.policy == PolicyKind::Remote
            || self.judge == JudgeKind::Remote
            || self.inducer == InducerKind::Remote
            || self.proposer == ProposerKind::Remote
    }
}

fn default_interval() -> u64 {
    1
}
fn default_gamma() -> f64 {
    0.01
}
fn default_min_steps() -> usize {
    2
}
fn default_max_steps() -> usize {
    5
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_interval")]
    pub snapshot_interval: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_min_steps")]
    pub min_steps: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            snapshot_interval: default_interval(),
            gamma: default_gamma(),
            min_steps: default_min_steps(),
            max_steps: default_max_steps(),
            out_dir: default_out_dir(),
        }
    }
}

fn default_iterations() -> usize {
    30
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            iterations: default_iterations(),
        }
    }
}

/// One continual-learning phase: a site and its iteration budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phase {
    pub site: String,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ContinualConfig {
    #[serde(default)]
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    pub family: FamilyConfig,
    #[serde(default)]
    pub tasks: TasksConfig,
    #[serde(default)]
    pub backends: BackendsConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub explore: ExploreConfig,
    #[serde(default)]
    pub continual: ContinualConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn bounds(&self) -> SizeBounds {
        SizeBounds {
            min_steps: self.run.min_steps,
            max_steps: self.run.max_steps,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.family.n_sites == 0 {
            return Err(ConfigError::Invalid("family.n_sites must be at least 1".into()));
        }
        if self.run.min_steps == 0 || self.run.min_steps > self.run.max_steps {
            return Err(ConfigError::Invalid(format!(
                "size bounds {}..{} are not a valid range",
                self.run.min_steps, self.run.max_steps
            )));
        }
        if self.run.snapshot_interval == 0 {
            return Err(ConfigError::Invalid(
                "run.snapshot_interval must be at least 1".into(),
            ));
        }
        if self.run.gamma < 0.0 {
            return Err(ConfigError::Invalid("run.gamma must be non-negative".into()));
        }
        if self.backends.any_remote() && self.backends.remote.is_none() {
            return Err(ConfigError::Invalid(
                "a remote backend is selected but [backends.remote] is missing".into(),
            ));
        }
        if let Some(path) = &self.tasks.suite_path {
            if !path.exists() {
                return Err(ConfigError::Invalid(format!(
                    "tasks.suite_path `{}` does not exist",
                    path.display()
                )));
            }
        }
        if let Some(path) = &self.tasks.plans_path {
            if !path.exists() {
                return Err(ConfigError::Invalid(format!(
                    "tasks.plans_path `{}` does not exist",
                    path.display()
                )));
            }
        }
        for phase in &self.continual.phases {
            if phase.iterations == 0 {
                return Err(ConfigError::Invalid(format!(
                    "continual phase for `{}` has a zero budget",
                    phase.site
                )));
            }
        }
        Ok(())
    }

    /// Check the optional mode tag against the invoked subcommand.
    pub fn check_mode(&self, invoked: Mode) -> Result<(), ConfigError> {
        match self.mode {
            Some(m) if m != invoked => Err(ConfigError::Invalid(format!(
                "config is tagged for {m:?} but the subcommand runs {invoked:?}"
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
[family]
category = "shopping"
n_sites = 3
seed = 42
"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.tasks.count, 20);
        assert_eq!(cfg.run.gamma, 0.01);
        assert_eq!(cfg.bounds().max_steps, 5);
        assert_eq!(cfg.backends.policy, PolicyKind::Oracle);
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
[family]
category = "shopping"
n_sites = 1
seed = 0

[run]
min_steps = 6
max_steps = 5
"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn remote_backend_requires_remote_section() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
[family]
category = "shopping"
n_sites = 1
seed = 0

[backends]
policy = "remote"
"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mode_mismatch_is_flagged() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
mode = "task-free"

[family]
category = "shopping"
n_sites = 1
seed = 0
"#,
        )
        .unwrap();
        assert!(cfg.check_mode(Mode::TaskDefined).is_err());
        assert!(cfg.check_mode(Mode::TaskFree).is_ok());
    }
}
