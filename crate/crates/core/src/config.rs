//! Application configuration: a TOML file, overridden by environment
//! variables, overridden in turn by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::CurationConfig;
use crate::engine::SearchConfig;

pub const ENV_GENERATOR_URL: &str = "MPS_GENERATOR_URL";
pub const ENV_CRITIC_URL: &str = "MPS_CRITIC_URL";
pub const ENV_ENV_CMD: &str = "MPS_ENV_CMD";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub generator_url: Option<String>,
    pub critic_url: Option<String>,
    /// Command line of a stepwise environment speaking JSON lines on stdio.
    pub env_cmd: Option<String>,
    /// Alternative to `env_cmd`: an HTTP environment service.
    pub env_url: Option<String>,
    pub request_timeout_s: f64,
    /// Extra wait past a step's timeout before the reply is abandoned.
    pub step_grace_s: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            generator_url: None,
            critic_url: None,
            env_cmd: None,
            env_url: None,
            request_timeout_s: 120.0,
            step_grace_s: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub backends: BackendConfig,
    pub search: SearchConfig,
    pub curation: CurationConfig,
    /// Tactic score overrides, one `pattern score` per line.
    pub score_overrides: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub log_level: String,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            backends: BackendConfig::default(),
            search: SearchConfig::default(),
            curation: CurationConfig::default(),
            score_overrides: None,
            output_dir: PathBuf::from("mps-out"),
            log_level: "info".into(),
        }
    }
}

impl AppConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Defaults, then the file if given, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with(path, |k| std::env::var(k).ok())
    }

    pub fn load_with(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text, p)?
            }
            None => AppConfig::default(),
        };
        cfg.apply_env(env);
        if let Some(p) = &cfg.score_overrides {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.clone(),
                source,
            })?;
            cfg.search.score_table.apply_overrides(&text).map_err(ConfigError::Invalid)?;
        }
        Ok(cfg)
    }

    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) {
        let set = |slot: &mut Option<String>, key: &str| {
            if let Some(v) = env(key).filter(|v| !v.trim().is_empty()) {
                *slot = Some(v);
            }
        };
        set(&mut self.backends.generator_url, ENV_GENERATOR_URL);
        set(&mut self.backends.critic_url, ENV_CRITIC_URL);
        set(&mut self.backends.env_cmd, ENV_ENV_CMD);
    }

    /// Checks everything a live search needs before any backend is contacted.
    pub fn validate_live(&self) -> Result<(), ConfigError> {
        self.search
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let b = &self.backends;
        if b.generator_url.is_none() {
            return Err(ConfigError::Invalid(format!(
                "no generator endpoint: set backends.generator_url, {ENV_GENERATOR_URL} or --generator-url"
            )));
        }
        if b.critic_url.is_none() {
            return Err(ConfigError::Invalid(format!(
                "no critic endpoint: set backends.critic_url, {ENV_CRITIC_URL} or --critic-url"
            )));
        }
        match (&b.env_cmd, &b.env_url) {
            (None, None) => Err(ConfigError::Invalid(format!(
                "no environment: set backends.env_cmd, {ENV_ENV_CMD}, --env-cmd or --env-url"
            ))),
            (Some(_), Some(_)) => Err(ConfigError::Invalid("env_cmd and env_url are exclusive".into())),
            _ if !(b.request_timeout_s > 0.0 && b.step_grace_s >= 0.0) => {
                Err(ConfigError::Invalid("backend timeouts must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::BudgetSpec;

    const SAMPLE: &str = r#"
output_dir = "runs"

[backends]
generator_url = "http://file-gen:8000"
env_cmd = "lean-repl --stdio"

[search]
budget = "64x4x800x8"
pool_mode = "global"
seed = 7

[curation]
max_excluded_steps = 4
"#;

    #[test]
    fn file_values_and_defaults() {
        let cfg = AppConfig::from_toml(SAMPLE, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.search.budget, BudgetSpec::new(64, 4, 800, 8));
        assert_eq!(cfg.search.seed, 7);
        assert_eq!(cfg.search.per_step_timeout_s, 60.0);
        assert_eq!(cfg.search.whole_search_timeout_s, 3600.0);
        assert_eq!(cfg.curation.max_excluded_steps, 4);
        assert!(cfg.curation.drop_noops);
        assert_eq!(cfg.output_dir, PathBuf::from("runs"));
    }

    #[test]
    fn budget_as_table() {
        let text = "[search.budget]\nn_pass = 2\nn_perspectives = 4\nn_max_iter = 10\nn_samples = 8\n";
        let cfg = AppConfig::from_toml(text, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.search.budget, BudgetSpec::new(2, 4, 10, 8));
        assert!(AppConfig::from_toml("[search]\nbudget = \"1x2\"\n", Path::new("x")).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(AppConfig::from_toml("[backends]\ngenerator = \"x\"\n", Path::new("x")).is_err());
    }

    #[test]
    fn env_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mps.toml");
        std::fs::write(&path, SAMPLE).unwrap();
        let cfg = AppConfig::load_with(Some(&path), |k| match k {
            ENV_GENERATOR_URL => Some("http://env-gen:9000".into()),
            ENV_CRITIC_URL => Some("http://env-critic:9001".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.backends.generator_url.as_deref(), Some("http://env-gen:9000"));
        assert_eq!(cfg.backends.critic_url.as_deref(), Some("http://env-critic:9001"));
        assert_eq!(cfg.backends.env_cmd.as_deref(), Some("lean-repl --stdio"));
        assert!(cfg.validate_live().is_ok());
    }

    #[test]
    fn missing_endpoints_fail_validation() {
        let cfg = AppConfig::default();
        assert!(cfg.validate_live().unwrap_err().to_string().contains("generator"));
    }

    #[test]
    fn score_override_file_applies() {
        let dir = tempfile::tempdir().unwrap();
        let ov = dir.path().join("scores.txt");
        std::fs::write(&ov, "# stricter simp\nsimp 1\n").unwrap();
        let path = dir.path().join("mps.toml");
        std::fs::write(&path, format!("score_overrides = {:?}\n", ov.display().to_string())).unwrap();
        let cfg = AppConfig::load_with(Some(&path), |_| None).unwrap();
        assert_eq!(cfg.search.score_table.score("simp"), 1);
        assert_eq!(cfg.search.score_table.score("exact h"), 6);
    }
}
