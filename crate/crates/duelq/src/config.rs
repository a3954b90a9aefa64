//! Run configuration: one JSON document covering data, environment, agent,
//! network, and run-level settings. Command-line flags override file values,
//! which override defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentConfig;
use crate::env::EnvConfig;
use crate::market_data::BarFormat;
use crate::neural::{ArchTag, NetSpec};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config invalid at {field}: {problem}")]
    ConfigInvalid { field: String, problem: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Input CSV of minute bars.
    pub path: PathBuf,
    pub format: BarFormat,
    /// Timestamp (epoch-seconds) separating training data (before) from
    /// evaluation data (at or after). When absent, the boundary falls at
    /// 80% of the rows.
    pub split_boundary: Option<i64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("bars.csv"),
            format: BarFormat::default(),
            split_boundary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub total_steps: u64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub eval_every: u64,
    pub log_every: u64,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            seed: 0,
            checkpoint_every: 0,
            eval_every: 0,
            log_every: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub format_version: u32,
    pub data: DataConfig,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub net: NetSpec,
    pub run: RunSection,
}

impl RunConfig {
    /// Loads and validates a config file. Referenced input paths must exist.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut config: RunConfig = serde_json::from_str(&text)?;
        if config.format_version == 0 {
            config.format_version = CONFIG_FORMAT_VERSION;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, problem: String| ConfigError::ConfigInvalid {
            field: field.to_string(),
            problem,
        };
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(invalid(
                "format_version",
                format!("unsupported version {}", self.format_version),
            ));
        }
        if !self.data.path.exists() {
            return Err(invalid(
                "data.path",
                format!("{} does not exist", self.data.path.display()),
            ));
        }
        self.env
            .validate()
            .map_err(|p| invalid("env", p))?;
        self.agent
            .validate()
            .map_err(|p| invalid("agent", p))?;
        self.net
            .validate()
            .map_err(|p| invalid("net", p))?;
        if self.net.arch == ArchTag::Cnn {
            // The conv stack must fit the configured window.
            let mut len = self.env.window_n;
            for (i, c) in self.net.conv.iter().enumerate() {
                if c.kernel > len {
                    return Err(invalid(
                        &format!("net.conv[{i}]"),
                        format!("kernel {} exceeds remaining length {len}", c.kernel),
                    ));
                }
                len = (len - c.kernel) / c.stride + 1;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn config_with_data() -> (tempfile::TempDir, RunConfig) {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("bars.csv");
        let mut f = std::fs::File::create(&data).unwrap();
        writeln!(f, "timestamp,open,high,low,close,volume").unwrap();
        writeln!(f, "0,100,101,99,100,1").unwrap();
        let config = RunConfig {
            format_version: CONFIG_FORMAT_VERSION,
            data: DataConfig { path: data, ..DataConfig::default() },
            ..RunConfig::default()
        };
        (dir, config)
    }

    #[test]
    fn round_trip_is_field_identical() {
        let (_dir, config) = config_with_data();
        let json = config.to_json();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn sparse_file_fills_defaults() {
        let (dir, config) = config_with_data();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            format!(
                "{{\"data\":{{\"path\":{}}},\"run\":{{\"seed\":7}}}}",
                serde_json::to_string(&config.data.path).unwrap()
            ),
        )
        .unwrap();
        let loaded = RunConfig::load(&path).unwrap();
        assert_eq!(loaded.run.seed, 7);
        assert_eq!(loaded.env, EnvConfig::default());
        assert_eq!(loaded.agent.batch_size, AgentConfig::default().batch_size);
    }

    #[test]
    fn missing_data_path_is_config_invalid() {
        let (dir, mut config) = config_with_data();
        config.data.path = dir.path().join("nope.csv");
        match config.validate() {
            Err(ConfigError::ConfigInvalid { field, .. }) => assert_eq!(field, "data.path"),
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn bad_env_field_reports_path() {
        let (_dir, mut config) = config_with_data();
        config.env.window_n = 0;
        match config.validate() {
            Err(ConfigError::ConfigInvalid { field, .. }) => assert_eq!(field, "env"),
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn cnn_kernel_must_fit_window() {
        let (_dir, mut config) = config_with_data();
        config.env.window_n = 4;
        config.net.arch = ArchTag::Cnn;
        match config.validate() {
            Err(ConfigError::ConfigInvalid { field, .. }) => {
                assert!(field.starts_with("net.conv"))
            }
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }
}
