//! Run configuration, read from a TOML file and overridden by flags.
//!
//! ```toml
//! schema = "object_relation"
//!
//! [weights]
//! rel_recall = 3.0
//!
//! [matching]
//! iou_threshold = 0.5
//!
//! [eval]
//! exclude_failed = false
//! precision_denominator = "emitted"
//!
//! [judge]
//! endpoint = "http://localhost:8000/v1/chat/completions"
//! model = "judge"
//!
//! [corruption]
//! object_dropout = 0.1
//!
//! [service]
//! workers = 4
//! ```
//!
//! Every section and key is optional; omitted values take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sgkit_core::metrics::PrecisionDenominator;
use sgkit_core::prep::CorruptionPolicy;
use sgkit_core::{MatchConfig, RewardWeights, Schema};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub exclude_failed: bool,
    pub precision_denominator: PrecisionDenominator,
    /// Samples evaluated concurrently in soft mode.
    pub max_in_flight: usize,
    pub k: Vec<i64>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            exclude_failed: false,
            precision_denominator: PrecisionDenominator::Emitted,
            max_in_flight: 8,
            k: vec![10, 20, 50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeSettings {
    pub endpoint: Option<String>,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for JudgeSettings {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: "judge".into(),
            token_env: "SGKIT_JUDGE_TOKEN".into(),
            timeout_secs: 30,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub workers: usize,
    /// Longest accepted request line in bytes.
    pub max_line_bytes: usize,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            max_line_bytes: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema: Schema,
    pub weights: RewardWeights,
    pub matching: MatchConfig,
    pub eval: EvalSettings,
    pub judge: JudgeSettings,
    pub corruption: CorruptionPolicy,
    pub service: ServiceSettings,
}

impl Config {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => {
                Self::from_toml(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)
            }
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.weights.validate()?;
        self.matching.validate()?;
        self.corruption.validate()?;
        if self.service.workers == 0 || self.eval.max_in_flight == 0 {
            return Err(CliError::Usage("worker counts must be positive".into()));
        }
        Ok(())
    }

    /// The configuration as JSON, for echoing into reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

/// Reads a weights file: a TOML table of [`RewardWeights`] fields.
pub fn load_weights(path: &Path) -> CliResult<RewardWeights> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
