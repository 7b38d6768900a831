//! Declarative run configuration: one TOML document drives the whole
//! pipeline, with CLI flags overriding individual fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::DistinctMode;
use crate::cell::Resolution;
use crate::eval::EvalConfig;
use crate::impute::ImputeConfig;
use crate::model::InputSchema;
use crate::segment::SegmenterConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config field {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputConfig {
    /// Delimited-text sources, all sharing one schema.
    pub paths: Vec<PathBuf>,
    /// Field delimiter, one byte.
    pub delimiter: String,
    pub schema: InputSchema,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            paths: Vec::new(),
            delimiter: ",".into(),
            schema: InputSchema::identity(),
        }
    }
}

impl InputConfig {
    pub fn delimiter_byte(&self) -> Result<u8, ConfigError> {
        let bytes = self.delimiter.as_bytes();
        if bytes.len() != 1 {
            return Err(invalid(
                "input.delimiter",
                format!("must be a single byte, got `{}`", self.delimiter),
            ));
        }
        Ok(bytes[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub resolution: u8,
    pub distinct_mode: DistinctMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 9,
            distinct_mode: DistinctMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    /// Directory all artifacts are written into.
    pub dir: PathBuf,
    /// Worker threads for parallel stages; 0 means available parallelism.
    pub workers: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: InputConfig,
    pub segmenter: SegmenterConfig,
    pub grid: GridConfig,
    pub impute: ImputeConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    /// Field-level validation; fails on the first offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.input.delimiter_byte()?;
        self.segmenter
            .validate()
            .map_err(|m| invalid("segmenter", m))?;
        Resolution::new(self.grid.resolution)
            .map_err(|e| invalid("grid.resolution", e.to_string()))?;
        self.impute.validate().map_err(|m| invalid("impute", m))?;
        if !(self.eval.split_ratio > 0.0 && self.eval.split_ratio < 1.0) {
            return Err(invalid("eval.split_ratio", "must be in (0, 1)"));
        }
        if self.eval.gap_durations_min.is_empty() || self.eval.gap_durations_min.contains(&0) {
            return Err(invalid(
                "eval.gap_durations_min",
                "must be non-empty and positive",
            ));
        }
        if self.eval.resample_spacing_m <= 0.0 {
            return Err(invalid("eval.resample_spacing_m", "must be > 0"));
        }
        // Method entries are validated in depth by the eval harness; surface
        // those messages with the config field prefix.
        if !self.eval.methods.is_empty() {
            let mut probe = self.eval.clone();
            probe.methods = self.eval.methods.clone();
            probe
                .validate()
                .map_err(|e| invalid("eval.methods", e.to_string()))?;
        }
        Ok(())
    }

    /// Evaluation methods to run: the configured list, or a default pair of
    /// the grid-backed method plus the straight-line baseline.
    pub fn eval_methods(&self) -> Vec<crate::eval::MethodSpec> {
        use crate::eval::{MethodKind, MethodSpec};
        if !self.eval.methods.is_empty() {
            return self.eval.methods.clone();
        }
        vec![
            MethodSpec {
                label: format!(
                    "habit-r{}-t{}-{}",
                    self.grid.resolution,
                    self.impute.tolerance_m as i64,
                    match self.impute.projection {
                        crate::impute::Projection::Center => "c",
                        crate::impute::Projection::Median => "w",
                    }
                ),
                kind: MethodKind::Habit {
                    resolution: self.grid.resolution,
                    impute: self.impute.clone(),
                },
            },
            MethodSpec {
                label: "sli".into(),
                kind: MethodKind::Sli,
            },
        ]
    }
}
