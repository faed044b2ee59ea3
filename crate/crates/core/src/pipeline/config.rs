//! Pipeline configuration file and validation.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{BackendTag, GenerationParams, LiveConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("invalid config {0}: {1}")]
    Parse(PathBuf, toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every input `.c` file is a program.
    #[default]
    File,
    /// Every input directory is one multi-file program.
    Project,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub mode: Mode,
    pub backend: BackendTag,
    /// Scripted replies for the mock backend (TOML).
    pub mock_table: Option<PathBuf>,
    /// File name of a reference Rust program next to each input; the mock
    /// backend answers translation prompts from it.
    pub mock_reference: Option<String>,
    pub out: PathBuf,
    pub jobs: usize,
    pub include_paths: Vec<PathBuf>,
    /// `<tests_dir>/<program>/*.in`, or `<tests_dir>/*.in` for a single
    /// program. Defaults to a `tests` directory beside each input.
    pub tests_dir: Option<PathBuf>,
    pub max_iterations: usize,
    pub max_rounds: usize,
    pub retranslations: u32,
    pub region_retries: usize,
    pub probe_cap: usize,
    pub time_limit_ms: u64,
    pub toolchain_timeout_secs: u64,
    pub float_tolerance: f64,
    /// Minimum SynCor percentage for a zero exit status.
    pub syncor_threshold: f64,
    pub generation: GenerationParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: Vec::new(),
            mode: Mode::File,
            backend: BackendTag::Mock,
            mock_table: None,
            mock_reference: None,
            out: PathBuf::from("xlat-out"),
            jobs: 1,
            include_paths: Vec::new(),
            tests_dir: None,
            max_iterations: 5,
            max_rounds: 3,
            retranslations: 2,
            region_retries: 3,
            probe_cap: crate::semantic::localize::DEFAULT_PROBE_CAP,
            time_limit_ms: 5000,
            toolchain_timeout_secs: 300,
            float_tolerance: crate::semantic::diff::FLOAT_TOLERANCE,
            syncor_threshold: 0.0,
            generation: GenerationParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(origin.to_path_buf(), e))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn time_limit(&self) -> Duration {
        Duration::from_millis(self.time_limit_ms)
    }

    /// Checks that need no pipeline work: budgets, paths, backend setup.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.inputs.is_empty() {
            return bad("no input programs given".into());
        }
        for p in &self.inputs {
            if !p.exists() {
                return bad(format!("input {} does not exist", p.display()));
            }
            if self.mode == Mode::Project && !p.is_dir() {
                return bad(format!("project input {} is not a directory", p.display()));
            }
        }
        for (name, v) in [
            ("jobs", self.jobs),
            ("max_iterations", self.max_iterations),
            ("max_rounds", self.max_rounds),
            ("region_retries", self.region_retries),
            ("probe_cap", self.probe_cap),
            ("time_limit_ms", self.time_limit_ms as usize),
            ("toolchain_timeout_secs", self.toolchain_timeout_secs as usize),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.float_tolerance.is_finite() && self.float_tolerance >= 0.0) {
            return bad("float_tolerance must be a non-negative number".into());
        }
        if !(0.0..=100.0).contains(&self.syncor_threshold) {
            return bad("syncor_threshold must be between 0 and 100".into());
        }
        for p in self.include_paths.iter().chain(&self.tests_dir).chain(&self.mock_table) {
            if !p.exists() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        if self.backend == BackendTag::Live && LiveConfig::from_env().is_none() {
            return bad(format!(
                "the live backend needs {} in the environment",
                crate::llm::ENV_ENDPOINT
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_partial_and_reject_unknown() {
        let c = PipelineConfig::parse(
            "inputs = [\"a.c\"]\nbackend = \"replay\"\nmax_rounds = 2\n[generation]\ntemperature = 0.2\n",
            Path::new("x.toml"),
        )
        .unwrap();
        assert_eq!(c.backend, BackendTag::Replay);
        assert_eq!(c.max_rounds, 2);
        assert_eq!(c.max_iterations, 5);
        assert_eq!(c.generation.temperature, 0.2);
        assert_eq!(c.generation.max_tokens, GenerationParams::default().max_tokens);
        assert!(PipelineConfig::parse("colour = 1\n", Path::new("x.toml")).is_err());
        assert!(PipelineConfig::parse("backend = \"cloud\"\n", Path::new("x.toml")).is_err());
        let back = PipelineConfig::parse(&c.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("a.c");
        std::fs::write(&input, "int main(void){return 0;}\n").unwrap();
        let ok = PipelineConfig {
            inputs: vec![input.clone()],
            ..Default::default()
        };
        ok.validate().unwrap();
        let cases = [
            PipelineConfig::default(),
            PipelineConfig {
                inputs: vec![dir.path().join("missing.c")],
                ..ok.clone()
            },
            PipelineConfig {
                max_rounds: 0,
                ..ok.clone()
            },
            PipelineConfig {
                mode: Mode::Project,
                ..ok.clone()
            },
            PipelineConfig {
                syncor_threshold: 101.0,
                ..ok.clone()
            },
            PipelineConfig {
                tests_dir: Some(dir.path().join("nope")),
                ..ok.clone()
            },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))), "{c:?}");
        }
    }
}
