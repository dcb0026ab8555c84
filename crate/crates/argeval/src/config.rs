//! Experiment configuration: the JSON config file schema, validation, and
//! path resolution.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Dataset;
use crate::gateway::ModelSpec;
use crate::metrics::UnparsedPolicy;
use crate::prompts::PromptKind;
use crate::voting::EnsembleStrategy;

/// One corpus source to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: Dataset,
    /// Topic key for topic-file sources, portal name for debate exports.
    pub topic: String,
    pub path: PathBuf,
}

/// Evaluation modes; each produces its own metric rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// One metrics row per base prompt.
    PerPrompt,
    /// Multi-prompt decision with certainty-weighted tie-breaking.
    CertaintyVote,
    /// Single reasoning-table prompt.
    CoT,
    /// Single few-shot prompt with topic exemplars.
    FewShot,
    /// Cross-model vote over per-model decisions.
    Ensemble,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::PerPrompt,
        Mode::CertaintyVote,
        Mode::CoT,
        Mode::FewShot,
        Mode::Ensemble,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    /// Records drawn per (dataset, topic) group.
    pub n: usize,
    pub seed: u64,
    /// Uniform instead of label-stratified selection.
    #[serde(default)]
    pub uniform: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GatewaySettings {
    #[serde(default)]
    pub cache: Option<PathBuf>,
    /// Replay-only: any cache miss is an error.
    #[serde(default)]
    pub offline: bool,
}

fn default_strategy() -> EnsembleStrategy {
    EnsembleStrategy::Plurality
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policies {
    #[serde(default)]
    pub unparsed: UnparsedPolicy,
    /// Optional floor on the winning weighted score; below it a
    /// certainty-weighted decision degrades to NoArgument.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_strategy")]
    pub ensemble_strategy: EnsembleStrategy,
}

impl Default for Policies {
    fn default() -> Self {
        Policies {
            unparsed: UnparsedPolicy::default(),
            gamma: None,
            ensemble_strategy: default_strategy(),
        }
    }
}

fn default_prompts() -> Vec<PromptKind> {
    PromptKind::BASE.to_vec()
}

/// Full experiment description, loadable from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSpec>,
    /// Topic table file; the bundled eight-topic table applies when absent.
    #[serde(default)]
    pub topics: Option<PathBuf>,
    pub models: Vec<ModelSpec>,
    /// The base prompt set used for per-prompt rows and vote decisions.
    #[serde(default = "default_prompts")]
    pub prompts: Vec<PromptKind>,
    pub modes: Vec<Mode>,
    pub sampling: Sampling,
    #[serde(default)]
    pub gateway: GatewaySettings,
    #[serde(default)]
    pub policies: Policies,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {detail}")]
    Unreadable { path: String, detail: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl RunConfig {
    /// Loads, resolves relative paths against the config file's directory,
    /// and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let data = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut config: RunConfig =
            serde_json::from_str(&data).map_err(|e| ConfigError::Unreadable {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        for dataset in &mut config.datasets {
            dataset.path = resolve(&base, &dataset.path);
        }
        if let Some(topics) = &config.topics {
            config.topics = Some(resolve(&base, topics));
        }
        if let Some(cache) = &config.gateway.cache {
            config.gateway.cache = Some(resolve(&base, cache));
        }
        if let Some(out) = &config.output_dir {
            config.output_dir = Some(resolve(&base, out));
        }
        for model in &mut config.models {
            if let Some(script) = model.endpoint.strip_prefix("mock:") {
                let script_path = Path::new(script);
                if !script_path.is_absolute() {
                    model.endpoint = format!("mock:{}", base.join(script_path).display());
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.datasets.is_empty() {
            return fail("at least one dataset is required".to_string());
        }
        if self.models.is_empty() {
            return fail("at least one model is required".to_string());
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.models.len() {
            return fail("model names must be unique".to_string());
        }
        for model in &self.models {
            if model.temperature < 0.0 {
                return fail(format!("model {}: temperature must be >= 0", model.name));
            }
            if model.max_concurrency == 0 {
                return fail(format!(
                    "model {}: max_concurrency must be >= 1",
                    model.name
                ));
            }
        }
        if self.prompts.is_empty() {
            return fail("the prompt set must not be empty".to_string());
        }
        let mut seen = Vec::new();
        for kind in &self.prompts {
            if !PromptKind::BASE.contains(kind) {
                return fail(format!("prompt set may only contain P1..P4, found {kind}"));
            }
            if seen.contains(kind) {
                return fail(format!("duplicate prompt {kind} in prompt set"));
            }
            seen.push(*kind);
        }
        if self.modes.is_empty() {
            return fail("at least one mode is required".to_string());
        }
        if self.modes.contains(&Mode::CertaintyVote) && self.prompts.len() < 2 {
            return fail("CertaintyVote requires at least two prompts".to_string());
        }
        if self.modes.contains(&Mode::Ensemble) && self.models.len() < 2 {
            return fail("Ensemble requires at least two models".to_string());
        }
        if self.sampling.n == 0 {
            return fail("sampling.n must be >= 1".to_string());
        }
        if let Some(gamma) = self.policies.gamma {
            if gamma.is_nan() || gamma < 0.0 {
                return fail("gamma must be >= 0".to_string());
            }
        }
        Ok(())
    }

    /// Content hash binding results to their configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }
}
