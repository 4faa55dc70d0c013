use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{read_text, PipelineError};
use crate::gateway::ProviderConfig;
use crate::prompt::PromptSpec;
use crate::weights::{default_weight_matrix, WeightMatrix};

pub const DEFAULT_RUNS: u32 = 10;
pub const STUDY_ONE_RUNS: u32 = 50;
pub const DEFAULT_PARSE_RETRY_LIMIT: u32 = 2;
const MAX_PARSE_RETRY_LIMIT: u32 = 1000;

/// Everything needed to run an annotation experiment.
///
/// Loaded from a TOML file:
///
/// ```toml
/// [experiment]
/// reviews = "reviews.csv"      # or .jsonl
/// runs = 10                    # or preset = "study-1" for 50
/// parse_retry_limit = 2
/// out = "results"
/// prompt_spec = "prompt.toml"  # optional; or an inline [prompt] table
///
/// [provider]
/// kind = "mock"
/// seed = 7
///
/// [weights]                    # optional penalty matrix
/// rows = [[0, 1], [1, 0]]
/// ```
///
/// Relative paths are resolved against the config file's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub reviews: PathBuf,
    pub runs: u32,
    pub parse_retry_limit: u32,
    pub out: PathBuf,
    pub prompt: PromptSpec,
    pub provider: ProviderConfig,
    pub weights: WeightMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: ExperimentSection,
    #[serde(default)]
    provider: ProviderConfig,
    #[serde(default)]
    prompt: Option<PromptSpec>,
    #[serde(default)]
    weights: Option<WeightMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    reviews: PathBuf,
    #[serde(default)]
    runs: Option<u32>,
    #[serde(default)]
    preset: Option<String>,
    #[serde(default = "default_retry_limit")]
    parse_retry_limit: u32,
    #[serde(default = "default_out")]
    out: PathBuf,
    #[serde(default)]
    prompt_spec: Option<PathBuf>,
}

fn default_retry_limit() -> u32 {
    DEFAULT_PARSE_RETRY_LIMIT
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads a standalone prompt spec file.
pub fn load_prompt_spec(path: &Path) -> Result<PromptSpec, PipelineError> {
    toml::from_str(&read_text(path)?).map_err(|e| PipelineError::format(path, e.message()))
}

impl ExperimentConfig {
    /// Defaults around a review file: 10 runs, default prompt and weights,
    /// hosted provider.
    pub fn new(reviews: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            reviews: reviews.into(),
            runs: DEFAULT_RUNS,
            parse_retry_limit: DEFAULT_PARSE_RETRY_LIMIT,
            out: out.into(),
            prompt: PromptSpec::default_utaut(),
            provider: ProviderConfig::default(),
            weights: default_weight_matrix(),
        }
    }

    /// 50 runs per review.
    pub fn study_one(mut self) -> Self {
        self.runs = STUDY_ONE_RUNS;
        self
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&read_text(path)?, base).map_err(|e| match e {
            PipelineError::Config(detail) => PipelineError::format(path, detail),
            other => other,
        })
    }

    /// Parses config text, resolving relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| PipelineError::Config(e.message().to_string()))?;
        let exp = file.experiment;
        let runs = match (exp.runs, exp.preset.as_deref()) {
            (Some(r), _) => r,
            (None, None) => DEFAULT_RUNS,
            (None, Some("study-1")) => STUDY_ONE_RUNS,
            (None, Some(other)) => {
                return Err(PipelineError::Config(format!("unknown preset {other:?} (expected study-1)")))
            }
        };
        let prompt = match (file.prompt, exp.prompt_spec) {
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(
                    "give either an inline [prompt] table or experiment.prompt_spec, not both".into(),
                ))
            }
            (Some(p), None) => p,
            (None, Some(path)) => load_prompt_spec(&resolve(base, &path))?,
            (None, None) => PromptSpec::default_utaut(),
        };
        let mut provider = file.provider;
        provider.mock_profile = provider.mock_profile.map(|p| resolve(base, &p));
        let cfg = ExperimentConfig {
            reviews: resolve(base, &exp.reviews),
            runs,
            parse_retry_limit: exp.parse_retry_limit,
            out: resolve(base, &exp.out),
            prompt,
            provider,
            weights: file.weights.unwrap_or_else(default_weight_matrix),
        };
        cfg.validate_values()?;
        Ok(cfg)
    }

    fn validate_values(&self) -> Result<(), PipelineError> {
        if self.runs == 0 {
            return Err(PipelineError::Config("runs must be >= 1".into()));
        }
        if self.parse_retry_limit > MAX_PARSE_RETRY_LIMIT {
            return Err(PipelineError::Config(format!(
                "parse_retry_limit must be <= {MAX_PARSE_RETRY_LIMIT}"
            )));
        }
        self.prompt.validate()?;
        self.provider
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let needed = self.prompt.scale_points() as usize + 1;
        if self.weights.size() < needed {
            return Err(PipelineError::Config(format!(
                "weight matrix is {0}x{0} but the prompt scale uses codes 0..={1}",
                self.weights.size(),
                needed - 1
            )));
        }
        Ok(())
    }

    /// Checks values and that input files exist.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.validate_values()?;
        if !self.reviews.is_file() {
            return Err(PipelineError::Config(format!(
                "review file {} does not exist",
                self.reviews.display()
            )));
        }
        if let Some(p) = &self.provider.mock_profile {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("mock profile {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
