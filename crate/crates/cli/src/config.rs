//! JSON study configuration.

use std::path::{Path, PathBuf};

use calib_core::model_space::SignalBackgroundOptions;
use calib_core::posterior_grid::GridAxis;
use calib_core::{GaussianSignalBackground, GridSpec, IndependentPrior, Marginal, Model, NormalMean};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Sbc,
    Power,
    Coverage,
    Minimax,
    Discovery,
    Limits,
    Predictive,
}

pub const STUDY_KINDS: [&str; 7] = [
    "sbc",
    "power",
    "coverage",
    "minimax",
    "discovery",
    "limits",
    "predictive",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    NormalMean {
        sigma: f64,
        n_obs: usize,
        #[serde(default)]
        nonnegative: bool,
    },
    SignalBackground {
        n_obs: usize,
        #[serde(default)]
        nonnegative_signal: bool,
        #[serde(default)]
        known_background: Option<f64>,
        #[serde(default)]
        known_sigma: Option<f64>,
    },
}

impl ModelConfig {
    pub fn build(&self) -> calib_core::Result<Box<dyn Model>> {
        Ok(match *self {
            ModelConfig::NormalMean {
                sigma,
                n_obs,
                nonnegative,
            } => {
                if nonnegative {
                    Box::new(NormalMean::nonnegative(sigma, n_obs)?)
                } else {
                    Box::new(NormalMean::new(sigma, n_obs)?)
                }
            }
            ModelConfig::SignalBackground {
                n_obs,
                nonnegative_signal,
                known_background,
                known_sigma,
            } => Box::new(GaussianSignalBackground::with_options(
                n_obs,
                SignalBackgroundOptions {
                    nonnegative_signal,
                    known_background,
                    known_sigma,
                },
            )?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalConfig {
    Normal { mean: f64, sd: f64 },
    Uniform { lower: f64, upper: f64 },
    HalfNormal { sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Point { value: f64 },
}

impl From<MarginalConfig> for Marginal {
    fn from(m: MarginalConfig) -> Self {
        match m {
            MarginalConfig::Normal { mean, sd } => Marginal::Normal { mean, sd },
            MarginalConfig::Uniform { lower, upper } => Marginal::Uniform { lower, upper },
            MarginalConfig::HalfNormal { sd } => Marginal::HalfNormal { sd },
            MarginalConfig::LogNormal { mu, sigma } => Marginal::LogNormal { mu, sigma },
            MarginalConfig::Point { value } => Marginal::Point(value),
        }
    }
}

pub fn build_prior(model: &dyn Model, marginals: &[MarginalConfig]) -> calib_core::Result<IndependentPrior> {
    IndependentPrior::new(
        model.param_space().clone(),
        marginals.iter().map(|&m| m.into()).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
}

pub fn build_grid(axes: &[AxisConfig]) -> calib_core::Result<GridSpec> {
    GridSpec::new(axes.iter().map(|a| GridAxis::new(a.lower, a.upper, a.nodes)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticConfig {
    Mean,
    AbsMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalConfig {
    /// Two-sided `ybar ± z sigma / sqrt(n)` with confidence `alpha`.
    Normal,
    /// One-sided `[0, max(0, ybar) + z sigma / sqrt(n))`.
    Anchored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    ScaledMean { c: f64 },
    Mle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleConfig {
    /// Analytic-null test of `statistic` at `null_theta`.
    Nhst,
    /// Posterior mass in `[-theta0, theta0]` under `prior` and `grid`.
    Rope,
    BayesFactor {
        absence_prior: Vec<MarginalConfig>,
        presence_prior: Vec<MarginalConfig>,
        #[serde(default)]
        absence_grid: Option<Vec<AxisConfig>>,
        #[serde(default)]
        presence_grid: Option<Vec<AxisConfig>>,
        #[serde(default = "half")]
        presence_prob: f64,
    },
    PredictiveScore {
        absence_prior: Vec<MarginalConfig>,
        presence_prior: Vec<MarginalConfig>,
        grid: Vec<AxisConfig>,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingConfig {
    ModelPrior,
    Conditional {
        absence: Vec<Vec<f64>>,
        presence: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimLossConfig {
    pub l1: f64,
    pub l2: f64,
    #[serde(default = "equal_weights")]
    pub truth_weights: [f64; 2],
}

fn equal_weights() -> [f64; 2] {
    [0.5, 0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateConfig {
    /// `pi(y | theta)` at a fixed configuration.
    Plugin { label: String, theta: Vec<f64> },
    /// Posterior predictive after a training observation drawn at the truth.
    Posterior { label: String },
}

impl CandidateConfig {
    pub fn label(&self) -> &str {
        match self {
            CandidateConfig::Plugin { label, .. } | CandidateConfig::Posterior { label } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictiveConfig {
    pub truth: Vec<f64>,
    pub candidates: Vec<CandidateConfig>,
    pub holdout_rows: usize,
    pub n_mc: usize,
}

fn default_alpha() -> f64 {
    0.95
}

fn default_loss_p() -> f64 {
    2.0
}

/// A complete study description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub model: ModelConfig,
    pub n_rep: usize,
    pub seed: u64,
    #[serde(default)]
    pub prior: Option<Vec<MarginalConfig>>,
    #[serde(default)]
    pub grid: Option<Vec<AxisConfig>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Configurations for power, coverage, minimax and anchored coverage.
    #[serde(default)]
    pub theta_grid: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub null_theta: Option<Vec<f64>>,
    #[serde(default)]
    pub statistic: Option<StatisticConfig>,
    /// Smallest `|phenom|` considered when reporting minimum power.
    #[serde(default)]
    pub phenom_min: Option<f64>,
    #[serde(default)]
    pub power_target: Option<f64>,
    #[serde(default)]
    pub interval: Option<IntervalConfig>,
    #[serde(default)]
    pub family: Option<Vec<EstimatorConfig>>,
    #[serde(default = "default_loss_p")]
    pub loss_p: f64,
    /// Finite `[lower, upper]` per component for maximum likelihood.
    #[serde(default)]
    pub search_box: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub rule: Option<RuleConfig>,
    #[serde(default)]
    pub sampling: Option<SamplingConfig>,
    #[serde(default)]
    pub claim_loss: Option<ClaimLossConfig>,
    #[serde(default)]
    pub predictive: Option<PredictiveConfig>,
}

/// Parsed configuration together with the raw JSON it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: StudyConfig,
    pub raw: Value,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Parse a configuration, naming the offending field on failure.
pub fn parse(text: &str) -> Result<LoadedConfig, CliError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let obj = raw
        .as_object()
        .ok_or_else(|| CliError::Config("configuration must be a JSON object".into()))?;
    match obj.get("study") {
        None => return Err(CliError::Config("field `study` is required".into())),
        Some(Value::String(s)) if STUDY_KINDS.contains(&s.as_str()) => {}
        Some(other) => {
            return Err(CliError::Config(format!(
                "field `study`: unknown study kind {other}; expected one of {}",
                STUDY_KINDS.join(", ")
            )))
        }
    }
    for required in ["seed", "n_rep", "model"] {
        if !obj.contains_key(required) {
            return Err(CliError::Config(format!("field `{required}` is required")));
        }
    }
    let config: StudyConfig = serde_json::from_value(raw.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(LoadedConfig { config, raw })
}
