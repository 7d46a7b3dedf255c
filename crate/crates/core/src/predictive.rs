//! Predictive distributions for a single observation row, the predictive
//! score and a Monte Carlo Kullback-Leibler divergence.

use std::fmt;
use std::sync::Arc;

use crate::mc::{check_replications, replicate, RiskEstimate};
use crate::model_space::{Model, Observation, ParamPoint};
use crate::posterior_grid::GridPosterior;
use crate::rng::SeedStream;
use crate::stats::{log_sum_exp, mean_sd};
use crate::{CalibError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictiveKind {
    PluginPoint,
    PriorPredictive,
    PosteriorPredictive,
}

type RowDensity = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A density over single observation rows.
#[derive(Clone)]
pub struct PredictiveDistribution {
    kind: PredictiveKind,
    dim: usize,
    log_density: Arc<RowDensity>,
}

impl fmt::Debug for PredictiveDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredictiveDistribution")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .finish()
    }
}

impl PredictiveDistribution {
    pub fn new(kind: PredictiveKind, dim: usize, log_density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PredictiveDistribution {
            kind,
            dim,
            log_density: Arc::new(log_density),
        }
    }

    pub fn kind(&self) -> PredictiveKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_density(&self, row: &[f64]) -> f64 {
        (self.log_density)(row)
    }

    /// Trapezoid integral of the density over `[lo, hi]` for scalar rows.
    pub fn integrate_1d(&self, lo: f64, hi: f64, nodes: usize) -> Result<f64> {
        if self.dim != 1 {
            return Err(CalibError::invalid(
                "numerical normalization is only checked for scalar rows",
            ));
        }
        if nodes < 2 || !(hi > lo) {
            return Err(CalibError::invalid("need hi > lo and at least two nodes"));
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        let mut acc = 0.0;
        for i in 0..nodes {
            let w = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
            acc += w * self.log_density(&[lo + h * i as f64]).exp();
        }
        Ok(acc * h)
    }
}

/// `pi(y | theta_hat)`.
pub fn plugin_predictive(model: Arc<dyn Model>, theta_hat: &ParamPoint) -> Result<PredictiveDistribution> {
    model.param_space().check(theta_hat.values())?;
    let theta = theta_hat.values().to_vec();
    let dim = model.obs_dim();
    Ok(PredictiveDistribution::new(
        PredictiveKind::PluginPoint,
        dim,
        move |row| model.row_log_density(row, &theta),
    ))
}

/// `pi(y | y~) = sum_k w_k pi(y | theta_k)` over the posterior grid.
pub fn posterior_predictive(model: Arc<dyn Model>, gp: &GridPosterior) -> Result<PredictiveDistribution> {
    mixture(model, gp, PredictiveKind::PosteriorPredictive)
}

/// Mixture over a grid whose weights approximate the prior.
pub fn prior_predictive(model: Arc<dyn Model>, prior_grid: &GridPosterior) -> Result<PredictiveDistribution> {
    mixture(model, prior_grid, PredictiveKind::PriorPredictive)
}

fn mixture(model: Arc<dyn Model>, gp: &GridPosterior, kind: PredictiveKind) -> Result<PredictiveDistribution> {
    let d = model.param_space().dim();
    if gp.components() != (0..d).collect::<Vec<_>>().as_slice() {
        return Err(CalibError::Shape(
            "predictive mixture needs a posterior over every parameter component".into(),
        ));
    }
    let support: Vec<(f64, Vec<f64>)> = gp
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (w.ln(), gp.node(i)))
        .collect();
    let dim = model.obs_dim();
    Ok(PredictiveDistribution::new(kind, dim, move |row| {
        let terms: Vec<f64> = support
            .iter()
            .map(|(lw, theta)| lw + model.row_log_density(row, theta))
            .collect();
        log_sum_exp(&terms)
    }))
}

/// Per-row predictive score `-(1/N) sum_i log pi_P(y_i)` with the standard
/// error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub std_error: f64,
    pub n_rows: usize,
}

pub fn predictive_score(pred: &PredictiveDistribution, holdout: &Observation) -> Result<Score> {
    if holdout.dim() != pred.dim() {
        return Err(CalibError::Shape(format!(
            "holdout rows have dimension {}, predictive expects {}",
            holdout.dim(),
            pred.dim()
        )));
    }
    let v: Vec<f64> = holdout.rows().map(|r| -pred.log_density(r)).collect();
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(CalibError::Evaluation(format!("holdout log density is {}", -bad)));
    }
    let (m, sd) = mean_sd(&v);
    let n = v.len();
    Ok(Score {
        value: m,
        std_error: if n > 1 { sd / (n as f64).sqrt() } else { 0.0 },
        n_rows: n,
    })
}

/// `-(1/N) sum_i log pi(y_i | theta)`: the score of the true process on a
/// holdout, whose expectation is the entropy of the truth.
pub fn empirical_entropy(model: &dyn Model, theta: &ParamPoint, holdout: &Observation) -> Result<Score> {
    model.param_space().check(theta.values())?;
    if holdout.dim() != model.obs_dim() {
        return Err(CalibError::Shape("holdout and model rows differ in dimension".into()));
    }
    let v: Vec<f64> = holdout
        .rows()
        .map(|r| -model.row_log_density(r, theta.values()))
        .collect();
    let (m, sd) = mean_sd(&v);
    let n = v.len();
    Ok(Score {
        value: m,
        std_error: if n > 1 { sd / (n as f64).sqrt() } else { 0.0 },
        n_rows: n,
    })
}

/// `E_{y ~ pi(y | theta)}[log pi(y | theta) - log pi_P(y)]` by Monte Carlo
/// over `n_mc` rows.
pub fn kl_divergence_mc(
    model: &dyn Model,
    theta: &ParamPoint,
    pred: &PredictiveDistribution,
    n_mc: usize,
    stream: &SeedStream,
) -> Result<RiskEstimate> {
    check_replications(n_mc, 2)?;
    model.param_space().check(theta.values())?;
    if pred.dim() != model.obs_dim() {
        return Err(CalibError::Shape(
            "predictive and model rows differ in dimension".into(),
        ));
    }
    let t = theta.values();
    let d = model.obs_dim();
    let v = replicate(stream, n_mc, |_, rng| {
        let mut row = vec![0.0; d];
        model.sample_row(t, rng, &mut row);
        model.row_log_density(&row, t) - pred.log_density(&row)
    });
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(CalibError::Evaluation(format!("log density ratio is {bad}")));
    }
    Ok(RiskEstimate::from_samples(&v, 0))
}

/// `n_rows` fresh rows from `pi(y | theta)`, for use as a holdout.
pub fn sample_holdout(
    model: &dyn Model,
    theta: &ParamPoint,
    n_rows: usize,
    stream: &SeedStream,
) -> Result<Observation> {
    model.param_space().check(theta.values())?;
    let d = model.obs_dim();
    let t = theta.values();
    let rows = replicate(stream, n_rows, |_, rng| {
        let mut row = vec![0.0; d];
        model.sample_row(t, rng, &mut row);
        row
    });
    Observation::new(n_rows, d, rows.concat())
}
