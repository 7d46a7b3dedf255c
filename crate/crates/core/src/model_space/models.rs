use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{Model, ParamComponent, ParamSpace, RowNormal};
use crate::stats::normal_ln_pdf;
use crate::{CalibError, Result};

/// Normal mean with known standard deviation: rows `y ~ N(mu, sigma)`.
///
/// Paired with a normal prior this is the conjugate family whose posterior,
/// evidence and predictive are available in closed form.
#[derive(Debug, Clone)]
pub struct NormalMean {
    sigma: f64,
    n_obs: usize,
    space: ParamSpace,
}

impl NormalMean {
    pub fn new(sigma: f64, n_obs: usize) -> Result<Self> {
        Self::build(sigma, n_obs, f64::NEG_INFINITY)
    }

    /// Same family restricted to `mu >= 0`.
    pub fn nonnegative(sigma: f64, n_obs: usize) -> Result<Self> {
        Self::build(sigma, n_obs, 0.0)
    }

    fn build(sigma: f64, n_obs: usize, lower: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CalibError::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if n_obs == 0 {
            return Err(CalibError::invalid("n_obs must be at least 1"));
        }
        let space = ParamSpace::new(vec![ParamComponent::new("mu", lower, f64::INFINITY, true)])?;
        Ok(NormalMean { sigma, n_obs, space })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Posterior `(mean, sd)` under a `N(prior_mean, prior_sd)` prior given
    /// the sample mean of `n_obs` rows.
    pub fn conjugate_posterior(&self, prior_mean: f64, prior_sd: f64, ybar: f64) -> (f64, f64) {
        let prec = 1.0 / (prior_sd * prior_sd) + self.n_obs as f64 / (self.sigma * self.sigma);
        let mean = (prior_mean / (prior_sd * prior_sd) + self.n_obs as f64 * ybar / (self.sigma * self.sigma)) / prec;
        (mean, prec.sqrt().recip())
    }
}

impl Model for NormalMean {
    fn name(&self) -> &str {
        "normal_mean"
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn n_obs(&self) -> usize {
        self.n_obs
    }

    fn row_log_density(&self, row: &[f64], theta: &[f64]) -> f64 {
        normal_ln_pdf(row[0], theta[0], self.sigma)
    }

    fn sample_row(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = theta[0] + self.sigma * z;
    }

    fn row_normal(&self, theta: &[f64]) -> Option<RowNormal> {
        Some(RowNormal {
            mean: theta[0],
            sd: self.sigma,
        })
    }
}

/// Construction options for [`GaussianSignalBackground`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignalBackgroundOptions {
    /// Restrict the signal to `mu_s >= 0`.
    pub nonnegative_signal: bool,
    /// Fix `mu_b` instead of treating it as a free nuisance parameter.
    pub known_background: Option<f64>,
    /// Fix `sigma` instead of treating it as a free nuisance parameter.
    pub known_sigma: Option<f64>,
}

/// Overlapping signal and background with Gaussian measurement noise:
/// rows `y ~ N(mu_s + mu_b, sigma)`.
///
/// `mu_s` is the phenomenological parameter; `mu_b` and `sigma` are nuisance
/// parameters unless fixed through [`SignalBackgroundOptions`], in which case
/// they are dropped from the parameter space.
#[derive(Debug, Clone)]
pub struct GaussianSignalBackground {
    n_obs: usize,
    opts: SignalBackgroundOptions,
    space: ParamSpace,
    background_idx: Option<usize>,
    sigma_idx: Option<usize>,
}

impl GaussianSignalBackground {
    /// All three components free, `mu_s` unbounded.
    pub fn new(n_obs: usize) -> Result<Self> {
        Self::with_options(n_obs, SignalBackgroundOptions::default())
    }

    pub fn with_options(n_obs: usize, opts: SignalBackgroundOptions) -> Result<Self> {
        if n_obs == 0 {
            return Err(CalibError::invalid("n_obs must be at least 1"));
        }
        if let Some(s) = opts.known_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CalibError::invalid(format!("known sigma must be positive, got {s}")));
            }
        }
        if let Some(b) = opts.known_background {
            if !b.is_finite() {
                return Err(CalibError::invalid("known background must be finite"));
            }
        }
        let signal_lower = if opts.nonnegative_signal {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        let mut comps = vec![ParamComponent::new("mu_s", signal_lower, f64::INFINITY, true)];
        let mut background_idx = None;
        let mut sigma_idx = None;
        if opts.known_background.is_none() {
            background_idx = Some(comps.len());
            comps.push(ParamComponent::new("mu_b", f64::NEG_INFINITY, f64::INFINITY, false));
        }
        if opts.known_sigma.is_none() {
            sigma_idx = Some(comps.len());
            // open at zero; the closed-bound check admits 0, the density rejects it
            comps.push(ParamComponent::new("sigma", 0.0, f64::INFINITY, false));
        }
        Ok(GaussianSignalBackground {
            n_obs,
            opts,
            space: ParamSpace::new(comps)?,
            background_idx,
            sigma_idx,
        })
    }

    fn mean_sd(&self, theta: &[f64]) -> (f64, f64) {
        let b = match self.background_idx {
            Some(i) => theta[i],
            None => self.opts.known_background.unwrap_or(0.0),
        };
        let s = match self.sigma_idx {
            Some(i) => theta[i],
            None => self.opts.known_sigma.unwrap_or(1.0),
        };
        (theta[0] + b, s)
    }
}

impl Model for GaussianSignalBackground {
    fn name(&self) -> &str {
        "gaussian_signal_background"
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn n_obs(&self) -> usize {
        self.n_obs
    }

    fn row_log_density(&self, row: &[f64], theta: &[f64]) -> f64 {
        let (m, s) = self.mean_sd(theta);
        if s <= 0.0 {
            return f64::NAN;
        }
        normal_ln_pdf(row[0], m, s)
    }

    fn sample_row(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let (m, s) = self.mean_sd(theta);
        let z: f64 = StandardNormal.sample(rng);
        out[0] = m + s * z;
    }

    fn row_normal(&self, theta: &[f64]) -> Option<RowNormal> {
        let (mean, sd) = self.mean_sd(theta);
        Some(RowNormal { mean, sd })
    }
}
