//! Upper limits on a nonnegative phenomenological parameter.
//!
//! Posterior limits solve `integral_0^theta pi(theta | y) = 1 - alpha`, so
//! with `alpha = 0.05` the limit is the 95% posterior quantile.

use crate::csv::{fmt_f64, CsvTable};
use crate::frequentist::{ConfidenceSet, SetEstimator};
use crate::mc::{check_replications, exclude_failures, replicate};
use crate::model_space::{sample_conditional_joint, Model, Observation, Prior};
use crate::posterior_grid::{build_grid_posterior, GridPosterior, GridSpec};
use crate::rng::SeedStream;
use crate::stats::{empirical_quantile, normal_quantile, sorted};
use crate::{CalibError, Result};

/// Quantile levels of the expected limit band.
pub const BAND_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    AnchoredFrequentist,
    PosteriorQuantile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitResult {
    pub upper: f64,
    pub level: f64,
    pub kind: LimitKind,
}

fn check_level(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CalibError::Domain {
            name: "alpha".into(),
            value: alpha,
            lower: 0.0,
            upper: 1.0,
        });
    }
    Ok(())
}

fn location_sd(model: &dyn Model) -> Result<f64> {
    let space = model.param_space();
    if space.dim() != 1 {
        return Err(CalibError::invalid(format!(
            "anchored interval needs a one-parameter location family, `{}` has {} parameters",
            model.name(),
            space.dim()
        )));
    }
    let at = space.component(0).lower.max(0.0);
    let rn = model.row_normal(&[at]).ok_or_else(|| {
        CalibError::invalid(format!(
            "anchored interval needs normal rows; `{}` has none",
            model.name()
        ))
    })?;
    Ok(rn.sd / (model.n_obs() as f64).sqrt())
}

/// `[0, max(0, ybar) + z_alpha sigma / sqrt(n))` for a normal location
/// family with known `sigma`; coverage is at least `alpha` for every
/// `theta >= 0`.
pub fn anchored_interval(model: &dyn Model, y: &Observation, alpha: f64) -> Result<LimitResult> {
    check_level(alpha)?;
    let se = location_sd(model)?;
    if y.n_rows() != model.n_obs() || y.dim() != 1 {
        return Err(CalibError::Shape("observation does not match the model".into()));
    }
    Ok(LimitResult {
        upper: y.column_mean(0).max(0.0) + normal_quantile(alpha) * se,
        level: alpha,
        kind: LimitKind::AnchoredFrequentist,
    })
}

/// [`anchored_interval`] as a set estimator, for coverage studies.
pub fn anchored_set_estimator(model: &dyn Model, alpha: f64) -> Result<SetEstimator> {
    check_level(alpha)?;
    let half = normal_quantile(alpha) * location_sd(model)?;
    Ok(SetEstimator::new(format!("anchored_{alpha}"), move |y| {
        Ok(ConfidenceSet::Box(vec![(0.0, y.column_mean(0).max(0.0) + half)]))
    }))
}

/// Posterior quantile of `component` at `1 - alpha`.
pub fn posterior_upper_limit(gp: &GridPosterior, component: usize, alpha: f64) -> Result<LimitResult> {
    check_level(alpha)?;
    let nodes = gp.component_nodes(component)?;
    if nodes[0] < 0.0 {
        return Err(CalibError::invalid(format!(
            "posterior support starts at {} but upper limits need a nonnegative parameter",
            nodes[0]
        )));
    }
    Ok(LimitResult {
        upper: gp.quantile(component, 1.0 - alpha)?,
        level: alpha,
        kind: LimitKind::PosteriorQuantile,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSensitivity {
    /// Limit of each surviving replication, with its index.
    pub limits: Vec<(usize, LimitResult)>,
    /// Quantiles of the limits at [`BAND_LEVELS`].
    pub band: [f64; 5],
    pub n_failed: usize,
}

impl LimitSensitivity {
    pub fn median(&self) -> f64 {
        self.band[2]
    }

    /// Columns `replication, upper`.
    pub fn limits_table(&self) -> CsvTable {
        let mut t = CsvTable::new(vec!["replication".to_string(), "upper".to_string()]);
        for (i, l) in &self.limits {
            t.push(vec![i.to_string(), fmt_f64(l.upper)]);
        }
        t
    }

    /// Columns `quantile, upper`.
    pub fn band_table(&self) -> CsvTable {
        let mut t = CsvTable::new(vec!["quantile".to_string(), "upper".to_string()]);
        for (q, v) in BAND_LEVELS.iter().zip(self.band) {
            t.push(vec![fmt_f64(*q), fmt_f64(v)]);
        }
        t
    }
}

/// Distribution of posterior upper limits when the phenomenon is absent:
/// nuisance components from `pi(sigma | theta = 0)`, data from the model.
pub fn limit_sensitivity(
    model: &dyn Model,
    prior: &dyn Prior,
    alpha: f64,
    n_rep: usize,
    grid: &GridSpec,
    stream: &SeedStream,
) -> Result<LimitSensitivity> {
    check_level(alpha)?;
    check_replications(n_rep, 1)?;
    let phenom = model.param_space().phenom_indices();
    if phenom.len() != 1 {
        return Err(CalibError::invalid(
            "upper limits need exactly one phenomenological component",
        ));
    }
    let c = phenom[0];
    let results = replicate(stream, n_rep, |i, rng| {
        let (_, y) = sample_conditional_joint(model, prior, &[0.0], rng)?;
        let gp = build_grid_posterior(model, prior, &y, grid)?;
        Ok((i, posterior_upper_limit(&gp, c, alpha)?))
    });
    let (limits, n_failed) = exclude_failures(results)?;
    let s = sorted(&limits.iter().map(|(_, l)| l.upper).collect::<Vec<_>>());
    let band = BAND_LEVELS.map(|q| empirical_quantile(&s, q));
    Ok(LimitSensitivity { limits, band, n_failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequentist::coverage;
    use crate::model_space::{IndependentPrior, Marginal, NormalMean, ParamPoint};
    use approx::assert_abs_diff_eq;

    fn nonneg(n: usize) -> NormalMean {
        NormalMean::nonnegative(1.0, n).unwrap()
    }

    #[test]
    fn anchored_values() {
        let m = nonneg(1);
        let at = |y: f64| anchored_interval(&m, &Observation::scalar(vec![y]).unwrap(), 0.95).unwrap();
        assert!((at(0.0).upper - 1.6449).abs() < 1e-4);
        assert_eq!(at(-5.0).upper, at(0.0).upper);
        assert_eq!(at(0.0).kind, LimitKind::AnchoredFrequentist);
        assert!(anchored_interval(&m, &Observation::scalar(vec![0.0]).unwrap(), 1.0).is_err());
        let four = nonneg(4);
        let r = anchored_interval(&four, &Observation::scalar(vec![1.0; 4]).unwrap(), 0.95).unwrap();
        assert_abs_diff_eq!(r.upper, 1.0 + 1.644_853_626_951_472_2 / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn anchored_coverage() {
        let m = nonneg(1);
        let est = anchored_set_estimator(&m, 0.95).unwrap();
        let se = (0.95f64 * 0.05 / 1e4).sqrt();
        for theta in [0.0, 0.5, 1.0, 2.0] {
            let c = coverage(&m, &ParamPoint::new(vec![theta]), &est, 10_000, &SeedStream::new(40)).unwrap();
            assert!(c.value >= 0.95 - 3.0 * se, "{theta}: {c:?}");
        }
        let at_zero = coverage(&m, &ParamPoint::new(vec![0.0]), &est, 10_000, &SeedStream::new(41)).unwrap();
        assert!(at_zero.value >= 0.95 - 3.0 * se);
    }

    #[test]
    fn uniform_posterior_limit() {
        let x: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let gp = GridPosterior::from_weights(0, x, vec![1.0; 1001], 0.0).unwrap();
        let l = posterior_upper_limit(&gp, 0, 0.1).unwrap();
        assert!((l.upper - 0.9).abs() <= 1e-3);
        assert_eq!(posterior_upper_limit(&gp, 0, 0.999_999).unwrap().upper, 0.0);
        let neg = GridPosterior::from_weights(0, vec![-1.0, 0.0, 1.0], vec![1.0; 3], 0.0).unwrap();
        assert!(posterior_upper_limit(&neg, 0, 0.1).is_err());
    }

    #[test]
    fn half_normal_limit() {
        let m = nonneg(1);
        let p = IndependentPrior::new(m.param_space().clone(), vec![Marginal::HalfNormal { sd: 1e6 }]).unwrap();
        let g = GridSpec::one_dim(0.0, 8.0, 8001).unwrap();
        let gp = build_grid_posterior(&m, &p, &Observation::scalar(vec![0.0]).unwrap(), &g).unwrap();
        let l = posterior_upper_limit(&gp, 0, 0.05).unwrap();
        assert!((l.upper - 1.959_963_984_540_054).abs() <= 1e-3, "{l:?}");
        let mut prev = f64::INFINITY;
        for a in [0.01, 0.05, 0.1, 0.3, 0.5, 0.9] {
            let u = posterior_upper_limit(&gp, 0, a).unwrap().upper;
            assert!(u <= prev);
            prev = u;
        }
    }

    fn flat_positive(n: usize) -> (NormalMean, IndependentPrior, GridSpec) {
        let m = nonneg(n);
        let top = 10.0 / (n as f64).sqrt();
        let p = IndependentPrior::new(
            m.param_space().clone(),
            vec![Marginal::Uniform { lower: 0.0, upper: top }],
        )
        .unwrap();
        (m, p, GridSpec::one_dim(0.0, top, 2001).unwrap())
    }

    #[test]
    fn sensitivity_band_and_reproducibility() {
        let (m, p, g) = flat_positive(1);
        let s = SeedStream::new(7);
        let a = limit_sensitivity(&m, &p, 0.05, 500, &g, &s).unwrap();
        let b = limit_sensitivity(&m, &p, 0.05, 500, &g, &s).unwrap();
        assert_eq!(a, b);
        assert!(a.median() > 0.0 && a.median().is_finite());
        assert!(a.band.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(a.limits_table().len(), 500);
        assert_eq!(a.band_table().len(), 5);
    }

    #[test]
    fn sensitivity_scales_with_sample_size() {
        let s = SeedStream::new(8);
        let median = |n| {
            let (m, p, g) = flat_positive(n);
            limit_sensitivity(&m, &p, 0.05, 1000, &g, &s).unwrap().median()
        };
        let base = median(1);
        for n in [4usize, 16, 100] {
            let ratio = median(n) * (n as f64).sqrt() / base;
            assert!((ratio - 1.0).abs() < 0.15, "{n}: {ratio}");
        }
    }
}
