use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{FRAC_2_PI, PI};

use super::{ParamPoint, ParamSpace, Prior};
use crate::stats::normal_ln_pdf;
use crate::{CalibError, Result};

/// One-dimensional prior factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Normal {
        mean: f64,
        sd: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
    /// `|N(0, sd)|`, supported on `[0, inf)`.
    HalfNormal {
        sd: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    Point(f64),
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Marginal::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && lower < upper,
            Marginal::HalfNormal { sd } => sd > 0.0 && sd.is_finite(),
            Marginal::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
            Marginal::Point(v) => v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(CalibError::invalid(format!("invalid prior marginal {self:?}")))
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Marginal::Uniform { lower, upper } => (lower, upper),
            Marginal::HalfNormal { .. } => (0.0, f64::INFINITY),
            Marginal::LogNormal { .. } => (0.0, f64::INFINITY),
            Marginal::Point(v) => (v, v),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Normal { mean, sd } => normal_ln_pdf(x, mean, sd),
            Marginal::Uniform { lower, upper } => {
                if x >= lower && x <= upper {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::HalfNormal { sd } => {
                if x >= 0.0 {
                    std::f64::consts::LN_2 + normal_ln_pdf(x, 0.0, sd)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::LogNormal { mu, sigma } => {
                if x > 0.0 {
                    normal_ln_pdf(x.ln(), mu, sigma) - x.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::Point(v) => {
                if x == v {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            Marginal::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Marginal::Uniform { lower, upper } => rand_distr::Uniform::new_inclusive(lower, upper)
                .expect("validated bounds")
                .sample(rng),
            Marginal::HalfNormal { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z.abs()
            }
            Marginal::LogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            Marginal::Point(v) => v,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Normal { mean, .. } => mean,
            Marginal::Uniform { lower, upper } => 0.5 * (lower + upper),
            Marginal::HalfNormal { sd } => sd * FRAC_2_PI.sqrt(),
            Marginal::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Marginal::Point(v) => v,
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            Marginal::Normal { sd, .. } => sd,
            Marginal::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
            Marginal::HalfNormal { sd } => sd * (1.0 - 2.0 / PI).sqrt(),
            Marginal::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                ((s2.exp() - 1.0) * (2.0 * mu + s2).exp()).sqrt()
            }
            Marginal::Point(_) => 0.0,
        }
    }
}

/// Product prior `pi(theta) = prod_i pi_i(theta_i)`.
///
/// The conditional prior of the nuisance components given the
/// phenomenological ones is therefore just their marginal.
#[derive(Debug, Clone)]
pub struct IndependentPrior {
    space: ParamSpace,
    marginals: Vec<Marginal>,
}

impl IndependentPrior {
    pub fn new(space: ParamSpace, marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.len() != space.dim() {
            return Err(CalibError::Shape(format!(
                "{} prior marginals for a {}-dimensional space",
                marginals.len(),
                space.dim()
            )));
        }
        for (c, m) in space.components().iter().zip(&marginals) {
            m.validate()?;
            let (lo, hi) = m.support();
            if lo < c.lower || hi > c.upper {
                return Err(CalibError::invalid(format!(
                    "prior on `{}` has support [{lo}, {hi}] outside bounds [{}, {}]",
                    c.name, c.lower, c.upper
                )));
            }
        }
        Ok(IndependentPrior { space, marginals })
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }
}

impl Prior for IndependentPrior {
    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.marginals.iter().zip(theta).map(|(m, &x)| m.ln_pdf(x)).sum()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ParamPoint {
        ParamPoint(self.marginals.iter().map(|m| m.sample(rng)).collect())
    }

    fn sample_conditional(&self, phenom: &[f64], rng: &mut dyn RngCore) -> Result<ParamPoint> {
        let idx = self.space.phenom_indices();
        if phenom.len() != idx.len() {
            return Err(CalibError::Shape(format!(
                "{} phenomenological values given, space has {}",
                phenom.len(),
                idx.len()
            )));
        }
        let mut fixed = idx.iter().zip(phenom).peekable();
        let mut out = Vec::with_capacity(self.space.dim());
        for (i, m) in self.marginals.iter().enumerate() {
            match fixed.peek() {
                Some(&(&j, &v)) if j == i => {
                    out.push(v);
                    fixed.next();
                }
                _ => out.push(m.sample(rng)),
            }
        }
        self.space.check(&out)?;
        Ok(ParamPoint(out))
    }

    fn component_sd(&self, i: usize) -> Option<f64> {
        self.marginals.get(i).map(Marginal::sd)
    }

    fn point_mass(&self) -> Option<ParamPoint> {
        self.marginals
            .iter()
            .map(|m| match m {
                Marginal::Point(v) => Some(*v),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(ParamPoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_space::{sample_conditional_joint, sample_joint, GaussianSignalBackground, Model, NormalMean};
    use crate::stats::mean_sd;
    use crate::SeedStream;

    fn signal_prior() -> (GaussianSignalBackground, IndependentPrior) {
        let m = GaussianSignalBackground::new(1).unwrap();
        let p = IndependentPrior::new(
            m.param_space().clone(),
            vec![
                Marginal::Normal { mean: 1.0, sd: 2.0 },
                Marginal::Normal { mean: 0.0, sd: 1.0 },
                Marginal::LogNormal { mu: 0.0, sigma: 0.25 },
            ],
        )
        .unwrap();
        (m, p)
    }

    #[test]
    fn support_must_fit_bounds() {
        let m = NormalMean::nonnegative(1.0, 1).unwrap();
        assert!(IndependentPrior::new(m.param_space().clone(), vec![Marginal::Normal { mean: 0.0, sd: 1.0 }]).is_err());
        assert!(IndependentPrior::new(m.param_space().clone(), vec![Marginal::HalfNormal { sd: 1.0 }]).is_ok());
    }

    #[test]
    fn joint_theta_marginal_matches_prior() {
        let (m, p) = signal_prior();
        let s = SeedStream::new(21);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|i| sample_joint(&m, &p, &mut s.replication(i)).unwrap().0[0])
            .collect();
        let (mean, sd) = mean_sd(&draws);
        let se_mean = 2.0 / (n as f64).sqrt();
        // sd of the sample sd of a normal: sd / sqrt(2(n-1))
        let se_sd = 2.0 / (2.0 * (n - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((sd - 2.0).abs() < 3.0 * se_sd, "sd {sd}");
    }

    #[test]
    fn point_mass_prior_pins_theta() {
        let m = NormalMean::new(1.0, 3).unwrap();
        let p = IndependentPrior::new(m.param_space().clone(), vec![Marginal::Point(0.25)]).unwrap();
        let s = SeedStream::new(2);
        for i in 0..50 {
            assert_eq!(sample_joint(&m, &p, &mut s.replication(i)).unwrap().0[0], 0.25);
        }
        assert_eq!(p.point_mass(), Some(ParamPoint(vec![0.25])));
    }

    #[test]
    fn prior_predictive_sd() {
        // y = mu + e with mu ~ N(0, tau), e ~ N(0, sigma): sd(y) = sqrt(tau^2 + sigma^2)
        let (tau, sigma) = (1.5, 0.8);
        let m = NormalMean::new(sigma, 1).unwrap();
        let p = IndependentPrior::new(m.param_space().clone(), vec![Marginal::Normal { mean: 0.0, sd: tau }]).unwrap();
        let s = SeedStream::new(5);
        let n = 10_000;
        let ys: Vec<f64> = (0..n)
            .map(|i| sample_joint(&m, &p, &mut s.replication(i)).unwrap().1.data()[0])
            .collect();
        let (_, sd) = mean_sd(&ys);
        let expected = (tau * tau + sigma * sigma).sqrt();
        let se = expected / (2.0 * (n - 1) as f64).sqrt();
        assert!((sd - expected).abs() < 3.0 * se, "sd {sd} vs {expected}");
    }

    #[test]
    fn conditional_joint_pins_signal() {
        let (m, p) = signal_prior();
        let s = SeedStream::new(8);
        let n = 10_000;
        let mut bkg = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let (theta, _) = sample_conditional_joint(&m, &p, &[0.0], &mut s.replication(i)).unwrap();
            assert_eq!(theta[0], 0.0);
            bkg.push(theta[1]);
        }
        let (mean, sd) = mean_sd(&bkg);
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((sd - 1.0).abs() < 3.0 / (2.0 * (n - 1) as f64).sqrt());

        let a = sample_conditional_joint(&m, &p, &[0.0], &mut s.replication(77)).unwrap();
        let b = sample_conditional_joint(&m, &p, &[0.0], &mut s.replication(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conditional_joint_errors() {
        let m = NormalMean::nonnegative(1.0, 1).unwrap();
        let p = IndependentPrior::new(m.param_space().clone(), vec![Marginal::HalfNormal { sd: 1.0 }]).unwrap();
        let mut rng = SeedStream::new(1).replication(0);
        assert!(matches!(
            sample_conditional_joint(&m, &p, &[-1.0], &mut rng),
            Err(CalibError::Domain { .. })
        ));
        assert!(matches!(
            sample_conditional_joint(&m, &p, &[1.0, 2.0], &mut rng),
            Err(CalibError::Shape(_))
        ));
    }

    #[test]
    fn joint_matches_observation_sampler() {
        // same stream: the observation drawn after theta equals a direct draw
        // continuing from the same generator state
        let (m, p) = signal_prior();
        let s = SeedStream::new(31);
        let (theta, y) = sample_joint(&m, &p, &mut s.replication(4)).unwrap();
        let mut rng = s.replication(4);
        let theta2 = p.sample(&mut rng);
        let y2 = m.sample_observation(&theta2, &mut rng).unwrap();
        assert_eq!((theta, y), (theta2, y2));
    }

    #[test]
    fn closed_form_moments() {
        assert!((Marginal::Uniform { lower: 0.0, upper: 1.0 }.sd() - (1.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(Marginal::Point(3.0).sd(), 0.0);
        let hn = Marginal::HalfNormal { sd: 1.0 };
        assert!((hn.mean() - 0.797_884_560_802_865_4).abs() < 1e-12);
    }
}
