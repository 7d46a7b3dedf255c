//! Null hypothesis significance testing.
//!
//! Significance follows the convention `reject when p < 1 - alpha`, so
//! `alpha` is close to one and the false discovery rate of a test is
//! `1 - alpha`. An `alpha` of 0.95 corresponds to the common "5% level".

use std::fmt;
use std::sync::Arc;

use crate::csv::{fmt_f64, CsvTable};
use crate::frequentist::{mle_with_starts, MleFit};
use crate::mc::{check_replications, exclude_failures, replicate};
use crate::model_space::{Model, Observation, ParamPoint, ParamSpace};
use crate::optimize::{maximize, SearchBox};
use crate::rng::SeedStream;
use crate::stats::{chi2_sf, normal_sf};
use crate::{CalibError, Result};

/// Minimum number of null simulations for a Monte Carlo p-value.
pub const MIN_NULL_SIMULATIONS: usize = 100;

/// Tolerated negative noise in `-2 log lambda` before it is an error.
const LR_NEGATIVE_TOLERANCE: f64 = 1e-6;

type StatFn = dyn Fn(&Observation) -> Result<f64> + Send + Sync;

/// Scalar summary of an observation. Large values are evidence against
/// the null.
#[derive(Clone)]
pub enum Statistic {
    /// Sample mean of the first column.
    Mean,
    /// `|ybar - center|`, for two-sided tests.
    AbsMean {
        center: f64,
    },
    Custom {
        name: String,
        f: Arc<StatFn>,
    },
}

impl fmt::Debug for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Mean => write!(f, "Mean"),
            Statistic::AbsMean { center } => write!(f, "AbsMean({center})"),
            Statistic::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Statistic {
    pub fn custom(name: impl Into<String>, f: impl Fn(&Observation) -> Result<f64> + Send + Sync + 'static) -> Self {
        Statistic::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn evaluate(&self, y: &Observation) -> Result<f64> {
        let v = match self {
            Statistic::Mean => y.column_mean(0),
            Statistic::AbsMean { center } => (y.column_mean(0) - center).abs(),
            Statistic::Custom { f, .. } => f(y)?,
        };
        if v.is_nan() {
            return Err(CalibError::Evaluation("test statistic is NaN".into()));
        }
        Ok(v)
    }
}

/// Upper-tail probability with its Monte Carlo standard error (zero for
/// analytic nulls).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValue {
    pub value: f64,
    pub std_error: f64,
}

/// Distribution of the statistic under a null configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum NullDistribution {
    /// Statistic ~ N(mean, sd).
    Normal { mean: f64, sd: f64 },
    /// Statistic = |Z| with Z ~ N(0, sd).
    FoldedNormal { sd: f64 },
    /// Sorted simulated statistics.
    Empirical(Vec<f64>),
}

impl NullDistribution {
    /// Closed-form null for [`Statistic::Mean`] and [`Statistic::AbsMean`]
    /// on models with normal rows.
    pub fn analytic(model: &dyn Model, null_theta: &ParamPoint, stat: &Statistic) -> Result<Self> {
        model.param_space().check(null_theta.values())?;
        let rn = model
            .row_normal(null_theta.values())
            .ok_or_else(|| CalibError::invalid(format!("model {} has no closed-form null", model.name())))?;
        let sd = rn.sd / (model.n_obs() as f64).sqrt();
        match stat {
            Statistic::Mean => Ok(NullDistribution::Normal { mean: rn.mean, sd }),
            Statistic::AbsMean { center } if (rn.mean - center).abs() <= 1e-12 => {
                Ok(NullDistribution::FoldedNormal { sd })
            }
            _ => Err(CalibError::invalid(format!(
                "no closed-form null for statistic {stat:?}"
            ))),
        }
    }

    /// Empirical null from `n_mc` simulated observations at `null_theta`.
    pub fn simulate(
        model: &dyn Model,
        null_theta: &ParamPoint,
        stat: &Statistic,
        n_mc: usize,
        stream: &SeedStream,
    ) -> Result<Self> {
        if n_mc < MIN_NULL_SIMULATIONS {
            return Err(CalibError::invalid(format!(
                "need at least {MIN_NULL_SIMULATIONS} null simulations, got {n_mc}"
            )));
        }
        model.param_space().check(null_theta.values())?;
        let results = replicate(stream, n_mc, |_, rng| {
            stat.evaluate(&model.sample_observation(null_theta, rng)?)
        });
        let (mut v, _) = exclude_failures(results)?;
        v.sort_by(f64::total_cmp);
        Ok(NullDistribution::Empirical(v))
    }

    pub fn p_value(&self, t: f64) -> PValue {
        match self {
            NullDistribution::Normal { mean, sd } => PValue {
                value: normal_sf((t - mean) / sd),
                std_error: 0.0,
            },
            NullDistribution::FoldedNormal { sd } => PValue {
                value: (2.0 * normal_sf(t.max(0.0) / sd)).min(1.0),
                std_error: 0.0,
            },
            NullDistribution::Empirical(s) => {
                let n = s.len();
                let below = s.partition_point(|&v| v < t);
                let p = ((n - below) as f64 + 1.0) / (n as f64 + 1.0);
                PValue {
                    value: p,
                    std_error: (p * (1.0 - p) / n as f64).sqrt(),
                }
            }
        }
    }
}

/// `p < 1 - alpha`, evaluated as `p + alpha < 1` so that `1 - alpha` is
/// not rounded up past `p` (0.05 is not rejected at 0.95).
pub fn reject(p: f64, alpha: f64) -> bool {
    p + alpha < 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub p_std_error: f64,
    pub rejected: bool,
    pub alpha: f64,
}

/// A statistic, its null distribution and a significance.
#[derive(Debug, Clone)]
pub struct NhstTest {
    pub statistic: Statistic,
    pub null: NullDistribution,
    pub alpha: f64,
}

impl NhstTest {
    pub fn new(statistic: Statistic, null: NullDistribution, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CalibError::Domain {
                name: "alpha".into(),
                value: alpha,
                lower: 0.0,
                upper: 1.0,
            });
        }
        if let NullDistribution::Empirical(s) = &null {
            if s.len() < MIN_NULL_SIMULATIONS {
                return Err(CalibError::invalid("empirical null has too few samples"));
            }
        }
        Ok(NhstTest { statistic, null, alpha })
    }

    pub fn test(&self, y: &Observation) -> Result<TestResult> {
        let t = self.statistic.evaluate(y)?;
        let p = self.null.p_value(t);
        Ok(TestResult {
            statistic: t,
            p_value: p.value,
            p_std_error: p.std_error,
            rejected: reject(p.value, self.alpha),
            alpha: self.alpha,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub theta: ParamPoint,
    /// Rejection rate under `theta`.
    pub power: f64,
    pub std_error: f64,
    pub n_rep: usize,
    /// `1 - E[p]` under `theta`, reported as a diagnostic.
    pub mean_p_power: f64,
}

/// Rejection rate of `test` over observations simulated at `theta_alt`.
pub fn power(
    model: &dyn Model,
    theta_alt: &ParamPoint,
    test: &NhstTest,
    n_rep: usize,
    stream: &SeedStream,
) -> Result<PowerPoint> {
    check_replications(n_rep, 1)?;
    model.param_space().check(theta_alt.values())?;
    let results = replicate(stream, n_rep, |_, rng| {
        test.test(&model.sample_observation(theta_alt, rng)?)
    });
    let (res, _) = exclude_failures(results)?;
    let n = res.len() as f64;
    let rate = res.iter().filter(|r| r.rejected).count() as f64 / n;
    let mean_p = res.iter().map(|r| r.p_value).sum::<f64>() / n;
    Ok(PowerPoint {
        theta: theta_alt.clone(),
        power: rate,
        std_error: (rate * (1.0 - rate) / n).sqrt(),
        n_rep: res.len(),
        mean_p_power: 1.0 - mean_p,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub points: Vec<PowerPoint>,
    space: ParamSpace,
}

impl PowerCurve {
    /// Smallest power among points with `|phenom| >= phenom_min`.
    pub fn min_power(&self, phenom_min: f64) -> Option<&PowerPoint> {
        self.points
            .iter()
            .filter(|p| self.space.phenom_magnitude(p.theta.values()) >= phenom_min)
            .min_by(|a, b| a.power.total_cmp(&b.power))
    }

    /// Points whose power reaches `target`.
    pub fn reaching(&self, target: f64) -> Vec<&PowerPoint> {
        self.points.iter().filter(|p| p.power >= target).collect()
    }

    /// Columns `theta_<name>..., power, se, n_rep`.
    pub fn to_table(&self) -> CsvTable {
        let mut header: Vec<String> = self.space.names().map(|n| format!("theta_{n}")).collect();
        header.extend(["power", "se", "n_rep"].map(String::from));
        let mut t = CsvTable::new(header);
        for p in &self.points {
            let mut row: Vec<String> = p.theta.values().iter().map(|&v| fmt_f64(v)).collect();
            row.extend([fmt_f64(p.power), fmt_f64(p.std_error), p.n_rep.to_string()]);
            t.push(row);
        }
        t
    }
}

/// Power at every configuration in `grid`, sharing replication streams.
pub fn power_curve(
    model: &dyn Model,
    grid: &[ParamPoint],
    test: &NhstTest,
    n_rep: usize,
    stream: &SeedStream,
) -> Result<PowerCurve> {
    if grid.is_empty() {
        return Err(CalibError::invalid("power grid is empty"));
    }
    let points = grid
        .iter()
        .map(|t| power(model, t, test, n_rep, stream))
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerCurve {
        points,
        space: model.param_space().clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFit {
    pub log_likelihood: f64,
    /// Conditional maximum-likelihood nuisance values.
    pub nuisance: Vec<f64>,
    pub theta: ParamPoint,
}

/// `max_sigma log pi(y | phenom, sigma)` over a finite nuisance box.
pub fn profile_likelihood(
    model: &dyn Model,
    phenom: &[f64],
    y: &Observation,
    nuisance_box: &SearchBox,
) -> Result<ProfileFit> {
    let space = model.param_space();
    let nuis = space.nuisance_indices();
    if nuisance_box.dim() != nuis.len() {
        return Err(CalibError::Shape(format!(
            "nuisance box has {} dimensions, model has {} nuisance components",
            nuisance_box.dim(),
            nuis.len()
        )));
    }
    nuisance_box.check_within(space, &nuis)?;
    let probe = space.assemble(phenom, nuisance_box.lower())?;
    if nuis.is_empty() {
        let ll = model.log_density(y, &probe)?;
        return Ok(ProfileFit {
            log_likelihood: ll,
            nuisance: vec![],
            theta: probe,
        });
    }
    let ll = |s: &[f64]| match space.assemble(phenom, s) {
        Ok(t) => model.log_likelihood_unchecked(y, t.values()),
        Err(_) => f64::NEG_INFINITY,
    };
    let opt = maximize(ll, nuisance_box, &[])?;
    let theta = space.assemble(phenom, &opt.point)?;
    Ok(ProfileFit {
        log_likelihood: opt.value,
        nuisance: opt.point,
        theta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPower {
    /// Smallest power over the nuisance grid.
    pub min: PowerPoint,
    pub per_nuisance: Vec<PowerPoint>,
}

/// Power at fixed phenomenological values, minimized over a grid of
/// nuisance values.
pub fn conditional_power(
    model: &dyn Model,
    phenom: &[f64],
    test: &NhstTest,
    nuisance_grid: &[Vec<f64>],
    n_rep: usize,
    stream: &SeedStream,
) -> Result<ConditionalPower> {
    if nuisance_grid.is_empty() {
        return Err(CalibError::invalid("nuisance grid is empty"));
    }
    let space = model.param_space();
    let per = nuisance_grid
        .iter()
        .map(|s| power(model, &space.assemble(phenom, s)?, test, n_rep, stream))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, p) in per.iter().enumerate() {
        if p.power < per[best].power {
            best = i;
        }
    }
    Ok(ConditionalPower {
        min: per[best].clone(),
        per_nuisance: per,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodRatio {
    /// `max_null L / max L`, in (0, 1].
    pub lambda: f64,
    pub minus2log: f64,
    pub null_fit: ProfileFit,
    pub full_fit: MleFit,
}

/// Likelihood ratio for the null that pins the phenomenological
/// components at `phenom_null`. `bx` spans the full parameter space.
pub fn likelihood_ratio_statistic(
    model: &dyn Model,
    phenom_null: &[f64],
    y: &Observation,
    bx: &SearchBox,
) -> Result<LikelihoodRatio> {
    let space = model.param_space();
    if bx.dim() != space.dim() {
        return Err(CalibError::Shape(format!(
            "search box has {} dimensions, model has {}",
            bx.dim(),
            space.dim()
        )));
    }
    let null_fit = profile_likelihood(model, phenom_null, y, &bx.select(&space.nuisance_indices()))?;
    let full_fit = mle_with_starts(model, y, bx, std::slice::from_ref(&null_fit.theta.0))?;
    let mut m2l = -2.0 * (null_fit.log_likelihood - full_fit.log_likelihood);
    if m2l < 0.0 {
        if m2l < -LR_NEGATIVE_TOLERANCE {
            return Err(CalibError::Numerical(format!(
                "-2 log lambda = {m2l} is negative beyond optimizer tolerance"
            )));
        }
        m2l = 0.0;
    }
    Ok(LikelihoodRatio {
        lambda: (-0.5 * m2l).exp(),
        minus2log: m2l,
        null_fit,
        full_fit,
    })
}

/// Upper tail of chi-squared with `k` degrees of freedom at `minus2log`.
pub fn wilks_p_value(minus2log: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(CalibError::invalid("degrees of freedom must be positive"));
    }
    if !(minus2log >= 0.0) {
        return Err(CalibError::Domain {
            name: "minus2log".into(),
            value: minus2log,
            lower: 0.0,
            upper: f64::INFINITY,
        });
    }
    Ok(chi2_sf(minus2log, k))
}

/// How null distributions are obtained for a composite p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullMethod {
    Analytic,
    Simulated { n_mc: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositePValue {
    /// Smallest tail probability over the null grid.
    pub min: f64,
    pub argmin: ParamPoint,
    /// Largest tail probability over the null grid (the conservative
    /// choice).
    pub max: f64,
    pub argmax: ParamPoint,
    pub per_point: Vec<(ParamPoint, PValue)>,
}

/// Tail probabilities of `y` under every configuration of a composite
/// null.
pub fn composite_p_value(
    model: &dyn Model,
    null_grid: &[ParamPoint],
    stat: &Statistic,
    y: &Observation,
    method: NullMethod,
    stream: &SeedStream,
) -> Result<CompositePValue> {
    if null_grid.is_empty() {
        return Err(CalibError::invalid("null grid is empty"));
    }
    let t = stat.evaluate(y)?;
    let per_point = null_grid
        .iter()
        .map(|theta| {
            let null = match method {
                NullMethod::Analytic => NullDistribution::analytic(model, theta, stat)?,
                NullMethod::Simulated { n_mc } => NullDistribution::simulate(model, theta, stat, n_mc, stream)?,
            };
            Ok((theta.clone(), null.p_value(t)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut lo, mut hi) = (0, 0);
    for (i, (_, p)) in per_point.iter().enumerate() {
        if p.value < per_point[lo].1.value {
            lo = i;
        }
        if p.value > per_point[hi].1.value {
            hi = i;
        }
    }
    Ok(CompositePValue {
        min: per_point[lo].1.value,
        argmin: per_point[lo].0.clone(),
        max: per_point[hi].1.value,
        argmax: per_point[hi].0.clone(),
        per_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_space::{GaussianSignalBackground, NormalMean, SignalBackgroundOptions};
    use crate::stats::{chi2_cdf, ks_statistic};
    use approx::assert_abs_diff_eq;

    const Z95: f64 = 1.644_853_626_951_472_2;

    fn unit(n: usize) -> NormalMean {
        NormalMean::new(1.0, n).unwrap()
    }

    fn one_sided(model: &dyn Model, alpha: f64) -> NhstTest {
        let null = NullDistribution::analytic(model, &ParamPoint::new(vec![0.0]), &Statistic::Mean).unwrap();
        NhstTest::new(Statistic::Mean, null, alpha).unwrap()
    }

    fn binom_se(p: f64, n: usize) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn analytic_p_values() {
        let m = unit(1);
        let null = NullDistribution::analytic(&m, &ParamPoint::new(vec![0.0]), &Statistic::Mean).unwrap();
        assert_eq!(null.p_value(0.0).value, 0.5);
        assert!((null.p_value(1.6449).value - 0.05).abs() < 1e-4);
        let folded =
            NullDistribution::analytic(&m, &ParamPoint::new(vec![0.0]), &Statistic::AbsMean { center: 0.0 }).unwrap();
        assert!((folded.p_value(1.959_963_984_540_054).value - 0.05).abs() < 1e-9);
        assert!(
            NullDistribution::analytic(&m, &ParamPoint::new(vec![1.0]), &Statistic::AbsMean { center: 0.0 }).is_err()
        );
    }

    #[test]
    fn simulated_matches_analytic() {
        let m = unit(1);
        let theta = ParamPoint::new(vec![0.0]);
        let emp = NullDistribution::simulate(&m, &theta, &Statistic::Mean, 100_000, &SeedStream::new(5)).unwrap();
        let p = emp.p_value(Z95);
        assert!((p.value - 0.05).abs() <= 3.0 * binom_se(0.05, 100_000), "{p:?}");
        assert!(p.std_error > 0.0);
        assert!(NullDistribution::simulate(&m, &theta, &Statistic::Mean, 99, &SeedStream::new(5)).is_err());
    }

    #[test]
    fn empirical_continuity_adjustment() {
        let emp = NullDistribution::Empirical((0..199).map(|i| i as f64).collect());
        assert_eq!(emp.p_value(1000.0).value, 1.0 / 200.0);
        assert_eq!(emp.p_value(-1.0).value, 1.0);
        assert_eq!(emp.p_value(198.0).value, 2.0 / 200.0);
    }

    #[test]
    fn rejection_convention() {
        assert!(reject(0.04, 0.95));
        assert!(!reject(0.05, 0.95));
        assert!(!reject(0.5, 0.5));
    }

    #[test]
    fn test_result_consistency() {
        let m = unit(1);
        let t = one_sided(&m, 0.95);
        for y in [-1.0, 0.0, 1.0, 1.7, 3.0] {
            let r = t.test(&Observation::scalar(vec![y]).unwrap()).unwrap();
            assert_eq!(r.rejected, reject(r.p_value, r.alpha));
            assert!((0.0..=1.0).contains(&r.p_value));
        }
        assert!(NhstTest::new(Statistic::Mean, NullDistribution::Empirical(vec![0.0; 10]), 0.95).is_err());
        assert!(NhstTest::new(Statistic::Mean, NullDistribution::Normal { mean: 0.0, sd: 1.0 }, 1.0).is_err());
    }

    #[test]
    fn power_values() {
        let m = unit(1);
        let t = one_sided(&m, 0.95);
        let n = 10_000;
        let s = SeedStream::new(11);
        let at_null = power(&m, &ParamPoint::new(vec![0.0]), &t, n, &s).unwrap();
        assert!((at_null.power - 0.05).abs() <= 3.0 * binom_se(0.05, n));
        let half = power(&m, &ParamPoint::new(vec![Z95]), &t, n, &s).unwrap();
        assert!((half.power - 0.5).abs() <= 3.0 * binom_se(0.5, n));
        assert!((half.std_error - binom_se(half.power, n)).abs() < 1e-15);
        assert!(power(&m, &ParamPoint::new(vec![5.0]), &t, n, &s).unwrap().power > 0.999);
        // mean_p_power at the null is 1 - E[p] = 0.5
        assert!((at_null.mean_p_power - 0.5).abs() < 0.02);
    }

    #[test]
    fn curve_properties() {
        let m = unit(1);
        let s = SeedStream::new(13);
        let single = power_curve(&m, &[ParamPoint::new(vec![0.0])], &one_sided(&m, 0.95), 4000, &s).unwrap();
        assert_eq!(single.points.len(), 1);
        assert!((single.points[0].power - 0.05).abs() <= 3.0 * binom_se(0.05, 4000));

        let null =
            NullDistribution::analytic(&m, &ParamPoint::new(vec![0.0]), &Statistic::AbsMean { center: 0.0 }).unwrap();
        let two = NhstTest::new(Statistic::AbsMean { center: 0.0 }, null, 0.95).unwrap();
        let mus = [0.0, 0.5, 1.0, 2.0, 3.0];
        let grid: Vec<ParamPoint> = mus
            .iter()
            .flat_map(|&u| [ParamPoint::new(vec![u]), ParamPoint::new(vec![-u])])
            .collect();
        let c = power_curve(&m, &grid, &two, 4000, &s).unwrap();
        for (i, &u) in mus.iter().enumerate() {
            let plus = power(&m, &ParamPoint::new(vec![u]), &two, 20_000, &s.child(2 * i as u64)).unwrap();
            let minus = power(&m, &ParamPoint::new(vec![-u]), &two, 20_000, &s.child(2 * i as u64 + 1)).unwrap();
            let exact = normal_sf(1.959_963_984_540_054 - u) + normal_sf(1.959_963_984_540_054 + u);
            assert!((plus.power - exact).abs() <= 3.0 * binom_se(exact, 20_000));
            let se = (plus.std_error.powi(2) + minus.std_error.powi(2)).sqrt().max(1e-3);
            assert!((plus.power - minus.power).abs() <= 2.0 * se, "{u}");
        }
        for pair in c.points.chunks(2) {
            assert!(pair[0].power >= 0.0 && pair[1].power <= 1.0);
        }
        for w in c.points.chunks(2).collect::<Vec<_>>().windows(2) {
            let se = w[0][0].std_error.max(w[1][0].std_error).max(1e-3);
            assert!(w[1][0].power >= w[0][0].power - 2.0 * se);
        }
        let min = c.min_power(1.0).unwrap();
        assert!(min.theta[0].abs() >= 1.0);
        assert!(c.reaching(0.999).iter().all(|p| p.theta[0].abs() >= 3.0));
        let table = c.to_table();
        assert_eq!(table.header, vec!["theta_mu", "power", "se", "n_rep"]);
        assert_eq!(table.len(), grid.len());
    }

    fn signal_known_sigma(n: usize) -> GaussianSignalBackground {
        GaussianSignalBackground::with_options(
            n,
            SignalBackgroundOptions {
                known_sigma: Some(1.0),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn profile_no_nuisance_is_log_density() {
        let m = unit(3);
        let y = Observation::scalar(vec![0.1, 0.4, -0.2]).unwrap();
        let p = profile_likelihood(&m, &[0.3], &y, &SearchBox::new(vec![], vec![]).unwrap()).unwrap();
        assert_eq!(
            p.log_likelihood,
            m.log_density(&y, &ParamPoint::new(vec![0.3])).unwrap()
        );
    }

    #[test]
    fn profile_background_closed_form() {
        let m = signal_known_sigma(4);
        let y = Observation::scalar(vec![1.0, 2.0, 2.5, 0.5]).unwrap();
        let ybar = 1.5;
        let bx = SearchBox::new(vec![-10.0], vec![10.0]).unwrap();
        let max_ll = m.log_density(&y, &ParamPoint::new(vec![0.0, ybar])).unwrap();
        for th in [-1.0, 0.0, 0.7, 2.0] {
            let p = profile_likelihood(&m, &[th], &y, &bx).unwrap();
            assert!((p.nuisance[0] - (ybar - th)).abs() < 1e-5);
            assert!((p.log_likelihood - max_ll).abs() < 1e-8);
        }
    }

    #[test]
    fn profile_at_mle_matches_full_fit() {
        let m = GaussianSignalBackground::with_options(
            20,
            SignalBackgroundOptions {
                known_background: Some(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        let y = m
            .sample_observation(&ParamPoint::new(vec![1.0, 1.3]), &mut SeedStream::new(8).replication(0))
            .unwrap();
        let bx = SearchBox::new(vec![-5.0, 0.1], vec![5.0, 4.0]).unwrap();
        let full = crate::frequentist::mle(&m, &y, &bx).unwrap();
        let prof = profile_likelihood(&m, &[full.theta[0]], &y, &bx.select(&[1])).unwrap();
        assert!((prof.log_likelihood - full.log_likelihood).abs() < 1e-6);
    }

    #[test]
    fn lrt_closed_form() {
        let m = unit(10);
        let bx = SearchBox::new(vec![-10.0], vec![10.0]).unwrap();
        let y = Observation::scalar((0..10).map(|i| 0.1 * i as f64 - 0.2).collect()).unwrap();
        let ybar = y.column_mean(0);
        let lr = likelihood_ratio_statistic(&m, &[0.0], &y, &bx).unwrap();
        assert!((lr.minus2log - 10.0 * ybar * ybar).abs() < 1e-4);
        assert!(lr.lambda <= 1.0 && lr.lambda > 0.0);

        let centered = Observation::scalar(vec![-1.0, 1.0, -0.5, 0.5, 0.0, 0.2, -0.2, 0.3, -0.3, 0.0]).unwrap();
        let lr = likelihood_ratio_statistic(&m, &[0.0], &centered, &bx).unwrap();
        assert_abs_diff_eq!(lr.minus2log, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(lr.lambda, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn wilks_values() {
        assert_eq!(wilks_p_value(0.0, 1).unwrap(), 1.0);
        assert!((wilks_p_value(3.8415, 1).unwrap() - 0.05).abs() < 1e-4);
        assert!((wilks_p_value(5.9915, 2).unwrap() - 0.05).abs() < 1e-4);
        assert!(wilks_p_value(1.0, 0).is_err());
        assert!(wilks_p_value(-1.0, 1).is_err());
    }

    #[test]
    fn null_p_values_are_uniform() {
        let m = unit(1);
        let t = one_sided(&m, 0.95);
        let ps = replicate(&SeedStream::new(21), 10_000, |_, rng| {
            t.test(&m.sample_observation(&ParamPoint::new(vec![0.0]), rng).unwrap())
                .unwrap()
                .p_value
        });
        assert!(ks_statistic(&ps, |u| u.clamp(0.0, 1.0)) < 0.02);
        let fdr = ps.iter().filter(|&&p| reject(p, 0.95)).count() as f64 / 1e4;
        assert!((fdr - 0.05).abs() <= 3.0 * binom_se(0.05, 10_000));
    }

    #[test]
    fn wilks_convergence() {
        let m = unit(100);
        let bx = SearchBox::new(vec![-5.0], vec![5.0]).unwrap();
        let stats = replicate(&SeedStream::new(22), 2000, |_, rng| {
            let y = m.sample_observation(&ParamPoint::new(vec![0.0]), rng).unwrap();
            likelihood_ratio_statistic(&m, &[0.0], &y, &bx).unwrap().minus2log
        });
        assert!(ks_statistic(&stats, |x| chi2_cdf(x, 1)) < 0.05);
    }

    #[test]
    fn conditional_power_properties() {
        let m = signal_known_sigma(1);
        // statistic ybar - background, null at signal 0 for any background
        let null = NullDistribution::Normal { mean: 0.0, sd: 1.0 };
        let stat = Statistic::custom("ybar_minus_b", |y| Ok(y.column_mean(0) - 2.0));
        let t = NhstTest::new(stat, null, 0.95).unwrap();
        let s = SeedStream::new(30);
        let single = conditional_power(&m, &[1.0], &t, &[vec![2.0]], 4000, &s).unwrap();
        let direct = power(&m, &ParamPoint::new(vec![1.0, 2.0]), &t, 4000, &s).unwrap();
        assert_eq!(single.min.power, direct.power);

        let grid = vec![vec![2.0], vec![1.5], vec![2.5]];
        let cp = conditional_power(&m, &[0.0], &t, &grid, 4000, &s).unwrap();
        assert_eq!(cp.per_nuisance.len(), 3);
        // a lower background depresses the statistic
        assert_eq!(cp.min.theta[1], 1.5);

        // statistic insensitive to the nuisance: min equals the common value
        let m2 = unit(1);
        let t2 = one_sided(&m2, 0.95);
        let r = conditional_power(&m2, &[0.0], &t2, &[vec![], vec![]], 4000, &s).unwrap();
        assert!((r.min.power - 0.05).abs() <= 3.0 * binom_se(0.05, 4000));
    }

    #[test]
    fn composite_reports_both_extremes() {
        let m = signal_known_sigma(1);
        let grid: Vec<ParamPoint> = [0.0, 1.0, 2.0].iter().map(|&b| ParamPoint::new(vec![0.0, b])).collect();
        let y = Observation::scalar(vec![2.5]).unwrap();
        let c = composite_p_value(
            &m,
            &grid,
            &Statistic::Mean,
            &y,
            NullMethod::Analytic,
            &SeedStream::new(1),
        )
        .unwrap();
        assert!((c.min - normal_sf(2.5)).abs() < 1e-12);
        assert_eq!(c.argmin[1], 0.0);
        assert!((c.max - normal_sf(0.5)).abs() < 1e-12);
        let sim = composite_p_value(
            &m,
            &grid,
            &Statistic::Mean,
            &y,
            NullMethod::Simulated { n_mc: 20_000 },
            &SeedStream::new(1),
        )
        .unwrap();
        assert!((sim.max - c.max).abs() < 0.02);
    }
}
