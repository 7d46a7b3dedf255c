//! Frequentist calibration: estimators, losses, expected loss over
//! simulated observations, worst-case loss over a configuration grid,
//! minimax selection and coverage.

use std::fmt;
use std::sync::Arc;

use crate::csv::{fmt_f64, CsvTable};
use crate::mc::{check_replications, exclude_failures, replicate, RiskEstimate};
use crate::model_space::{Model, Observation, ParamPoint};
use crate::optimize::{hessian, maximize, SearchBox};
use crate::rng::SeedStream;
use crate::{CalibError, Result};

/// Maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub theta: ParamPoint,
    pub log_likelihood: f64,
    /// Negative Hessian of the log-likelihood at the optimum, by central
    /// differences. Entries may be non-finite when the optimum sits on a
    /// parameter bound.
    pub observed_info: Vec<Vec<f64>>,
    pub on_boundary: bool,
}

/// `argmax_theta log pi(y | theta)` over a finite box.
pub fn mle(model: &dyn Model, y: &Observation, bx: &SearchBox) -> Result<MleFit> {
    mle_with_starts(model, y, bx, &[])
}

pub(crate) fn mle_with_starts(
    model: &dyn Model,
    y: &Observation,
    bx: &SearchBox,
    starts: &[Vec<f64>],
) -> Result<MleFit> {
    let space = model.param_space();
    bx.check_within(space, &(0..space.dim()).collect::<Vec<_>>())?;
    if y.n_rows() != model.n_obs() || y.dim() != model.obs_dim() {
        return Err(CalibError::Shape(format!(
            "observation is {} x {}, model expects {} x {}",
            y.n_rows(),
            y.dim(),
            model.n_obs(),
            model.obs_dim()
        )));
    }
    let ll = |t: &[f64]| model.log_likelihood_unchecked(y, t);
    let opt = maximize(ll, bx, starts)?;
    let h: Vec<f64> = opt
        .point
        .iter()
        .enumerate()
        .map(|(i, &v)| 1e-4 * v.abs().max((bx.upper()[i] - bx.lower()[i]).min(1.0)).max(1e-12))
        .collect();
    let hess = hessian(ll, &opt.point, &h);
    Ok(MleFit {
        theta: ParamPoint(opt.point),
        log_likelihood: opt.value,
        observed_info: hess.into_iter().map(|r| r.into_iter().map(|v| -v).collect()).collect(),
        on_boundary: opt.on_boundary,
    })
}

/// A map from observations to estimates.
pub trait Estimator: Send + Sync {
    type Output;
    fn name(&self) -> &str;
    fn estimate(&self, y: &Observation) -> Result<Self::Output>;
}

type PointFn = dyn Fn(&Observation) -> Result<ParamPoint> + Send + Sync;

/// Estimator returning a single model configuration.
#[derive(Clone)]
pub struct PointEstimator {
    name: String,
    f: Arc<PointFn>,
}

impl fmt::Debug for PointEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointEstimator").field("name", &self.name).finish()
    }
}

impl PointEstimator {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&Observation) -> Result<ParamPoint> + Send + Sync + 'static,
    ) -> Self {
        PointEstimator {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn mle(model: Arc<dyn Model>, bx: SearchBox) -> Self {
        PointEstimator::new("mle", move |y| Ok(mle(model.as_ref(), y, &bx)?.theta))
    }

    /// `c * ybar` for a scalar location parameter.
    pub fn scaled_mean(c: f64) -> Self {
        PointEstimator::new(format!("scaled_mean_{c}"), move |y| {
            Ok(ParamPoint(vec![c * y.column_mean(0)]))
        })
    }

    /// A constant estimate, ignoring the data.
    pub fn constant(theta: ParamPoint) -> Self {
        PointEstimator::new("constant", move |_| Ok(theta.clone()))
    }
}

impl Estimator for PointEstimator {
    type Output = ParamPoint;
    fn name(&self) -> &str {
        &self.name
    }
    fn estimate(&self, y: &Observation) -> Result<ParamPoint> {
        (self.f)(y)
    }
}

/// A subset of the parameter space produced by a set estimator.
#[derive(Clone)]
pub enum ConfidenceSet {
    Everything,
    Empty,
    /// Per-component closed intervals.
    Box(Vec<(f64, f64)>),
    Predicate(Arc<dyn Fn(&ParamPoint) -> bool + Send + Sync>),
}

impl fmt::Debug for ConfidenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfidenceSet::Everything => write!(f, "Everything"),
            ConfidenceSet::Empty => write!(f, "Empty"),
            ConfidenceSet::Box(b) => f.debug_tuple("Box").field(b).finish(),
            ConfidenceSet::Predicate(_) => write!(f, "Predicate(..)"),
        }
    }
}

impl ConfidenceSet {
    pub fn contains(&self, theta: &ParamPoint) -> bool {
        match self {
            ConfidenceSet::Everything => true,
            ConfidenceSet::Empty => false,
            ConfidenceSet::Box(b) => {
                b.len() == theta.dim() && b.iter().zip(theta.values()).all(|(&(lo, hi), &v)| v >= lo && v <= hi)
            }
            ConfidenceSet::Predicate(p) => p(theta),
        }
    }

    /// The interval form, when the set has one.
    pub fn intervals(&self) -> Option<&[(f64, f64)]> {
        match self {
            ConfidenceSet::Box(b) => Some(b),
            _ => None,
        }
    }
}

type SetFn = dyn Fn(&Observation) -> Result<ConfidenceSet> + Send + Sync;

/// Estimator returning a confidence set.
#[derive(Clone)]
pub struct SetEstimator {
    name: String,
    f: Arc<SetFn>,
}

impl fmt::Debug for SetEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetEstimator").field("name", &self.name).finish()
    }
}

impl SetEstimator {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&Observation) -> Result<ConfidenceSet> + Send + Sync + 'static,
    ) -> Self {
        SetEstimator {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `ybar ± z sigma / sqrt(n)` on a scalar mean.
    pub fn normal_mean_interval(sigma: f64, n_obs: usize, z: f64) -> Self {
        let half = z * sigma / (n_obs as f64).sqrt();
        SetEstimator::new(format!("normal_interval_z{z}"), move |y| {
            let m = y.column_mean(0);
            Ok(ConfidenceSet::Box(vec![(m - half, m + half)]))
        })
    }

    pub fn everything() -> Self {
        SetEstimator::new("everything", |_| Ok(ConfidenceSet::Everything))
    }

    pub fn empty() -> Self {
        SetEstimator::new("empty", |_| Ok(ConfidenceSet::Empty))
    }
}

impl Estimator for SetEstimator {
    type Output = ConfidenceSet;
    fn name(&self) -> &str {
        &self.name
    }
    fn estimate(&self, y: &Observation) -> Result<ConfidenceSet> {
        (self.f)(y)
    }
}

/// `L(estimate, truth)`.
pub trait Loss<O: ?Sized>: Send + Sync {
    fn evaluate(&self, estimate: &O, truth: &ParamPoint) -> f64;
}

/// `(sum_i (theta_i - hat_i)^2)^(p/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpLoss {
    p: f64,
}

pub fn lp_loss(p: f64) -> Result<LpLoss> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(CalibError::invalid(format!("L^p loss needs p >= 1, got {p}")));
    }
    Ok(LpLoss { p })
}

impl Loss<ParamPoint> for LpLoss {
    fn evaluate(&self, estimate: &ParamPoint, truth: &ParamPoint) -> f64 {
        let sq: f64 = estimate
            .values()
            .iter()
            .zip(truth.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        sq.powf(0.5 * self.p)
    }
}

/// 1 when the truth lies inside the set. Its expectation is the coverage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InclusionLoss;

pub fn inclusion_loss() -> InclusionLoss {
    InclusionLoss
}

impl Loss<ConfidenceSet> for InclusionLoss {
    fn evaluate(&self, estimate: &ConfidenceSet, truth: &ParamPoint) -> f64 {
        if estimate.contains(truth) {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZeroLoss;

impl<O: ?Sized> Loss<O> for ZeroLoss {
    fn evaluate(&self, _: &O, _: &ParamPoint) -> f64 {
        0.0
    }
}

/// Wraps a closure as a [`Loss`].
pub struct FnLoss<F>(pub F);

impl<O: ?Sized, F: Fn(&O, &ParamPoint) -> f64 + Send + Sync> Loss<O> for FnLoss<F> {
    fn evaluate(&self, estimate: &O, truth: &ParamPoint) -> f64 {
        (self.0)(estimate, truth)
    }
}

fn losses_at<E: Estimator + ?Sized>(
    model: &dyn Model,
    theta: &ParamPoint,
    est: &E,
    loss: &dyn Loss<E::Output>,
    n_rep: usize,
    stream: &SeedStream,
) -> Result<(Vec<f64>, usize)> {
    check_replications(n_rep, 2)?;
    model.param_space().check(theta.values())?;
    let results = replicate(stream, n_rep, |_, rng| {
        let y = model.sample_observation(theta, rng)?;
        let e = est.estimate(&y)?;
        let v = loss.evaluate(&e, theta);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CalibError::Evaluation(format!("loss is {v}")))
        }
    });
    exclude_failures(results)
}

/// Monte Carlo expected loss `E_{y ~ pi(y|theta)} L(est(y), theta)`.
///
/// Replications whose estimator fails are excluded and counted; more than
/// 1% failures is an error.
pub fn expected_loss<E: Estimator + ?Sized>(
    model: &dyn Model,
    theta: &ParamPoint,
    est: &E,
    loss: &dyn Loss<E::Output>,
    n_rep: usize,
    stream: &SeedStream,
) -> Result<RiskEstimate> {
    let (values, failed) = losses_at(model, theta, est, loss, n_rep, stream)?;
    Ok(RiskEstimate::from_samples(&values, failed))
}

/// Risk at every grid point and the largest of them.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub worst: RiskEstimate,
    pub argmax: ParamPoint,
    pub per_point: Vec<(ParamPoint, RiskEstimate)>,
}

/// Maximum expected loss over a finite configuration grid. Every grid
/// point uses the same replication streams (common random numbers).
pub fn max_expected_loss<E: Estimator + ?Sized>(
    model: &dyn Model,
    theta_grid: &[ParamPoint],
    est: &E,
    loss: &dyn Loss<E::Output>,
    n_rep: usize,
    stream: &SeedStream,
) -> Result<WorstCase> {
    if theta_grid.is_empty() {
        return Err(CalibError::invalid("configuration grid is empty"));
    }
    let per_point = theta_grid
        .iter()
        .map(|t| Ok((t.clone(), expected_loss(model, t, est, loss, n_rep, stream)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, (_, r)) in per_point.iter().enumerate() {
        if r.value > per_point[best].1.value {
            best = i;
        }
    }
    Ok(WorstCase {
        worst: per_point[best].1,
        argmax: per_point[best].0.clone(),
        per_point,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxResult {
    pub best_index: usize,
    pub best_name: String,
    pub risk: RiskEstimate,
    pub argmax: ParamPoint,
    /// Worst case of every family member, in family order.
    pub members: Vec<(String, WorstCase)>,
}

impl MinimaxResult {
    /// Long table: estimator, theta_*, risk, se.
    pub fn risk_table(&self, names: &[String]) -> CsvTable {
        let mut header = vec!["estimator".to_string()];
        header.extend(names.iter().map(|n| format!("theta_{n}")));
        header.extend(["risk".to_string(), "se".to_string()]);
        let mut t = CsvTable::new(header);
        for (name, wc) in &self.members {
            for (theta, r) in &wc.per_point {
                let mut row = vec![name.clone()];
                row.extend(theta.values().iter().map(|&v| fmt_f64(v)));
                row.extend([fmt_f64(r.value), fmt_f64(r.std_error)]);
                t.push(row);
            }
        }
        t
    }

    /// estimator, max_risk, se, theta_* at the argmax, selected.
    pub fn summary_table(&self, names: &[String]) -> CsvTable {
        let mut header: Vec<String> = ["estimator", "max_risk", "se"].map(String::from).to_vec();
        header.extend(names.iter().map(|n| format!("argmax_{n}")));
        header.push("selected".into());
        let mut t = CsvTable::new(header);
        for (i, (name, wc)) in self.members.iter().enumerate() {
            let mut row = vec![name.clone(), fmt_f64(wc.worst.value), fmt_f64(wc.worst.std_error)];
            row.extend(wc.argmax.values().iter().map(|&v| fmt_f64(v)));
            row.push((i == self.best_index).to_string());
            t.push(row);
        }
        t
    }
}

/// The family member with the smallest maximum expected loss; ties go to
/// the earliest member. Every member sees the same replication streams.
pub fn minimax_select<E: Estimator>(
    model: &dyn Model,
    family: &[E],
    theta_grid: &[ParamPoint],
    loss: &dyn Loss<E::Output>,
    n_rep: usize,
    stream: &SeedStream,
) -> Result<MinimaxResult> {
    if family.is_empty() {
        return Err(CalibError::invalid("estimator family is empty"));
    }
    let members = family
        .iter()
        .map(|e| {
            Ok((
                e.name().to_string(),
                max_expected_loss(model, theta_grid, e, loss, n_rep, stream)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, (_, wc)) in members.iter().enumerate() {
        if wc.worst.value < members[best].1.worst.value {
            best = i;
        }
    }
    Ok(MinimaxResult {
        best_index: best,
        best_name: members[best].0.clone(),
        risk: members[best].1.worst,
        argmax: members[best].1.argmax.clone(),
        members,
    })
}

/// Fraction of replications whose confidence set contains `theta`, with a
/// binomial standard error.
pub fn coverage(
    model: &dyn Model,
    theta: &ParamPoint,
    set_est: &SetEstimator,
    n_rep: usize,
    stream: &SeedStream,
) -> Result<RiskEstimate> {
    let (values, failed) = losses_at(model, theta, set_est, &InclusionLoss, n_rep, stream)?;
    let hits = values.iter().filter(|&&v| v > 0.5).count();
    Ok(RiskEstimate::binomial(hits, values.len(), failed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_space::{GaussianSignalBackground, NormalMean, SignalBackgroundOptions};
    use approx::assert_abs_diff_eq;

    fn unit_mean(n: usize) -> Arc<dyn Model> {
        Arc::new(NormalMean::new(1.0, n).unwrap())
    }

    #[test]
    fn mle_normal_mean() {
        let m = unit_mean(4);
        let y = Observation::scalar(vec![1.0, 2.0, 1.5, 2.3]).unwrap();
        let fit = mle(m.as_ref(), &y, &SearchBox::new(vec![-10.0], vec![10.0]).unwrap()).unwrap();
        assert!((fit.theta[0] - 1.7).abs() < 1e-4, "{:?}", fit.theta);
        assert!((fit.observed_info[0][0] - 4.0).abs() < 0.01 * 4.0);
        assert!(!fit.on_boundary);

        let one = unit_mean(1);
        let fit = mle(
            one.as_ref(),
            &Observation::scalar(vec![-0.37]).unwrap(),
            &SearchBox::new(vec![-5.0], vec![5.0]).unwrap(),
        )
        .unwrap();
        assert!((fit.theta[0] + 0.37).abs() < 1e-6);
    }

    #[test]
    fn mle_information_scales_with_sigma() {
        let m = NormalMean::new(2.0, 10).unwrap();
        let y = Observation::scalar((0..10).map(|i| i as f64 * 0.1).collect()).unwrap();
        let fit = mle(&m, &y, &SearchBox::new(vec![-10.0], vec![10.0]).unwrap()).unwrap();
        assert!((fit.observed_info[0][0] - 10.0 / 4.0).abs() < 0.01 * 2.5);
    }

    #[test]
    fn mle_boundary_flag_and_errors() {
        let m = unit_mean(1);
        let y = Observation::scalar(vec![5.0]).unwrap();
        let fit = mle(m.as_ref(), &y, &SearchBox::new(vec![-1.0], vec![1.0]).unwrap()).unwrap();
        assert!(fit.on_boundary);
        assert_abs_diff_eq!(fit.theta[0], 1.0, epsilon = 1e-9);
        assert!(SearchBox::new(vec![f64::NEG_INFINITY], vec![1.0]).is_err());
        let nn = NormalMean::nonnegative(1.0, 1).unwrap();
        assert!(mle(&nn, &y, &SearchBox::new(vec![-1.0], vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn mle_three_parameters() {
        let m = GaussianSignalBackground::with_options(
            50,
            SignalBackgroundOptions {
                known_background: Some(1.0),
                ..Default::default()
            },
        )
        .unwrap();
        let y = m
            .sample_observation(&ParamPoint::new(vec![2.0, 0.5]), &mut SeedStream::new(2).replication(0))
            .unwrap();
        let fit = mle(&m, &y, &SearchBox::new(vec![-5.0, 0.05], vec![5.0, 3.0]).unwrap()).unwrap();
        let ybar = y.column_mean(0);
        let s = (y.data().iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / 50.0).sqrt();
        assert!((fit.theta[0] - (ybar - 1.0)).abs() < 1e-5);
        assert!((fit.theta[1] - s).abs() < 1e-5);
    }

    #[test]
    fn losses() {
        let a = ParamPoint::new(vec![1.0]);
        assert_eq!(lp_loss(2.0).unwrap().evaluate(&a, &a), 0.0);
        assert_eq!(lp_loss(2.0).unwrap().evaluate(&ParamPoint::new(vec![4.0]), &a), 9.0);
        assert_eq!(lp_loss(1.0).unwrap().evaluate(&ParamPoint::new(vec![-2.0]), &a), 3.0);
        assert!(lp_loss(0.5).is_err());

        let half = ParamPoint::new(vec![0.5]);
        assert_eq!(InclusionLoss.evaluate(&ConfidenceSet::Everything, &half), 1.0);
        assert_eq!(InclusionLoss.evaluate(&ConfidenceSet::Empty, &half), 0.0);
        assert_eq!(
            InclusionLoss.evaluate(&ConfidenceSet::Box(vec![(0.0, 1.0)]), &half),
            1.0
        );
    }

    #[test]
    fn expected_loss_of_mle() {
        let m = unit_mean(1);
        let est = PointEstimator::mle(m.clone(), SearchBox::new(vec![-10.0], vec![10.0]).unwrap());
        let r = expected_loss(
            m.as_ref(),
            &ParamPoint::new(vec![0.3]),
            &est,
            &lp_loss(2.0).unwrap(),
            10_000,
            &SeedStream::new(17),
        )
        .unwrap();
        assert!(r.within(1.0, 3.0), "{r:?}");
        assert_eq!(r.n_failed, 0);
    }

    #[test]
    fn zero_and_perfect_losses() {
        let m = unit_mean(3);
        let theta = ParamPoint::new(vec![0.7]);
        let s = SeedStream::new(1);
        let z = expected_loss(m.as_ref(), &theta, &PointEstimator::scaled_mean(1.0), &ZeroLoss, 50, &s).unwrap();
        assert_eq!((z.value, z.std_error), (0.0, 0.0));
        let oracle = PointEstimator::constant(theta.clone());
        let r = expected_loss(m.as_ref(), &theta, &oracle, &lp_loss(2.0).unwrap(), 50, &s).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(expected_loss(m.as_ref(), &theta, &oracle, &ZeroLoss, 1, &s).is_err());
    }

    #[test]
    fn failing_estimator_policy() {
        let m = unit_mean(1);
        let s = SeedStream::new(4);
        // fails when ybar > 2.5 (about 0.6% of draws at theta = 0)
        let flaky = PointEstimator::new("flaky", |y| {
            if y.column_mean(0) > 2.5 {
                Err(CalibError::Numerical("tail".into()))
            } else {
                Ok(ParamPoint::new(vec![y.column_mean(0)]))
            }
        });
        let r = expected_loss(
            m.as_ref(),
            &ParamPoint::new(vec![0.0]),
            &flaky,
            &lp_loss(2.0).unwrap(),
            5000,
            &s,
        )
        .unwrap();
        assert!(r.n_failed > 0);
        assert_eq!(r.n_replications + r.n_failed, 5000);
        let broken = PointEstimator::new("broken", |y| {
            if y.column_mean(0) > 1.0 {
                Err(CalibError::Numerical("tail".into()))
            } else {
                Ok(ParamPoint::new(vec![0.0]))
            }
        });
        assert!(matches!(
            expected_loss(
                m.as_ref(),
                &ParamPoint::new(vec![0.0]),
                &broken,
                &lp_loss(2.0).unwrap(),
                500,
                &s
            ),
            Err(CalibError::TooManyFailures { .. })
        ));
    }

    #[test]
    fn seed_invariance() {
        let m = unit_mean(1);
        let est = PointEstimator::scaled_mean(0.8);
        let theta = ParamPoint::new(vec![0.5]);
        let loss = lp_loss(2.0).unwrap();
        let a = expected_loss(m.as_ref(), &theta, &est, &loss, 10_000, &SeedStream::new(1)).unwrap();
        let b = expected_loss(m.as_ref(), &theta, &est, &loss, 10_000, &SeedStream::new(2)).unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < 2.0 * se.max(a.std_error));
    }

    #[test]
    fn location_family_risk_is_constant() {
        let m = unit_mean(4);
        let grid: Vec<ParamPoint> = [-2.0, -0.5, 0.0, 1.0, 3.0]
            .iter()
            .map(|&t| ParamPoint::new(vec![t]))
            .collect();
        let wc = max_expected_loss(
            m.as_ref(),
            &grid,
            &PointEstimator::scaled_mean(1.0),
            &lp_loss(2.0).unwrap(),
            4000,
            &SeedStream::new(9),
        )
        .unwrap();
        // with common random numbers the risk is identical up to rounding
        for (_, r) in &wc.per_point {
            assert!((r.value - wc.worst.value).abs() < 1e-9);
        }
        assert!(wc.worst.within(0.25, 3.0));
    }

    #[test]
    fn shrinkage_worst_case_at_edges() {
        let m = unit_mean(1);
        let grid: Vec<ParamPoint> = (0..=20).map(|i| ParamPoint::new(vec![-1.0 + 0.1 * i as f64])).collect();
        let wc = max_expected_loss(
            m.as_ref(),
            &grid,
            &PointEstimator::scaled_mean(0.3),
            &lp_loss(2.0).unwrap(),
            4000,
            &SeedStream::new(10),
        )
        .unwrap();
        assert!((wc.argmax[0].abs() - 1.0).abs() < 1e-12);
        // c^2 + (1-c)^2 theta^2 at |theta| = 1
        assert!(wc.worst.within(0.09 + 0.49, 3.0));
        let single = max_expected_loss(
            m.as_ref(),
            &grid[3..4],
            &PointEstimator::scaled_mean(0.3),
            &lp_loss(2.0).unwrap(),
            10,
            &SeedStream::new(10),
        )
        .unwrap();
        assert_eq!(single.argmax, grid[3]);
    }

    #[test]
    fn minimax_tie_break_and_singleton() {
        let m = unit_mean(1);
        let grid = vec![ParamPoint::new(vec![0.0])];
        let loss = lp_loss(2.0).unwrap();
        let fam = vec![PointEstimator::scaled_mean(0.5)];
        let r = minimax_select(m.as_ref(), &fam, &grid, &loss, 100, &SeedStream::new(1)).unwrap();
        assert_eq!(r.best_index, 0);
        let dup = vec![PointEstimator::scaled_mean(0.5), PointEstimator::scaled_mean(0.5)];
        let r = minimax_select(m.as_ref(), &dup, &grid, &loss, 100, &SeedStream::new(1)).unwrap();
        assert_eq!(r.best_index, 0);
        let empty: Vec<PointEstimator> = vec![];
        assert!(minimax_select(m.as_ref(), &empty, &grid, &loss, 100, &SeedStream::new(1)).is_err());
    }

    #[test]
    fn coverage_trivial_sets() {
        let m = unit_mean(1);
        let t = ParamPoint::new(vec![0.0]);
        let s = SeedStream::new(3);
        assert_eq!(
            coverage(m.as_ref(), &t, &SetEstimator::everything(), 100, &s)
                .unwrap()
                .value,
            1.0
        );
        assert_eq!(
            coverage(m.as_ref(), &t, &SetEstimator::empty(), 100, &s).unwrap().value,
            0.0
        );
    }

    #[test]
    fn normal_interval_coverage() {
        let m = unit_mean(5);
        let est = SetEstimator::normal_mean_interval(1.0, 5, 1.959_963_984_540_054);
        for theta in [-1.0, 0.0, 2.5] {
            let c = coverage(
                m.as_ref(),
                &ParamPoint::new(vec![theta]),
                &est,
                10_000,
                &SeedStream::new(6),
            )
            .unwrap();
            let se = (0.95f64 * 0.05 / 10_000.0).sqrt();
            assert!((c.value - 0.95).abs() <= 3.0 * se, "{theta}: {c:?}");
        }
    }
}
