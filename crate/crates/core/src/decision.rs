//! Discovery decision rules and their rate tables.

use std::fmt;
use std::sync::Arc;

use crate::csv::{fmt_f64, CsvTable};
use crate::frequentist::mle;
use crate::hypothesis::{NhstTest, NullDistribution, Statistic};
use crate::mc::{check_replications, exclude_failures, replicate};
use crate::model_space::{sample_conditional_joint, sample_joint, Model, Observation, Prior};
use crate::optimize::SearchBox;
use crate::posterior_grid::{build_grid_posterior, GridSpec};
use crate::predictive::{plugin_predictive, posterior_predictive, predictive_score, PredictiveDistribution};
use crate::rng::SeedStream;
use crate::{CalibError, ParamPoint, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    ClaimAbsence,
    ClaimPresence,
    NoClaim,
}

impl Decision {
    pub const ALL: [Decision; 3] = [Decision::ClaimAbsence, Decision::ClaimPresence, Decision::NoClaim];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Decision::ClaimAbsence => "claim_absence",
            Decision::ClaimPresence => "claim_presence",
            Decision::NoClaim => "no_claim",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truth {
    Absence,
    Presence,
}

impl Truth {
    pub const ALL: [Truth; 2] = [Truth::Absence, Truth::Presence];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Truth::Absence => "absence",
            Truth::Presence => "presence",
        }
    }
}

/// A map from observations to claims.
pub trait DecisionRule: Send + Sync {
    fn name(&self) -> &str;
    fn decide(&self, y: &Observation) -> Result<Decision>;
}

/// Claims presence when the test rejects, absence otherwise.
#[derive(Debug, Clone)]
pub struct NhstRule {
    pub test: NhstTest,
}

impl NhstRule {
    pub fn new(test: NhstTest) -> Self {
        NhstRule { test }
    }

    /// Test with an analytic null at `null_theta`.
    pub fn analytic(model: &dyn Model, null_theta: &ParamPoint, statistic: Statistic, alpha: f64) -> Result<Self> {
        let null = NullDistribution::analytic(model, null_theta, &statistic)?;
        Ok(NhstRule {
            test: NhstTest::new(statistic, null, alpha)?,
        })
    }
}

impl DecisionRule for NhstRule {
    fn name(&self) -> &str {
        "nhst"
    }

    fn decide(&self, y: &Observation) -> Result<Decision> {
        Ok(if self.test.test(y)?.rejected {
            Decision::ClaimPresence
        } else {
            Decision::ClaimAbsence
        })
    }
}

/// Claims presence when the posterior probability of `|theta| <= theta0`
/// on the phenomenological component is below `1 - alpha`.
#[derive(Clone)]
pub struct RopeRule {
    model: Arc<dyn Model>,
    prior: Arc<dyn Prior>,
    grid: GridSpec,
    component: usize,
    theta0: f64,
    alpha: f64,
}

impl fmt::Debug for RopeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RopeRule")
            .field("model", &self.model.name())
            .field("theta0", &self.theta0)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl RopeRule {
    pub fn new(model: Arc<dyn Model>, prior: Arc<dyn Prior>, grid: GridSpec, theta0: f64, alpha: f64) -> Result<Self> {
        if !(theta0 >= 0.0 && theta0.is_finite()) {
            return Err(CalibError::invalid(format!(
                "theta0 must be finite and >= 0, got {theta0}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CalibError::Domain {
                name: "alpha".into(),
                value: alpha,
                lower: 0.0,
                upper: 1.0,
            });
        }
        let phenom = model.param_space().phenom_indices();
        if phenom.len() != 1 {
            return Err(CalibError::invalid(
                "region of practical equivalence needs exactly one phenomenological component",
            ));
        }
        Ok(RopeRule {
            model,
            prior,
            grid,
            component: phenom[0],
            theta0,
            alpha,
        })
    }

    /// Posterior probability of `[-theta0, theta0]`.
    pub fn rope_probability(&self, y: &Observation) -> Result<f64> {
        let gp = build_grid_posterior(self.model.as_ref(), self.prior.as_ref(), y, &self.grid)?;
        gp.interval_probability(self.component, -self.theta0, self.theta0)
    }
}

impl DecisionRule for RopeRule {
    fn name(&self) -> &str {
        "rope"
    }

    fn decide(&self, y: &Observation) -> Result<Decision> {
        Ok(if self.rope_probability(y)? + self.alpha < 1.0 {
            Decision::ClaimPresence
        } else {
            Decision::ClaimAbsence
        })
    }
}

/// A model, its prior and a prior probability, for model comparison.
#[derive(Clone)]
pub struct Hypothesis {
    pub model: Arc<dyn Model>,
    pub prior: Arc<dyn Prior>,
    /// Needed unless the prior is a point mass.
    pub grid: Option<GridSpec>,
    pub prior_prob: f64,
}

impl fmt::Debug for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hypothesis")
            .field("model", &self.model.name())
            .field("prior_prob", &self.prior_prob)
            .finish()
    }
}

impl Hypothesis {
    /// `log pi(y | M)`. A point-mass prior gives the likelihood at the
    /// point; otherwise the grid evidence.
    pub fn log_evidence(&self, y: &Observation) -> Result<f64> {
        if let Some(theta) = self.prior.point_mass() {
            return self.model.log_density(y, &theta);
        }
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| CalibError::invalid("hypothesis with a continuous prior needs a grid"))?;
        Ok(build_grid_posterior(self.model.as_ref(), self.prior.as_ref(), y, grid)?.log_evidence())
    }
}

/// Claims presence when the posterior odds favour the presence model:
/// `log pi(y|P) - log pi(y|A) > log(pi(A) / pi(P))`. Ties claim absence.
#[derive(Debug, Clone)]
pub struct BayesFactorRule {
    pub absence: Hypothesis,
    pub presence: Hypothesis,
}

impl BayesFactorRule {
    pub fn new(absence: Hypothesis, presence: Hypothesis) -> Result<Self> {
        for h in [&absence, &presence] {
            if !(h.prior_prob > 0.0 && h.prior_prob < 1.0) {
                return Err(CalibError::Domain {
                    name: "prior_prob".into(),
                    value: h.prior_prob,
                    lower: 0.0,
                    upper: 1.0,
                });
            }
        }
        Ok(BayesFactorRule { absence, presence })
    }

    pub fn log_bayes_factor(&self, y: &Observation) -> Result<f64> {
        Ok(self.presence.log_evidence(y)? - self.absence.log_evidence(y)?)
    }

    pub fn threshold(&self) -> f64 {
        (self.absence.prior_prob / self.presence.prior_prob).ln()
    }
}

impl DecisionRule for BayesFactorRule {
    fn name(&self) -> &str {
        "bayes_factor"
    }

    fn decide(&self, y: &Observation) -> Result<Decision> {
        Ok(decide_log_ratio(self.log_bayes_factor(y)?, self.threshold()))
    }
}

fn decide_log_ratio(log_bf: f64, threshold: f64) -> Decision {
    if log_bf > threshold {
        Decision::ClaimPresence
    } else {
        Decision::ClaimAbsence
    }
}

/// How a predictive distribution is obtained from an observation.
#[derive(Clone)]
pub enum PredictiveFit {
    /// Independent of the observation.
    Fixed(PredictiveDistribution),
    /// Plug in the maximum-likelihood estimate over `bx`.
    Plugin { model: Arc<dyn Model>, bx: SearchBox },
    /// Posterior predictive on a grid.
    Posterior {
        model: Arc<dyn Model>,
        prior: Arc<dyn Prior>,
        grid: GridSpec,
    },
}

impl fmt::Debug for PredictiveFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictiveFit::Fixed(p) => f.debug_tuple("Fixed").field(p).finish(),
            PredictiveFit::Plugin { model, .. } => write!(f, "Plugin({})", model.name()),
            PredictiveFit::Posterior { model, .. } => write!(f, "Posterior({})", model.name()),
        }
    }
}

impl PredictiveFit {
    pub fn fit(&self, y: &Observation) -> Result<PredictiveDistribution> {
        match self {
            PredictiveFit::Fixed(p) => Ok(p.clone()),
            PredictiveFit::Plugin { model, bx } => {
                let theta = mle(model.as_ref(), y, bx)?.theta;
                plugin_predictive(model.clone(), &theta)
            }
            PredictiveFit::Posterior { model, prior, grid } => {
                let gp = build_grid_posterior(model.as_ref(), prior.as_ref(), y, grid)?;
                posterior_predictive(model.clone(), &gp)
            }
        }
    }
}

/// Claims presence when the presence predictive scores strictly lower.
/// Scores use `holdout` when given, otherwise the observation itself.
#[derive(Debug, Clone)]
pub struct PredictiveScoreRule {
    pub absence: PredictiveFit,
    pub presence: PredictiveFit,
    pub holdout: Option<Observation>,
}

impl PredictiveScoreRule {
    /// `(S_absence, S_presence)`.
    pub fn scores(&self, y: &Observation) -> Result<(f64, f64)> {
        let target = self.holdout.as_ref().unwrap_or(y);
        let a = predictive_score(&self.absence.fit(y)?, target)?.value;
        let p = predictive_score(&self.presence.fit(y)?, target)?.value;
        Ok((a, p))
    }
}

impl DecisionRule for PredictiveScoreRule {
    fn name(&self) -> &str {
        "predictive_score"
    }

    fn decide(&self, y: &Observation) -> Result<Decision> {
        let (a, p) = self.scores(y)?;
        Ok(if p < a {
            Decision::ClaimPresence
        } else {
            Decision::ClaimAbsence
        })
    }
}

type DecideFn = dyn Fn(&Observation) -> Result<Decision> + Send + Sync;

/// A rule backed by a closure.
#[derive(Clone)]
pub struct FnRule {
    name: String,
    f: Arc<DecideFn>,
}

impl FnRule {
    pub fn new(name: impl Into<String>, f: impl Fn(&Observation) -> Result<Decision> + Send + Sync + 'static) -> Self {
        FnRule {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(d: Decision) -> Self {
        FnRule::new(d.label(), move |_| Ok(d))
    }
}

impl DecisionRule for FnRule {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, y: &Observation) -> Result<Decision> {
        (self.f)(y)
    }
}

/// How true configurations are drawn for a rate table.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthSampling {
    /// Draw from the model prior and classify each draw by
    /// `|phenom| <= theta0`.
    ModelPrior,
    /// `n_rep` replications per truth row with the phenomenological
    /// components pinned. Replication `i` uses entry `i % len`.
    Conditional {
        absence: Vec<Vec<f64>>,
        presence: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCell {
    pub rate: f64,
    pub std_error: f64,
    pub count: usize,
}

/// Decision rates conditional on the truth, indexed `[truth][decision]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub cells: [[RateCell; 3]; 2],
    pub row_counts: [usize; 2],
    /// Rows with no replications; their rates are NaN.
    pub undefined: [bool; 2],
    pub n_failed: usize,
    pub warnings: Vec<String>,
}

impl RateTable {
    pub fn from_counts(counts: [[usize; 3]; 2]) -> Self {
        let mut cells = [[RateCell {
            rate: f64::NAN,
            std_error: f64::NAN,
            count: 0,
        }; 3]; 2];
        let mut row_counts = [0; 2];
        let mut undefined = [false; 2];
        let mut warnings = vec![];
        for t in 0..2 {
            let n: usize = counts[t].iter().sum();
            row_counts[t] = n;
            undefined[t] = n == 0;
            if n == 0 {
                warnings.push(format!("no replications with truth `{}`", Truth::ALL[t].label()));
            }
            for d in 0..3 {
                let c = counts[t][d];
                cells[t][d] = if n == 0 {
                    RateCell {
                        rate: f64::NAN,
                        std_error: f64::NAN,
                        count: 0,
                    }
                } else {
                    let p = c as f64 / n as f64;
                    RateCell {
                        rate: p,
                        std_error: (p * (1.0 - p) / n as f64).sqrt(),
                        count: c,
                    }
                };
            }
        }
        RateTable {
            cells,
            row_counts,
            undefined,
            n_failed: 0,
            warnings,
        }
    }

    pub fn cell(&self, truth: Truth, decision: Decision) -> RateCell {
        self.cells[truth.index()][decision.index()]
    }

    /// Rate of claiming presence when the phenomenon is absent.
    pub fn fdr(&self) -> f64 {
        self.cell(Truth::Absence, Decision::ClaimPresence).rate
    }

    /// Rate of claiming presence when the phenomenon is present.
    pub fn tdr(&self) -> f64 {
        self.cell(Truth::Presence, Decision::ClaimPresence).rate
    }

    /// Wilson score interval for a cell at normal quantile `z`.
    pub fn wilson(&self, truth: Truth, decision: Decision, z: f64) -> Option<(f64, f64)> {
        let n = self.row_counts[truth.index()] as f64;
        if n == 0.0 {
            return None;
        }
        let p = self.cell(truth, decision).count as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Some(((centre - half).max(0.0), (centre + half).min(1.0)))
    }

    /// Columns `truth, decision, rate, se, count`.
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["truth", "decision", "rate", "se", "count"].map(String::from).to_vec());
        for truth in Truth::ALL {
            for d in Decision::ALL {
                let c = self.cell(truth, d);
                t.push(vec![
                    truth.label().into(),
                    d.label().into(),
                    fmt_f64(c.rate),
                    fmt_f64(c.std_error),
                    c.count.to_string(),
                ]);
            }
        }
        t
    }
}

/// Simulate truths and observations, apply `rule` and tabulate decisions
/// by truth. Replications where the rule fails are excluded (at most 1%).
pub fn estimate_rate_table(
    model: &dyn Model,
    prior: &dyn Prior,
    theta0: f64,
    rule: &dyn DecisionRule,
    n_rep: usize,
    stream: &SeedStream,
    sampling: &TruthSampling,
) -> Result<RateTable> {
    check_replications(n_rep, 1)?;
    if !(theta0 >= 0.0) {
        return Err(CalibError::invalid(format!(
            "partition threshold must be >= 0, got {theta0}"
        )));
    }
    let space = model.param_space();
    let mut counts = [[0usize; 3]; 2];
    let mut n_failed = 0;
    match sampling {
        TruthSampling::ModelPrior => {
            let results = replicate(stream, n_rep, |_, rng| {
                let (theta, y) = sample_joint(model, prior, rng)?;
                let truth = if space.phenom_magnitude(theta.values()) <= theta0 {
                    Truth::Absence
                } else {
                    Truth::Presence
                };
                Ok((truth, rule.decide(&y)?))
            });
            let (pairs, failed) = exclude_failures(results)?;
            n_failed += failed;
            for (t, d) in pairs {
                counts[t.index()][d.index()] += 1;
            }
        }
        TruthSampling::Conditional { absence, presence } => {
            for (truth, points) in [(Truth::Absence, absence), (Truth::Presence, presence)] {
                if points.is_empty() {
                    return Err(CalibError::invalid(format!(
                        "no `{}` configurations for conditional sampling",
                        truth.label()
                    )));
                }
                let sub = stream.child(truth.index() as u64);
                let results = replicate(&sub, n_rep, |i, rng| {
                    let (_, y) = sample_conditional_joint(model, prior, &points[i % points.len()], rng)?;
                    rule.decide(&y)
                });
                let (ds, failed) = exclude_failures(results)?;
                n_failed += failed;
                for d in ds {
                    counts[truth.index()][d.index()] += 1;
                }
            }
        }
    }
    let mut table = RateTable::from_counts(counts);
    table.n_failed = n_failed;
    if table.undefined[0] && theta0 == 0.0 {
        table
            .warnings
            .push("a zero partition threshold needs conditional sampling to reach the absence row".into());
    }
    Ok(table)
}

/// Losses attached to claiming a discovery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimLoss {
    /// Loss of claiming presence when the phenomenon is absent.
    pub l1: f64,
    /// Loss (usually negative) of claiming presence when it is present.
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimLossReport {
    /// `w_A FDR L1 + w_P TDR L2`.
    pub weighted: f64,
    /// `(1 - FDR) L1 + TDR L2`.
    pub literal: f64,
}

/// Expected loss of the claims recorded in `table`.
pub fn expected_claim_loss(table: &RateTable, loss: ClaimLoss, weights: (f64, f64)) -> Result<ClaimLossReport> {
    let (wa, wp) = weights;
    if !(wa >= 0.0 && wp >= 0.0 && (wa + wp - 1.0).abs() <= 1e-12) {
        return Err(CalibError::invalid(format!(
            "truth weights ({wa}, {wp}) must be nonnegative and sum to 1"
        )));
    }
    if !(loss.l1.is_finite() && loss.l2.is_finite()) {
        return Err(CalibError::invalid("claim losses must be finite"));
    }
    let (fdr, tdr) = (table.fdr(), table.tdr());
    if fdr.is_nan() || tdr.is_nan() {
        return Err(CalibError::invalid("rate table has an undefined truth row"));
    }
    Ok(ClaimLossReport {
        weighted: wa * fdr * loss.l1 + wp * tdr * loss.l2,
        literal: (1.0 - fdr) * loss.l1 + tdr * loss.l2,
    })
}
