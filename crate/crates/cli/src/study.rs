//! Turning a configuration into core objects and running the study.

use std::sync::Arc;

use calib_core::bayes_calibration::{eye_chart_dataset, run_calibration_study, StudyOptions};
use calib_core::csv::{fmt_f64, CsvTable};
use calib_core::decision::{
    estimate_rate_table, expected_claim_loss, BayesFactorRule, ClaimLoss, DecisionRule, Hypothesis, NhstRule,
    PredictiveFit, PredictiveScoreRule, RopeRule, TruthSampling,
};
use calib_core::frequentist::{coverage, lp_loss, minimax_select, PointEstimator, SetEstimator};
use calib_core::hypothesis::{power_curve, NhstTest, NullDistribution, Statistic};
use calib_core::limits::{anchored_set_estimator, limit_sensitivity};
use calib_core::optimize::SearchBox;
use calib_core::posterior_grid::build_grid_posterior;
use calib_core::predictive::{
    empirical_entropy, kl_divergence_mc, plugin_predictive, posterior_predictive, predictive_score, sample_holdout,
};
use calib_core::stats::normal_quantile;
use calib_core::{CalibError, GridSpec, Model, ParamPoint, Prior, SeedStream};

use crate::config::{
    build_grid, build_prior, CandidateConfig, EstimatorConfig, IntervalConfig, MarginalConfig, RuleConfig,
    SamplingConfig, StatisticConfig, StudyConfig, StudyKind,
};

/// Output file name and contents.
pub type Output = (String, CsvTable);

/// Core objects shared by every study kind.
pub struct Prepared {
    pub config: StudyConfig,
    pub model: Arc<dyn Model>,
    pub prior: Option<Arc<dyn Prior>>,
    pub grid: Option<GridSpec>,
    pub theta_grid: Vec<ParamPoint>,
}

struct Diagnostics(Vec<String>);

impl Diagnostics {
    fn check<T>(&mut self, field: &str, r: calib_core::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.0.push(format!("field `{field}`: {e}"));
                None
            }
        }
    }

    fn require<'a, T>(&mut self, field: &str, v: &'a Option<T>, study: StudyKind) -> Option<&'a T> {
        if v.is_none() {
            self.0
                .push(format!("field `{field}` is required for {study:?} studies"));
        }
        v.as_ref()
    }

    fn push(&mut self, msg: String) {
        self.0.push(msg);
    }
}

fn prior_for(model: &dyn Model, marginals: &[MarginalConfig]) -> calib_core::Result<Arc<dyn Prior>> {
    Ok(Arc::new(build_prior(model, marginals)?))
}

fn check_point(model: &dyn Model, v: &[f64]) -> calib_core::Result<ParamPoint> {
    model.param_space().check(v)?;
    Ok(ParamPoint::new(v.to_vec()))
}

fn check_grid_fits(model: &dyn Model, grid: &GridSpec) -> calib_core::Result<()> {
    let space = model.param_space();
    if grid.dim() != space.dim() {
        return Err(CalibError::Shape(format!(
            "grid has {} axes, model has {} parameters",
            grid.dim(),
            space.dim()
        )));
    }
    for (a, c) in grid.axes().iter().zip(space.components()) {
        if a.lower < c.lower || a.upper > c.upper {
            return Err(CalibError::InvalidArgument(format!(
                "grid box [{}, {}] for `{}` leaves the parameter bounds [{}, {}]",
                a.lower, a.upper, c.name, c.lower, c.upper
            )));
        }
    }
    Ok(())
}

fn grid_checked(model: &dyn Model, axes: &[crate::config::AxisConfig]) -> calib_core::Result<GridSpec> {
    let g = build_grid(axes)?;
    check_grid_fits(model, &g)?;
    Ok(g)
}

fn search_box(cfg: &StudyConfig) -> calib_core::Result<SearchBox> {
    let b = cfg
        .search_box
        .as_ref()
        .ok_or_else(|| CalibError::InvalidArgument("maximum likelihood needs `search_box`".into()))?;
    SearchBox::new(b.iter().map(|r| r[0]).collect(), b.iter().map(|r| r[1]).collect())
}

/// Build every object the study needs, collecting all problems found.
pub fn prepare(config: &StudyConfig) -> Result<Prepared, Vec<String>> {
    let mut d = Diagnostics(vec![]);
    let kind = config.study;
    if config.n_rep < 1 {
        d.push("field `n_rep` must be at least 1".into());
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        d.push(format!("field `alpha` must lie in (0, 1), got {}", config.alpha));
    }
    if !(config.theta0 >= 0.0 && config.theta0.is_finite()) {
        d.push(format!("field `theta0` must be finite and >= 0, got {}", config.theta0));
    }
    let Some(model) = d.check("model", config.model.build()) else {
        return Err(d.0);
    };
    let model: Arc<dyn Model> = Arc::from(model);

    let prior = config
        .prior
        .as_ref()
        .and_then(|p| d.check("prior", prior_for(model.as_ref(), p)));
    let grid = config
        .grid
        .as_ref()
        .and_then(|g| d.check("grid", grid_checked(model.as_ref(), g)));
    let theta_grid: Vec<ParamPoint> = config
        .theta_grid
        .iter()
        .flatten()
        .filter_map(|t| d.check("theta_grid", check_point(model.as_ref(), t)))
        .collect();
    if config.theta_grid.as_ref().is_some_and(Vec::is_empty) {
        d.push("field `theta_grid` is empty".into());
    }

    match kind {
        StudyKind::Sbc | StudyKind::Limits => {
            d.require("prior", &config.prior, kind);
            d.require("grid", &config.grid, kind);
            if kind == StudyKind::Limits {
                if model.param_space().phenom_indices().len() != 1 {
                    d.push("field `model`: limits need exactly one phenomenological parameter".into());
                }
                if config.theta_grid.is_some() {
                    d.check("model", anchored_set_estimator(model.as_ref(), config.alpha));
                }
            }
        }
        StudyKind::Power => {
            d.require("theta_grid", &config.theta_grid, kind);
            if let Some(n) = d.require("null_theta", &config.null_theta, kind) {
                if let Some(p) = d.check("null_theta", check_point(model.as_ref(), n)) {
                    d.check(
                        "statistic",
                        NullDistribution::analytic(model.as_ref(), &p, &statistic(config)),
                    );
                }
            }
        }
        StudyKind::Coverage => {
            d.require("theta_grid", &config.theta_grid, kind);
            if d.require("interval", &config.interval, kind).is_some() {
                d.check("interval", set_estimator(config, model.as_ref()));
            }
        }
        StudyKind::Minimax => {
            d.require("theta_grid", &config.theta_grid, kind);
            if let Some(f) = d.require("family", &config.family, kind) {
                if f.is_empty() {
                    d.push("field `family` is empty".into());
                }
                if f.iter().any(|e| matches!(e, EstimatorConfig::Mle)) {
                    d.check("search_box", search_box(config));
                }
            }
            d.check("loss_p", lp_loss(config.loss_p));
        }
        StudyKind::Discovery => {
            d.require("prior", &config.prior, kind);
            if let Some(SamplingConfig::Conditional { absence, presence }) = &config.sampling {
                for v in absence.iter().chain(presence) {
                    if v.len() != model.param_space().phenom_indices().len() {
                        d.push(format!(
                            "field `sampling`: {v:?} does not match the phenomenological dimension"
                        ));
                    }
                }
            }
            if d.require("rule", &config.rule, kind).is_some() {
                if let (Some(p), true) = (&prior, d.0.is_empty()) {
                    d.check("rule", build_rule(config, &model, p, grid.as_ref()));
                }
            }
            if let Some(c) = &config.claim_loss {
                let [wa, wp] = c.truth_weights;
                if !(wa >= 0.0 && wp >= 0.0 && (wa + wp - 1.0).abs() <= 1e-12) {
                    d.push("field `claim_loss.truth_weights` must be nonnegative and sum to 1".into());
                }
            }
        }
        StudyKind::Predictive => {
            if let Some(p) = d.require("predictive", &config.predictive, kind) {
                d.check("predictive.truth", check_point(model.as_ref(), &p.truth));
                if p.candidates.is_empty() {
                    d.push("field `predictive.candidates` is empty".into());
                }
                for c in &p.candidates {
                    match c {
                        CandidateConfig::Plugin { theta, .. } => {
                            d.check("predictive.candidates", check_point(model.as_ref(), theta));
                        }
                        CandidateConfig::Posterior { .. } => {
                            d.require("prior", &config.prior, kind);
                            d.require("grid", &config.grid, kind);
                        }
                    }
                }
                if p.holdout_rows < 1 {
                    d.push("field `predictive.holdout_rows` must be at least 1".into());
                }
                if p.n_mc < 2 {
                    d.push("field `predictive.n_mc` must be at least 2".into());
                }
            }
        }
    }
    if !d.0.is_empty() {
        return Err(d.0);
    }
    Ok(Prepared {
        config: config.clone(),
        model,
        prior,
        grid,
        theta_grid,
    })
}

fn statistic(config: &StudyConfig) -> Statistic {
    match config.statistic.unwrap_or(StatisticConfig::Mean) {
        StatisticConfig::Mean => Statistic::Mean,
        StatisticConfig::AbsMean => {
            let center = config
                .null_theta
                .as_ref()
                .and_then(|t| t.first().copied())
                .unwrap_or(0.0);
            Statistic::AbsMean { center }
        }
    }
}

fn nhst_test(config: &StudyConfig, model: &dyn Model) -> calib_core::Result<NhstTest> {
    let null_theta = config
        .null_theta
        .as_ref()
        .ok_or_else(|| CalibError::InvalidArgument("an NHST rule needs `null_theta`".into()))?;
    let stat = statistic(config);
    let null = NullDistribution::analytic(model, &ParamPoint::new(null_theta.clone()), &stat)?;
    NhstTest::new(stat, null, config.alpha)
}

fn set_estimator(config: &StudyConfig, model: &dyn Model) -> calib_core::Result<SetEstimator> {
    match config.interval {
        Some(IntervalConfig::Normal) => {
            if model.param_space().dim() != 1 {
                return Err(CalibError::InvalidArgument(
                    "the normal interval needs a one-parameter model".into(),
                ));
            }
            let rn = model
                .row_normal(&[model.param_space().component(0).lower.max(0.0)])
                .ok_or_else(|| CalibError::InvalidArgument("the normal interval needs normal rows".into()))?;
            let z = normal_quantile(0.5 * (1.0 + config.alpha));
            Ok(SetEstimator::normal_mean_interval(rn.sd, model.n_obs(), z))
        }
        Some(IntervalConfig::Anchored) => anchored_set_estimator(model, config.alpha),
        None => Err(CalibError::InvalidArgument("no interval configured".into())),
    }
}

fn build_rule(
    config: &StudyConfig,
    model: &Arc<dyn Model>,
    prior: &Arc<dyn Prior>,
    grid: Option<&GridSpec>,
) -> calib_core::Result<Box<dyn DecisionRule>> {
    let rule = config
        .rule
        .as_ref()
        .ok_or_else(|| CalibError::InvalidArgument("no rule configured".into()))?;
    Ok(match rule {
        RuleConfig::Nhst => Box::new(NhstRule::new(nhst_test(config, model.as_ref())?)),
        RuleConfig::Rope => {
            let grid = grid.ok_or_else(|| CalibError::InvalidArgument("a ROPE rule needs `grid`".into()))?;
            Box::new(RopeRule::new(
                model.clone(),
                prior.clone(),
                grid.clone(),
                config.theta0,
                config.alpha,
            )?)
        }
        RuleConfig::BayesFactor {
            absence_prior,
            presence_prior,
            absence_grid,
            presence_grid,
            presence_prob,
        } => {
            let hyp = |p: &[MarginalConfig], g: &Option<Vec<crate::config::AxisConfig>>, prob: f64| {
                Ok::<_, CalibError>(Hypothesis {
                    model: model.clone(),
                    prior: prior_for(model.as_ref(), p)?,
                    grid: g.as_ref().map(|g| grid_checked(model.as_ref(), g)).transpose()?,
                    prior_prob: prob,
                })
            };
            Box::new(BayesFactorRule::new(
                hyp(absence_prior, absence_grid, 1.0 - presence_prob)?,
                hyp(presence_prior, presence_grid, *presence_prob)?,
            )?)
        }
        RuleConfig::PredictiveScore {
            absence_prior,
            presence_prior,
            grid,
        } => {
            let g = grid_checked(model.as_ref(), grid)?;
            let fit = |p: &[MarginalConfig]| {
                Ok::<_, CalibError>(PredictiveFit::Posterior {
                    model: model.clone(),
                    prior: prior_for(model.as_ref(), p)?,
                    grid: g.clone(),
                })
            };
            Box::new(PredictiveScoreRule {
                absence: fit(absence_prior)?,
                presence: fit(presence_prior)?,
                holdout: None,
            })
        }
    })
}

fn theta_header(model: &dyn Model) -> Vec<String> {
    model.param_space().names().map(|n| format!("theta_{n}")).collect()
}

fn theta_cells(t: &ParamPoint) -> Vec<String> {
    t.values().iter().map(|&v| fmt_f64(v)).collect()
}

fn key_value_table(rows: Vec<(&str, String)>) -> CsvTable {
    let mut t = CsvTable::new(["quantity", "value"]);
    for (k, v) in rows {
        t.push(vec![k.to_string(), v]);
    }
    t
}

impl Prepared {
    fn prior(&self) -> &Arc<dyn Prior> {
        self.prior.as_ref().expect("validated")
    }

    fn grid(&self) -> &GridSpec {
        self.grid.as_ref().expect("validated")
    }

    /// Run the study and return its output tables.
    pub fn run(&self, fingerprint: Option<String>) -> calib_core::Result<Vec<Output>> {
        let cfg = &self.config;
        let stream = SeedStream::new(cfg.seed);
        let model = self.model.as_ref();
        match cfg.study {
            StudyKind::Sbc => {
                let opts = StudyOptions {
                    fingerprint,
                    ..Default::default()
                };
                let study =
                    run_calibration_study(model, self.prior().as_ref(), self.grid(), cfg.n_rep, &stream, &opts)?;
                Ok(vec![
                    ("records.csv".into(), study.records_table()),
                    ("summary.csv".into(), study.summary_table()?),
                    ("eye_chart.csv".into(), eye_chart_dataset(&study)),
                ])
            }
            StudyKind::Power => {
                let test = nhst_test(cfg, model)?;
                let curve = power_curve(model, &self.theta_grid, &test, cfg.n_rep, &stream)?;
                let target = cfg.power_target.unwrap_or(0.999);
                let min = curve.min_power(cfg.phenom_min.unwrap_or(0.0));
                let summary = key_value_table(vec![
                    ("min_power", min.map_or(fmt_f64(f64::NAN), |p| fmt_f64(p.power))),
                    ("min_power_se", min.map_or(fmt_f64(f64::NAN), |p| fmt_f64(p.std_error))),
                    ("power_target", fmt_f64(target)),
                    ("points_reaching_target", curve.reaching(target).len().to_string()),
                ]);
                Ok(vec![
                    ("power_curve.csv".into(), curve.to_table()),
                    ("power_summary.csv".into(), summary),
                ])
            }
            StudyKind::Coverage => {
                let est = set_estimator(cfg, model)?;
                Ok(vec![("coverage.csv".into(), self.coverage_table(&est, &stream)?)])
            }
            StudyKind::Minimax => {
                let family: Vec<PointEstimator> = cfg
                    .family
                    .iter()
                    .flatten()
                    .map(|e| match *e {
                        EstimatorConfig::ScaledMean { c } => Ok(PointEstimator::scaled_mean(c)),
                        EstimatorConfig::Mle => Ok(PointEstimator::mle(self.model.clone(), search_box(cfg)?)),
                    })
                    .collect::<calib_core::Result<_>>()?;
                let loss = lp_loss(cfg.loss_p)?;
                let r = minimax_select(model, &family, &self.theta_grid, &loss, cfg.n_rep, &stream)?;
                let names: Vec<String> = model.param_space().names().map(String::from).collect();
                Ok(vec![
                    ("risks.csv".into(), r.risk_table(&names)),
                    ("minimax.csv".into(), r.summary_table(&names)),
                ])
            }
            StudyKind::Discovery => {
                let rule = build_rule(cfg, &self.model, self.prior(), self.grid.as_ref())?;
                let sampling = match cfg.sampling.clone().unwrap_or(SamplingConfig::ModelPrior) {
                    SamplingConfig::ModelPrior => TruthSampling::ModelPrior,
                    SamplingConfig::Conditional { absence, presence } => {
                        TruthSampling::Conditional { absence, presence }
                    }
                };
                let table = estimate_rate_table(
                    model,
                    self.prior().as_ref(),
                    cfg.theta0,
                    rule.as_ref(),
                    cfg.n_rep,
                    &stream,
                    &sampling,
                )?;
                let mut out = vec![("rate_table.csv".to_string(), table.to_table())];
                if let Some(c) = cfg.claim_loss {
                    let r = expected_claim_loss(
                        &table,
                        ClaimLoss { l1: c.l1, l2: c.l2 },
                        (c.truth_weights[0], c.truth_weights[1]),
                    )?;
                    out.push((
                        "claim_loss.csv".into(),
                        key_value_table(vec![("weighted", fmt_f64(r.weighted)), ("literal", fmt_f64(r.literal))]),
                    ));
                }
                Ok(out)
            }
            StudyKind::Limits => {
                let s = limit_sensitivity(model, self.prior().as_ref(), cfg.alpha, cfg.n_rep, self.grid(), &stream)?;
                let mut out = vec![
                    ("limits.csv".to_string(), s.limits_table()),
                    ("limit_band.csv".to_string(), s.band_table()),
                ];
                if !self.theta_grid.is_empty() {
                    let est = anchored_set_estimator(model, cfg.alpha)?;
                    out.push(("coverage.csv".into(), self.coverage_table(&est, &stream.child(1))?));
                }
                Ok(out)
            }
            StudyKind::Predictive => self.predictive(&stream),
        }
    }

    fn coverage_table(&self, est: &SetEstimator, stream: &SeedStream) -> calib_core::Result<CsvTable> {
        let mut header = theta_header(self.model.as_ref());
        header.extend(["coverage", "se", "n_rep"].map(String::from));
        let mut t = CsvTable::new(header);
        for theta in &self.theta_grid {
            let c = coverage(self.model.as_ref(), theta, est, self.config.n_rep, stream)?;
            let mut row = theta_cells(theta);
            row.extend([fmt_f64(c.value), fmt_f64(c.std_error), c.n_replications.to_string()]);
            t.push(row);
        }
        Ok(t)
    }

    fn predictive(&self, stream: &SeedStream) -> calib_core::Result<Vec<Output>> {
        let p = self.config.predictive.as_ref().expect("validated");
        let model = self.model.as_ref();
        let truth = ParamPoint::new(p.truth.clone());
        let holdout = sample_holdout(model, &truth, p.holdout_rows, &stream.child(0))?;
        let entropy = empirical_entropy(model, &truth, &holdout)?;
        let mut t = CsvTable::new(["candidate", "kind", "score", "se", "excess", "excess_se", "kl", "kl_se"]);
        for c in &p.candidates {
            let (kind, pred) = match c {
                CandidateConfig::Plugin { theta, .. } => (
                    "plugin",
                    plugin_predictive(self.model.clone(), &ParamPoint::new(theta.clone()))?,
                ),
                CandidateConfig::Posterior { .. } => {
                    let train = model.sample_observation(&truth, &mut stream.child(1).replication(0))?;
                    let gp = build_grid_posterior(model, self.prior().as_ref(), &train, self.grid())?;
                    ("posterior", posterior_predictive(self.model.clone(), &gp)?)
                }
            };
            let s = predictive_score(&pred, &holdout)?;
            let kl = kl_divergence_mc(model, &truth, &pred, p.n_mc, &stream.child(2))?;
            t.push(vec![
                c.label().to_string(),
                kind.to_string(),
                fmt_f64(s.value),
                fmt_f64(s.std_error),
                fmt_f64(s.value - entropy.value),
                fmt_f64((s.std_error.powi(2) + entropy.std_error.powi(2)).sqrt()),
                fmt_f64(kl.value),
                fmt_f64(kl.std_error),
            ]);
        }
        Ok(vec![("scores.csv".into(), t)])
    }
}
