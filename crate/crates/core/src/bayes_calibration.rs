//! Calibration of Bayesian inferences against the joint distribution.
//!
//! Each replication draws a truth from the prior and an observation from
//! the model, builds the grid posterior and records, per component, the
//! posterior z-score `|mean - truth| / sd`, the shrinkage
//! `1 - sd^2 / prior_sd^2` and the quantile rank of the truth.

use std::fmt;
use std::sync::Arc;

use crate::csv::{fmt_f64, CsvTable};
use crate::decision::{Decision, DecisionRule};
use crate::mc::{check_replications, exclude_failures, replicate, RiskEstimate};
use crate::model_space::{sample_joint, Model, Observation, ParamPoint, Prior};
use crate::posterior_grid::{build_grid_posterior, GridPosterior, GridSpec};
use crate::rng::SeedStream;
use crate::stats::{empirical_quantile, mean_sd, sorted, uniformity_chi2};
use crate::{CalibError, Result};

/// Prior draws used for a prior standard deviation without a closed form.
pub const PRIOR_SD_DRAWS: usize = 100_000;

/// Stream tag reserved for prior standard deviation draws.
const PRIOR_SD_TAG: u64 = u64::MAX;

/// Bins of the rank uniformity test.
pub const RANK_BINS: usize = 20;

pub fn z_score(post_mean: f64, post_sd: f64, truth: f64) -> Result<f64> {
    if !(post_sd > 0.0 && post_sd.is_finite()) {
        return Err(CalibError::DegeneratePosterior(format!("posterior sd is {post_sd}")));
    }
    Ok(((post_mean - truth) / post_sd).abs())
}

/// `1 - post_sd^2 / prior_sd^2`. Negative when the posterior is wider than
/// the prior; never clipped.
pub fn shrinkage(post_sd: f64, prior_sd: f64) -> Result<f64> {
    if !(prior_sd > 0.0 && prior_sd.is_finite()) {
        return Err(CalibError::invalid(format!(
            "prior sd must be positive, got {prior_sd}"
        )));
    }
    Ok(1.0 - (post_sd / prior_sd).powi(2))
}

/// Marginal posterior mass below `truth`, counting half the mass of the
/// node nearest to it. Truths outside the grid give 0 or 1.
pub fn quantile_rank(gp: &GridPosterior, component: usize, truth: f64) -> Result<f64> {
    let x = gp.component_nodes(component)?;
    let w = gp.marginal_weights(component)?;
    let (first, last) = (x[0], x[x.len() - 1]);
    let half_step = 0.5 * (x[1] - x[0]);
    if truth < first - half_step {
        return Ok(0.0);
    }
    if truth > last + half_step {
        return Ok(1.0);
    }
    let k = (((truth - first) / (2.0 * half_step)).round() as usize).min(x.len() - 1);
    let below: f64 = w[..k].iter().sum();
    Ok((below + 0.5 * w[k]).clamp(0.0, 1.0))
}

/// Prior standard deviation of every component: closed form when the prior
/// provides one, otherwise from [`PRIOR_SD_DRAWS`] prior draws.
pub fn prior_sds(prior: &dyn Prior, stream: &SeedStream) -> Vec<f64> {
    let d = prior.param_space().dim();
    let closed: Vec<Option<f64>> = (0..d).map(|i| prior.component_sd(i)).collect();
    if closed.iter().all(Option::is_some) {
        return closed.into_iter().map(Option::unwrap).collect();
    }
    let draws = replicate(&stream.child(PRIOR_SD_TAG), PRIOR_SD_DRAWS, |_, rng| prior.sample(rng));
    (0..d)
        .map(|i| {
            closed[i].unwrap_or_else(|| {
                let v: Vec<f64> = draws.iter().map(|t| t[i]).collect();
                mean_sd(&v).1
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentRecord {
    pub post_mean: f64,
    pub post_sd: f64,
    pub z: f64,
    pub shrinkage: f64,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub replication: usize,
    pub theta_true: ParamPoint,
    pub components: Vec<ComponentRecord>,
    pub decision: Option<Decision>,
    pub loss: Option<f64>,
}

type PosteriorLoss = dyn Fn(&Observation, &GridPosterior, &ParamPoint) -> f64 + Send + Sync;

/// Decision rule and loss applied in every replication, and eye-chart
/// thresholds.
#[derive(Clone, Default)]
pub struct StudyOptions {
    pub rule: Option<Arc<dyn DecisionRule>>,
    pub loss: Option<Arc<PosteriorLoss>>,
    pub thresholds: EyeChartThresholds,
    /// Opaque identifier of the configuration, copied into the study.
    pub fingerprint: Option<String>,
}

impl fmt::Debug for StudyOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StudyOptions")
            .field("rule", &self.rule.as_ref().map(|r| r.name().to_string()))
            .field("loss", &self.loss.is_some())
            .field("thresholds", &self.thresholds)
            .finish()
    }
}

/// Region boundaries of the z-score versus shrinkage plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeChartThresholds {
    /// Shrinkage below this is weak identification.
    pub weak_shrinkage: f64,
    /// z above this with shrinkage above `overfit_shrinkage` is overfit.
    pub overfit_z: f64,
    pub overfit_shrinkage: f64,
}

impl Default for EyeChartThresholds {
    fn default() -> Self {
        EyeChartThresholds {
            weak_shrinkage: 0.1,
            overfit_z: 4.0,
            overfit_shrinkage: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationStudy {
    pub records: Vec<CalibrationRecord>,
    pub n_failed: usize,
    pub seed: u64,
    pub fingerprint: Option<String>,
    pub component_names: Vec<String>,
    pub prior_sd: Vec<f64>,
    pub thresholds: EyeChartThresholds,
}

/// Simulate `n_rep` replications from the joint distribution and record
/// posterior diagnostics. Failing replications are excluded (at most 1%).
pub fn run_calibration_study(
    model: &dyn Model,
    prior: &dyn Prior,
    grid: &GridSpec,
    n_rep: usize,
    stream: &SeedStream,
    options: &StudyOptions,
) -> Result<CalibrationStudy> {
    check_replications(n_rep, 1)?;
    let space = model.param_space();
    if grid.dim() != space.dim() {
        return Err(CalibError::Shape(format!(
            "grid has {} axes, parameter space has {} components",
            grid.dim(),
            space.dim()
        )));
    }
    let prior_sd = prior_sds(prior, stream);
    if let Some(bad) = prior_sd.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(CalibError::invalid(format!(
            "prior sd {bad} is not positive; shrinkage is undefined"
        )));
    }
    let results = replicate(stream, n_rep, |i, rng| -> Result<CalibrationRecord> {
        let (theta, y) = sample_joint(model, prior, rng)?;
        let gp = build_grid_posterior(model, prior, &y, grid)?;
        let components = (0..space.dim())
            .map(|c| {
                let (m, sd) = gp.mean_sd(c)?;
                Ok(ComponentRecord {
                    post_mean: m,
                    post_sd: sd,
                    z: z_score(m, sd, theta[c])?,
                    shrinkage: shrinkage(sd, prior_sd[c])?,
                    rank: quantile_rank(&gp, c, theta[c])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let decision = options.rule.as_ref().map(|r| r.decide(&y)).transpose()?;
        let loss = options.loss.as_ref().map(|l| l(&y, &gp, &theta));
        if let Some(v) = loss {
            if !v.is_finite() {
                return Err(CalibError::Evaluation(format!("loss is {v}")));
            }
        }
        Ok(CalibrationRecord {
            replication: i,
            theta_true: theta,
            components,
            decision,
            loss,
        })
    });
    let (records, n_failed) = exclude_failures(results)?;
    Ok(CalibrationStudy {
        records,
        n_failed,
        seed: stream.seed(),
        fingerprint: options.fingerprint.clone(),
        component_names: space.names().map(String::from).collect(),
        prior_sd,
        thresholds: options.thresholds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSummary {
    pub component: String,
    pub frac_weak: f64,
    pub frac_overfit: f64,
    /// z above the overfit threshold with weak shrinkage.
    pub frac_prior_conflict: f64,
    pub frac_z_below_1: f64,
    pub frac_z_below_2: f64,
    pub median_shrinkage: f64,
    pub rank_chi2: f64,
    pub rank_p_value: f64,
}

impl CalibrationStudy {
    fn column(&self, c: usize, f: impl Fn(&ComponentRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(|r| f(&r.components[c])).collect()
    }

    pub fn ranks(&self, component: usize) -> Vec<f64> {
        self.column(component, |r| r.rank)
    }

    pub fn z_scores(&self, component: usize) -> Vec<f64> {
        self.column(component, |r| r.z)
    }

    pub fn shrinkages(&self, component: usize) -> Vec<f64> {
        self.column(component, |r| r.shrinkage)
    }

    /// Mean loss over records, when a loss was supplied.
    pub fn mean_loss(&self) -> Option<RiskEstimate> {
        let v: Option<Vec<f64>> = self.records.iter().map(|r| r.loss).collect();
        v.filter(|v| !v.is_empty())
            .map(|v| RiskEstimate::from_samples(&v, self.n_failed))
    }

    pub fn summary(&self) -> Result<Vec<ComponentSummary>> {
        if self.records.is_empty() {
            return Err(CalibError::invalid("study has no records"));
        }
        let n = self.records.len() as f64;
        let t = self.thresholds;
        self.component_names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let recs: Vec<&ComponentRecord> = self.records.iter().map(|r| &r.components[c]).collect();
                let frac = |p: &dyn Fn(&ComponentRecord) -> bool| recs.iter().filter(|r| p(r)).count() as f64 / n;
                let (chi2, p) = uniformity_chi2(&self.ranks(c), RANK_BINS)?;
                Ok(ComponentSummary {
                    component: name.clone(),
                    frac_weak: frac(&|r| r.shrinkage < t.weak_shrinkage),
                    frac_overfit: frac(&|r| r.z > t.overfit_z && r.shrinkage > t.overfit_shrinkage),
                    frac_prior_conflict: frac(&|r| r.z > t.overfit_z && r.shrinkage < t.weak_shrinkage),
                    frac_z_below_1: frac(&|r| r.z < 1.0),
                    frac_z_below_2: frac(&|r| r.z < 2.0),
                    median_shrinkage: empirical_quantile(&sorted(&self.shrinkages(c)), 0.5),
                    rank_chi2: chi2,
                    rank_p_value: p,
                })
            })
            .collect()
    }

    /// Columns `replication, component, theta_true, post_mean, post_sd, z,
    /// shrinkage, rank`.
    pub fn records_table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            [
                "replication",
                "component",
                "theta_true",
                "post_mean",
                "post_sd",
                "z",
                "shrinkage",
                "rank",
            ]
            .map(String::from)
            .to_vec(),
        );
        for r in &self.records {
            for (c, cr) in r.components.iter().enumerate() {
                t.push(vec![
                    r.replication.to_string(),
                    self.component_names[c].clone(),
                    fmt_f64(r.theta_true[c]),
                    fmt_f64(cr.post_mean),
                    fmt_f64(cr.post_sd),
                    fmt_f64(cr.z),
                    fmt_f64(cr.shrinkage),
                    fmt_f64(cr.rank),
                ]);
            }
        }
        t
    }

    /// Columns `component, frac_weak, frac_overfit, rank_chi2` plus the
    /// remaining summary fields.
    pub fn summary_table(&self) -> Result<CsvTable> {
        let mut t = CsvTable::new(
            [
                "component",
                "frac_weak",
                "frac_overfit",
                "rank_chi2",
                "rank_p_value",
                "frac_prior_conflict",
                "frac_z_below_1",
                "frac_z_below_2",
                "median_shrinkage",
            ]
            .map(String::from)
            .to_vec(),
        );
        for s in self.summary()? {
            t.push(vec![
                s.component,
                fmt_f64(s.frac_weak),
                fmt_f64(s.frac_overfit),
                fmt_f64(s.rank_chi2),
                fmt_f64(s.rank_p_value),
                fmt_f64(s.frac_prior_conflict),
                fmt_f64(s.frac_z_below_1),
                fmt_f64(s.frac_z_below_2),
                fmt_f64(s.median_shrinkage),
            ]);
        }
        Ok(t)
    }

    /// Columns `replication, decision, loss` when a rule or loss was used.
    pub fn decisions_table(&self) -> Option<CsvTable> {
        if self.records.iter().all(|r| r.decision.is_none() && r.loss.is_none()) {
            return None;
        }
        let mut t = CsvTable::new(["replication", "decision", "loss"].map(String::from).to_vec());
        for r in &self.records {
            t.push(vec![
                r.replication.to_string(),
                r.decision.map(|d| d.label().to_string()).unwrap_or_default(),
                r.loss.map(fmt_f64).unwrap_or_default(),
            ]);
        }
        Some(t)
    }
}

/// One row per record and component: `component, replication, z,
/// shrinkage`.
pub fn eye_chart_dataset(study: &CalibrationStudy) -> CsvTable {
    let mut t = CsvTable::new(
        ["component", "replication", "z", "shrinkage"]
            .map(String::from)
            .to_vec(),
    );
    for r in &study.records {
        for (c, cr) in r.components.iter().enumerate() {
            t.push(vec![
                study.component_names[c].clone(),
                r.replication.to_string(),
                fmt_f64(cr.z),
                fmt_f64(cr.shrinkage),
            ]);
        }
    }
    t
}

/// `E_{(theta, y) ~ pi(theta, y)} L(y, theta)` by Monte Carlo.
pub fn joint_expected_loss(
    model: &dyn Model,
    prior: &dyn Prior,
    loss: &(dyn Fn(&Observation, &ParamPoint) -> Result<f64> + Sync),
    n_rep: usize,
    stream: &SeedStream,
) -> Result<RiskEstimate> {
    check_replications(n_rep, 2)?;
    let results = replicate(stream, n_rep, |_, rng| {
        let (theta, y) = sample_joint(model, prior, rng)?;
        let v = loss(&y, &theta)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CalibError::Evaluation(format!("loss is {v}")))
        }
    });
    let (v, failed) = exclude_failures(results)?;
    Ok(RiskEstimate::from_samples(&v, failed))
}
