//! Parameter spaces, data generating processes, priors and joint sampling.
//!
//! A [`Model`] is a family of densities `pi(y | theta)` over one measurement:
//! `n_obs` independent rows of dimension `obs_dim`. A [`Prior`] is a density
//! over the same [`ParamSpace`]. Components of the space are flagged either
//! phenomenological (the quantity a discovery or limit is about) or nuisance.

mod models;
mod prior;

pub use models::{GaussianSignalBackground, NormalMean, SignalBackgroundOptions};
pub use prior::{IndependentPrior, Marginal};

use rand::RngCore;
use std::ops::Index;

use crate::{CalibError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamComponent {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub phenomenological: bool,
}

impl ParamComponent {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, phenomenological: bool) -> Self {
        ParamComponent {
            name: name.into(),
            lower,
            upper,
            phenomenological,
        }
    }
}

/// Ordered parameter components with bounds. Infinite bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    components: Vec<ParamComponent>,
}

impl ParamSpace {
    pub fn new(components: Vec<ParamComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(CalibError::invalid("parameter space needs at least one component"));
        }
        for c in &components {
            if c.lower.is_nan() || c.upper.is_nan() || c.lower >= c.upper {
                return Err(CalibError::invalid(format!(
                    "component `{}` has empty bounds [{}, {}]",
                    c.name, c.lower, c.upper
                )));
            }
        }
        Ok(ParamSpace { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ParamComponent] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ParamComponent {
        &self.components[i]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.components.iter().map(|c| c.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn phenom_indices(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.components[i].phenomenological)
            .collect()
    }

    pub fn nuisance_indices(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| !self.components[i].phenomenological)
            .collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && self
                .components
                .iter()
                .zip(theta)
                .all(|(c, &v)| v >= c.lower && v <= c.upper)
    }

    /// Shape and closed-bounds check.
    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(CalibError::Shape(format!(
                "parameter point has {} values, space has {} components",
                theta.len(),
                self.dim()
            )));
        }
        for (c, &v) in self.components.iter().zip(theta) {
            if !(v >= c.lower && v <= c.upper) {
                return Err(CalibError::Domain {
                    name: c.name.clone(),
                    value: v,
                    lower: c.lower,
                    upper: c.upper,
                });
            }
        }
        Ok(())
    }

    /// Phenomenological components of `theta`, in index order.
    pub fn phenom_values(&self, theta: &[f64]) -> Vec<f64> {
        self.phenom_indices().iter().map(|&i| theta[i]).collect()
    }

    /// Euclidean magnitude of the phenomenological components.
    pub fn phenom_magnitude(&self, theta: &[f64]) -> f64 {
        self.phenom_indices()
            .iter()
            .map(|&i| theta[i] * theta[i])
            .sum::<f64>()
            .sqrt()
    }

    /// Build a full point from phenomenological and nuisance parts.
    pub fn assemble(&self, phenom: &[f64], nuisance: &[f64]) -> Result<ParamPoint> {
        let p = self.phenom_indices();
        let n = self.nuisance_indices();
        if phenom.len() != p.len() || nuisance.len() != n.len() {
            return Err(CalibError::Shape(format!(
                "expected {} phenomenological and {} nuisance values, got {} and {}",
                p.len(),
                n.len(),
                phenom.len(),
                nuisance.len()
            )));
        }
        let mut v = vec![0.0; self.dim()];
        for (&i, &x) in p.iter().zip(phenom) {
            v[i] = x;
        }
        for (&i, &x) in n.iter().zip(nuisance) {
            v[i] = x;
        }
        self.check(&v)?;
        Ok(ParamPoint(v))
    }

    pub(crate) fn same_as(&self, other: &ParamSpace) -> bool {
        self.dim() == other.dim()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| a.name == b.name && a.phenomenological == b.phenomenological)
    }
}

/// A model configuration `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint(pub Vec<f64>);

impl ParamPoint {
    pub fn new(values: Vec<f64>) -> Self {
        ParamPoint(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Index<usize> for ParamPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for ParamPoint {
    fn from(v: Vec<f64>) -> Self {
        ParamPoint(v)
    }
}

/// One measurement: an `n_rows x dim` row-major matrix of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    n_rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Observation {
    pub fn new(n_rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || dim == 0 || data.len() != n_rows * dim {
            return Err(CalibError::Shape(format!(
                "observation of {} values cannot be {n_rows} x {dim}",
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(CalibError::Evaluation(format!("observation entry {x}")));
        }
        Ok(Observation { n_rows, dim, data })
    }

    /// Scalar rows.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Observation::new(values.len(), 1, values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        self.rows().map(|r| r[j]).sum::<f64>() / self.n_rows as f64
    }
}

/// Row means and standard deviation of a normal location structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowNormal {
    pub mean: f64,
    pub sd: f64,
}

/// A parameterised family of data generating processes `pi(y | theta)`.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn param_space(&self) -> &ParamSpace;

    fn obs_dim(&self) -> usize;

    /// Rows per measurement.
    fn n_obs(&self) -> usize;

    /// Log density of a single row. `theta` is assumed in bounds; values
    /// outside may return NaN.
    fn row_log_density(&self, row: &[f64], theta: &[f64]) -> f64;

    /// Draw one row into `out`.
    fn sample_row(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);

    /// `Some` when every row is `N(mean, sd)` at `theta`; enables the
    /// analytic p-value and interval paths.
    fn row_normal(&self, _theta: &[f64]) -> Option<RowNormal> {
        None
    }

    /// Sum of row log densities, without bounds or shape checks.
    fn log_likelihood_unchecked(&self, y: &Observation, theta: &[f64]) -> f64 {
        y.rows().map(|r| self.row_log_density(r, theta)).sum()
    }

    /// `log pi(y | theta)` for a whole measurement.
    fn log_density(&self, y: &Observation, theta: &ParamPoint) -> Result<f64> {
        self.param_space().check(theta.values())?;
        check_shape(self, y)?;
        Ok(self.log_likelihood_unchecked(y, theta.values()))
    }

    /// `n_obs` independent rows from `pi(. | theta)`.
    fn sample_observation(&self, theta: &ParamPoint, rng: &mut dyn RngCore) -> Result<Observation> {
        self.param_space().check(theta.values())?;
        let d = self.obs_dim();
        let mut data = vec![0.0; self.n_obs() * d];
        for row in data.chunks_exact_mut(d) {
            self.sample_row(theta.values(), rng, row);
        }
        Observation::new(self.n_obs(), d, data)
    }
}

fn check_shape<M: Model + ?Sized>(model: &M, y: &Observation) -> Result<()> {
    if y.n_rows() != model.n_obs() || y.dim() != model.obs_dim() {
        return Err(CalibError::Shape(format!(
            "observation is {} x {}, model `{}` expects {} x {}",
            y.n_rows(),
            y.dim(),
            model.name(),
            model.n_obs(),
            model.obs_dim()
        )));
    }
    Ok(())
}

/// Prior density over a [`ParamSpace`].
pub trait Prior: Send + Sync {
    fn param_space(&self) -> &ParamSpace;

    /// `log pi(theta)`; `-inf` outside the support.
    fn log_density(&self, theta: &[f64]) -> f64;

    fn sample(&self, rng: &mut dyn RngCore) -> ParamPoint;

    /// Draw `theta` with the phenomenological components pinned to
    /// `phenom` and the nuisance components from `pi(sigma | phenom)`.
    fn sample_conditional(&self, phenom: &[f64], rng: &mut dyn RngCore) -> Result<ParamPoint>;

    /// Closed-form marginal standard deviation of component `i`, if known.
    fn component_sd(&self, _i: usize) -> Option<f64> {
        None
    }

    /// `Some(theta)` when the prior is a point mass.
    fn point_mass(&self) -> Option<ParamPoint> {
        None
    }
}

fn check_pair(model: &dyn Model, prior: &dyn Prior) -> Result<()> {
    if !model.param_space().same_as(prior.param_space()) {
        return Err(CalibError::Shape(format!(
            "prior and model `{}` are defined on different parameter spaces",
            model.name()
        )));
    }
    Ok(())
}

/// `theta ~ pi(theta)`, then `y ~ pi(y | theta)`.
pub fn sample_joint(model: &dyn Model, prior: &dyn Prior, rng: &mut dyn RngCore) -> Result<(ParamPoint, Observation)> {
    check_pair(model, prior)?;
    let theta = prior.sample(rng);
    let y = model.sample_observation(&theta, rng)?;
    Ok((theta, y))
}

/// `sigma ~ pi(sigma | phenom)`, `theta = (phenom, sigma)`, then
/// `y ~ pi(y | theta)`.
pub fn sample_conditional_joint(
    model: &dyn Model,
    prior: &dyn Prior,
    phenom: &[f64],
    rng: &mut dyn RngCore,
) -> Result<(ParamPoint, Observation)> {
    check_pair(model, prior)?;
    let space = model.param_space();
    let idx = space.phenom_indices();
    if phenom.len() != idx.len() {
        return Err(CalibError::Shape(format!(
            "{} phenomenological values given, model has {}",
            phenom.len(),
            idx.len()
        )));
    }
    for (&i, &v) in idx.iter().zip(phenom) {
        let c = space.component(i);
        if !(v >= c.lower && v <= c.upper) {
            return Err(CalibError::Domain {
                name: c.name.clone(),
                value: v,
                lower: c.lower,
                upper: c.upper,
            });
        }
    }
    let theta = prior.sample_conditional(phenom, rng)?;
    let y = model.sample_observation(&theta, rng)?;
    Ok((theta, y))
}
