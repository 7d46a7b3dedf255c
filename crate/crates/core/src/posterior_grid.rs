//! Grid-quadrature posteriors.
//!
//! The posterior `pi(theta | y) ∝ pi(y | theta) pi(theta)` is tabulated on a
//! rectangular grid of at most three dimensions. Node masses combine the
//! unnormalized log joint with trapezoidal quadrature weights, so the sum of
//! the unnormalized masses is the marginal likelihood (evidence) `pi(y)`.
//! Everything is evaluated in log space with max-subtraction.

use rayon::prelude::*;

use crate::model_space::{Model, Observation, Prior};
use crate::{CalibError, Result};

pub const DEFAULT_NODE_CAP: usize = 10_000_000;
pub const MAX_GRID_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
}

impl GridAxis {
    pub fn new(lower: f64, upper: f64, nodes: usize) -> Self {
        GridAxis { lower, upper, nodes }
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.nodes - 1) as f64
    }

    pub fn coordinates(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.nodes)
            .map(|i| {
                if i == self.nodes - 1 {
                    self.upper
                } else {
                    self.lower + i as f64 * h
                }
            })
            .collect()
    }

    fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.nodes)
            .map(|i| if i == 0 || i == self.nodes - 1 { 0.5 * h } else { h })
            .collect()
    }
}

/// A finite rectangular box with per-axis node counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<GridAxis>,
}

impl GridSpec {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        Self::with_cap(axes, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(axes: Vec<GridAxis>, cap: usize) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_GRID_DIM {
            return Err(CalibError::invalid(format!(
                "grid must have 1 to {MAX_GRID_DIM} axes, got {}",
                axes.len()
            )));
        }
        let mut total: usize = 1;
        for (i, a) in axes.iter().enumerate() {
            if !(a.lower.is_finite() && a.upper.is_finite() && a.lower < a.upper) {
                return Err(CalibError::invalid(format!(
                    "grid axis {i} needs finite bounds with lower < upper, got [{}, {}]",
                    a.lower, a.upper
                )));
            }
            if a.nodes < 2 {
                return Err(CalibError::invalid(format!("grid axis {i} needs at least 2 nodes")));
            }
            total = total.saturating_mul(a.nodes);
        }
        if total > cap {
            return Err(CalibError::invalid(format!("grid has {total} nodes, cap is {cap}")));
        }
        Ok(GridSpec { axes })
    }

    pub fn one_dim(lower: f64, upper: f64, nodes: usize) -> Result<Self> {
        Self::new(vec![GridAxis::new(lower, upper, nodes)])
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }
}

/// Normalized grid approximation of a posterior (or of one of its marginals).
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    /// Parameter-space index of each axis.
    components: Vec<usize>,
    axes: Vec<Vec<f64>>,
    quad: Vec<Vec<f64>>,
    /// Unnormalized log density at each node (log joint for a full
    /// posterior, log of the integrated joint for a marginal).
    log_joint: Vec<f64>,
    weights: Vec<f64>,
    log_evidence: f64,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Build the grid posterior of `model` and `prior` given `y`.
pub fn build_grid_posterior(
    model: &dyn Model,
    prior: &dyn Prior,
    y: &Observation,
    spec: &GridSpec,
) -> Result<GridPosterior> {
    let space = model.param_space();
    if !space.same_as(prior.param_space()) {
        return Err(CalibError::Shape("prior and model spaces differ".into()));
    }
    if spec.dim() != space.dim() {
        return Err(CalibError::Shape(format!(
            "grid has {} axes, parameter space has {} components",
            spec.dim(),
            space.dim()
        )));
    }
    for (c, a) in space.components().iter().zip(spec.axes()) {
        if a.lower < c.lower || a.upper > c.upper {
            return Err(CalibError::invalid(format!(
                "grid box [{}, {}] for `{}` leaves bounds [{}, {}]",
                a.lower, a.upper, c.name, c.lower, c.upper
            )));
        }
    }
    if y.n_rows() != model.n_obs() || y.dim() != model.obs_dim() {
        return Err(CalibError::Shape(format!(
            "observation is {} x {}, model expects {} x {}",
            y.n_rows(),
            y.dim(),
            model.n_obs(),
            model.obs_dim()
        )));
    }

    let axes: Vec<Vec<f64>> = spec.axes().iter().map(GridAxis::coordinates).collect();
    let quad: Vec<Vec<f64>> = spec.axes().iter().map(GridAxis::trapezoid_weights).collect();
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let st = strides(&shape);
    let total = spec.total_nodes();

    let log_joint: Vec<f64> = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; shape.len()],
            |theta, flat| {
                for d in 0..shape.len() {
                    theta[d] = axes[d][(flat / st[d]) % shape[d]];
                }
                let lp = prior.log_density(theta);
                if lp == f64::NEG_INFINITY {
                    return lp;
                }
                let v = lp + model.log_likelihood_unchecked(y, theta);
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            },
        )
        .collect();

    let log_quad = |flat: usize| -> f64 { (0..shape.len()).map(|d| quad[d][(flat / st[d]) % shape[d]].ln()).sum() };
    let terms: Vec<f64> = (0..total).map(|i| log_joint[i] + log_quad(i)).collect();
    let (weights, log_evidence) = normalize(&terms)?;

    Ok(GridPosterior {
        components: (0..space.dim()).collect(),
        axes,
        quad,
        log_joint,
        weights,
        log_evidence,
    })
}

fn normalize(log_terms: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(CalibError::DegeneratePosterior(
            "log joint is -inf (or +inf) at every grid node".into(),
        ));
    }
    let mut w: Vec<f64> = log_terms.iter().map(|t| (t - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    Ok((w, m + s.ln()))
}

impl GridPosterior {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Parameter-space indices of the axes, in axis order.
    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn axis_nodes(&self, axis: usize) -> &[f64] {
        &self.axes[axis]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_joint(&self) -> &[f64] {
        &self.log_joint
    }

    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Coordinates of node `flat`, in axis order.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let shape = self.shape();
        let st = strides(&shape);
        (0..shape.len())
            .map(|d| self.axes[d][(flat / st[d]) % shape[d]])
            .collect()
    }

    fn axis_of(&self, component: usize) -> Result<usize> {
        self.components
            .iter()
            .position(|&c| c == component)
            .ok_or_else(|| CalibError::invalid(format!("component {component} is not an axis of this posterior")))
    }

    /// `sum_i w_i f(theta_i)`; `f` receives node coordinates in axis order.
    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
        let shape = self.shape();
        let st = strides(&shape);
        let mut theta = vec![0.0; shape.len()];
        let mut acc = 0.0;
        for (flat, &w) in self.weights.iter().enumerate() {
            for d in 0..shape.len() {
                theta[d] = self.axes[d][(flat / st[d]) % shape[d]];
            }
            let v = f(&theta);
            if !v.is_finite() {
                return Err(CalibError::Evaluation(format!(
                    "expectation integrand is {v} at node {theta:?}"
                )));
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Marginal weights along the axis of `component`.
    pub fn marginal_weights(&self, component: usize) -> Result<Vec<f64>> {
        let axis = self.axis_of(component)?;
        let shape = self.shape();
        let st = strides(&shape);
        let mut out = vec![0.0; shape[axis]];
        for (flat, &w) in self.weights.iter().enumerate() {
            out[(flat / st[axis]) % shape[axis]] += w;
        }
        Ok(out)
    }

    /// Node coordinates of `component`'s axis.
    pub fn component_nodes(&self, component: usize) -> Result<&[f64]> {
        Ok(&self.axes[self.axis_of(component)?])
    }

    /// Posterior mean and standard deviation of one component.
    pub fn mean_sd(&self, component: usize) -> Result<(f64, f64)> {
        let w = self.marginal_weights(component)?;
        let x = self.component_nodes(component)?;
        let mean: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
        let var: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mean) * (x - mean)).sum();
        Ok((mean, var.max(0.0).sqrt()))
    }

    /// Smallest node whose cumulative marginal weight reaches `q`.
    pub fn quantile(&self, component: usize, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(CalibError::invalid(format!("quantile level {q} not in (0, 1)")));
        }
        let w = self.marginal_weights(component)?;
        let x = self.component_nodes(component)?;
        let mut cum = 0.0;
        for (wi, &xi) in w.iter().zip(x) {
            cum += wi;
            if cum >= q {
                return Ok(xi);
            }
        }
        Ok(*x.last().expect("at least two nodes"))
    }

    /// Posterior mass of nodes with `component` in `[lo, hi]`.
    pub fn interval_probability(&self, component: usize, lo: f64, hi: f64) -> Result<f64> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(CalibError::invalid(format!("interval [{lo}, {hi}] is empty or NaN")));
        }
        let w = self.marginal_weights(component)?;
        let x = self.component_nodes(component)?;
        let p: f64 = w
            .iter()
            .zip(x)
            .filter(|(_, &xi)| xi >= lo && xi <= hi)
            .map(|(w, _)| w)
            .sum();
        Ok(p.clamp(0.0, 1.0))
    }

    /// Posterior over a subset of components (weights summed over the
    /// others). The evidence is unchanged.
    pub fn marginal(&self, components: &[usize]) -> Result<GridPosterior> {
        if components.is_empty() {
            return Err(CalibError::invalid("marginal needs at least one component"));
        }
        let mut keep: Vec<usize> = components.iter().map(|&c| self.axis_of(c)).collect::<Result<_>>()?;
        keep.sort_unstable();
        keep.dedup();
        let shape = self.shape();
        let st = strides(&shape);
        let new_shape: Vec<usize> = keep.iter().map(|&a| shape[a]).collect();
        let new_st = strides(&new_shape);
        let total: usize = new_shape.iter().product();
        let mut weights = vec![0.0; total];
        for (flat, &w) in self.weights.iter().enumerate() {
            let idx: usize = keep
                .iter()
                .enumerate()
                .map(|(k, &a)| ((flat / st[a]) % shape[a]) * new_st[k])
                .sum();
            weights[idx] += w;
        }
        let quad: Vec<Vec<f64>> = keep.iter().map(|&a| self.quad[a].clone()).collect();
        let log_joint = (0..total)
            .map(|flat| {
                let lq: f64 = (0..keep.len())
                    .map(|k| quad[k][(flat / new_st[k]) % new_shape[k]].ln())
                    .sum();
                weights[flat].ln() + self.log_evidence - lq
            })
            .collect();
        Ok(GridPosterior {
            components: keep.iter().map(|&a| self.components[a]).collect(),
            axes: keep.iter().map(|&a| self.axes[a].clone()).collect(),
            quad,
            log_joint,
            weights,
            log_evidence: self.log_evidence,
        })
    }

    /// Posterior from explicit nodes and weights on a 1-D axis. Weights are
    /// normalized; `log_evidence` is recorded as given.
    pub fn from_weights(component: usize, nodes: Vec<f64>, weights: Vec<f64>, log_evidence: f64) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.len() < 2 {
            return Err(CalibError::Shape("need matching nodes and weights, at least 2".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CalibError::invalid("nodes must be strictly increasing"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(CalibError::invalid("weights must be finite and non-negative"));
        }
        let s: f64 = weights.iter().sum();
        if s <= 0.0 {
            return Err(CalibError::DegeneratePosterior("all weights are zero".into()));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / s).collect();
        let mut quad = vec![0.0; nodes.len()];
        for i in 0..nodes.len() - 1 {
            let h = 0.5 * (nodes[i + 1] - nodes[i]);
            quad[i] += h;
            quad[i + 1] += h;
        }
        let log_joint = weights
            .iter()
            .zip(&quad)
            .map(|(w, q)| w.ln() + log_evidence - q.ln())
            .collect();
        Ok(GridPosterior {
            components: vec![component],
            axes: vec![nodes],
            quad: vec![quad],
            log_joint,
            weights,
            log_evidence,
        })
    }
}

/// Free-function forms mirroring the method API.
pub fn posterior_expectation(gp: &GridPosterior, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
    gp.expectation(f)
}

pub fn posterior_mean_sd(gp: &GridPosterior, component: usize) -> Result<(f64, f64)> {
    gp.mean_sd(component)
}

pub fn posterior_quantile(gp: &GridPosterior, component: usize, q: f64) -> Result<f64> {
    gp.quantile(component, q)
}

pub fn marginal_posterior(gp: &GridPosterior, components: &[usize]) -> Result<GridPosterior> {
    gp.marginal(components)
}

pub fn interval_probability(gp: &GridPosterior, component: usize, lo: f64, hi: f64) -> Result<f64> {
    gp.interval_probability(component, lo, hi)
}
