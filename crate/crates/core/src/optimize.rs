//! Bounded maximization by coarse grid scan followed by Nelder–Mead, and
//! central finite-difference Hessians.

use crate::model_space::ParamSpace;
use crate::posterior_grid::GridSpec;
use crate::{CalibError, Result};

/// A finite search box.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Scan nodes per axis; `None` picks a default by dimension.
    scan_nodes: Option<usize>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(CalibError::Shape("search box bounds differ in length".into()));
        }
        for (i, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(CalibError::invalid(format!(
                    "search box axis {i} must be finite with lower <= upper, got [{a}, {b}]"
                )));
            }
        }
        Ok(SearchBox {
            lower,
            upper,
            scan_nodes: None,
        })
    }

    pub fn from_grid(spec: &GridSpec) -> Self {
        SearchBox {
            lower: spec.axes().iter().map(|a| a.lower).collect(),
            upper: spec.axes().iter().map(|a| a.upper).collect(),
            scan_nodes: None,
        }
    }

    pub fn with_scan_nodes(mut self, n: usize) -> Self {
        self.scan_nodes = Some(n.max(2));
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Sub-box over the given axes.
    pub fn select(&self, axes: &[usize]) -> SearchBox {
        SearchBox {
            lower: axes.iter().map(|&i| self.lower[i]).collect(),
            upper: axes.iter().map(|&i| self.upper[i]).collect(),
            scan_nodes: self.scan_nodes,
        }
    }

    pub(crate) fn check_within(&self, space: &ParamSpace, axes: &[usize]) -> Result<()> {
        if axes.len() != self.dim() {
            return Err(CalibError::Shape(format!(
                "search box has {} axes, expected {}",
                self.dim(),
                axes.len()
            )));
        }
        for (k, &i) in axes.iter().enumerate() {
            let c = space.component(i);
            if self.lower[k] < c.lower || self.upper[k] > c.upper {
                return Err(CalibError::invalid(format!(
                    "search box [{}, {}] for `{}` leaves bounds [{}, {}]",
                    self.lower[k], self.upper[k], c.name, c.lower, c.upper
                )));
            }
        }
        Ok(())
    }

    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    fn default_scan(&self) -> usize {
        self.scan_nodes.unwrap_or(match self.dim() {
            0 | 1 => 41,
            2 => 15,
            _ => 9,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub point: Vec<f64>,
    pub value: f64,
    /// Some coordinate sits on (within 1e-6 of the width of) a box face.
    pub on_boundary: bool,
}

/// Maximize `f` over `bx`. Non-finite values are treated as `-inf`.
/// `starts` are extra candidate points considered alongside the scan.
pub fn maximize(f: impl Fn(&[f64]) -> f64, bx: &SearchBox, starts: &[Vec<f64>]) -> Result<Optimum> {
    let d = bx.dim();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    if d == 0 {
        let v = eval(&[]);
        if !v.is_finite() {
            return Err(CalibError::Optimization("objective is not finite".into()));
        }
        return Ok(Optimum {
            point: vec![],
            value: v,
            on_boundary: false,
        });
    }

    // coarse scan
    let k = bx.default_scan();
    let mut best = vec![0.0; d];
    let mut best_v = f64::NEG_INFINITY;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        for i in 0..d {
            x[i] = bx.lower[i] + (bx.upper[i] - bx.lower[i]) * idx[i] as f64 / (k - 1) as f64;
        }
        let v = eval(&x);
        if v > best_v {
            best_v = v;
            best.copy_from_slice(&x);
        }
        let mut i = 0;
        while i < d {
            idx[i] += 1;
            if idx[i] < k {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == d {
            break;
        }
    }
    for s in starts {
        if s.len() != d {
            continue;
        }
        let mut c = s.clone();
        bx.clamp(&mut c);
        let v = eval(&c);
        if v > best_v {
            best_v = v;
            best = c;
        }
    }
    if !best_v.is_finite() {
        return Err(CalibError::Optimization(
            "objective is non-finite over the whole search box".into(),
        ));
    }

    let widths: Vec<f64> = (0..d).map(|i| bx.upper[i] - bx.lower[i]).collect();
    let mut step: Vec<f64> = widths.iter().map(|w| w / (k - 1) as f64).collect();
    let (mut point, mut value) = (best, best_v);
    // restart until a fresh simplex no longer improves
    for _ in 0..4 {
        let (p, v) = nelder_mead(&eval, bx, &point, &step, &widths);
        let improved = v > value + 1e-12 * (1.0 + value.abs());
        if v >= value {
            point = p;
            value = v;
        }
        if !improved {
            break;
        }
        step.iter_mut().for_each(|s| *s *= 0.1);
    }

    let on_boundary = (0..d).any(|i| {
        let tol = 1e-6 * widths[i].max(f64::MIN_POSITIVE);
        point[i] - bx.lower[i] <= tol || bx.upper[i] - point[i] <= tol
    });
    Ok(Optimum {
        point,
        value,
        on_boundary,
    })
}

fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    bx: &SearchBox,
    start: &[f64],
    step: &[f64],
    widths: &[f64],
) -> (Vec<f64>, f64) {
    let d = start.len();
    let g = |x: &mut Vec<f64>| {
        bx.clamp(x);
        -f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let mut s0 = start.to_vec();
    let v0 = g(&mut s0);
    simplex.push((s0, v0));
    for i in 0..d {
        let mut p = start.to_vec();
        // step toward the interior when on the upper face
        p[i] += if p[i] + step[i] <= bx.upper[i] {
            step[i]
        } else {
            -step[i]
        };
        let v = g(&mut p);
        simplex.push((p, v));
    }

    let max_iter = 500 * (d + 1);
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .flat_map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .zip(widths)
                    .map(|((a, b), w)| (a - b).abs() / w.max(f64::MIN_POSITIVE))
            })
            .fold(0.0, f64::max);
        let spread = simplex[d].1 - simplex[0].1;
        if size < 1e-10 && spread.abs() <= 1e-12 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(p, _)| p[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (worst.0[j] - centroid[j])).collect() };
        let mut r = along(-1.0);
        let fr = g(&mut r);
        if fr < simplex[0].1 {
            let mut e = along(-2.0);
            let fe = g(&mut e);
            simplex[d] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (r, fr);
        } else {
            let mut c = if fr < worst.1 { along(-0.5) } else { along(0.5) };
            let fc = g(&mut c);
            if fc < worst.1.min(fr) {
                simplex[d] = (c, fc);
            } else {
                let best = simplex[0].0.clone();
                for (p, v) in simplex.iter_mut().skip(1) {
                    for j in 0..d {
                        p[j] = best[j] + 0.5 * (p[j] - best[j]);
                    }
                    *v = g(p);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (p, v) = simplex.swap_remove(0);
    (p, -v)
}

/// Central finite-difference Hessian with per-axis step `h_i`.
pub fn hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut out = vec![vec![0.0; d]; d];
    let f0 = f(x);
    let mut p = x.to_vec();
    for i in 0..d {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        out[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut at = |si: f64, sj: f64| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_interior() {
        let bx = SearchBox::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let o = maximize(
            |x| -(x[0] - 1.234).powi(2) - 3.0 * (x[1] + 0.77).powi(2) - 0.5 * x[0] * x[1],
            &bx,
            &[],
        )
        .unwrap();
        // gradient vanishes at the optimum
        let gx = -2.0 * (o.point[0] - 1.234) - 0.5 * o.point[1];
        let gy = -6.0 * (o.point[1] + 0.77) - 0.5 * o.point[0];
        assert!(gx.abs() < 1e-6 && gy.abs() < 1e-6, "{gx} {gy}");
        assert!(!o.on_boundary);
    }

    #[test]
    fn boundary_optimum_flagged() {
        let bx = SearchBox::new(vec![0.0], vec![1.0]).unwrap();
        let o = maximize(|x| x[0], &bx, &[]).unwrap();
        assert_abs_diff_eq!(o.point[0], 1.0, epsilon = 1e-9);
        assert!(o.on_boundary);
    }

    #[test]
    fn non_finite_everywhere_fails() {
        let bx = SearchBox::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(
            maximize(|_| f64::NAN, &bx, &[]),
            Err(CalibError::Optimization(_))
        ));
    }

    #[test]
    fn hessian_of_quadratic() {
        let h = hessian(
            |x| -x[0] * x[0] + 2.0 * x[0] * x[1] - 3.0 * x[1] * x[1],
            &[0.3, -0.2],
            &[1e-4, 1e-4],
        );
        assert_abs_diff_eq!(h[0][0], -2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(h[0][1], 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(h[1][1], -6.0, epsilon = 1e-5);
    }
}
