//! Distribution functions and goodness-of-fit summaries used across the crate.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;
use std::f64::consts::{PI, SQRT_2};

use crate::{CalibError, Result};

/// `-0.5 * ln(2 pi)`
pub const LN_INV_SQRT_2PI: f64 = -0.918_938_533_204_672_8;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Phi(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::standard().inverse_cdf(p)
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    LN_INV_SQRT_2PI - sd.ln() - 0.5 * z * z
}

/// Upper tail of the chi-square distribution with `k` degrees of freedom.
pub fn chi2_sf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(0.5 * k as f64, 0.5 * x)
}

pub fn chi2_cdf(x: f64, k: usize) -> f64 {
    1.0 - chi2_sf(x, k)
}

pub fn chi2_quantile(p: f64, k: usize) -> f64 {
    ChiSquared::new(k as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// Log of `sum(exp(values))` with max-subtraction.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Sample mean and (n-1) standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Linear-interpolation (type 7) quantile of an ascending slice.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Kolmogorov–Smirnov distance between the sample and a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// Pearson chi-square test that `values` (in `[0, 1]`) are uniform over
/// `bins` equal-width bins. Returns `(statistic, p_value)`.
pub fn uniformity_chi2(values: &[f64], bins: usize) -> Result<(f64, f64)> {
    if bins < 2 {
        return Err(CalibError::invalid("uniformity test needs at least 2 bins"));
    }
    if values.is_empty() {
        return Err(CalibError::invalid("uniformity test on an empty sample"));
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[b] += 1;
    }
    let expected = values.len() as f64 / bins as f64;
    let stat = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    Ok((stat, chi2_sf(stat, bins - 1)))
}

/// Differential entropy of a normal distribution.
pub fn normal_entropy(sd: f64) -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E).ln() + sd.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn normal_reference_values() {
        assert_abs_diff_eq!(normal_sf(1.644_853_626_951_472_2), 0.05, epsilon = 1e-10);
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-9);
        assert_abs_diff_eq!(normal_ln_pdf(0.0, 0.0, 1.0), LN_INV_SQRT_2PI, epsilon = 1e-15);
    }

    #[test]
    fn chi2_reference_values() {
        assert_abs_diff_eq!(chi2_sf(3.841_458_820_694_124, 1), 0.05, epsilon = 1e-10);
        assert_abs_diff_eq!(chi2_sf(5.991_464_547_107_979, 2), 0.05, epsilon = 1e-10);
        assert_eq!(chi2_sf(0.0, 3), 1.0);
        assert_abs_diff_eq!(chi2_quantile(0.999, 19), 43.820_195_964_517_81, epsilon = 1e-6);
    }

    #[test]
    fn lse_is_stable() {
        assert_abs_diff_eq!(log_sum_exp(&[-1000.0, -1000.0]), -1000.0 + LN_2, epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn quantiles_and_ks() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&v, 0.5), 2.5);
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic(&grid, |x| x) <= 0.0005 + 1e-12);
        let (stat, p) = uniformity_chi2(&grid, 20).unwrap();
        assert_eq!(stat, 0.0);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
    }
}
