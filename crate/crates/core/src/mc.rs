//! Replication loops and Monte Carlo summaries.

use rayon::prelude::*;

use crate::rng::{SeedStream, StreamRng};
use crate::{CalibError, Result};

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// A Monte Carlo estimate of an expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_replications: usize,
    /// Replications excluded because the estimator or rule failed.
    pub n_failed: usize,
}

impl RiskEstimate {
    /// Sample mean with `sd / sqrt(n)` standard error.
    pub fn from_samples(values: &[f64], n_failed: usize) -> Self {
        let (mean, sd) = crate::stats::mean_sd(values);
        let n = values.len();
        RiskEstimate {
            value: mean,
            std_error: if n > 0 { sd / (n as f64).sqrt() } else { f64::NAN },
            n_replications: n,
            n_failed,
        }
    }

    /// Proportion with binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn binomial(successes: usize, n: usize, n_failed: usize) -> Self {
        let p = successes as f64 / n as f64;
        RiskEstimate {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_replications: n,
            n_failed,
        }
    }

    /// True when `target` lies within `k` standard errors of the estimate.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Run `n` replications in parallel. Replication `i` receives the generator
/// `stream.replication(i)`; results come back in index order.
pub fn replicate<T, F>(stream: &SeedStream, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.replication(i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Drop failed replications, enforcing the 1% failure cap.
pub fn exclude_failures<T>(results: Vec<Result<T>>) -> Result<(Vec<T>, usize)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut first = None;
    let mut failed = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(CalibError::TooManyFailures {
            failed,
            total,
            first: first.unwrap_or_default(),
        });
    }
    Ok((ok, failed))
}

pub(crate) fn check_replications(n_rep: usize, min: usize) -> Result<()> {
    if n_rep < min {
        return Err(CalibError::invalid(format!(
            "need at least {min} replications, got {n_rep}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn replicate_is_order_independent() {
        let s = SeedStream::new(11);
        let a = replicate(&s, 64, |_, rng| rng.random::<u64>());
        let b: Vec<u64> = (0..64).map(|i| s.replication(i).random::<u64>()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn failure_cap() {
        let mut v: Vec<Result<f64>> = (0..199).map(|i| Ok(i as f64)).collect();
        v.push(Err(CalibError::Numerical("x".into())));
        let (ok, failed) = exclude_failures(v).unwrap();
        assert_eq!((ok.len(), failed), (199, 1));

        let mut v: Vec<Result<f64>> = (0..98).map(|i| Ok(i as f64)).collect();
        v.push(Err(CalibError::Numerical("x".into())));
        v.push(Err(CalibError::Numerical("y".into())));
        assert!(matches!(
            exclude_failures(v),
            Err(CalibError::TooManyFailures {
                failed: 2,
                total: 100,
                ..
            })
        ));
    }

    #[test]
    fn binomial_se() {
        let r = RiskEstimate::binomial(50, 100, 0);
        assert_eq!(r.value, 0.5);
        assert!((r.std_error - 0.05).abs() < 1e-15);
    }
}
