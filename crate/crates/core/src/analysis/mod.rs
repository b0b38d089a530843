//! Monte Carlo experiments: strong errors, power-law fits and mean-square
//! stability.
//!
//! Paths are independent tasks keyed by `(seed, path_index)` and are farmed
//! out with rayon. Per-path results are collected in index order and reduced
//! serially, so every statistic is bit-identical for any thread count.

mod convergence;
mod fit;
mod stability;

pub use convergence::{
    strong_error_studies, strong_error_study, ConvergenceReport, ErrorNorm, ExactSolution, Reference, StudyConfig,
};
pub use fit::{fit_power_law, PowerLawFit};
pub use stability::{
    check_dissipativity, check_dissipativity_with_tolerance, decay_rate, empirical_moment_bound, mean_square_curve,
    stability_study, stability_threshold, DissipativityReport, MeanSquareCurve, MomentBound, StabilityParams,
    StabilityReport, Threshold, DEFAULT_DISSIPATIVITY_TOL,
};

use rayon::prelude::*;

use crate::error::{param, Error, Result};

/// Default Monte Carlo sample size for convergence and stability runs.
pub const DEFAULT_PATHS: usize = 5000;
/// Default sample size for moment diagnostics.
pub const DEFAULT_MOMENT_PATHS: usize = 1000;

/// Paths handled per parallel batch; bounds memory held by per-path results.
const BATCH: usize = 512;

/// Number of steps N with N·h = T, rejecting stepsizes that do not divide
/// the horizon.
pub fn steps_for(horizon: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return param(format!("stepsize must be positive, got {h}"));
    }
    let n = (horizon / h).round();
    if n < 1.0 || ((n * h) - horizon).abs() > 1e-9 * horizon {
        return param(format!("stepsize {h} does not divide the horizon {horizon}"));
    }
    Ok(n as usize)
}

/// Run `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => param("thread count must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluate `per_path` for every path index in parallel and feed the results
/// to `consume` in ascending index order.
pub(crate) fn for_each_path_ordered<T: Send>(
    paths: usize,
    per_path: impl Fn(u64) -> Result<T> + Sync,
    mut consume: impl FnMut(T),
) -> Result<()> {
    let mut start = 0;
    while start < paths {
        let end = (start + BATCH).min(paths);
        let batch: Vec<T> = (start..end)
            .into_par_iter()
            .map(|i| per_path(i as u64))
            .collect::<Result<_>>()?;
        batch.into_iter().for_each(&mut consume);
        start = end;
    }
    Ok(())
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub(crate) fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn count(&self) -> usize {
        self.count
    }

    pub(crate) fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean (0 for fewer than two samples).
    pub(crate) fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_for_divisible_and_not() {
        assert_eq!(steps_for(1.0, 2f64.powi(-6)).unwrap(), 64);
        assert_eq!(steps_for(5.0, 0.0625).unwrap(), 80);
        assert!(steps_for(1.0, 0.3).is_err());
        assert!(steps_for(1.0, 0.0).is_err());
        assert!(steps_for(1.0, 2.0).is_err());
    }

    #[test]
    fn running_stats_match_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let mut s = RunningStats::default();
        xs.iter().for_each(|x| s.push(*x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean() - mean).abs() < 1e-14);
        assert!((s.std_error() - (var / 5.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn ordered_consumption_is_independent_of_threads() {
        let collect = |threads| {
            with_threads(Some(threads), || {
                let mut out = Vec::new();
                for_each_path_ordered(1500, |i| Ok(i * i), |v| out.push(v)).unwrap();
                out
            })
            .unwrap()
        };
        let one = collect(1);
        assert_eq!(one, collect(4));
        assert_eq!(one[1234], 1234 * 1234);
        assert!(with_threads(Some(0), || ()).is_err());
    }
}
