//! Strong-error studies on coupled grids.
//!
//! Each Monte Carlo path draws one fine increment bundle with
//! `reference_steps` rows. The reference solution is computed on that fine
//! grid (or from a closed form in W), and every study stepsize reuses the same
//! Brownian path by summing blocks of fine increments.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fit_power_law, for_each_path_ordered, steps_for, PowerLawFit, RunningStats};
use crate::error::{param, Error, Result};
use crate::model::SdeProblem;
use crate::paths::{generate_paths, PathBundle};
use crate::schemes::{grid_time, run, run_terminal, SchemeKind, Stepper};

/// Closed-form solution X_t as a function of `(t, W_t)`.
pub type ExactSolution = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// Stand-in for the exact solution X.
#[derive(Clone)]
pub enum Reference {
    /// A scheme run on the fine grid.
    Scheme(SchemeKind),
    /// A known solution evaluated on the Brownian path.
    Exact(ExactSolution),
}

impl std::fmt::Debug for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reference::Scheme(k) => write!(f, "Scheme({k})"),
            Reference::Exact(_) => f.write_str("Exact"),
        }
    }
}

/// Which pathwise error is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorNorm {
    /// ‖X_T − Y_N‖².
    #[default]
    Terminal,
    /// max_n ‖X_{t_n} − Y_n‖² over the study grid.
    Sup,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub stepsizes: Vec<f64>,
    pub paths: usize,
    pub reference_steps: usize,
    pub reference: Reference,
    pub seed: u64,
    pub norm: ErrorNorm,
}

impl StudyConfig {
    pub fn new(stepsizes: Vec<f64>, paths: usize, reference_steps: usize, reference: Reference, seed: u64) -> Self {
        Self {
            stepsizes,
            paths,
            reference_steps,
            reference,
            seed,
            norm: ErrorNorm::Terminal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scheme: SchemeKind,
    /// Strictly decreasing.
    pub stepsizes: Vec<f64>,
    pub steps: Vec<usize>,
    /// (E‖X − Y‖²)^{1/2} per stepsize, over the paths that stayed finite.
    pub rms_errors: Vec<f64>,
    /// Delta-method standard error of each RMS estimate.
    pub std_errors: Vec<f64>,
    /// Paths excluded at each stepsize because the study trajectory blew up.
    pub excluded: Vec<usize>,
    /// Paths excluded everywhere because the reference blew up.
    pub reference_excluded: usize,
    /// `None` when fewer than two stepsizes have a positive error.
    pub fit: Option<PowerLawFit>,
    pub paths: usize,
    pub reference_steps: usize,
}

/// Strong errors of one scheme.
pub fn strong_error_study(problem: &SdeProblem, scheme: SchemeKind, config: &StudyConfig) -> Result<ConvergenceReport> {
    let mut reports = strong_error_studies(problem, &[scheme], config)?;
    Ok(reports.remove(0))
}

/// Strong errors of several schemes, all measured along the same paths and
/// against the same reference.
pub fn strong_error_studies(
    problem: &SdeProblem,
    schemes: &[SchemeKind],
    config: &StudyConfig,
) -> Result<Vec<ConvergenceReport>> {
    if schemes.is_empty() {
        return param("no schemes to study");
    }
    if config.paths == 0 {
        return param("paths must be at least 1");
    }
    if config.stepsizes.is_empty() {
        return param("no stepsizes given");
    }
    let horizon = problem.horizon();
    let mut stepsizes = config.stepsizes.clone();
    stepsizes.sort_by(|a, b| b.total_cmp(a));
    if stepsizes.windows(2).any(|w| w[0] == w[1]) {
        return param("stepsizes must be distinct");
    }
    let steps: Vec<usize> = stepsizes
        .iter()
        .map(|h| steps_for(horizon, *h))
        .collect::<Result<_>>()?;
    for (h, n) in stepsizes.iter().zip(&steps) {
        if !config.reference_steps.is_multiple_of(*n) {
            return param(format!(
                "stepsize {h} ({n} steps) does not divide the reference grid of {} steps",
                config.reference_steps
            ));
        }
    }
    for &k in schemes {
        Stepper::new(problem, k)?;
    }
    if let Reference::Scheme(k) = config.reference {
        Stepper::new(problem, k)?;
    }

    let sup = config.norm == ErrorNorm::Sup;
    let m = problem.dim_noise();
    let per_path = |path: u64| -> Result<Option<Vec<Vec<Option<f64>>>>> {
        let fine = generate_paths(config.seed, path, config.reference_steps, m, horizon)?;
        let reference = match reference_solution(problem, &config.reference, &fine, sup) {
            Some(r) => r,
            None => return Ok(None),
        };
        let coarse_grids = coarsen_levels(&fine, &steps)?;
        let mut out = Vec::with_capacity(schemes.len());
        for &k in schemes {
            let mut stepper = Stepper::new_unchecked(problem, k);
            let mut per_h = Vec::with_capacity(steps.len());
            for (&n, coarse) in steps.iter().zip(&coarse_grids) {
                let factor = config.reference_steps / n;
                let err = if sup {
                    let traj = run(&mut stepper, problem.initial_value(), coarse, true);
                    if traj.blew_up {
                        None
                    } else {
                        Some(
                            (0..=n)
                                .map(|i| squared_distance(traj.state(i), reference.row(i * factor)))
                                .fold(0.0, f64::max),
                        )
                    }
                } else {
                    run_terminal(&mut stepper, problem.initial_value(), coarse)
                        .map(|y| squared_distance(&y, reference.last()))
                };
                // Errors too large to square count as blow-ups, like in the
                // moment statistics.
                per_h.push(err.filter(|e| (e * e).is_finite()));
            }
            out.push(per_h);
        }
        Ok(Some(out))
    };

    let mut stats = vec![vec![RunningStats::default(); steps.len()]; schemes.len()];
    let mut excluded = vec![vec![0usize; steps.len()]; schemes.len()];
    let mut reference_excluded = 0;
    for_each_path_ordered(config.paths, per_path, |result| match result {
        None => reference_excluded += 1,
        Some(per_scheme) => {
            for (s, per_h) in per_scheme.into_iter().enumerate() {
                for (i, err) in per_h.into_iter().enumerate() {
                    match err {
                        Some(e) => stats[s][i].push(e),
                        None => excluded[s][i] += 1,
                    }
                }
            }
        }
    })?;

    schemes
        .iter()
        .zip(stats.into_iter().zip(excluded))
        .map(|(&scheme, (stats, excluded))| {
            let mut rms_errors = Vec::with_capacity(steps.len());
            let mut std_errors = Vec::with_capacity(steps.len());
            for (st, h) in stats.iter().zip(&stepsizes) {
                if st.count() == 0 {
                    return Err(Error::Parameter(format!(
                        "{scheme} at h = {h}: every path was excluded after blow-up"
                    )));
                }
                let rms = st.mean().sqrt();
                rms_errors.push(rms);
                std_errors.push(if rms > 0.0 { st.std_error() / (2.0 * rms) } else { 0.0 });
            }
            let positive: Vec<(f64, f64)> = stepsizes
                .iter()
                .zip(&rms_errors)
                .filter(|(_, e)| **e > 0.0)
                .map(|(h, e)| (*h, *e))
                .collect();
            let fit = if positive.len() >= 2 {
                let (h, e): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
                Some(fit_power_law(&h, &e)?)
            } else {
                None
            };
            Ok(ConvergenceReport {
                scheme,
                stepsizes: stepsizes.clone(),
                steps: steps.clone(),
                rms_errors,
                std_errors,
                excluded,
                reference_excluded,
                fit,
                paths: config.paths,
                reference_steps: config.reference_steps,
            })
        })
        .collect()
}

/// Reference states on the fine grid: all rows for the sup norm, otherwise
/// only the terminal one.
struct ReferencePath {
    dim: usize,
    states: Vec<f64>,
}

impl ReferencePath {
    fn row(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    fn last(&self) -> &[f64] {
        &self.states[self.states.len() - self.dim..]
    }
}

fn reference_solution(
    problem: &SdeProblem,
    reference: &Reference,
    fine: &PathBundle,
    full: bool,
) -> Option<ReferencePath> {
    let dim = problem.dim_state();
    let states = match reference {
        Reference::Scheme(k) => {
            let mut stepper = Stepper::new_unchecked(problem, *k);
            if full {
                let traj = run(&mut stepper, problem.initial_value(), fine, true);
                if traj.blew_up {
                    return None;
                }
                (0..traj.rows()).flat_map(|i| traj.state(i).to_vec()).collect()
            } else {
                run_terminal(&mut stepper, problem.initial_value(), fine)?
            }
        }
        Reference::Exact(solution) => {
            let n = fine.steps();
            let mut w = vec![0.0; fine.dim_noise];
            let mut states = Vec::new();
            if full {
                states.extend(solution(0.0, &w));
            }
            for (i, dw) in fine.rows().enumerate() {
                for (wj, d) in w.iter_mut().zip(dw) {
                    *wj += d;
                }
                if full {
                    states.extend(solution(grid_time(fine.horizon, i + 1, n), &w));
                }
            }
            if !full {
                states = solution(fine.horizon, &w);
            }
            states
        }
    };
    if states.iter().any(|c| !c.is_finite()) {
        return None;
    }
    Some(ReferencePath { dim, states })
}

/// Coarse bundles for each step count (given in increasing order). Each
/// level is summed from the next finer one when the counts nest, so the fine
/// path is traversed about twice instead of once per level.
fn coarsen_levels(fine: &PathBundle, steps: &[usize]) -> Result<Vec<PathBundle>> {
    let mut levels: Vec<Option<PathBundle>> = vec![None; steps.len()];
    let mut finer = fine;
    for i in (0..steps.len()).rev() {
        let source = if finer.steps().is_multiple_of(steps[i]) {
            finer
        } else {
            fine
        };
        levels[i] = Some(source.coarsen(source.steps() / steps[i])?);
        finer = levels[i].as_ref().unwrap();
    }
    Ok(levels.into_iter().map(Option::unwrap).collect())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_problem, geometric_brownian_motion, GINZBURG_LANDAU_UNSTABLE};

    #[test]
    fn study_scheme_equal_to_reference_has_zero_error() {
        let p = builtin_problem(GINZBURG_LANDAU_UNSTABLE).unwrap();
        let cfg = StudyConfig::new(
            vec![1.0 / 64.0],
            50,
            64,
            Reference::Scheme(SchemeKind::SemiTamedMilstein),
            5,
        );
        let r = strong_error_study(&p, SchemeKind::SemiTamedMilstein, &cfg).unwrap();
        assert_eq!(r.rms_errors, vec![0.0]);
        assert!(r.fit.is_none());
        let mut sup = cfg.clone();
        sup.norm = ErrorNorm::Sup;
        let r = strong_error_study(&p, SchemeKind::SemiTamedMilstein, &sup).unwrap();
        assert_eq!(r.rms_errors, vec![0.0]);
    }

    #[test]
    fn rejects_incompatible_grids() {
        let p = builtin_problem(GINZBURG_LANDAU_UNSTABLE).unwrap();
        let r = Reference::Scheme(SchemeKind::SemiTamedMilstein);
        let bad = StudyConfig::new(vec![0.3], 10, 64, r.clone(), 1);
        assert!(strong_error_study(&p, SchemeKind::SemiTamedEuler, &bad).is_err());
        let bad = StudyConfig::new(vec![1.0 / 128.0], 10, 64, r.clone(), 1);
        assert!(strong_error_study(&p, SchemeKind::SemiTamedEuler, &bad).is_err());
        let bad = StudyConfig::new(vec![1.0 / 8.0], 0, 64, r, 1);
        assert!(strong_error_study(&p, SchemeKind::SemiTamedEuler, &bad).is_err());
    }

    #[test]
    fn stepsizes_reported_decreasing() {
        let p = builtin_problem(GINZBURG_LANDAU_UNSTABLE).unwrap();
        let cfg = StudyConfig::new(
            vec![1.0 / 16.0, 1.0 / 4.0, 1.0 / 8.0],
            20,
            64,
            Reference::Scheme(SchemeKind::SemiTamedMilstein),
            2,
        );
        let r = strong_error_study(&p, SchemeKind::SemiTamedEuler, &cfg).unwrap();
        assert_eq!(r.stepsizes, vec![0.25, 0.125, 0.0625]);
        assert_eq!(r.steps, vec![4, 8, 16]);
        assert!(r.fit.is_some());
        assert!(r.rms_errors.iter().all(|e| e.is_finite() && *e > 0.0));
    }

    #[test]
    fn exact_reference_sup_dominates_terminal() {
        let (a, b) = (0.5, 0.8);
        let p = geometric_brownian_motion(a, b, 1.0, 1.0).unwrap();
        let exact: ExactSolution = Arc::new(move |t, w| vec![((a - 0.5 * b * b) * t + b * w[0]).exp()]);
        let mut cfg = StudyConfig::new(vec![1.0 / 8.0, 1.0 / 32.0], 200, 256, Reference::Exact(exact), 11);
        let terminal = strong_error_study(&p, SchemeKind::SemiTamedMilstein, &cfg).unwrap();
        cfg.norm = ErrorNorm::Sup;
        let sup = strong_error_study(&p, SchemeKind::SemiTamedMilstein, &cfg).unwrap();
        for (t, s) in terminal.rms_errors.iter().zip(&sup.rms_errors) {
            assert!(s >= t);
        }
    }
}
