//! Exponential mean-square stability: the closed-form stepsize threshold for
//! the semi-tamed Milstein scheme, its decay rate, and empirical second
//! moment curves.
//!
//! The constants describe a problem with φ(0) = ϕ(0) = g(0) = 0 and
//!
//! ```text
//! ⟨x − y, φ(x) − φ(y)⟩ ≤ −ρ‖x − y‖²      ‖φ(x) − φ(y)‖ ≤ K‖x − y‖
//! ⟨x, ϕ(x)⟩ ≤ −v‖x‖^{α+1}                ‖ϕ(x)‖ ≤ v̄‖x‖^α
//! ‖g(x) − g(y)‖ ≤ θ‖x − y‖               ‖L^j g_i(x) − L^j g_i(y)‖ ≤ β‖x − y‖
//! ```
//!
//! with 2ρ > θ² and 2v > v̄. For h below the threshold h* the scheme satisfies
//! E‖Y_n‖² ≤ E‖ξ‖² exp(−γ_h n h) with
//! γ_h = (2ρ − θ²) − (K + m²(m² + m)β/4) h.

use serde::{Deserialize, Serialize};

use super::{for_each_path_ordered, steps_for, RunningStats};
use crate::error::{param, Result};
use crate::model::SdeProblem;
use crate::paths::generate_paths;
use crate::schemes::{grid_time, run, SchemeKind, Stepper};

/// Relative tolerance of [`check_dissipativity`], scaled by 1 + ‖x‖².
pub const DEFAULT_DISSIPATIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityParams {
    pub rho: f64,
    pub theta: f64,
    #[serde(rename = "K")]
    pub lip_k: f64,
    pub beta: f64,
    pub v: f64,
    pub v_bar: f64,
    pub alpha: f64,
    pub m: u32,
}

impl StabilityParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.rho, self.theta, self.lip_k, self.beta, self.v, self.v_bar, self.alpha,
        ];
        if finite.iter().any(|c| !c.is_finite()) {
            return param("stability constants must be finite");
        }
        if self.theta < 0.0 || self.lip_k < 0.0 || self.beta < 0.0 {
            return param("theta, K and beta must be nonnegative");
        }
        if !(self.rho > 0.0 && self.v > 0.0 && self.v_bar > 0.0) {
            return param("rho, v and v_bar must be positive");
        }
        if !(self.alpha > 1.0) {
            return param(format!("alpha must exceed 1, got {}", self.alpha));
        }
        if self.m == 0 {
            return param("m must be at least 1");
        }
        if !(2.0 * self.rho > self.theta * self.theta) {
            return param("need 2·rho > theta²");
        }
        if !(2.0 * self.v > self.v_bar) {
            return param("need 2·v > v_bar");
        }
        Ok(())
    }

    /// 2ρ − θ², the decay rate of the exact solution.
    pub fn exact_rate(&self) -> f64 {
        2.0 * self.rho - self.theta * self.theta
    }

    /// K + m²(m² + m)β/4, the coefficient of h in γ_h.
    pub fn rate_slope(&self) -> f64 {
        let m = self.m as f64;
        m * m / 4.0 * (m * m + m) * self.beta + self.lip_k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub h1: f64,
    /// `+∞` when K = β = 0.
    pub h2: f64,
    pub h_star: f64,
}

/// h1 = min((2v − v̄)/(2Kv), 2v/((2K + v̄)v̄)), h2 = (2ρ − θ²)/(K + m²(m²+m)β/4),
/// h* = min(h1, h2). A vanishing denominator makes the corresponding term
/// unbounded.
pub fn stability_threshold(params: &StabilityParams) -> Result<Threshold> {
    params.validate()?;
    let StabilityParams { lip_k: k, v, v_bar, .. } = *params;
    let first = if k > 0.0 {
        (2.0 * v - v_bar) / (2.0 * k * v)
    } else {
        f64::INFINITY
    };
    let second = 2.0 * v / ((2.0 * k + v_bar) * v_bar);
    let h1 = first.min(second);
    let slope = params.rate_slope();
    let h2 = if slope > 0.0 {
        params.exact_rate() / slope
    } else {
        f64::INFINITY
    };
    Ok(Threshold {
        h1,
        h2,
        h_star: h1.min(h2),
    })
}

/// γ_h for 0 < h < h*.
pub fn decay_rate(params: &StabilityParams, h: f64) -> Result<f64> {
    let t = stability_threshold(params)?;
    if !(h > 0.0) {
        return param(format!("stepsize must be positive, got {h}"));
    }
    if h >= t.h_star {
        return param(format!("stepsize {h} is not below the threshold h* = {}", t.h_star));
    }
    Ok(params.exact_rate() - params.rate_slope() * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityReport {
    pub gamma: f64,
    pub passed: bool,
    /// max over samples of 2⟨x, f(x)⟩ + ‖g(x)‖² + γ‖x‖².
    pub margin: f64,
    pub worst_point: Vec<f64>,
}

/// Checks 2⟨x, f(x)⟩ + ‖g(x)‖² ≤ −γ‖x‖² at every sample point (‖g‖ is the
/// Frobenius norm).
pub fn check_dissipativity(
    problem: &SdeProblem,
    gamma: f64,
    sample_points: &[Vec<f64>],
) -> Result<DissipativityReport> {
    check_dissipativity_with_tolerance(problem, gamma, sample_points, DEFAULT_DISSIPATIVITY_TOL)
}

pub fn check_dissipativity_with_tolerance(
    problem: &SdeProblem,
    gamma: f64,
    sample_points: &[Vec<f64>],
    tolerance: f64,
) -> Result<DissipativityReport> {
    if sample_points.is_empty() {
        return param("dissipativity check needs at least one sample point");
    }
    let mut passed = true;
    let mut margin = f64::NEG_INFINITY;
    let mut worst_point = Vec::new();
    for x in sample_points {
        let f = problem.drift_full(x)?;
        let inner: f64 = x.iter().zip(&f).map(|(a, b)| a * b).sum();
        let g2: f64 = (0..problem.dim_noise())
            .map(|j| problem.diffusion_column(x, j).iter().map(|c| c * c).sum::<f64>())
            .sum();
        let x2: f64 = x.iter().map(|c| c * c).sum();
        let value = 2.0 * inner + g2 + gamma * x2;
        if value > tolerance * (1.0 + x2) {
            passed = false;
        }
        if value > margin {
            margin = value;
            worst_point = x.clone();
        }
    }
    Ok(DissipativityReport {
        gamma,
        passed,
        margin,
        worst_point,
    })
}

/// Empirical E‖Y_n‖² at every gridpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSquareCurve {
    pub scheme: SchemeKind,
    pub h: f64,
    pub times: Vec<f64>,
    /// Averages over the paths that stayed finite.
    pub mean_square: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Paths that blew up; they are excluded from every average.
    pub blown_up: usize,
    pub paths: usize,
}

impl MeanSquareCurve {
    pub fn final_value(&self) -> f64 {
        *self.mean_square.last().unwrap()
    }
}

/// Per-gridpoint ‖Y_n‖^p summaries over all paths (p even).
fn moment_stats(
    problem: &SdeProblem,
    scheme: SchemeKind,
    h: f64,
    paths: usize,
    seed: u64,
    power: i32,
) -> Result<(usize, Vec<RunningStats>, usize)> {
    if paths == 0 {
        return param("paths must be at least 1");
    }
    let steps = steps_for(problem.horizon(), h)?;
    Stepper::new(problem, scheme)?;
    let per_path = |path: u64| -> Result<Option<Vec<f64>>> {
        let bundle = generate_paths(seed, path, steps, problem.dim_noise(), problem.horizon())?;
        let mut stepper = Stepper::new_unchecked(problem, scheme);
        let traj = run(&mut stepper, problem.initial_value(), &bundle, true);
        if traj.blew_up {
            return Ok(None);
        }
        let values: Vec<f64> = (0..=steps)
            .map(|n| traj.state(n).iter().map(|c| c * c).sum::<f64>().powi(power / 2))
            .collect();
        // A contribution whose square overflows would make the variance
        // infinite, so it is tallied with the blow-ups.
        Ok(values.iter().all(|v| (v * v).is_finite()).then_some(values))
    };
    let mut stats = vec![RunningStats::default(); steps + 1];
    let mut blown_up = 0;
    for_each_path_ordered(paths, per_path, |r| match r {
        None => blown_up += 1,
        Some(values) => stats.iter_mut().zip(values).for_each(|(s, v)| s.push(v)),
    })?;
    Ok((steps, stats, blown_up))
}

pub fn mean_square_curve(
    problem: &SdeProblem,
    scheme: SchemeKind,
    h: f64,
    paths: usize,
    seed: u64,
) -> Result<MeanSquareCurve> {
    let (steps, stats, blown_up) = moment_stats(problem, scheme, h, paths, seed, 2)?;
    let horizon = problem.horizon();
    let (mean_square, std_error) = if blown_up == paths {
        // Nothing finite to average; report zeros next to the full tally.
        (vec![0.0; steps + 1], vec![0.0; steps + 1])
    } else {
        stats.iter().map(|s| (s.mean(), s.std_error())).unzip()
    };
    Ok(MeanSquareCurve {
        scheme,
        h,
        times: (0..=steps).map(|n| grid_time(horizon, n, steps)).collect(),
        mean_square,
        std_error,
        blown_up,
        paths,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBound {
    pub p: u32,
    /// max_n of the empirical E‖Y_n‖^p over the finite paths.
    pub max_moment: f64,
    pub step_of_max: usize,
    pub blown_up: usize,
    pub paths: usize,
}

/// Running maximum over the grid of the empirical p-th moment, p ∈ {2, 4, 6}.
pub fn empirical_moment_bound(
    problem: &SdeProblem,
    scheme: SchemeKind,
    h: f64,
    paths: usize,
    p: u32,
    seed: u64,
) -> Result<MomentBound> {
    if !matches!(p, 2 | 4 | 6) {
        return param(format!("moment order must be 2, 4 or 6, got {p}"));
    }
    let (_, stats, blown_up) = moment_stats(problem, scheme, h, paths, seed, p as i32)?;
    let (step_of_max, max_moment) = if blown_up == paths {
        (0, f64::INFINITY)
    } else {
        stats.iter().map(|s| s.mean()).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (n, v)| if v > best.1 { (n, v) } else { best },
        )
    };
    Ok(MomentBound {
        p,
        max_moment,
        step_of_max,
        blown_up,
        paths,
    })
}

/// Mean-square curves for several schemes and stepsizes plus, when constants
/// are supplied, the threshold they imply.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub params: Option<StabilityParams>,
    pub threshold: Option<Threshold>,
    pub curves: Vec<MeanSquareCurve>,
}

impl StabilityReport {
    pub fn gamma_of_h(&self, h: f64) -> Result<f64> {
        match &self.params {
            Some(p) => decay_rate(p, h),
            None => param("no stability constants were supplied"),
        }
    }

    pub fn curve(&self, scheme: SchemeKind, h: f64) -> Option<&MeanSquareCurve> {
        self.curves.iter().find(|c| c.scheme == scheme && c.h == h)
    }
}

/// Curves are ordered scheme-major in the order given.
pub fn stability_study(
    problem: &SdeProblem,
    schemes: &[SchemeKind],
    stepsizes: &[f64],
    paths: usize,
    seed: u64,
    params: Option<&StabilityParams>,
) -> Result<StabilityReport> {
    let threshold = params.map(stability_threshold).transpose()?;
    let mut curves = Vec::with_capacity(schemes.len() * stepsizes.len());
    for &scheme in schemes {
        for &h in stepsizes {
            curves.push(mean_square_curve(problem, scheme, h, paths, seed)?);
        }
    }
    Ok(StabilityReport {
        params: params.copied(),
        threshold,
        curves,
    })
}
