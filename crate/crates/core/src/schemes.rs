//! Explicit one-step schemes and the trajectory loop.
//!
//! All five schemes share the structure
//!
//! ```text
//! Y_{n+1} = Y_n + (drift term) + Σ_j g_j(Y_n) ΔW^j_n + (Milstein correction)
//! ```
//!
//! and differ in how the drift term is damped:
//!
//! | scheme               | drift term                         | correction |
//! |----------------------|------------------------------------|------------|
//! | Euler–Maruyama       | f h                                | no         |
//! | tamed Euler          | f h / (1 + h‖f‖)                   | no         |
//! | semi-tamed Euler     | φ h + ϕ h / (1 + h‖ϕ‖)             | no         |
//! | tamed Milstein       | f h / (1 + h‖f‖)                   | yes        |
//! | semi-tamed Milstein  | φ h + ϕ h / (1 + h‖ϕ‖)             | yes        |
//!
//! The correction is ½ Σ_{j1,j2} L^{j1}g_{j2}(Y_n)(ΔW^{j1}ΔW^{j2} − δ_{j1j2} h),
//! which replaces the iterated Itô integrals only when the noise is
//! commutative. Steps never draw randomness; increments come from a
//! [`PathBundle`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::{norm, LevyScratch, SdeProblem};
use crate::paths::PathBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "em")]
    EulerMaruyama,
    #[serde(rename = "tamed-euler")]
    TamedEuler,
    #[serde(rename = "semi-tamed-euler")]
    SemiTamedEuler,
    #[serde(rename = "tamed-milstein")]
    TamedMilstein,
    #[serde(rename = "semi-tamed-milstein")]
    SemiTamedMilstein,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::EulerMaruyama,
        SchemeKind::TamedEuler,
        SchemeKind::SemiTamedEuler,
        SchemeKind::TamedMilstein,
        SchemeKind::SemiTamedMilstein,
    ];

    /// Stable CLI-facing name.
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::EulerMaruyama => "em",
            SchemeKind::TamedEuler => "tamed-euler",
            SchemeKind::SemiTamedEuler => "semi-tamed-euler",
            SchemeKind::TamedMilstein => "tamed-milstein",
            SchemeKind::SemiTamedMilstein => "semi-tamed-milstein",
        }
    }

    pub fn is_milstein(self) -> bool {
        matches!(self, SchemeKind::TamedMilstein | SchemeKind::SemiTamedMilstein)
    }

    fn drift(self) -> DriftMode {
        match self {
            SchemeKind::EulerMaruyama => DriftMode::Plain,
            SchemeKind::TamedEuler | SchemeKind::TamedMilstein => DriftMode::Tamed,
            SchemeKind::SemiTamedEuler | SchemeKind::SemiTamedMilstein => DriftMode::SemiTamed,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = SchemeKind::ALL.iter().map(|k| k.name()).collect();
            Error::Parameter(format!("unknown scheme `{s}`; valid names: {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DriftMode {
    Plain,
    Tamed,
    SemiTamed,
}

/// v / (1 + h‖v‖).
pub fn tame(v: &[f64], h: f64) -> Vec<f64> {
    let denom = 1.0 + h * norm(v);
    v.iter().map(|c| c / denom).collect()
}

/// Stateful stepping engine for one (problem, scheme) pair. Holds scratch
/// buffers so that the inner loop does not allocate.
pub struct Stepper<'a> {
    problem: &'a SdeProblem,
    kind: SchemeKind,
    lip: Vec<f64>,
    nonlip: Vec<f64>,
    column: Vec<f64>,
    levy: Vec<f64>,
    scratch: LevyScratch,
}

impl<'a> Stepper<'a> {
    /// Fails for Milstein schemes on problems that are not validated (or
    /// explicitly declared) commutative.
    pub fn new(problem: &'a SdeProblem, kind: SchemeKind) -> Result<Self> {
        if kind.is_milstein() && !problem.is_commutative() {
            return Err(Error::NotCommutative {
                label: problem.label().to_string(),
                max_violation: problem.commutativity().max_violation,
            });
        }
        Ok(Self::new_unchecked(problem, kind))
    }

    pub(crate) fn new_unchecked(problem: &'a SdeProblem, kind: SchemeKind) -> Self {
        let d = problem.dim_state();
        Self {
            problem,
            kind,
            lip: vec![0.0; d],
            nonlip: vec![0.0; d],
            column: vec![0.0; d],
            levy: vec![0.0; d],
            scratch: LevyScratch::new(d),
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    /// One step from `x` with increment `dw` and step size `h`, written to
    /// `out`. Non-finite results are left in `out` for the caller to detect.
    pub fn step(&mut self, x: &[f64], dw: &[f64], h: f64, out: &mut [f64]) {
        let p = self.problem;
        p.phi_into(x, &mut self.lip);
        p.varphi_into(x, &mut self.nonlip);
        match self.kind.drift() {
            DriftMode::SemiTamed => {
                let denom = 1.0 + h * norm(&self.nonlip);
                for ((o, xi), a) in out.iter_mut().zip(x).zip(&self.lip) {
                    *o = xi + a * h;
                }
                for (o, b) in out.iter_mut().zip(&self.nonlip) {
                    *o += b / denom * h;
                }
            }
            DriftMode::Tamed => {
                for (a, b) in self.lip.iter_mut().zip(&self.nonlip) {
                    *a += b;
                }
                let denom = 1.0 + h * norm(&self.lip);
                for i in 0..out.len() {
                    out[i] = x[i] + self.lip[i] / denom * h;
                }
            }
            DriftMode::Plain => {
                for (a, b) in self.lip.iter_mut().zip(&self.nonlip) {
                    *a += b;
                }
                for i in 0..out.len() {
                    out[i] = x[i] + self.lip[i] * h;
                }
            }
        }
        for (j, dwj) in dw.iter().enumerate() {
            p.diffusion_into(x, j, &mut self.column);
            for (o, g) in out.iter_mut().zip(&self.column) {
                *o += g * dwj;
            }
        }
        if self.kind.is_milstein() {
            self.add_correction(x, dw, h, out);
        }
    }

    /// Adds ½ Σ L^{j1}g_{j2}(ΔW^{j1}ΔW^{j2} − δ h) using unordered pairs:
    /// under commutativity the off-diagonal pair (j1, j2) and (j2, j1)
    /// contribute L^{j1}g_{j2} ΔW^{j1}ΔW^{j2} together.
    fn add_correction(&mut self, x: &[f64], dw: &[f64], h: f64, out: &mut [f64]) {
        let m = dw.len();
        for j1 in 0..m {
            for j2 in j1..m {
                let weight = if j1 == j2 {
                    0.5 * (dw[j1] * dw[j1] - h)
                } else {
                    dw[j1] * dw[j2]
                };
                self.problem
                    .levy_product_into(x, j1, j2, &mut self.scratch, &mut self.levy);
                for (o, l) in out.iter_mut().zip(&self.levy) {
                    *o += l * weight;
                }
            }
        }
    }
}

/// The Milstein correction term on its own.
pub fn milstein_correction(problem: &SdeProblem, x: &[f64], dw: &[f64], h: f64) -> Result<Vec<f64>> {
    check_step_inputs(problem, x, dw, h)?;
    let mut stepper = Stepper::new_unchecked(problem, SchemeKind::SemiTamedMilstein);
    let mut out = vec![0.0; problem.dim_state()];
    stepper.add_correction(x, dw, h, &mut out);
    match out.iter().position(|c| !c.is_finite()) {
        Some(component) => Err(Error::Evaluation {
            what: "Milstein correction".into(),
            component,
        }),
        None => Ok(out),
    }
}

fn check_step_inputs(problem: &SdeProblem, x: &[f64], dw: &[f64], h: f64) -> Result<()> {
    if x.len() != problem.dim_state() {
        return param(format!(
            "state has length {}, expected {}",
            x.len(),
            problem.dim_state()
        ));
    }
    if dw.len() != problem.dim_noise() {
        return param(format!(
            "increment has length {}, expected {}",
            dw.len(),
            problem.dim_noise()
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return param(format!("step size must be positive, got {h}"));
    }
    Ok(())
}

/// One step of `kind`. The output may be non-finite; that is reported to
/// the caller through the values, not as an error.
pub fn step(problem: &SdeProblem, kind: SchemeKind, x: &[f64], dw: &[f64], h: f64) -> Result<Vec<f64>> {
    check_step_inputs(problem, x, dw, h)?;
    let mut out = vec![0.0; problem.dim_state()];
    Stepper::new(problem, kind)?.step(x, dw, h, &mut out);
    Ok(out)
}

pub fn step_semi_tamed_milstein(problem: &SdeProblem, x: &[f64], dw: &[f64], h: f64) -> Result<Vec<f64>> {
    step(problem, SchemeKind::SemiTamedMilstein, x, dw, h)
}

pub fn step_tamed_milstein(problem: &SdeProblem, x: &[f64], dw: &[f64], h: f64) -> Result<Vec<f64>> {
    step(problem, SchemeKind::TamedMilstein, x, dw, h)
}

pub fn step_semi_tamed_euler(problem: &SdeProblem, x: &[f64], dw: &[f64], h: f64) -> Result<Vec<f64>> {
    step(problem, SchemeKind::SemiTamedEuler, x, dw, h)
}

pub fn step_tamed_euler(problem: &SdeProblem, x: &[f64], dw: &[f64], h: f64) -> Result<Vec<f64>> {
    step(problem, SchemeKind::TamedEuler, x, dw, h)
}

pub fn step_euler_maruyama(problem: &SdeProblem, x: &[f64], dw: &[f64], h: f64) -> Result<Vec<f64>> {
    step(problem, SchemeKind::EulerMaruyama, x, dw, h)
}

/// A numerical trajectory on the uniform grid t_n = nT/N.
///
/// In lean mode only the initial and final rows are kept. After a blow-up
/// the remaining rows are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: usize,
    pub dim: usize,
    pub times: Vec<f64>,
    states: Vec<f64>,
    pub blew_up: bool,
    /// Index n of the first non-finite state.
    pub blow_up_step: Option<usize>,
}

impl Trajectory {
    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, row: usize) -> &[f64] {
        &self.states[row * self.dim..(row + 1) * self.dim]
    }

    pub fn initial_state(&self) -> &[f64] {
        self.state(0)
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.rows() - 1)
    }

    pub fn is_full(&self) -> bool {
        self.rows() == self.steps + 1
    }
}

/// Grid time of step n out of N on [0, T]; exactly T at n = N.
#[inline]
pub fn grid_time(horizon: f64, n: usize, steps: usize) -> f64 {
    horizon * n as f64 / steps as f64
}

/// Run `kind` along the increments of `bundle` with h = T / N.
pub fn integrate(problem: &SdeProblem, kind: SchemeKind, bundle: &PathBundle, record_full: bool) -> Result<Trajectory> {
    if bundle.dim_noise != problem.dim_noise() {
        return param(format!(
            "bundle has {} noise components, problem expects {}",
            bundle.dim_noise,
            problem.dim_noise()
        ));
    }
    let mut stepper = Stepper::new(problem, kind)?;
    Ok(run(&mut stepper, problem.initial_value(), bundle, record_full))
}

pub(crate) fn run(stepper: &mut Stepper<'_>, x0: &[f64], bundle: &PathBundle, record_full: bool) -> Trajectory {
    let d = x0.len();
    let steps = bundle.steps();
    let h = bundle.step_size();
    let horizon = bundle.horizon;
    let rows = if record_full { steps + 1 } else { 2 };
    let mut states = Vec::with_capacity(rows * d);
    states.extend_from_slice(x0);

    let mut current = x0.to_vec();
    let mut next = vec![0.0; d];
    let mut blow_up_step = None;
    for (n, dw) in bundle.rows().enumerate() {
        stepper.step(&current, dw, h, &mut next);
        if next.iter().any(|c| !c.is_finite()) {
            blow_up_step = Some(n + 1);
            break;
        }
        std::mem::swap(&mut current, &mut next);
        if record_full {
            states.extend_from_slice(&current);
        }
    }
    if blow_up_step.is_some() {
        states.resize(rows * d, f64::NAN);
    } else if !record_full {
        states.extend_from_slice(&current);
    }
    let times = if record_full {
        (0..=steps).map(|n| grid_time(horizon, n, steps)).collect()
    } else {
        vec![0.0, horizon]
    };
    Trajectory {
        steps,
        dim: d,
        times,
        states,
        blew_up: blow_up_step.is_some(),
        blow_up_step,
    }
}

/// Terminal state only, `None` on blow-up.
pub(crate) fn run_terminal(stepper: &mut Stepper<'_>, x0: &[f64], bundle: &PathBundle) -> Option<Vec<f64>> {
    let h = bundle.step_size();
    let mut current = x0.to_vec();
    let mut next = vec![0.0; x0.len()];
    for dw in bundle.rows() {
        stepper.step(&current, dw, h, &mut next);
        if next.iter().any(|c| !c.is_finite()) {
            return None;
        }
        std::mem::swap(&mut current, &mut next);
    }
    Some(current)
}
