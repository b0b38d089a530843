//! SDE problems with split drift and commutative diffusion.
//!
//! A problem is the Itô equation
//!
//! ```text
//! dX_t = (φ(X_t) + ϕ(X_t)) dt + Σ_j g_j(X_t) dW^j_t,   X_0 = ξ,  t ∈ [0, T]
//! ```
//!
//! where φ is globally Lipschitz and ϕ is the (possibly superlinearly growing)
//! part that the tamed schemes damp. The caller declares the split; it is
//! never inferred. For the schemes to behave as documented the drift should
//! be one-sided Lipschitz, g globally Lipschitz and ϕ of polynomial growth;
//! none of this is checked at runtime.
//!
//! Noise indices are zero-based throughout the API (`0..dim_noise`).

use std::fmt;
use std::sync::Arc;

use crate::error::{param, Error, Result};

/// `(x, out)`: writes a drift component into `out`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(x, j, out)`: writes the diffusion column g_j(x) into `out`.
pub type DiffusionField = Arc<dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync>;
/// `(x, j1, j2, out)`: writes L^{j1} g_{j2}(x) into `out`.
pub type DerivativeField = Arc<dyn Fn(&[f64], usize, usize, &mut [f64]) + Send + Sync>;

pub const DEFAULT_FD_STEP: f64 = 1e-6;
pub const CLOSED_FORM_COMMUTATIVITY_TOL: f64 = 1e-8;
pub const FINITE_DIFFERENCE_COMMUTATIVITY_TOL: f64 = 1e-4;

pub const GINZBURG_LANDAU_UNSTABLE: &str = "ginzburg-landau-unstable";
pub const GINZBURG_LANDAU_STABLE: &str = "ginzburg-landau-stable";

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_MODELS: [&str; 2] = [GINZBURG_LANDAU_UNSTABLE, GINZBURG_LANDAU_STABLE];

/// An immutable, shareable SDE problem.
#[derive(Clone)]
pub struct SdeProblem {
    label: String,
    dim_state: usize,
    dim_noise: usize,
    phi: VectorField,
    varphi: VectorField,
    diffusion: DiffusionField,
    derivative: Option<DerivativeField>,
    initial_value: Vec<f64>,
    horizon: f64,
    fd_step: f64,
    commutativity: CommutativityReport,
    commutativity_override: bool,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("label", &self.label)
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("closed_form_derivative", &self.derivative.is_some())
            .field("initial_value", &self.initial_value)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

/// Result of sampling the commutativity condition L^{j1}g_{j2} = L^{j2}g_{j1}.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutativityReport {
    pub max_violation: f64,
    pub sample_count: usize,
    pub passed: bool,
    pub tolerance: f64,
}

/// Reusable buffers for finite-difference derivative products.
#[derive(Debug, Clone)]
pub(crate) struct LevyScratch {
    dir: Vec<f64>,
    shifted: Vec<f64>,
    plus: Vec<f64>,
}

impl LevyScratch {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            dir: vec![0.0; dim],
            shifted: vec![0.0; dim],
            plus: vec![0.0; dim],
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn first_non_finite(v: &[f64]) -> Option<usize> {
    v.iter().position(|c| !c.is_finite())
}

impl SdeProblem {
    pub fn builder(label: impl Into<String>, dim_state: usize, dim_noise: usize) -> SdeProblemBuilder {
        SdeProblemBuilder::new(label.into(), dim_state, dim_noise)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn initial_value(&self) -> &[f64] {
        &self.initial_value
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn has_closed_form_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// Relative step η of the finite-difference fallback.
    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    /// Commutativity check performed when the problem was built.
    pub fn commutativity(&self) -> &CommutativityReport {
        &self.commutativity
    }

    /// True when Milstein-type schemes may be applied: either the build-time
    /// check passed or the caller asserted commutativity explicitly.
    pub fn is_commutative(&self) -> bool {
        self.commutativity.passed || self.commutativity_override
    }

    /// Same problem on a different time horizon.
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return param(format!("horizon must be positive and finite, got {horizon}"));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_initial_value(mut self, initial_value: Vec<f64>) -> Result<Self> {
        if initial_value.len() != self.dim_state {
            return param(format!(
                "initial value has length {}, expected {}",
                initial_value.len(),
                self.dim_state
            ));
        }
        if first_non_finite(&initial_value).is_some() {
            return param("initial value must be finite");
        }
        self.initial_value = initial_value;
        Ok(self)
    }

    #[inline]
    pub(crate) fn phi_into(&self, x: &[f64], out: &mut [f64]) {
        (self.phi)(x, out)
    }

    #[inline]
    pub(crate) fn varphi_into(&self, x: &[f64], out: &mut [f64]) {
        (self.varphi)(x, out)
    }

    #[inline]
    pub(crate) fn diffusion_into(&self, x: &[f64], j: usize, out: &mut [f64]) {
        (self.diffusion)(x, j, out)
    }

    pub fn phi(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_state];
        self.phi_into(x, &mut out);
        out
    }

    pub fn varphi(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_state];
        self.varphi_into(x, &mut out);
        out
    }

    /// Diffusion column g_j(x).
    pub fn diffusion_column(&self, x: &[f64], j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_state];
        self.diffusion_into(x, j, &mut out);
        out
    }

    /// Total drift f(x) = φ(x) + ϕ(x).
    pub fn drift_full(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        let mut out = self.phi(x);
        let varphi = self.varphi(x);
        for (o, v) in out.iter_mut().zip(&varphi) {
            *o += v;
        }
        match first_non_finite(&out) {
            Some(component) => Err(Error::Evaluation {
                what: "drift".into(),
                component,
            }),
            None => Ok(out),
        }
    }

    /// L^{j1} g_{j2}(x) = Σ_k g_{k,j1}(x) ∂_k g_{j2}(x).
    ///
    /// Uses the closed form when the problem provides one, otherwise a central
    /// difference of g_{j2} along the direction g_{j1}(x) with step
    /// η·max(1, ‖x‖).
    pub fn levy_product_coefficient(&self, x: &[f64], j1: usize, j2: usize) -> Result<Vec<f64>> {
        self.check_state(x)?;
        if j1 >= self.dim_noise || j2 >= self.dim_noise {
            return param(format!(
                "noise indices ({j1}, {j2}) out of range for dim_noise = {}",
                self.dim_noise
            ));
        }
        let mut out = vec![0.0; self.dim_state];
        let mut scratch = LevyScratch::new(self.dim_state);
        self.levy_product_into(x, j1, j2, &mut scratch, &mut out);
        match first_non_finite(&out) {
            Some(component) => Err(Error::Evaluation {
                what: format!("L^{j1} g_{j2}"),
                component,
            }),
            None => Ok(out),
        }
    }

    /// Finite-difference L^{j1} g_{j2}, ignoring any closed form.
    pub fn levy_product_finite_difference(&self, x: &[f64], j1: usize, j2: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_state];
        let mut scratch = LevyScratch::new(self.dim_state);
        self.levy_fd_into(x, j1, j2, &mut scratch, &mut out);
        out
    }

    #[inline]
    pub(crate) fn levy_product_into(
        &self,
        x: &[f64],
        j1: usize,
        j2: usize,
        scratch: &mut LevyScratch,
        out: &mut [f64],
    ) {
        match &self.derivative {
            Some(d) => d(x, j1, j2, out),
            None => self.levy_fd_into(x, j1, j2, scratch, out),
        }
    }

    fn levy_fd_into(&self, x: &[f64], j1: usize, j2: usize, s: &mut LevyScratch, out: &mut [f64]) {
        let eps = self.fd_step * norm(x).max(1.0);
        self.diffusion_into(x, j1, &mut s.dir);
        for ((p, xi), di) in s.shifted.iter_mut().zip(x).zip(&s.dir) {
            *p = xi + eps * di;
        }
        self.diffusion_into(&s.shifted, j2, &mut s.plus);
        for ((p, xi), di) in s.shifted.iter_mut().zip(x).zip(&s.dir) {
            *p = xi - eps * di;
        }
        self.diffusion_into(&s.shifted, j2, out);
        for (o, p) in out.iter_mut().zip(&s.plus) {
            *o = (p - *o) / (2.0 * eps);
        }
    }

    /// Largest ‖L^{j1}g_{j2}(x) − L^{j2}g_{j1}(x)‖ over the sample points and
    /// all unordered index pairs.
    pub fn check_commutativity(&self, sample_points: &[Vec<f64>], tolerance: f64) -> Result<CommutativityReport> {
        if sample_points.is_empty() {
            return param("commutativity check needs at least one sample point");
        }
        if !(tolerance >= 0.0) {
            return param(format!("tolerance must be nonnegative, got {tolerance}"));
        }
        let mut max_violation: f64 = 0.0;
        for x in sample_points {
            self.check_state(x)?;
            for j1 in 0..self.dim_noise {
                for j2 in (j1 + 1)..self.dim_noise {
                    let a = self.levy_product_coefficient(x, j1, j2)?;
                    let b = self.levy_product_coefficient(x, j2, j1)?;
                    let diff = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                    max_violation = max_violation.max(diff);
                }
            }
        }
        Ok(CommutativityReport {
            max_violation,
            sample_count: sample_points.len(),
            passed: max_violation <= tolerance,
            tolerance,
        })
    }

    /// Tolerance used when no explicit one is given: tighter for closed-form
    /// derivative products than for the finite-difference fallback.
    pub fn default_commutativity_tolerance(&self) -> f64 {
        if self.derivative.is_some() {
            CLOSED_FORM_COMMUTATIVITY_TOL
        } else {
            FINITE_DIFFERENCE_COMMUTATIVITY_TOL
        }
    }

    /// Points around the initial value used by the build-time check.
    pub fn default_sample_points(&self) -> Vec<Vec<f64>> {
        let x0 = &self.initial_value;
        let mut points = vec![
            x0.clone(),
            x0.iter().map(|c| -c).collect(),
            x0.iter().map(|c| 2.0 * c).collect(),
        ];
        for k in 0..self.dim_state {
            for sign in [1.0, -1.0] {
                let mut p = x0.clone();
                p[k] += sign * (1.0 + x0[k].abs());
                points.push(p);
            }
        }
        points
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim_state {
            return param(format!("state has length {}, expected {}", x.len(), self.dim_state));
        }
        if first_non_finite(x).is_some() {
            return param("state must be finite");
        }
        Ok(())
    }
}

pub struct SdeProblemBuilder {
    label: String,
    dim_state: usize,
    dim_noise: usize,
    phi: Option<VectorField>,
    varphi: Option<VectorField>,
    diffusion: Option<DiffusionField>,
    derivative: Option<DerivativeField>,
    initial_value: Option<Vec<f64>>,
    horizon: f64,
    fd_step: f64,
    assume_commutative: bool,
}

impl SdeProblemBuilder {
    fn new(label: String, dim_state: usize, dim_noise: usize) -> Self {
        Self {
            label,
            dim_state,
            dim_noise,
            phi: None,
            varphi: None,
            diffusion: None,
            derivative: None,
            initial_value: None,
            horizon: 1.0,
            fd_step: DEFAULT_FD_STEP,
            assume_commutative: false,
        }
    }

    /// Globally Lipschitz drift part. Defaults to zero.
    pub fn phi(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.phi = Some(Arc::new(f));
        self
    }

    /// Non-Lipschitz drift part, tamed by the semi-tamed schemes. Defaults to zero.
    pub fn varphi(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.varphi = Some(Arc::new(f));
        self
    }

    /// Diffusion columns g_j. Defaults to zero.
    pub fn diffusion(mut self, f: impl Fn(&[f64], usize, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Some(Arc::new(f));
        self
    }

    /// Closed-form L^{j1} g_{j2}. Without it, central finite differences are used.
    pub fn diffusion_derivative(
        mut self,
        f: impl Fn(&[f64], usize, usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Arc::new(f));
        self
    }

    pub fn initial_value(mut self, x0: Vec<f64>) -> Self {
        self.initial_value = Some(x0);
        self
    }

    pub fn horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn fd_step(mut self, eta: f64) -> Self {
        self.fd_step = eta;
        self
    }

    /// Allow Milstein schemes even if the sampled commutativity check fails.
    pub fn assume_commutative(mut self, yes: bool) -> Self {
        self.assume_commutative = yes;
        self
    }

    pub fn build(self) -> Result<SdeProblem> {
        if self.dim_state == 0 || self.dim_noise == 0 {
            return param("dim_state and dim_noise must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return param(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return param(format!("finite-difference step must be positive, got {}", self.fd_step));
        }
        let d = self.dim_state;
        let initial_value = self.initial_value.unwrap_or_else(|| vec![0.0; d]);
        if initial_value.len() != d {
            return param(format!(
                "initial value has length {}, expected {d}",
                initial_value.len()
            ));
        }
        if first_non_finite(&initial_value).is_some() {
            return param("initial value must be finite");
        }
        let zero: VectorField = Arc::new(|_, out: &mut [f64]| out.fill(0.0));
        let mut problem = SdeProblem {
            label: self.label,
            dim_state: d,
            dim_noise: self.dim_noise,
            phi: self.phi.unwrap_or_else(|| zero.clone()),
            varphi: self.varphi.unwrap_or(zero),
            diffusion: self
                .diffusion
                .unwrap_or_else(|| Arc::new(|_, _, out: &mut [f64]| out.fill(0.0))),
            derivative: self.derivative,
            initial_value,
            horizon: self.horizon,
            fd_step: self.fd_step,
            commutativity: CommutativityReport {
                max_violation: 0.0,
                sample_count: 0,
                passed: true,
                tolerance: 0.0,
            },
            commutativity_override: self.assume_commutative,
        };
        let points = problem.default_sample_points();
        let tol = problem.default_commutativity_tolerance();
        // Evaluation failures at the probe points leave the problem unvalidated
        // rather than rejecting it outright.
        problem.commutativity = match problem.check_commutativity(&points, tol) {
            Ok(report) => report,
            Err(_) => CommutativityReport {
                max_violation: f64::INFINITY,
                sample_count: points.len(),
                passed: false,
                tolerance: tol,
            },
        };
        Ok(problem)
    }
}

/// Look up one of the built-in example problems by name.
pub fn builtin_problem(name: &str) -> Result<SdeProblem> {
    match name {
        // dX = (2X − X⁵) dt + X dW, X₀ = 1, T = 1
        GINZBURG_LANDAU_UNSTABLE => SdeProblem::builder(name, 1, 1)
            .phi(|x, out| out[0] = 2.0 * x[0])
            .varphi(|x, out| out[0] = -x[0].powi(5))
            .diffusion(|x, _, out| out[0] = x[0])
            .diffusion_derivative(|x, _, _, out| out[0] = x[0])
            .initial_value(vec![1.0])
            .horizon(1.0)
            .build(),
        // dX = (−2X − X⁵) dt + √2 X dW, X₀ = 1, T = 5
        GINZBURG_LANDAU_STABLE => SdeProblem::builder(name, 1, 1)
            .phi(|x, out| out[0] = -2.0 * x[0])
            .varphi(|x, out| out[0] = -x[0].powi(5))
            .diffusion(|x, _, out| out[0] = std::f64::consts::SQRT_2 * x[0])
            .diffusion_derivative(|x, _, _, out| out[0] = 2.0 * x[0])
            .initial_value(vec![1.0])
            .horizon(5.0)
            .build(),
        _ => Err(Error::UnknownModel {
            name: name.to_string(),
            valid: BUILTIN_MODELS.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// Scalar geometric Brownian motion dX = aX dt + bX dW with the whole drift
/// in the Lipschitz part.
///
/// The derivative product is evaluated as `b * (b * x)`, the same operation
/// order as `b(x) * b'(x)` in the textbook Milstein recursion.
pub fn geometric_brownian_motion(a: f64, b: f64, x0: f64, horizon: f64) -> Result<SdeProblem> {
    SdeProblem::builder("geometric-brownian-motion", 1, 1)
        .phi(move |x, out| out[0] = a * x[0])
        .diffusion(move |x, _, out| out[0] = b * x[0])
        .diffusion_derivative(move |x, _, _, out| out[0] = b * (b * x[0]))
        .initial_value(vec![x0])
        .horizon(horizon)
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn non_commutative() -> SdeProblem {
        // g_1 = (x_2, 0), g_2 = (0, x_1)
        SdeProblem::builder("non-commutative", 2, 2)
            .diffusion(|x, j, out| {
                if j == 0 {
                    out[0] = x[1];
                    out[1] = 0.0;
                } else {
                    out[0] = 0.0;
                    out[1] = x[0];
                }
            })
            .initial_value(vec![1.0, 2.0])
            .build()
            .unwrap()
    }

    fn diagonal(sigma: [f64; 3]) -> SdeProblem {
        SdeProblem::builder("diagonal", 3, 3)
            .diffusion(move |x, j, out| {
                out.fill(0.0);
                out[j] = sigma[j] * x[j];
            })
            .initial_value(vec![1.0, -0.5, 2.0])
            .build()
            .unwrap()
    }

    #[test]
    fn drift_of_builtins() {
        let p = builtin_problem(GINZBURG_LANDAU_UNSTABLE).unwrap();
        assert_eq!(p.drift_full(&[1.0]).unwrap(), vec![1.0]);
        let p = builtin_problem(GINZBURG_LANDAU_STABLE).unwrap();
        assert_eq!(p.drift_full(&[2.0]).unwrap(), vec![-36.0]);
    }

    #[test]
    fn drift_cancellation_gives_zero() {
        let p = SdeProblem::builder("cancel", 2, 1)
            .phi(|x, out| {
                out[0] = x[0] * x[1];
                out[1] = x[1].sin();
            })
            .varphi(|x, out| {
                out[0] = -(x[0] * x[1]);
                out[1] = -x[1].sin();
            })
            .initial_value(vec![0.3, 0.7])
            .build()
            .unwrap();
        assert_eq!(p.drift_full(&[1.3, -2.1]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn drift_reports_non_finite_component() {
        let p = SdeProblem::builder("bad", 2, 1)
            .varphi(|x, out| {
                out[0] = x[0];
                out[1] = 1.0 / (x[1] - x[1]);
            })
            .build()
            .unwrap();
        match p.drift_full(&[1.0, 1.0]) {
            Err(Error::Evaluation { component, .. }) => assert_eq!(component, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(p.drift_full(&[f64::NAN, 0.0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn levy_products_of_builtins() {
        let p = builtin_problem(GINZBURG_LANDAU_UNSTABLE).unwrap();
        assert_eq!(p.levy_product_coefficient(&[1.0], 0, 0).unwrap(), vec![1.0]);
        let p = builtin_problem(GINZBURG_LANDAU_STABLE).unwrap();
        assert_eq!(p.levy_product_coefficient(&[1.0], 0, 0).unwrap(), vec![2.0]);
        assert!(p.levy_product_coefficient(&[1.0], 0, 1).is_err());
    }

    #[test]
    fn additive_noise_has_zero_levy_product() {
        let p = SdeProblem::builder("additive", 2, 2)
            .diffusion(|_, j, out| {
                out[0] = 0.5 + j as f64;
                out[1] = -1.0;
            })
            .build()
            .unwrap();
        for j1 in 0..2 {
            for j2 in 0..2 {
                assert_eq!(
                    p.levy_product_coefficient(&[3.0, -4.0], j1, j2).unwrap(),
                    vec![0.0, 0.0]
                );
            }
        }
    }

    #[test]
    fn finite_difference_matches_closed_form_on_builtins() {
        for name in BUILTIN_MODELS {
            let p = builtin_problem(name).unwrap();
            for i in 0..=100 {
                let x = -2.0 + 4.0 * i as f64 / 100.0;
                let exact = p.levy_product_coefficient(&[x], 0, 0).unwrap()[0];
                let fd = p.levy_product_finite_difference(&[x], 0, 0)[0];
                let scale = exact.abs().max(1e-12);
                assert!(
                    (exact - fd).abs() <= 1e-4 * scale.max(1.0),
                    "{name} x={x}: {exact} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn scalar_noise_is_trivially_commutative() {
        let p = builtin_problem(GINZBURG_LANDAU_UNSTABLE).unwrap();
        let r = p.check_commutativity(&[vec![0.3], vec![-5.0]], 0.0).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_violation, 0.0);
        assert!(p.is_commutative());
    }

    #[test]
    fn diagonal_noise_passes() {
        let p = diagonal([0.5, 1.0, 2.0]);
        let r = p
            .check_commutativity(
                &[vec![1.0, 2.0, 3.0], vec![-0.4, 0.0, 9.0]],
                FINITE_DIFFERENCE_COMMUTATIVITY_TOL,
            )
            .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(p.is_commutative());
    }

    #[test]
    fn constructed_example_fails() {
        let p = non_commutative();
        // L¹g₂ = (0, x_2), L²g₁ = (x_1, 0) → violation √5 at (1, 2)
        let l12 = p.levy_product_coefficient(&[1.0, 2.0], 0, 1).unwrap();
        let l21 = p.levy_product_coefficient(&[1.0, 2.0], 1, 0).unwrap();
        assert!((l12[0]).abs() < 1e-8 && (l12[1] - 2.0).abs() < 1e-8);
        assert!((l21[0] - 1.0).abs() < 1e-8 && (l21[1]).abs() < 1e-8);
        let r = p.check_commutativity(&[vec![1.0, 2.0]], 1e-8).unwrap();
        assert!(!r.passed);
        assert!((r.max_violation - 5f64.sqrt()).abs() < 1e-6);
        assert!(!p.is_commutative());
    }

    #[test]
    fn override_marks_commutative() {
        let p = SdeProblem::builder("forced", 2, 2)
            .diffusion(|x, j, out| {
                out[0] = if j == 0 { x[1] } else { 0.0 };
                out[1] = if j == 0 { 0.0 } else { x[0] };
            })
            .initial_value(vec![1.0, 2.0])
            .assume_commutative(true)
            .build()
            .unwrap();
        assert!(!p.commutativity().passed);
        assert!(p.is_commutative());
    }

    #[test]
    fn builtin_lookup() {
        let p = builtin_problem(GINZBURG_LANDAU_UNSTABLE).unwrap();
        assert_eq!(p.initial_value(), &[1.0]);
        assert_eq!(p.horizon(), 1.0);
        assert_eq!(p.phi(&[1.5]), vec![3.0]);
        assert_eq!(p.varphi(&[2.0]), vec![-32.0]);
        assert_eq!(p.diffusion_column(&[1.5], 0), vec![1.5]);

        let p = builtin_problem(GINZBURG_LANDAU_STABLE).unwrap();
        assert_eq!(p.horizon(), 5.0);
        assert_eq!(p.phi(&[1.5]), vec![-3.0]);
        assert_eq!(p.diffusion_column(&[1.0], 0), vec![std::f64::consts::SQRT_2]);

        match builtin_problem("unknown-model") {
            Err(Error::UnknownModel { valid, .. }) => assert_eq!(valid.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn builder_rejects_bad_parameters() {
        assert!(SdeProblem::builder("x", 0, 1).build().is_err());
        assert!(SdeProblem::builder("x", 1, 0).build().is_err());
        assert!(SdeProblem::builder("x", 1, 1).horizon(0.0).build().is_err());
        assert!(SdeProblem::builder("x", 2, 1).initial_value(vec![1.0]).build().is_err());
        assert!(builtin_problem(GINZBURG_LANDAU_STABLE)
            .unwrap()
            .with_horizon(-1.0)
            .is_err());
        assert!(SdeProblem::builder("x", 1, 1)
            .build()
            .unwrap()
            .check_commutativity(&[], 1.0)
            .is_err());
    }
}
