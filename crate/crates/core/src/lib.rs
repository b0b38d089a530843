//! Explicit strong-approximation schemes for Itô SDEs with commutative noise
//! and a drift that splits into a globally Lipschitz part φ and a
//! superlinearly growing part ϕ.
//!
//! The centerpiece is the semi-tamed Milstein step
//!
//! ```text
//! Y_{n+1} = Y_n + φ(Y_n) h + ϕ(Y_n) h / (1 + h‖ϕ(Y_n)‖) + Σ_j g_j(Y_n) ΔW^j_n
//!         + ½ Σ_{j1,j2} L^{j1} g_{j2}(Y_n) (ΔW^{j1}_n ΔW^{j2}_n − δ_{j1 j2} h)
//! ```
//!
//! together with Euler–Maruyama, tamed Euler, semi-tamed Euler and tamed
//! Milstein baselines, coupled-grid Monte Carlo strong-error studies,
//! mean-square stability diagnostics, and a config-driven experiment CLI.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod model;
pub mod paths;
pub mod schemes;

pub use error::{Error, Result};
pub use model::{builtin_problem, SdeProblem};
pub use paths::{generate_paths, PathBundle};
pub use schemes::{integrate, SchemeKind, Trajectory};
