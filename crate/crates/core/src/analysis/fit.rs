//! Least-squares power-law fit e_h = C h^r in log-log space.

use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub constant: f64,
    pub order: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
}

/// Ordinary least squares of log e against log h.
pub fn fit_power_law(stepsizes: &[f64], errors: &[f64]) -> Result<PowerLawFit> {
    if stepsizes.len() != errors.len() {
        return param(format!("{} stepsizes but {} errors", stepsizes.len(), errors.len()));
    }
    if stepsizes.len() < 2 {
        return param("power-law fit needs at least two points");
    }
    if let Some(bad) = stepsizes.iter().chain(errors).find(|v| !(**v > 0.0 && v.is_finite())) {
        return param(format!("power-law fit needs positive finite data, got {bad}"));
    }
    let xs: Vec<f64> = stepsizes.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return param("power-law fit needs at least two distinct stepsizes");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let order = sxy / sxx;
    let log_c = my - order * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (log_c + order * x);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(PowerLawFit {
        constant: log_c.exp(),
        order,
        residual,
    })
}
