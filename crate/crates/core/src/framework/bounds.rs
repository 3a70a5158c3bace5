//! Outer-round counts sufficient for a target accuracy.
//!
//! Lipschitz losses, with `c = 4L²σσ′/(λn²)` and `ρ = γ(1−Θ)`:
//!
//! ```text
//! t_0 = max(0, ⌈ (1/ρ) ln(2λn² (D(α*) − D(0)) / (4L²σσ′)) ⌉)
//! T_0 = t_0 + ( (2/ρ) (2c/ε_G − 1) )₊
//! T   = T_0 + max(⌈1/ρ⌉, c/(ε_G ρ))
//! ```
//!
//! `(1/μ)`-smooth losses, with `f = (1/ρ)(λμn + σ_max σ′)/(λμn)`:
//! `T_dual = f ln(1/ε_D)` and `T_gap = f ln(f/ε_G)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRounds {
    /// `T`, rounds after which the averaged iterate has expected gap `≤ ε_G`.
    pub t: f64,
    /// `T_0`, the start of the averaging window.
    pub t0_window: f64,
    /// `t_0`, the end of the linear-rate phase.
    pub t0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothRounds {
    /// Rounds for expected dual suboptimality `≤ ε`.
    pub t_dual: f64,
    /// Rounds for expected duality gap `≤ ε`.
    pub t_gap: f64,
}

fn check_common(gamma: f64, theta: f64, lambda: f64, n: usize) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::config(format!("theta must lie in [0, 1), got {theta}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) || n == 0 {
        return Err(Error::config("lambda and n must be positive"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn theoretical_rounds_lipschitz(
    l: f64,
    sigma: f64,
    sigma_prime: f64,
    lambda: f64,
    n: usize,
    gamma: f64,
    theta: f64,
    eps_gap: f64,
    dual_gap_at_zero: f64,
) -> Result<LipschitzRounds> {
    check_common(gamma, theta, lambda, n)?;
    if !(eps_gap > 0.0) {
        return Err(Error::config(format!("target gap must be positive, got {eps_gap}")));
    }
    if !(l > 0.0 && sigma > 0.0 && sigma_prime > 0.0) {
        return Err(Error::config("L, sigma and sigma' must be positive"));
    }
    if !(dual_gap_at_zero >= 0.0) {
        return Err(Error::config("D(α*) − D(0) must be nonnegative"));
    }
    let n = n as f64;
    let rho = gamma * (1.0 - theta);
    let c = 4.0 * l * l * sigma * sigma_prime / (lambda * n * n);
    let log_arg = 2.0 * lambda * n * n * dual_gap_at_zero / (4.0 * l * l * sigma * sigma_prime);
    let t0 = (log_arg.ln() / rho).ceil().max(0.0);
    let t0_window = t0 + (2.0 / rho * (2.0 * c / eps_gap - 1.0)).max(0.0);
    let t = t0_window + (1.0 / rho).ceil().max(c / (eps_gap * rho));
    Ok(LipschitzRounds { t, t0_window, t0 })
}

#[allow(clippy::too_many_arguments)]
pub fn theoretical_rounds_smooth(
    mu: f64,
    lambda: f64,
    n: usize,
    sigma_max: f64,
    sigma_prime: f64,
    gamma: f64,
    theta: f64,
    eps: f64,
) -> Result<SmoothRounds> {
    check_common(gamma, theta, lambda, n)?;
    if !(eps > 0.0) {
        return Err(Error::config(format!("target accuracy must be positive, got {eps}")));
    }
    if !(mu > 0.0 && sigma_max >= 0.0 && sigma_prime > 0.0) {
        return Err(Error::config("mu and sigma' must be positive, sigma_max nonnegative"));
    }
    let lmn = lambda * mu * n as f64;
    let f = (lmn + sigma_max * sigma_prime) / lmn / (gamma * (1.0 - theta));
    Ok(SmoothRounds {
        t_dual: f * (1.0 / eps).ln(),
        t_gap: f * (f / eps).ln(),
    })
}
