//! Randomized local dual coordinate ascent on a worker's subproblem, and the
//! inner-iteration counts that make it a `Θ`-approximate solver.
//!
//! One coordinate step maximizes, over `δ`,
//!
//! ```text
//! −ℓ_i*(−(α_i + δ)) − δ x_iᵀ u − (q/2) δ²,     q = σ′ ‖x_i‖² / (λ n)
//! ```
//!
//! where `u = w + (σ′/(λn)) A Δα_[k]` is the worker's running local primal
//! image. Writing `β = (α_i + δ)·y_i` the problem is one-dimensional on
//! `β ∈ [0, 1]` and has a closed form for the hinge losses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Partition, SparseVector};
use crate::error::{Error, Result};
use crate::losses::{Label, LossKind, LossModel};
use crate::objective::Problem;
use crate::subproblem::{subproblem_value, SubproblemContext};

/// Interior of the logistic conjugate's domain used by the Newton step.
const LOGISTIC_EDGE: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// Result of one worker's local solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalUpdate {
    /// `Δα_[k]`, aligned with `P_k`.
    pub delta_alpha_block: Vec<f64>,
    /// `Δw_k = A Δα_[k] / (λn)`, accumulated step by step.
    pub delta_w: Vec<f64>,
    /// Number of coordinate steps `H` performed.
    pub coordinate_steps: usize,
}

/// Maximizer `β*` of the one-dimensional coordinate problem in `β = α·y`.
///
/// `beta_now` is the current `(α_i + Δα_i)·y_i`, `margin` is `x_iᵀ u` and
/// `q = σ′‖x_i‖²/(λn) > 0`.
pub fn coordinate_target_beta(loss: &LossModel, y: Label, beta_now: f64, margin: f64, q: f64) -> f64 {
    let ym = y.value() * margin;
    match loss.kind {
        LossKind::Hinge => (beta_now + (1.0 - ym) / q).clamp(0.0, 1.0),
        LossKind::SmoothedHinge { mu } => ((1.0 - ym + q * beta_now) / (q + mu)).clamp(0.0, 1.0),
        LossKind::Logistic => logistic_newton(beta_now, ym, q),
    }
}

/// Safeguarded Newton on `φ′(β) = ln((1−β)/β) − y·m − q(β − β_now)`, which
/// is strictly decreasing on `(0, 1)`.
fn logistic_newton(beta_now: f64, ym: f64, q: f64) -> f64 {
    let dphi = |b: f64| (1.0 - b).ln() - b.ln() - ym - q * (b - beta_now);
    let mut lo = LOGISTIC_EDGE;
    let mut hi = 1.0 - LOGISTIC_EDGE;
    if dphi(lo) <= 0.0 {
        return lo;
    }
    if dphi(hi) >= 0.0 {
        return hi;
    }
    let mut beta = beta_now.clamp(lo, hi);
    for _ in 0..NEWTON_MAX_ITER {
        let f = dphi(beta);
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let curvature = -1.0 / (beta * (1.0 - beta)) - q;
        let newton = beta - f / curvature;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let done = (next - beta).abs() <= NEWTON_TOL;
        beta = next;
        if done {
            break;
        }
    }
    beta
}

/// Exact maximizer `δ` of the coordinate problem for datapoint `x_i`.
///
/// `alpha_i` is the coordinate's current value (including any local
/// progress). Zero columns give `δ = 0`.
#[allow(clippy::too_many_arguments)]
pub fn coordinate_delta(
    loss: &LossModel,
    x_i: &SparseVector,
    y_i: Label,
    alpha_i: f64,
    u_local: &[f64],
    sigma_prime: f64,
    lambda: f64,
    n: usize,
) -> f64 {
    let r = x_i.norm_sq();
    if r == 0.0 {
        return 0.0;
    }
    let q = sigma_prime * r / (lambda * n as f64);
    let y = y_i.value();
    let beta = coordinate_target_beta(loss, y_i, alpha_i * y, x_i.dot(u_local), q);
    y * beta - alpha_i
}

/// LocalSDCA: `h` coordinate steps on worker `ctx.k`'s subproblem, sampling
/// `i ∈ P_k` uniformly with replacement.
pub fn local_sdca<R: Rng + ?Sized>(
    p: &Problem,
    part: &Partition,
    ctx: &SubproblemContext<'_>,
    h: usize,
    rng: &mut R,
) -> Result<LocalUpdate> {
    local_sdca_traced(p, part, ctx, h, rng, |_| {})
}

/// As [`local_sdca`], calling `on_step` with the current `Δα_[k]` after
/// every coordinate step.
pub fn local_sdca_traced<R: Rng + ?Sized>(
    p: &Problem,
    part: &Partition,
    ctx: &SubproblemContext<'_>,
    h: usize,
    rng: &mut R,
    mut on_step: impl FnMut(&[f64]),
) -> Result<LocalUpdate> {
    let block = part.block(ctx.k);
    if ctx.alpha_block.len() != block.len() {
        return Err(Error::dimension("alpha block does not match the partition"));
    }
    if ctx.w.len() != p.d() {
        return Err(Error::dimension("shared w has wrong length"));
    }
    let ds = &p.dataset;
    let lambda_n = p.lambda * p.n() as f64;
    let u_scale = ctx.sigma_prime / lambda_n;
    let w_scale = 1.0 / lambda_n;

    let mut delta = vec![0.0; block.len()];
    let mut u = ctx.w.to_vec();
    let mut delta_w = vec![0.0; p.d()];
    for _ in 0..h {
        let j = rng.random_range(0..block.len());
        let i = block[j];
        let r = ds.sq_norm(i);
        if r != 0.0 {
            let x = ds.column(i);
            let y = ds.label(i).value();
            let start = ctx.alpha_block[j];
            let beta_now = (start + delta[j]) * y;
            let q = ctx.sigma_prime * r / lambda_n;
            let beta = coordinate_target_beta(&p.loss, ds.label(i), beta_now, x.dot(&u), q);
            // Re-deriving the block delta from the round-start value keeps
            // α_i + Δα_i inside the conjugate domain bit-exactly.
            let updated = y * beta - start;
            let step = updated - delta[j];
            if step != 0.0 {
                delta[j] = updated;
                x.axpy(step * u_scale, &mut u);
                x.axpy(step * w_scale, &mut delta_w);
            }
        }
        on_step(&delta);
    }
    Ok(LocalUpdate {
        delta_alpha_block: delta,
        delta_w,
        coordinate_steps: h,
    })
}

/// Inner steps sufficient for `Θ`-approximation with `(1/μ)`-smooth losses:
/// `⌈ n_k (σ′ r_max + λnμ)/(λnμ) · ln(1/Θ) ⌉`.
#[allow(clippy::too_many_arguments)]
pub fn required_h_smooth(
    n_k: usize,
    sigma_prime: f64,
    r_max: f64,
    lambda: f64,
    n: usize,
    mu: f64,
    theta: f64,
) -> Result<usize> {
    check_theta(theta)?;
    if !(sigma_prime > 0.0 && r_max >= 0.0 && lambda > 0.0 && mu > 0.0) || n == 0 {
        return Err(Error::config("required_h_smooth needs positive inputs"));
    }
    let lnm = lambda * n as f64 * mu;
    let bound = n_k as f64 * (sigma_prime * r_max + lnm) / lnm * (1.0 / theta).ln();
    Ok(ceil_count(bound))
}

/// Inner steps sufficient for `Θ`-approximation with `L`-Lipschitz losses,
/// given the local optimum's `‖Δα*_[k]‖²` and its subproblem gain
/// `G_k(Δα*) − G_k(0)`:
/// `⌈ n_k ((1−Θ)/Θ + σ′ r_max/(2Θλn²) · ‖Δα*‖² / gain) ⌉`.
#[allow(clippy::too_many_arguments)]
pub fn required_h_lipschitz(
    n_k: usize,
    sigma_prime: f64,
    r_max: f64,
    lambda: f64,
    n: usize,
    theta: f64,
    delta_star_norm_sq: f64,
    subproblem_gap: f64,
) -> Result<usize> {
    check_theta(theta)?;
    if !(subproblem_gap > 0.0) {
        return Err(Error::config(format!(
            "subproblem gain must be positive, got {subproblem_gap}"
        )));
    }
    if !(sigma_prime > 0.0 && r_max >= 0.0 && lambda > 0.0 && delta_star_norm_sq >= 0.0) || n == 0 {
        return Err(Error::config("required_h_lipschitz needs positive inputs"));
    }
    let n = n as f64;
    let second = sigma_prime * r_max / (2.0 * theta * lambda * n * n) * delta_star_norm_sq / subproblem_gap;
    Ok(ceil_count(n_k as f64 * ((1.0 - theta) / theta + second)))
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::config(format!("theta must lie in (0, 1), got {theta}")));
    }
    Ok(())
}

/// Ceiling that ignores relative roundoff below `1e−12`, so that bounds
/// landing on an integer are not bumped up by one.
fn ceil_count(x: f64) -> usize {
    let c = x.ceil();
    if c - x > 1.0 - 1e-12 * x.abs().max(1.0) {
        x.floor() as usize
    } else {
        c as usize
    }
}

/// Empirical local approximation quality
/// `(G_k(Δα*) − G_k(Δα)) / (G_k(Δα*) − G_k(0))`, clamped to `[0, 1]`.
///
/// `reference_opt_value` must be a near-optimal value of the subproblem.
/// Returns `0` when the subproblem is already solved at `Δα = 0`.
pub fn measure_theta(
    p: &Problem,
    part: &Partition,
    ctx: &SubproblemContext<'_>,
    update: &LocalUpdate,
    reference_opt_value: f64,
) -> Result<f64> {
    let at_zero = subproblem_value(p, part, ctx, &vec![0.0; ctx.alpha_block.len()])?;
    let at_update = subproblem_value(p, part, ctx, &update.delta_alpha_block)?;
    let denom = reference_opt_value - at_zero;
    if denom <= 1e-15 {
        return Ok(0.0);
    }
    Ok(((reference_opt_value - at_update) / denom).clamp(0.0, 1.0))
}
