//! The per-worker local subproblem and the data-dependent constants that
//! control it.
//!
//! For worker `k` holding the coordinates `P_k`, shared primal vector `w` and
//! current dual block `α_[k]`:
//!
//! ```text
//! G_k(Δα) = −(1/n) Σ_{i∈P_k} ℓ_i*(−α_i − Δα_i) − (1/K)(λ/2)‖w‖²
//!           − (1/n) wᵀ A Δα − (λ/2) σ′ ‖A Δα / (λn)‖²
//! ```
//!
//! Block vectors (`α_[k]`, `Δα_[k]`) are represented as slices aligned with
//! [`Partition::block`], i.e. entry `j` belongs to datapoint `block(k)[j]`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Partition, SparseDataset};
use crate::error::{Error, Result};
use crate::objective::Problem;
use crate::rng::aux_rng;

/// Default relative tolerance of the spectral power iteration.
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-9;
/// Iteration cap of the spectral power iteration.
pub const MAX_POWER_ITERATIONS: usize = 10_000;

const RESTART_SEED: u64 = 0x5eed_5eed;

/// Inputs of worker `k`'s subproblem for one round.
#[derive(Clone, Copy, Debug)]
pub struct SubproblemContext<'a> {
    pub k: usize,
    /// Shared primal vector at round start.
    pub w: &'a [f64],
    /// `α_[k]`, aligned with `P_k`.
    pub alpha_block: &'a [f64],
    pub sigma_prime: f64,
    pub gamma: f64,
}

impl<'a> SubproblemContext<'a> {
    pub fn new(
        part: &Partition,
        k: usize,
        w: &'a [f64],
        alpha_block: &'a [f64],
        sigma_prime: f64,
        gamma: f64,
    ) -> Result<Self> {
        if k >= part.k() {
            return Err(Error::dimension(format!("worker {k} out of range for K = {}", part.k())));
        }
        if alpha_block.len() != part.block(k).len() {
            return Err(Error::dimension(format!(
                "alpha block has length {} but n_k = {}",
                alpha_block.len(),
                part.block(k).len()
            )));
        }
        validate_sigma_gamma(sigma_prime, gamma)?;
        Ok(Self {
            k,
            w,
            alpha_block,
            sigma_prime,
            gamma,
        })
    }
}

pub(crate) fn validate_sigma_gamma(sigma_prime: f64, gamma: f64) -> Result<()> {
    if !(sigma_prime.is_finite() && sigma_prime > 0.0) {
        return Err(Error::config(format!("sigma' must be positive and finite, got {sigma_prime}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// `G_k^{σ′}(Δα_[k]; w, α_[k])`, evaluated from scratch. `−∞` when any
/// conjugate term is infinite.
pub fn subproblem_value(
    p: &Problem,
    part: &Partition,
    ctx: &SubproblemContext<'_>,
    delta_block: &[f64],
) -> Result<f64> {
    let block = part.block(ctx.k);
    if delta_block.len() != block.len() || ctx.alpha_block.len() != block.len() {
        return Err(Error::dimension(format!(
            "block vectors must have length n_k = {}",
            block.len()
        )));
    }
    if ctx.w.len() != p.d() {
        return Err(Error::dimension("shared w has wrong length"));
    }
    let ds = &p.dataset;
    let n = p.n() as f64;
    let lambda = p.lambda;

    let conj = p.summation.sum(
        block
            .iter()
            .zip(ctx.alpha_block)
            .zip(delta_block)
            .map(|((&i, &a), &da)| p.loss.conjugate_at_beta((a + da) * ds.label(i).value())),
    );
    let w_sq = p.summation.sum(ctx.w.iter().map(|v| v * v));
    let a_delta = ds.mul_subset(block, delta_block);
    let cross = p.summation.sum(a_delta.iter().zip(ctx.w).map(|(a, b)| a * b));
    let quad = p.summation.sum(a_delta.iter().map(|v| v * v)) / (lambda * n * lambda * n);

    Ok(-conj / n - 0.5 * lambda * w_sq / part.k() as f64 - cross / n - 0.5 * lambda * ctx.sigma_prime * quad)
}

/// The safe subproblem parameter `σ′ = γK`.
pub fn safe_sigma_prime(gamma: f64, k: usize) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if k == 0 {
        return Err(Error::config("K must be at least 1"));
    }
    Ok(gamma * k as f64)
}

/// Largest eigenvalue of `G` given as a matrix-vector product, by power
/// iteration from `start`. Stops when the eigen-residual `‖Gv − θv‖` drops to
/// `tol·θ`.
fn power_iteration(apply: impl Fn(&[f64]) -> Vec<f64>, start: Vec<f64>, tol: f64) -> f64 {
    let mut v = start;
    let nv = norm(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut theta = 0.0;
    for _ in 0..MAX_POWER_ITERATIONS {
        let y = apply(&v);
        theta = dot(&v, &y);
        let ny = norm(&y);
        if ny == 0.0 || theta <= 0.0 {
            return theta.max(0.0);
        }
        let residual = y
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - theta * b) * (a - theta * b))
            .sum::<f64>()
            .sqrt();
        v = y.into_iter().map(|x| x / ny).collect();
        if residual <= tol * theta {
            break;
        }
    }
    theta
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `σ_k = max ‖A α_[k]‖² / ‖α_[k]‖²`, the top eigenvalue of `A_kᵀ A_k`.
///
/// Power iteration from the normalized all-ones vector plus one fixed-seed
/// random restart; the larger estimate is returned. Empty blocks give `0`.
pub fn sigma_k(ds: &SparseDataset, part: &Partition, k: usize, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::config(format!("tolerance must be positive, got {tol}")));
    }
    if k >= part.k() {
        return Err(Error::dimension(format!("worker {k} out of range for K = {}", part.k())));
    }
    Ok(block_top_eigenvalue(ds, part.block(k), tol, k as u64))
}

pub(crate) fn block_top_eigenvalue(ds: &SparseDataset, block: &[usize], tol: f64, tag: u64) -> f64 {
    if block.is_empty() {
        return 0.0;
    }
    let gram = |v: &[f64]| {
        let av = ds.mul_subset(block, v);
        block.iter().map(|&i| ds.column(i).dot(&av)).collect::<Vec<f64>>()
    };
    let from_ones = power_iteration(gram, vec![1.0; block.len()], tol);
    let mut rng = aux_rng(RESTART_SEED, tag);
    let random_start: Vec<f64> = (0..block.len()).map(|_| rng.sample(StandardNormal)).collect();
    let from_random = power_iteration(gram, random_start, tol);
    from_ones.max(from_random)
}

/// The spectral constants of a partitioned dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstants {
    /// `σ_k` for each block.
    pub sigma_k: Vec<f64>,
    /// `n_k` for each block.
    pub sizes: Vec<usize>,
    /// `σ = Σ_k σ_k n_k`.
    pub sigma: f64,
    /// `max_k σ_k`.
    pub sigma_max: f64,
    /// `n² / (K σ)`, how loose the worst-case bound `σ ≤ n²/K` is.
    pub ratio: f64,
}

pub fn sigma_aggregate(ds: &SparseDataset, part: &Partition, tol: f64) -> Result<SpectralConstants> {
    let sigma_k = (0..part.k())
        .map(|k| sigma_k(ds, part, k, tol))
        .collect::<Result<Vec<_>>>()?;
    let sizes = part.sizes();
    let sigma: f64 = sigma_k.iter().zip(&sizes).map(|(s, &nk)| s * nk as f64).sum();
    let sigma_max = sigma_k.iter().copied().fold(0.0, f64::max);
    let n = part.n() as f64;
    let ratio = n * n / (part.k() as f64 * sigma);
    Ok(SpectralConstants {
        sigma_k,
        sizes,
        sigma,
        sigma_max,
        ratio,
    })
}

/// Ratio `‖Aα‖² / Σ_k ‖Aα_[k]‖²` and its gradient in `α`.
struct CouplingRatio<'a> {
    ds: &'a SparseDataset,
    part: &'a Partition,
}

impl CouplingRatio<'_> {
    fn block_images(&self, alpha: &[f64]) -> Vec<Vec<f64>> {
        (0..self.part.k())
            .map(|k| {
                let block = self.part.block(k);
                let coeffs: Vec<f64> = block.iter().map(|&i| alpha[i]).collect();
                self.ds.mul_subset(block, &coeffs)
            })
            .collect()
    }

    /// Returns `(ratio, gradient)`, or `None` when every block image vanishes.
    fn eval(&self, alpha: &[f64], with_grad: bool) -> Option<(f64, Vec<f64>)> {
        let images = self.block_images(alpha);
        let mut full = vec![0.0; self.ds.d()];
        for img in &images {
            full.iter_mut().zip(img).for_each(|(f, x)| *f += x);
        }
        let num = dot(&full, &full);
        let den: f64 = images.iter().map(|img| dot(img, img)).sum();
        if den <= 0.0 {
            return None;
        }
        let ratio = num / den;
        if !with_grad {
            return Some((ratio, Vec::new()));
        }
        let mut grad = vec![0.0; alpha.len()];
        for (k, img) in images.iter().enumerate() {
            for &i in self.part.block(k) {
                let col = self.ds.column(i);
                grad[i] = 2.0 * (col.dot(&full) - ratio * col.dot(img)) / den;
            }
        }
        Some((ratio, grad))
    }
}

/// Sampled lower bound on `σ′_min = γ max_α ‖Aα‖² / Σ_k ‖Aα_[k]‖²`.
///
/// Each trial starts from a seeded Gaussian direction and improves it by
/// normalized gradient ascent with backtracking; the best ratio over all
/// trials is returned (times `γ`). Trial `j` does not depend on the total
/// number of trials, so the result is nondecreasing in `trials`. This is a
/// lower bound only; the exact value is a generalized eigenproblem.
pub fn sigma_prime_min_lower_bound(
    ds: &SparseDataset,
    part: &Partition,
    gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::config("need at least one trial"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    const ASCENT_STEPS: usize = 100;
    let f = CouplingRatio { ds, part };
    let mut best: Option<f64> = None;
    for trial in 0..trials {
        let mut rng = aux_rng(seed, trial as u64);
        let mut alpha: Vec<f64> = (0..ds.n()).map(|_| rng.sample(StandardNormal)).collect();
        let Some((mut ratio, mut grad)) = f.eval(&alpha, true) else {
            continue;
        };
        let mut step = 0.5;
        for _ in 0..ASCENT_STEPS {
            let gnorm = norm(&grad);
            if gnorm == 0.0 || step < 1e-12 {
                break;
            }
            let anorm = norm(&alpha);
            let candidate: Vec<f64> = alpha
                .iter()
                .zip(&grad)
                .map(|(a, g)| a + step * anorm * g / gnorm)
                .collect();
            match f.eval(&candidate, true) {
                Some((r, g)) if r > ratio => {
                    alpha = candidate;
                    ratio = r;
                    grad = g;
                    step = (step * 1.5).min(1.0);
                }
                _ => step *= 0.5,
            }
        }
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    Ok(gamma * best.unwrap_or(1.0))
}
