//! Distributed mini-batch subgradient descent on the primal, as a baseline.
//!
//! Round `t ≥ 1`: worker `k` averages `ℓ_i′(x_iᵀw) x_i` over `H` indices drawn
//! uniformly from its block, the driver averages over workers, adds `λw`
//! and steps with `η_t = 1/(λ(t+1))`. Each record pairs `P(w)` with the dual
//! point `α_i = −ℓ_i′(x_iᵀw)`.

use std::time::Instant;

use rand::Rng;

use super::{check_finite_w, header, ConvergenceLog, Executor, Resolved, RoundRecord, RunConfig, SimulatedCluster};
use crate::data::Partition;
use crate::error::{Error, Result};
use crate::objective::Problem;
use crate::rng::worker_rng;

/// Runs the baseline; `cfg.variant` must be [`super::Variant::MiniBatchSgd`].
pub fn minibatch_sgd_run(p: &Problem, part: &Partition, cfg: &RunConfig) -> Result<ConvergenceLog> {
    if cfg.variant != super::Variant::MiniBatchSgd {
        return Err(Error::config(format!("expected variant sgd, got {}", cfg.variant)));
    }
    SimulatedCluster::new(0).run(p, part, cfg)
}

/// `α_i = −ℓ_i′(x_iᵀw)`, a dual-feasible point attached to `w`.
pub(crate) fn dual_point(p: &Problem, w: &[f64]) -> Vec<f64> {
    let ds = &p.dataset;
    (0..ds.n())
        .map(|i| -p.loss.loss_subgradient(ds.column(i).dot(w), ds.label(i)))
        .collect()
}

fn record(p: &Problem, w: &[f64], t: usize, k: usize, start: Instant) -> Result<RoundRecord> {
    let primal = p.primal_value(w)?;
    let dual = p.dual_value(&dual_point(p, w))?;
    if !primal.is_finite() || !dual.is_finite() {
        return Err(Error::Diverged {
            round: t,
            message: format!("primal = {primal}, dual = {dual}"),
        });
    }
    Ok(RoundRecord {
        round: t,
        comm_vectors: 2 * k * t,
        dual,
        primal,
        gap: (primal - dual).max(0.0),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// `w ← w − η_t (Σ_k g_k / K + λw)` with `η_t = 1/(λ(t+1))`.
fn sgd_step(w: &mut [f64], grad_sum: &[f64], k: usize, lambda: f64, t: usize) {
    let eta = 1.0 / (lambda * (t + 1) as f64);
    let inv_k = 1.0 / k as f64;
    for (wj, g) in w.iter_mut().zip(grad_sum) {
        *wj -= eta * (g * inv_k + lambda * *wj);
    }
}

pub(crate) fn run_sgd(
    p: &Problem,
    part: &Partition,
    cfg: &RunConfig,
    resolved: Resolved,
    exec: &Executor<'_>,
) -> Result<ConvergenceLog> {
    let start = Instant::now();
    let header = header(p, part, cfg, &resolved)?;
    let ds = &p.dataset;
    let mut w = vec![0.0; p.d()];
    let mut records = vec![record(p, &w, 0, cfg.k, start)?];
    if records[0].gap <= cfg.gap_tol {
        return Ok(ConvergenceLog { header, records });
    }
    for t in 1..=cfg.max_rounds {
        let grads = {
            let w = &w;
            let steps = &resolved.local_steps;
            exec.map(cfg.k, |k| {
                let block = part.block(k);
                let h = steps[k];
                let mut rng = worker_rng(cfg.seed, t as u64, k as u64);
                let mut g = vec![0.0; ds.d()];
                for _ in 0..h {
                    let i = block[rng.random_range(0..block.len())];
                    let x = ds.column(i);
                    let s = p.loss.loss_subgradient(x.dot(w), ds.label(i));
                    if s != 0.0 {
                        x.axpy(s, &mut g);
                    }
                }
                let inv_h = 1.0 / h as f64;
                g.iter_mut().for_each(|v| *v *= inv_h);
                g
            })
        };
        let mut sum = vec![0.0; p.d()];
        for g in &grads {
            for (a, v) in sum.iter_mut().zip(g) {
                *a += v;
            }
        }
        sgd_step(&mut w, &sum, cfg.k, p.lambda, t);
        check_finite_w(&w, t)?;
        if t % cfg.gap_every == 0 || t == cfg.max_rounds {
            let rec = record(p, &w, t, cfg.k, start)?;
            let done = rec.gap <= cfg.gap_tol;
            records.push(rec);
            if done {
                break;
            }
        }
    }
    Ok(ConvergenceLog { header, records })
}
