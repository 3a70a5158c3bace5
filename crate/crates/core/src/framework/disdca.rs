//! DisDCA-p written in its own bookkeeping: each worker scales its local
//! primal image by `1/(λ n_k)` and its coordinate penalty by `K/(λn)`, on a
//! partition with `n_k = n/K`. Kept separate from LocalSDCA so that the two
//! can be compared trajectory by trajectory.

use rand::Rng;

use crate::data::Partition;
use crate::error::{Error, Result};
use crate::local_solver::{coordinate_target_beta, LocalUpdate};
use crate::objective::{DualState, Problem};
use crate::rng::worker_rng;

fn check_balanced(part: &Partition) -> Result<()> {
    if !part.is_equal_split() {
        return Err(Error::Precondition(format!(
            "DisDCA-p needs a balanced partition, got block sizes {:?}",
            part.sizes()
        )));
    }
    Ok(())
}

/// One worker's `h` DisDCA-p coordinate steps from the shared `w`.
pub fn disdca_p_worker<R: Rng + ?Sized>(
    p: &Problem,
    part: &Partition,
    k: usize,
    w: &[f64],
    alpha_block: &[f64],
    h: usize,
    rng: &mut R,
) -> Result<LocalUpdate> {
    check_balanced(part)?;
    let block = part.block(k);
    if alpha_block.len() != block.len() || w.len() != p.d() {
        return Err(Error::dimension("DisDCA-p worker inputs do not match the problem"));
    }
    let ds = &p.dataset;
    let n_k = block.len() as f64;
    let local_scale = 1.0 / (p.lambda * n_k);
    let w_scale = 1.0 / (p.lambda * p.n() as f64);

    let mut delta = vec![0.0; block.len()];
    let mut u = w.to_vec();
    let mut delta_w = vec![0.0; p.d()];
    for _ in 0..h {
        let j = rng.random_range(0..block.len());
        let i = block[j];
        let r = ds.sq_norm(i);
        if r == 0.0 {
            continue;
        }
        let x = ds.column(i);
        let y = ds.label(i).value();
        let q = r / (p.lambda * n_k);
        let beta = coordinate_target_beta(&p.loss, ds.label(i), (alpha_block[j] + delta[j]) * y, x.dot(&u), q);
        let updated = y * beta - alpha_block[j];
        let step = updated - delta[j];
        if step != 0.0 {
            delta[j] = updated;
            x.axpy(step * local_scale, &mut u);
            x.axpy(step * w_scale, &mut delta_w);
        }
    }
    Ok(LocalUpdate {
        delta_alpha_block: delta,
        delta_w,
        coordinate_steps: h,
    })
}

/// One synchronous DisDCA-p round: every worker runs `h` steps with stream
/// `(seed, round, k)`, then `α += Δα` and `w += Σ_k Δw_k`.
pub fn disdca_p_round(
    p: &Problem,
    part: &Partition,
    state: &mut DualState,
    h: usize,
    seed: u64,
    round: u64,
) -> Result<()> {
    check_balanced(part)?;
    let mut updates = Vec::with_capacity(part.k());
    for k in 0..part.k() {
        let alpha_block = part.gather(k, &state.alpha);
        let mut rng = worker_rng(seed, round, k as u64);
        updates.push(disdca_p_worker(p, part, k, &state.w, &alpha_block, h, &mut rng)?);
    }
    let mut sum_w = vec![0.0; p.d()];
    for (k, up) in updates.iter().enumerate() {
        for (&i, &d) in part.block(k).iter().zip(&up.delta_alpha_block) {
            state.alpha[i] += d;
        }
        for (s, v) in sum_w.iter_mut().zip(&up.delta_w) {
            *s += v;
        }
    }
    for (wj, s) in state.w.iter_mut().zip(&sum_w) {
        *wj += s;
    }
    Ok(())
}
