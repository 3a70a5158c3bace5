//! Independent dense oracles shared by the integration tests.
#![allow(dead_code)]

use cocoa::{Label, LossKind, LossModel, Partition, Problem, SparseDataset};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Dense column `i` of the data matrix.
pub fn dense_column(ds: &SparseDataset, i: usize) -> Vec<f64> {
    let mut x = vec![0.0; ds.d()];
    for (j, v) in ds.column(i).iter() {
        x[j] = v;
    }
    x
}

/// Gram matrix `A_[k]ᵀ A_[k]` of the given columns.
pub fn gram(ds: &SparseDataset, block: &[usize]) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = block.iter().map(|&i| dense_column(ds, i)).collect();
    cols.iter()
        .map(|a| cols.iter().map(|b| dot(a, b)).collect())
        .collect()
}

pub fn top_eigenvalue(ds: &SparseDataset, block: &[usize]) -> f64 {
    jacobi_eigenvalues(gram(ds, block)).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ℓ(m)` as a function of the margin `m = y·a`.
pub fn loss_of_margin(kind: LossKind, m: f64) -> f64 {
    match kind {
        LossKind::Hinge => (1.0 - m).max(0.0),
        LossKind::SmoothedHinge { mu } => {
            if m >= 1.0 {
                0.0
            } else if m <= 1.0 - mu {
                1.0 - m - mu / 2.0
            } else {
                (1.0 - m) * (1.0 - m) / (2.0 * mu)
            }
        }
        LossKind::Logistic => {
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        }
    }
}

/// `ℓ*(−α)` as a function of `β = α·y`; `+∞` outside `[0, 1]`.
pub fn conj_of_beta(kind: LossKind, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&b) {
        return f64::INFINITY;
    }
    let xlx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    match kind {
        LossKind::Hinge => -b,
        LossKind::SmoothedHinge { mu } => -b + mu / 2.0 * b * b,
        LossKind::Logistic => xlx(b) + xlx(1.0 - b),
    }
}

/// `d/dβ ℓ*(−α)`.
fn conj_slope(kind: LossKind, b: f64) -> f64 {
    match kind {
        LossKind::Hinge => -1.0,
        LossKind::SmoothedHinge { mu } => -1.0 + mu * b,
        LossKind::Logistic => b.ln() - (1.0 - b).ln(),
    }
}

/// Dense restatement of a problem.
pub struct Dense {
    pub cols: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub lambda: f64,
    pub kind: LossKind,
}

impl Dense {
    pub fn of(p: &Problem) -> Self {
        let ds = &p.dataset;
        Self {
            cols: (0..ds.n()).map(|i| dense_column(ds, i)).collect(),
            y: ds.labels().iter().map(|l| l.value()).collect(),
            lambda: p.lambda,
            kind: p.loss.kind,
        }
    }

    pub fn n(&self) -> usize {
        self.cols.len()
    }

    pub fn w_of(&self, alpha: &[f64]) -> Vec<f64> {
        let d = self.cols.first().map_or(0, Vec::len);
        let mut w = vec![0.0; d];
        let s = 1.0 / (self.lambda * self.n() as f64);
        for (x, a) in self.cols.iter().zip(alpha) {
            for (wj, xj) in w.iter_mut().zip(x) {
                *wj += s * a * xj;
            }
        }
        w
    }

    pub fn primal(&self, w: &[f64]) -> f64 {
        let n = self.n() as f64;
        let loss: f64 = self
            .cols
            .iter()
            .zip(&self.y)
            .map(|(x, y)| loss_of_margin(self.kind, y * dot(x, w)))
            .sum();
        loss / n + self.lambda / 2.0 * dot(w, w)
    }

    pub fn dual(&self, alpha: &[f64]) -> f64 {
        let n = self.n() as f64;
        let conj: f64 = alpha.iter().zip(&self.y).map(|(a, y)| conj_of_beta(self.kind, a * y)).sum();
        let w = self.w_of(alpha);
        -conj / n - self.lambda / 2.0 * dot(&w, &w)
    }

    /// Exact coordinate maximization of the dual over `α_i` by bisection on
    /// the derivative in `β`. A zero column moves to the minimizer of its
    /// conjugate.
    fn coordinate_step(&self, i: usize, alpha: &mut [f64], w: &mut [f64]) {
        let x = &self.cols[i];
        let r = dot(x, x);
        let n = self.n() as f64;
        let y = self.y[i];
        let b0 = alpha[i] * y;
        let m = y * dot(x, w);
        let q = r / (self.lambda * n);
        let slope = |b: f64| -conj_slope(self.kind, b) - m - q * (b - b0);
        let b = if slope(0.0) <= 0.0 {
            0.0
        } else if slope(1.0) >= 0.0 {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let delta = y * b - alpha[i];
        alpha[i] += delta;
        let s = delta / (self.lambda * n);
        for (wj, xj) in w.iter_mut().zip(x) {
            *wj += s * xj;
        }
    }
}

pub struct Optimum {
    pub alpha: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
}

impl Optimum {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

/// Brute-force dual optimum by cyclic exact coordinate ascent until the
/// duality gap is at most `tol` (or a sweep cap is reached).
pub fn brute_force_optimum(p: &Problem, tol: f64) -> Optimum {
    let dense = Dense::of(p);
    let n = dense.n();
    let mut alpha = vec![0.0; n];
    let mut w = dense.w_of(&alpha);
    for sweep in 0..200_000 {
        for i in 0..n {
            dense.coordinate_step(i, &mut alpha, &mut w);
        }
        if sweep % 10 == 9 {
            w = dense.w_of(&alpha);
            let gap = dense.primal(&w) - dense.dual(&alpha);
            if gap <= tol {
                break;
            }
        }
    }
    let w = dense.w_of(&alpha);
    Optimum {
        primal: dense.primal(&w),
        dual: dense.dual(&alpha),
        alpha,
    }
}

/// A random small problem: Gaussian entries with a few zeros, columns scaled
/// to norm at most one, random labels.
pub fn random_problem(rng: &mut impl Rng, n: usize, d: usize, loss: LossModel, lambda: f64) -> Problem {
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut x: Vec<f64> = (0..d)
                .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() * 2.0 - 1.0 })
                .collect();
            let norm = dot(&x, &x).sqrt();
            if norm > 0.0 {
                let s = rng.random_range(0.5..=1.0) / norm;
                x.iter_mut().for_each(|v| *v *= s);
            }
            x
        })
        .collect();
    let labels = (0..n)
        .map(|_| if rng.random::<bool>() { Label::Positive } else { Label::Negative })
        .collect();
    let ds = SparseDataset::from_dense_columns(d, &cols, labels).unwrap();
    Problem::new(ds, loss, lambda).unwrap()
}

/// A random dual-feasible point: `β_i` uniform on `[0, 1]`, with some
/// coordinates pinned to the domain's ends.
pub fn random_feasible_alpha(rng: &mut impl Rng, p: &Problem) -> Vec<f64> {
    p.dataset
        .labels()
        .iter()
        .map(|l| {
            let u = rng.random::<f64>();
            let b = if u < 0.1 {
                0.0
            } else if u < 0.2 {
                1.0
            } else {
                rng.random::<f64>()
            };
            l.value() * b
        })
        .collect()
}

pub fn all_losses() -> [LossModel; 3] {
    [LossModel::hinge(), LossModel::smoothed_hinge(1.0).unwrap(), LossModel::logistic()]
}

/// Block-restricted `A_[k] v` squared norm with a dense computation.
pub fn block_image_sq(ds: &SparseDataset, part: &Partition, k: usize, coeffs: &[f64]) -> f64 {
    let mut v = vec![0.0; ds.d()];
    for (&i, &c) in part.block(k).iter().zip(coeffs) {
        for (vj, xj) in v.iter_mut().zip(dense_column(ds, i)) {
            *vj += c * xj;
        }
    }
    dot(&v, &v)
}
