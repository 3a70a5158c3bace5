//! Primal and dual objectives, the primal-dual map and the duality gap.
//!
//! ```text
//! P(w) = (1/n) Σ_i ℓ_i(x_iᵀ w) + (λ/2) ‖w‖²
//! D(α) = −(1/n) Σ_i ℓ_i*(−α_i) − (λ/2) ‖A α / (λ n)‖²
//! w(α) = A α / (λ n)
//! G(α) = P(w(α)) − D(α) ≥ 0
//! ```

use serde::{Deserialize, Serialize};

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::losses::LossModel;

/// How long sums over datapoints are accumulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Summation {
    /// Plain left-to-right summation.
    #[default]
    Naive,
    /// Neumaier-compensated summation.
    Compensated,
}

impl Summation {
    pub fn sum<I: IntoIterator<Item = f64>>(self, terms: I) -> f64 {
        match self {
            Summation::Naive => terms.into_iter().sum(),
            Summation::Compensated => {
                let mut acc = 0.0f64;
                let mut comp = 0.0f64;
                for x in terms {
                    let t = acc + x;
                    if acc.abs() >= x.abs() {
                        comp += (acc - t) + x;
                    } else {
                        comp += (x - t) + acc;
                    }
                    acc = t;
                }
                acc + comp
            }
        }
    }
}

/// A regularized empirical loss minimization instance.
#[derive(Clone, Debug)]
pub struct Problem {
    pub dataset: SparseDataset,
    pub loss: LossModel,
    pub lambda: f64,
    pub summation: Summation,
}

impl Problem {
    pub fn new(dataset: SparseDataset, loss: LossModel, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::config(format!("lambda must be positive and finite, got {lambda}")));
        }
        Ok(Self {
            dataset,
            loss,
            lambda,
            summation: Summation::Naive,
        })
    }

    pub fn with_summation(mut self, summation: Summation) -> Self {
        self.summation = summation;
        self
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn d(&self) -> usize {
        self.dataset.d()
    }

    /// `1/(λn)`, the scale of the primal-dual map.
    pub fn map_scale(&self) -> f64 {
        1.0 / (self.lambda * self.n() as f64)
    }

    fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.n() {
            return Err(Error::dimension(format!(
                "dual vector has length {} but n = {}",
                alpha.len(),
                self.n()
            )));
        }
        Ok(())
    }

    fn check_w(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.d() {
            return Err(Error::dimension(format!(
                "primal vector has length {} but d = {}",
                w.len(),
                self.d()
            )));
        }
        Ok(())
    }

    /// `w(α) = A α / (λn)`, computed from scratch.
    pub fn primal_from_dual(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.check_alpha(alpha)?;
        let scale = self.map_scale();
        let mut w = self.dataset.mul(alpha)?;
        w.iter_mut().for_each(|v| *v *= scale);
        Ok(w)
    }

    /// `P(w)`.
    pub fn primal_value(&self, w: &[f64]) -> Result<f64> {
        self.check_w(w)?;
        let ds = &self.dataset;
        let mut losses = Vec::with_capacity(ds.n());
        for i in 0..ds.n() {
            losses.push(self.loss.loss_value(ds.column(i).dot(w), ds.label(i))?);
        }
        let n = ds.n() as f64;
        Ok(self.summation.sum(losses) / n + 0.5 * self.lambda * self.sq_norm(w))
    }

    /// `−(1/n) Σ ℓ_i*(−α_i)`; `−∞` if any `α_i` is dual infeasible.
    pub fn dual_loss_term(&self, alpha: &[f64]) -> f64 {
        let ds = &self.dataset;
        let terms = alpha
            .iter()
            .enumerate()
            .map(|(i, &a)| self.loss.conjugate_at_beta(a * ds.label(i).value()));
        -self.summation.sum(terms) / ds.n() as f64
    }

    /// `D(α)`; `−∞` for dual-infeasible `α`.
    pub fn dual_value(&self, alpha: &[f64]) -> Result<f64> {
        let w = self.primal_from_dual(alpha)?;
        Ok(self.dual_value_with_w(alpha, &w))
    }

    /// `D(α)` using a caller-supplied `w = w(α)`.
    pub fn dual_value_with_w(&self, alpha: &[f64], w: &[f64]) -> f64 {
        self.dual_loss_term(alpha) - 0.5 * self.lambda * self.sq_norm(w)
    }

    /// Raw `P(w(α)) − D(α)`, `+∞` if `α` is infeasible. May be slightly
    /// negative from roundoff; reports clamp it with [`Certificate::reported_gap`].
    pub fn duality_gap(&self, alpha: &[f64]) -> Result<f64> {
        Ok(self.certificate(alpha)?.gap)
    }

    /// Primal value, dual value and gap for `α` in one pass.
    pub fn certificate(&self, alpha: &[f64]) -> Result<Certificate> {
        let w = self.primal_from_dual(alpha)?;
        self.certificate_with_w(alpha, &w)
    }

    /// As [`Problem::certificate`] with a caller-maintained `w = w(α)`.
    pub fn certificate_with_w(&self, alpha: &[f64], w: &[f64]) -> Result<Certificate> {
        self.check_alpha(alpha)?;
        let primal = self.primal_value(w)?;
        let dual = self.dual_value_with_w(alpha, w);
        Ok(Certificate {
            primal,
            dual,
            gap: primal - dual,
        })
    }

    fn sq_norm(&self, v: &[f64]) -> f64 {
        self.summation.sum(v.iter().map(|x| x * x))
    }
}

/// A primal-dual pair of objective values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Certificate {
    pub fn is_feasible(&self) -> bool {
        self.dual.is_finite()
    }

    /// `max(gap, 0)`.
    pub fn reported_gap(&self) -> f64 {
        self.gap.max(0.0)
    }
}

/// Dual iterate `α` together with the cached primal image `w = w(α)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
}

impl DualState {
    /// `α = 0`, `w = 0`.
    pub fn zeros(p: &Problem) -> Self {
        Self {
            alpha: vec![0.0; p.n()],
            w: vec![0.0; p.d()],
        }
    }

    /// `‖w − w(α)‖_∞ / (1 + ‖w‖_∞)`; the cache is consistent when this is ≤ 1e−8.
    pub fn consistency_error(&self, p: &Problem) -> Result<f64> {
        let fresh = p.primal_from_dual(&self.alpha)?;
        let diff = fresh
            .iter()
            .zip(&self.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = self.w.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(diff / (1.0 + scale))
    }
}
