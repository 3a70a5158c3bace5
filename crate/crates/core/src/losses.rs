//! Loss families, their convex conjugates and regularity constants.
//!
//! Every loss is written in terms of the margin `m = y·a`. With `β = α·y` the
//! conjugate evaluated at `−α` is a function of `β` alone, and its domain is
//! `β ∈ [0, 1]` for all three families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    /// Label of a nonzero real by sign; zero maps to `Positive`.
    pub fn from_sign(v: f64) -> Self {
        if v < 0.0 {
            Label::Negative
        } else {
            Label::Positive
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LossKind {
    /// `max(0, 1 − m)`.
    Hinge,
    /// Quadratically smoothed hinge with smoothing `mu > 0`.
    SmoothedHinge { mu: f64 },
    /// `log(1 + exp(−m))`.
    Logistic,
}

/// A loss family `ℓ_i` together with its regularity constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub kind: LossKind,
}

impl LossModel {
    pub fn hinge() -> Self {
        Self {
            kind: LossKind::Hinge,
        }
    }

    pub fn smoothed_hinge(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::config(format!(
                "smoothed hinge needs a positive finite mu, got {mu}"
            )));
        }
        Ok(Self {
            kind: LossKind::SmoothedHinge { mu },
        })
    }

    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
        }
    }

    /// Lipschitz constant `L`. All shipped families have `L = 1`.
    pub fn lipschitz(&self) -> f64 {
        1.0
    }

    /// Smoothness constant `1/μ`; `+∞` for the nonsmooth hinge.
    pub fn smoothness_inv_mu(&self) -> f64 {
        match self.kind {
            LossKind::Hinge => f64::INFINITY,
            LossKind::SmoothedHinge { mu } => 1.0 / mu,
            LossKind::Logistic => 0.25,
        }
    }

    /// Strong-convexity constant `μ` of the conjugate, if the loss is smooth.
    pub fn mu(&self) -> Option<f64> {
        match self.kind {
            LossKind::Hinge => None,
            LossKind::SmoothedHinge { mu } => Some(mu),
            LossKind::Logistic => Some(4.0),
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.mu().is_some()
    }

    /// `ℓ(a)` for label `y`.
    pub fn loss_value(&self, a: f64, y: Label) -> Result<f64> {
        if !a.is_finite() {
            return Err(Error::Domain(format!("loss argument must be finite, got {a}")));
        }
        Ok(self.loss_at_margin(y.value() * a))
    }

    #[inline]
    pub(crate) fn loss_at_margin(&self, m: f64) -> f64 {
        match self.kind {
            LossKind::Hinge => (1.0 - m).max(0.0),
            LossKind::SmoothedHinge { mu } => {
                if m >= 1.0 {
                    0.0
                } else if m <= 1.0 - mu {
                    1.0 - m - 0.5 * mu
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

    /// One element of `∂ℓ(a)`. At the hinge kink this is `0`.
    pub fn loss_subgradient(&self, a: f64, y: Label) -> f64 {
        let yv = y.value();
        let m = yv * a;
        let dm = match self.kind {
            LossKind::Hinge => {
                if m < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::SmoothedHinge { mu } => {
                if m >= 1.0 {
                    0.0
                } else if m <= 1.0 - mu {
                    -1.0
                } else {
                    -(1.0 - m) / mu
                }
            }
            LossKind::Logistic => -1.0 / (1.0 + m.exp()),
        };
        yv * dm
    }

    /// Convex conjugate `ℓ*(v) = sup_a { a·v − ℓ(a) }`, `+∞` outside its domain.
    pub fn conjugate_value(&self, v: f64, y: Label) -> f64 {
        self.conjugate_at_beta(-v * y.value())
    }

    /// `ℓ*(−α)` written in `β = α·y`.
    #[inline]
    pub(crate) fn conjugate_at_beta(&self, beta: f64) -> f64 {
        if !(0.0..=1.0).contains(&beta) {
            return f64::INFINITY;
        }
        match self.kind {
            LossKind::Hinge => -beta,
            LossKind::SmoothedHinge { mu } => -beta + 0.5 * mu * beta * beta,
            LossKind::Logistic => xlogx(beta) + xlogx(1.0 - beta),
        }
    }
}

/// `x·ln x` with `0·ln 0 = 0`.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl fmt::Display for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Hinge => write!(f, "hinge"),
            LossKind::SmoothedHinge { mu } => write!(f, "smoothed-hinge:{mu}"),
            LossKind::Logistic => write!(f, "logistic"),
        }
    }
}

/// Parses `hinge`, `smoothed-hinge:<mu>` (bare `smoothed-hinge` means `mu = 1`)
/// and `logistic`.
impl FromStr for LossModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "hinge" => return Ok(Self::hinge()),
            "logistic" => return Ok(Self::logistic()),
            "smoothed-hinge" => return Self::smoothed_hinge(1.0),
            _ => {}
        }
        if let Some(mu) = s.strip_prefix("smoothed-hinge:") {
            let mu: f64 = mu
                .parse()
                .map_err(|_| Error::config(format!("bad smoothing parameter in loss {s:?}")))?;
            return Self::smoothed_hinge(mu);
        }
        Err(Error::config(format!(
            "unknown loss {s:?}; expected hinge, smoothed-hinge:<mu> or logistic"
        )))
    }
}
