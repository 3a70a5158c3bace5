//! The outer loop: broadcast `w`, solve the local subproblems in parallel,
//! aggregate with `γ`, certify.
//!
//! ```text
//! α_[k] ← α_[k] + γ Δα_[k]        w ← w + γ Σ_k Δw_k
//! ```
//!
//! Workers are pure functions of `(w snapshot, α_[k], seed, round, k)`, so a
//! run is bit-identical for any number of execution threads.

mod bounds;
mod disdca;
mod log;
mod sgd;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bounds::{theoretical_rounds_lipschitz, theoretical_rounds_smooth, LipschitzRounds, SmoothRounds};
pub use disdca::{disdca_p_round, disdca_p_worker};
pub use log::{ConvergenceLog, LogHeader, ResolvedParams, RoundRecord, LOG_FORMAT};
pub use sgd::minibatch_sgd_run;

use crate::data::{Partition, PartitionStrategy};
use crate::error::{Error, Result};
use crate::local_solver::{local_sdca, required_h_smooth, LocalUpdate};
use crate::objective::{DualState, Problem};
use crate::rng::worker_rng;
use crate::subproblem::{sigma_aggregate, validate_sigma_gamma, SubproblemContext, DEFAULT_SPECTRAL_TOL};

/// Algorithm preset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Free `γ` and `σ′`.
    #[serde(rename = "cocoa-plus")]
    CocoaPlus,
    /// `γ = 1`, `σ′ = K`.
    #[serde(rename = "adding")]
    CocoaPlusAdding,
    /// `γ = 1/K`, `σ′ = 1` (original CoCoA).
    #[serde(rename = "averaging")]
    CocoaAveraging,
    /// The DisDCA-p reference path; `γ = 1`, `σ′ = K`, balanced partitions only.
    #[serde(rename = "disdca-p")]
    DisDcaP,
    /// Distributed mini-batch subgradient descent on the primal.
    #[serde(rename = "sgd")]
    MiniBatchSgd,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::CocoaPlus,
        Variant::CocoaPlusAdding,
        Variant::CocoaAveraging,
        Variant::DisDcaP,
        Variant::MiniBatchSgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::CocoaPlus => "cocoa-plus",
            Variant::CocoaPlusAdding => "adding",
            Variant::CocoaAveraging => "averaging",
            Variant::DisDcaP => "disdca-p",
            Variant::MiniBatchSgd => "sgd",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cocoa-plus" | "plus" => Ok(Variant::CocoaPlus),
            "adding" | "cocoa-plus-adding" => Ok(Variant::CocoaPlusAdding),
            "averaging" | "cocoa" | "cocoa-averaging" => Ok(Variant::CocoaAveraging),
            "disdca-p" | "disdca" => Ok(Variant::DisDcaP),
            "sgd" | "minibatch-sgd" => Ok(Variant::MiniBatchSgd),
            _ => Err(Error::config(format!(
                "unknown variant {s:?}; expected one of cocoa-plus, adding, averaging, disdca-p, sgd"
            ))),
        }
    }
}

/// Subproblem parameter `σ′`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaPrime {
    /// `σ′ = γK`.
    Safe,
    Value(f64),
}

impl FromStr for SigmaPrime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "safe" {
            return Ok(SigmaPrime::Safe);
        }
        s.parse::<f64>()
            .map(SigmaPrime::Value)
            .map_err(|_| Error::config(format!("sigma' must be a number or \"safe\", got {s:?}")))
    }
}

/// Local coordinate steps per worker and round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalSteps {
    Fixed(usize),
    /// Smallest `H` that makes LocalSDCA `Θ`-approximate for a smooth loss,
    /// computed per worker from its `n_k`.
    Auto { theta: f64 },
}

impl FromStr for LocalSteps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(theta) = s.strip_prefix("auto:") {
            let theta = theta
                .parse()
                .map_err(|_| Error::config(format!("bad theta in {s:?}")))?;
            return Ok(LocalSteps::Auto { theta });
        }
        s.parse::<usize>()
            .map(LocalSteps::Fixed)
            .map_err(|_| Error::config(format!("H must be a count or auto:<theta>, got {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of workers `K`.
    pub k: usize,
    pub variant: Variant,
    /// `γ ∈ (0, 1]`; `None` takes the variant's value (1 for `cocoa-plus`).
    pub gamma: Option<f64>,
    pub sigma_prime: SigmaPrime,
    /// `H`; the mini-batch size for [`Variant::MiniBatchSgd`].
    pub local_steps: LocalSteps,
    /// Round cap `T_max`.
    pub max_rounds: usize,
    /// Stop once the duality gap is at most this.
    pub gap_tol: f64,
    /// Evaluate the certificate every this many rounds (and at the last round).
    pub gap_every: usize,
    pub seed: u64,
    pub partition_strategy: PartitionStrategy,
    /// Compute `σ_k`, `σ` for the log header.
    #[serde(default)]
    pub report_spectral: bool,
}

/// Parameters a [`RunConfig`] resolves to on a concrete problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub gamma: f64,
    pub sigma_prime: f64,
    pub local_steps: Vec<usize>,
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Defaults: safe `σ′`, `H = 1000`, 100 rounds, gap tolerance `1e−4`,
    /// seed 0, balanced random partition.
    pub fn new(variant: Variant, k: usize) -> Self {
        Self {
            k,
            variant,
            gamma: None,
            sigma_prime: SigmaPrime::Safe,
            local_steps: LocalSteps::Fixed(1000),
            max_rounds: 100,
            gap_tol: 1e-4,
            gap_every: 1,
            seed: 0,
            partition_strategy: PartitionStrategy::BalancedRandom,
            report_spectral: false,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_sigma_prime(mut self, sigma_prime: f64) -> Self {
        self.sigma_prime = SigmaPrime::Value(sigma_prime);
        self
    }

    pub fn with_local_steps(mut self, h: usize) -> Self {
        self.local_steps = LocalSteps::Fixed(h);
        self
    }

    pub fn with_max_rounds(mut self, t: usize) -> Self {
        self.max_rounds = t;
        self
    }

    pub fn with_gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The partition this config describes for an `n`-point dataset.
    pub fn partition(&self, n: usize) -> Result<Partition> {
        Partition::new(n, self.k, self.partition_strategy, self.seed)
    }

    /// Problem-independent checks.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        if !(self.gap_tol.is_finite() && self.gap_tol >= 0.0) {
            return Err(Error::config(format!("gap tolerance must be finite and ≥ 0, got {}", self.gap_tol)));
        }
        if self.gap_every == 0 {
            return Err(Error::config("gap-every must be at least 1"));
        }
        match self.local_steps {
            LocalSteps::Fixed(0) if self.variant == Variant::MiniBatchSgd => {
                return Err(Error::config("mini-batch size must be at least 1"));
            }
            LocalSteps::Auto { theta } => {
                if self.variant == Variant::MiniBatchSgd {
                    return Err(Error::config("automatic H applies to dual variants only"));
                }
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(Error::config(format!("theta must lie in (0, 1), got {theta}")));
                }
            }
            _ => {}
        }
        self.gamma_sigma().map(|_| ())
    }

    /// `(γ, σ′)` after applying the variant's preset.
    fn gamma_sigma(&self) -> Result<(f64, f64)> {
        let k = self.k as f64;
        let explicit_sigma = match self.sigma_prime {
            SigmaPrime::Safe => None,
            SigmaPrime::Value(s) => Some(s),
        };
        let (gamma, sigma) = match self.variant {
            Variant::CocoaPlus | Variant::MiniBatchSgd => {
                let gamma = self.gamma.unwrap_or(1.0);
                (gamma, explicit_sigma.unwrap_or(gamma * k))
            }
            Variant::CocoaPlusAdding | Variant::DisDcaP => {
                self.require_preset(1.0, k)?;
                (1.0, k)
            }
            Variant::CocoaAveraging => {
                self.require_preset(1.0 / k, 1.0)?;
                (1.0 / k, 1.0)
            }
        };
        validate_sigma_gamma(sigma, gamma)?;
        Ok((gamma, sigma))
    }

    fn require_preset(&self, gamma: f64, sigma: f64) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        if let Some(g) = self.gamma {
            if !close(g, gamma) {
                return Err(Error::config(format!(
                    "variant {} fixes gamma = {gamma}, got {g}",
                    self.variant
                )));
            }
        }
        if let SigmaPrime::Value(s) = self.sigma_prime {
            if !close(s, sigma) {
                return Err(Error::config(format!(
                    "variant {} fixes sigma' = {sigma}, got {s}",
                    self.variant
                )));
            }
        }
        Ok(())
    }

    /// Resolves presets and automatic `H` against a problem and partition.
    pub fn resolve(&self, p: &Problem, part: &Partition) -> Result<Resolved> {
        self.validate()?;
        if part.k() != self.k {
            return Err(Error::config(format!(
                "partition has {} blocks but K = {}",
                part.k(),
                self.k
            )));
        }
        if part.n() != p.n() {
            return Err(Error::dimension(format!(
                "partition covers {} points but the dataset has {}",
                part.n(),
                p.n()
            )));
        }
        if self.variant == Variant::DisDcaP && !part.is_equal_split() {
            return Err(Error::Precondition(
                "DisDCA-p needs a balanced partition (n_k = n/K)".into(),
            ));
        }
        let (gamma, sigma_prime) = self.gamma_sigma()?;
        let local_steps = match self.local_steps {
            LocalSteps::Fixed(h) => vec![h; self.k],
            LocalSteps::Auto { theta } => {
                let mu = p.loss.mu().ok_or_else(|| {
                    Error::config(format!("automatic H needs a smooth loss, got {}", p.loss))
                })?;
                let r_max = p.dataset.r_max();
                part.sizes()
                    .into_iter()
                    .map(|nk| {
                        required_h_smooth(nk, sigma_prime, r_max, p.lambda, p.n(), mu, theta).map(|h| h.max(1))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let mut warnings = Vec::new();
        let safe = gamma * self.k as f64;
        if self.variant != Variant::MiniBatchSgd && sigma_prime < safe * (1.0 - 1e-12) {
            warnings.push(format!(
                "WARNING: sigma' = {sigma_prime} is below the safe value gamma*K = {safe}; \
                 convergence is not guaranteed and the run may diverge"
            ));
        }
        Ok(Resolved {
            gamma,
            sigma_prime,
            local_steps,
            warnings,
        })
    }
}

/// Deterministic in-process stand-in for a cluster of `K` workers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimulatedCluster {
    threads: usize,
}

impl SimulatedCluster {
    /// `threads = 0` uses rayon's default pool size; `1` runs serially.
    pub fn new(threads: usize) -> Self {
        Self { threads }
    }

    pub fn serial() -> Self {
        Self { threads: 1 }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn run(&self, p: &Problem, part: &Partition, cfg: &RunConfig) -> Result<ConvergenceLog> {
        self.run_with_observer(p, part, cfg, |_, _| {})
    }

    /// As [`SimulatedCluster::run`], calling `observer(t, state)` after the
    /// aggregation of every round `t ≥ 1`.
    pub fn run_with_observer(
        &self,
        p: &Problem,
        part: &Partition,
        cfg: &RunConfig,
        observer: impl FnMut(usize, &DualState),
    ) -> Result<ConvergenceLog> {
        let resolved = cfg.resolve(p, part)?;
        let pool = self.pool()?;
        let exec = Executor { pool: pool.as_ref() };
        if cfg.variant == Variant::MiniBatchSgd {
            return sgd::run_sgd(p, part, cfg, resolved, &exec);
        }
        run_dual(p, part, cfg, resolved, &exec, observer)
    }

    fn pool(&self) -> Result<Option<rayon::ThreadPool>> {
        if self.threads == 1 {
            return Ok(None);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map(Some)
            .map_err(|e| Error::config(format!("cannot start worker threads: {e}")))
    }
}

/// Runs `cfg` on rayon's default pool.
pub fn run(p: &Problem, part: &Partition, cfg: &RunConfig) -> Result<ConvergenceLog> {
    SimulatedCluster::new(0).run(p, part, cfg)
}

/// Maps worker indices to results, in order, serially or on a pool.
pub(crate) struct Executor<'a> {
    pool: Option<&'a rayon::ThreadPool>,
}

impl Executor<'_> {
    pub(crate) fn map<T: Send>(&self, k: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        match self.pool {
            None => (0..k).map(f).collect(),
            Some(pool) => pool.install(|| (0..k).into_par_iter().map(f).collect()),
        }
    }
}

pub(crate) fn header(p: &Problem, part: &Partition, cfg: &RunConfig, resolved: &Resolved) -> Result<LogHeader> {
    let spectral = if cfg.report_spectral {
        Some(sigma_aggregate(&p.dataset, part, DEFAULT_SPECTRAL_TOL)?)
    } else {
        None
    };
    Ok(LogHeader {
        format: LOG_FORMAT.into(),
        config: cfg.clone(),
        resolved: ResolvedParams {
            gamma: resolved.gamma,
            sigma_prime: resolved.sigma_prime,
            local_steps: resolved.local_steps.clone(),
        },
        loss: p.loss.to_string(),
        lambda: p.lambda,
        dataset: p.dataset.stats(),
        spectral,
        warnings: resolved.warnings.clone(),
    })
}

/// Certificate record for round `t`, or a divergence error.
pub(crate) fn evaluate(
    p: &Problem,
    alpha: &[f64],
    w: &[f64],
    t: usize,
    k: usize,
    start: Instant,
) -> Result<RoundRecord> {
    let cert = p.certificate_with_w(alpha, w)?;
    if !cert.primal.is_finite() || !cert.dual.is_finite() {
        return Err(Error::Diverged {
            round: t,
            message: format!("primal = {}, dual = {}", cert.primal, cert.dual),
        });
    }
    Ok(RoundRecord {
        round: t,
        comm_vectors: 2 * k * t,
        dual: cert.dual,
        primal: cert.primal,
        gap: cert.reported_gap(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub(crate) fn check_finite_w(w: &[f64], t: usize) -> Result<()> {
    let norm_sq: f64 = w.iter().map(|v| v * v).sum();
    if norm_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            round: t,
            message: "primal iterate is not finite".into(),
        })
    }
}

/// `α_[k] += γ Δα_[k]` for every block, then `w += γ Σ_k Δw_k` with the sum
/// taken in ascending `k`.
pub(crate) fn aggregate(part: &Partition, state: &mut DualState, updates: &[LocalUpdate], gamma: f64) {
    let mut total = vec![0.0; state.w.len()];
    for (k, up) in updates.iter().enumerate() {
        for (&i, &delta) in part.block(k).iter().zip(&up.delta_alpha_block) {
            state.alpha[i] += gamma * delta;
        }
        for (acc, dw) in total.iter_mut().zip(&up.delta_w) {
            *acc += dw;
        }
    }
    for (wj, dj) in state.w.iter_mut().zip(&total) {
        *wj += gamma * dj;
    }
}

fn run_dual(
    p: &Problem,
    part: &Partition,
    cfg: &RunConfig,
    resolved: Resolved,
    exec: &Executor<'_>,
    mut observer: impl FnMut(usize, &DualState),
) -> Result<ConvergenceLog> {
    let start = Instant::now();
    let header = header(p, part, cfg, &resolved)?;
    let mut state = DualState::zeros(p);
    let mut records = vec![evaluate(p, &state.alpha, &state.w, 0, cfg.k, start)?];
    if records[0].gap <= cfg.gap_tol {
        return Ok(ConvergenceLog { header, records });
    }
    let (gamma, sigma_prime) = (resolved.gamma, resolved.sigma_prime);
    for t in 1..=cfg.max_rounds {
        let updates = {
            let snapshot = &state;
            let steps = &resolved.local_steps;
            exec.map(cfg.k, |k| {
                let alpha_block = part.gather(k, &snapshot.alpha);
                let mut rng = worker_rng(cfg.seed, t as u64, k as u64);
                if cfg.variant == Variant::DisDcaP {
                    disdca_p_worker(p, part, k, &snapshot.w, &alpha_block, steps[k], &mut rng)
                } else {
                    let ctx = SubproblemContext::new(part, k, &snapshot.w, &alpha_block, sigma_prime, gamma)?;
                    local_sdca(p, part, &ctx, steps[k], &mut rng)
                }
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?
        };
        aggregate(part, &mut state, &updates, gamma);
        check_finite_w(&state.w, t)?;
        observer(t, &state);
        if t % cfg.gap_every == 0 || t == cfg.max_rounds {
            let rec = evaluate(p, &state.alpha, &state.w, t, cfg.k, start)?;
            let done = rec.gap <= cfg.gap_tol;
            records.push(rec);
            if done {
                break;
            }
        }
    }
    Ok(ConvergenceLog { header, records })
}
