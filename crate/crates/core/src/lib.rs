//! Communication-efficient distributed primal-dual optimization for regularized
//! empirical loss minimization.
//!
//! The crate solves
//!
//! ```text
//! min_w  P(w) = (1/n) Σ_i ℓ_i(x_iᵀ w) + (λ/2) ‖w‖²
//! ```
//!
//! through its dual on a deterministic simulated cluster: each of `K` workers
//! approximately maximizes a local quadratic model of the dual over its own
//! block of coordinates, and the driver aggregates the block updates with an
//! aggregation parameter `γ` (`γ = 1` adds, `γ = 1/K` averages). Every round
//! is certified by the duality gap `P(w(α)) − D(α)`.
//!
//! Module map:
//!
//! - [`losses`]: hinge, smoothed hinge and logistic losses with conjugates.
//! - [`data`]: sparse column-major datasets, LIBSVM I/O, synthetic data, partitions.
//! - [`objective`]: primal, dual, primal-dual map and duality gap.
//! - [`subproblem`]: the local subproblem and the spectral constants `σ_k`, `σ`, `σ′`.
//! - [`local_solver`]: randomized local coordinate ascent and inner-iteration bounds.
//! - [`framework`]: the outer loop, baselines, logs and iteration-bound calculators.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod framework;
pub mod local_solver;
pub mod losses;
pub mod objective;
pub mod rng;
pub mod subproblem;

pub use data::{Partition, PartitionStrategy, SparseDataset, SparseVector};
pub use error::{Error, Result};
pub use framework::{ConvergenceLog, RunConfig, SigmaPrime, SimulatedCluster, Variant};
pub use local_solver::LocalUpdate;
pub use losses::{Label, LossKind, LossModel};
pub use objective::{DualState, Problem, Summation};
pub use subproblem::{SpectralConstants, SubproblemContext};
