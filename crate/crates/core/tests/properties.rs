mod support;

use cocoa::data::generate_synthetic;
use cocoa::framework::{disdca_p_round, LocalSteps, SimulatedCluster};
use cocoa::local_solver::{local_sdca, local_sdca_traced, measure_theta};
use cocoa::rng::worker_rng;
use cocoa::subproblem::{sigma_k, sigma_prime_min_lower_bound, subproblem_value, DEFAULT_SPECTRAL_TOL};
use cocoa::{
    DualState, Label, LossModel, Partition, PartitionStrategy, Problem, RunConfig, SparseDataset,
    SubproblemContext, Variant,
};
use rand::Rng;
use rand_distr::StandardNormal;
use support::*;

fn synthetic(n: usize, d: usize, loss: LossModel, lambda: f64, seed: u64) -> Problem {
    Problem::new(generate_synthetic(n, d, 0.6, seed).unwrap(), loss, lambda).unwrap()
}

fn strip_wall(log: &cocoa::ConvergenceLog) -> Vec<(usize, usize, u64, u64, u64)> {
    log.records
        .iter()
        .map(|r| (r.round, r.comm_vectors, r.dual.to_bits(), r.primal.to_bits(), r.gap.to_bits()))
        .collect()
}

#[test]
fn dual_progress_from_zero_is_at_most_one() {
    let mut r = rng(21);
    for loss in all_losses() {
        for _ in 0..4 {
            let n = r.random_range(5..30);
            let d = r.random_range(2..10);
            let lambda = 10f64.powf(r.random_range(-3.0..0.0));
            let p = random_problem(&mut r, n, d, loss, lambda);
            let opt = brute_force_optimum(&p, 1e-11);
            let d0 = p.dual_value(&vec![0.0; n]).unwrap();
            assert!(opt.dual - d0 <= 1.0 + 1e-12, "{loss}: {}", opt.dual - d0);
        }
    }
}

#[test]
fn certificate_bounds_suboptimality_along_a_run() {
    for loss in all_losses() {
        let p = synthetic(60, 8, loss, 0.02, 4);
        let opt = brute_force_optimum(&p, 1e-11);
        assert!(opt.gap() <= 1e-10);
        let part = Partition::new(60, 3, PartitionStrategy::BalancedRandom, 1).unwrap();
        let cfg = RunConfig::new(Variant::CocoaPlusAdding, 3)
            .with_local_steps(15)
            .with_max_rounds(30)
            .with_gap_tol(0.0);
        SimulatedCluster::serial()
            .run_with_observer(&p, &part, &cfg, |_, state| {
                let cert = p.certificate(&state.alpha).unwrap();
                assert!(cert.primal - opt.primal <= cert.gap + 1e-9);
                assert!(cert.gap >= -1e-9);
            })
            .unwrap();
    }
}

#[test]
fn single_worker_reduces_to_serial_sdca() {
    let p = synthetic(40, 6, LossModel::hinge(), 0.05, 9);
    let opt = brute_force_optimum(&p, 1e-11);
    let part = Partition::new(40, 1, PartitionStrategy::Contiguous, 0).unwrap();
    let cfg = RunConfig::new(Variant::CocoaPlus, 1)
        .with_gamma(1.0)
        .with_sigma_prime(1.0)
        .with_local_steps(4000)
        .with_max_rounds(50)
        .with_gap_tol(1e-6);
    let log = SimulatedCluster::serial().run(&p, &part, &cfg).unwrap();
    let last = log.records.last().unwrap();
    assert!(last.gap <= 1e-6, "{}", last.gap);
    assert!((last.primal - opt.primal).abs() <= 1e-6);
}

#[test]
fn incremental_w_matches_recomputed_map() {
    for loss in all_losses() {
        let p = synthetic(80, 12, loss, 0.01, 2);
        let part = Partition::new(80, 4, PartitionStrategy::BalancedRandom, 5).unwrap();
        let cfg = RunConfig::new(Variant::CocoaPlusAdding, 4)
            .with_local_steps(30)
            .with_max_rounds(25)
            .with_gap_tol(0.0);
        SimulatedCluster::new(2)
            .run_with_observer(&p, &part, &cfg, |t, state| {
                let err = state.consistency_error(&p).unwrap();
                assert!(err <= 1e-8, "round {t}: {err}");
            })
            .unwrap();
    }
}

#[test]
fn iterates_stay_in_the_conjugate_domain() {
    for loss in all_losses() {
        let p = synthetic(50, 5, loss, 0.001, 7);
        let part = Partition::new(50, 5, PartitionStrategy::BalancedRandom, 2).unwrap();
        for variant in [Variant::CocoaPlusAdding, Variant::CocoaAveraging] {
            let cfg = RunConfig::new(variant, 5).with_local_steps(40).with_max_rounds(20).with_gap_tol(0.0);
            SimulatedCluster::serial()
                .run_with_observer(&p, &part, &cfg, |_, state| {
                    for (i, a) in state.alpha.iter().enumerate() {
                        let b = a * p.dataset.label(i).value();
                        assert!((0.0..=1.0).contains(&b), "beta = {b}");
                    }
                    assert!(p.dual_value(&state.alpha).unwrap().is_finite());
                })
                .unwrap();
        }
    }
}

#[test]
fn dual_is_monotone_with_safe_sigma_prime() {
    let configs = [
        RunConfig::new(Variant::CocoaPlusAdding, 4),
        RunConfig::new(Variant::CocoaAveraging, 4),
        RunConfig::new(Variant::CocoaPlus, 4).with_gamma(0.5),
        RunConfig::new(Variant::CocoaPlus, 4).with_gamma(0.5).with_sigma_prime(3.0),
    ];
    for loss in all_losses() {
        let p = synthetic(100, 10, loss, 0.005, 3);
        for seed in 0..5 {
            let part = Partition::new(100, 4, PartitionStrategy::BalancedRandom, seed).unwrap();
            for cfg in &configs {
                let cfg = cfg.clone().with_seed(seed).with_local_steps(25).with_max_rounds(20).with_gap_tol(0.0);
                let log = SimulatedCluster::serial().run(&p, &part, &cfg).unwrap();
                for pair in log.records.windows(2) {
                    assert!(pair[1].dual >= pair[0].dual - 1e-9, "{:?} {loss}", cfg.variant);
                }
            }
        }
    }
}

#[test]
fn runs_are_identical_across_thread_counts() {
    let p = synthetic(120, 15, LossModel::logistic(), 0.01, 8);
    let part = Partition::new(120, 4, PartitionStrategy::BalancedRandom, 8).unwrap();
    let cfg = RunConfig::new(Variant::CocoaPlusAdding, 4).with_local_steps(50).with_max_rounds(15).with_seed(3);
    let base = SimulatedCluster::serial().run(&p, &part, &cfg).unwrap();
    for threads in [1, 2, 4] {
        let again = SimulatedCluster::new(threads).run(&p, &part, &cfg).unwrap();
        assert_eq!(strip_wall(&again), strip_wall(&base));
        assert_eq!(again.header, base.header);
    }
}

#[test]
fn disdca_p_trajectory_matches_adding() {
    let p = synthetic(64, 10, LossModel::hinge(), 0.01, 12);
    for k in [1, 2, 4] {
        let part = Partition::new(64, k, PartitionStrategy::BalancedRandom, 4).unwrap();
        let cfg = RunConfig::new(Variant::CocoaPlusAdding, k).with_local_steps(20).with_max_rounds(5).with_gap_tol(0.0);
        let mut trajectory = Vec::new();
        SimulatedCluster::serial()
            .run_with_observer(&p, &part, &cfg, |_, s| trajectory.push(s.clone()))
            .unwrap();
        let mut state = DualState::zeros(&p);
        for (t, expected) in trajectory.iter().enumerate() {
            disdca_p_round(&p, &part, &mut state, 20, cfg.seed, t as u64 + 1).unwrap();
            assert_eq!(&state, expected, "K = {k}, round {}", t + 1);
        }
    }
}

#[test]
fn disdca_p_variant_runs_through_the_driver() {
    let p = synthetic(64, 10, LossModel::hinge(), 0.01, 12);
    let part = Partition::new(64, 4, PartitionStrategy::BalancedRandom, 4).unwrap();
    let base = RunConfig::new(Variant::CocoaPlusAdding, 4).with_local_steps(20).with_max_rounds(5);
    let mut disdca = base.clone();
    disdca.variant = Variant::DisDcaP;
    let a = SimulatedCluster::serial().run(&p, &part, &base).unwrap();
    let b = SimulatedCluster::serial().run(&p, &part, &disdca).unwrap();
    assert_eq!(strip_wall(&a), strip_wall(&b));
    let uneven = Partition::new(63, 4, PartitionStrategy::Contiguous, 0).unwrap();
    let q = synthetic(63, 10, LossModel::hinge(), 0.01, 12);
    assert!(matches!(
        SimulatedCluster::serial().run(&q, &uneven, &disdca),
        Err(cocoa::Error::Precondition(_))
    ));
}

#[test]
fn adding_beats_averaging_on_a_small_instance() {
    // λn = 4 with d > n: the box constraints bind early and adding reaches them in fewer rounds
    let ds = generate_synthetic(400, 1000, 0.02, 5).unwrap();
    let p = Problem::new(ds, LossModel::hinge(), 1e-2).unwrap();
    let part = Partition::new(400, 4, PartitionStrategy::BalancedRandom, 5).unwrap();
    let rounds = |variant| {
        let cfg = RunConfig::new(variant, 4).with_local_steps(100).with_max_rounds(2000).with_gap_tol(1e-4);
        SimulatedCluster::new(0).run(&p, &part, &cfg).unwrap().rounds_to_gap(1e-4).unwrap()
    };
    let (adding, averaging) = (rounds(Variant::CocoaPlusAdding), rounds(Variant::CocoaAveraging));
    assert!(2 * adding < averaging, "{adding} vs {averaging}");
}

#[test]
fn rayleigh_quotients_stay_below_sigma_k() {
    let mut r = rng(33);
    let ds = generate_synthetic(90, 25, 0.4, 6).unwrap();
    let part = Partition::new(90, 3, PartitionStrategy::BalancedRandom, 6).unwrap();
    for k in 0..3 {
        let s = sigma_k(&ds, &part, k, DEFAULT_SPECTRAL_TOL).unwrap();
        for _ in 0..1000 {
            let a: Vec<f64> = (0..part.block(k).len()).map(|_| r.sample(StandardNormal)).collect();
            let lhs = block_image_sq(&ds, &part, k, &a);
            let rhs = (s + DEFAULT_SPECTRAL_TOL * s) * dot(&a, &a);
            assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
        }
    }
}

#[test]
fn sigma_prime_lower_bound_properties() {
    let ds = generate_synthetic(40, 6, 0.8, 1).unwrap();
    let part = Partition::new(40, 4, PartitionStrategy::BalancedRandom, 1).unwrap();
    let mut prev = 0.0;
    for trials in [1, 2, 4, 8] {
        let lb = sigma_prime_min_lower_bound(&ds, &part, 0.5, trials, 3).unwrap();
        assert!(lb >= prev);
        assert!(lb <= 0.5 * 4.0 + 1e-9, "exceeds the safe value: {lb}");
        prev = lb;
    }
    let single = Partition::new(40, 1, PartitionStrategy::Contiguous, 0).unwrap();
    assert_eq!(sigma_prime_min_lower_bound(&ds, &single, 0.3, 3, 0).unwrap(), 0.3);
}

#[test]
fn local_delta_w_matches_recomputation() {
    for loss in all_losses() {
        let p = synthetic(50, 9, loss, 0.01, 14);
        let part = Partition::new(50, 2, PartitionStrategy::BalancedRandom, 3).unwrap();
        let alpha = vec![0.0; 50];
        let w = vec![0.0; 9];
        for k in 0..2 {
            let ab = part.gather(k, &alpha);
            let ctx = SubproblemContext::new(&part, k, &w, &ab, 2.0, 1.0).unwrap();
            let up = local_sdca(&p, &part, &ctx, 300, &mut worker_rng(1, 1, k as u64)).unwrap();
            let fresh = p.dataset.mul_subset(part.block(k), &up.delta_alpha_block);
            let scale = 1.0 / (p.lambda * 50.0);
            for (a, b) in up.delta_w.iter().zip(&fresh) {
                assert!((a - b * scale).abs() <= 1e-8 * (1.0 + (b * scale).abs()));
            }
        }
    }
}

#[test]
fn measured_theta_shrinks_with_more_local_steps() {
    let p = synthetic(60, 10, LossModel::smoothed_hinge(1.0).unwrap(), 0.01, 10);
    let part = Partition::new(60, 2, PartitionStrategy::BalancedRandom, 10).unwrap();
    let alpha = vec![0.0; 60];
    let w = vec![0.0; 10];
    let ab = part.gather(0, &alpha);
    let ctx = SubproblemContext::new(&part, 0, &w, &ab, 2.0, 1.0).unwrap();
    let reference = local_sdca(&p, &part, &ctx, 200_000, &mut worker_rng(99, 0, 0)).unwrap();
    let opt = subproblem_value(&p, &part, &ctx, &reference.delta_alpha_block).unwrap();
    let mut prev = f64::INFINITY;
    for h in [5, 20, 60, 150, 400] {
        let mut thetas: Vec<f64> = (0..20)
            .map(|seed| {
                let up = local_sdca(&p, &part, &ctx, h, &mut worker_rng(seed, 0, 0)).unwrap();
                measure_theta(&p, &part, &ctx, &up, opt).unwrap()
            })
            .collect();
        thetas.sort_by(f64::total_cmp);
        let median = 0.5 * (thetas[9] + thetas[10]);
        assert!(median <= prev, "H = {h}: {median} > {prev}");
        prev = median;
    }
    assert!(prev < 0.05);
}

#[test]
fn local_steps_never_lose_subproblem_value() {
    for loss in all_losses() {
        let p = synthetic(40, 8, loss, 0.02, 15);
        let part = Partition::new(40, 2, PartitionStrategy::BalancedRandom, 15).unwrap();
        let mut state = DualState::zeros(&p);
        state.alpha = (0..40).map(|i| 0.3 * p.dataset.label(i).value()).collect();
        state.w = p.primal_from_dual(&state.alpha).unwrap();
        let ab = part.gather(1, &state.alpha);
        let ctx = SubproblemContext::new(&part, 1, &state.w, &ab, 2.0, 1.0).unwrap();
        let mut prev = subproblem_value(&p, &part, &ctx, &vec![0.0; ab.len()]).unwrap();
        local_sdca_traced(&p, &part, &ctx, 200, &mut worker_rng(3, 0, 1), |delta| {
            let v = subproblem_value(&p, &part, &ctx, delta).unwrap();
            assert!(v >= prev - 1e-12, "{v} < {prev}");
            prev = v;
        })
        .unwrap();
    }
}

#[test]
fn automatic_local_steps_reach_the_target_quality() {
    let p = synthetic(60, 10, LossModel::smoothed_hinge(1.0).unwrap(), 0.05, 16);
    let part = Partition::new(60, 3, PartitionStrategy::BalancedRandom, 16).unwrap();
    let mut cfg = RunConfig::new(Variant::CocoaPlusAdding, 3);
    cfg.local_steps = LocalSteps::Auto { theta: 0.5 };
    let resolved = cfg.resolve(&p, &part).unwrap();
    let alpha = vec![0.0; 60];
    let w = vec![0.0; 10];
    for k in 0..3 {
        let ab = part.gather(k, &alpha);
        let ctx = SubproblemContext::new(&part, k, &w, &ab, 3.0, 1.0).unwrap();
        let reference = local_sdca(&p, &part, &ctx, 100_000, &mut worker_rng(77, 0, k as u64)).unwrap();
        let opt = subproblem_value(&p, &part, &ctx, &reference.delta_alpha_block).unwrap();
        let mean: f64 = (0..20)
            .map(|seed| {
                let up = local_sdca(&p, &part, &ctx, resolved.local_steps[k], &mut worker_rng(seed, 0, k as u64)).unwrap();
                measure_theta(&p, &part, &ctx, &up, opt).unwrap()
            })
            .sum::<f64>()
            / 20.0;
        assert!(mean <= 0.5, "worker {k}: mean theta {mean}");
    }
}

#[test]
fn weak_duality_on_hand_built_instance() {
    let ds = SparseDataset::from_dense_columns(
        2,
        &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]],
        vec![Label::Positive, Label::Negative, Label::Positive],
    )
    .unwrap();
    let p = Problem::new(ds, LossModel::hinge(), 0.5).unwrap();
    let opt = brute_force_optimum(&p, 1e-12);
    assert!(opt.gap().abs() <= 1e-12);
    let mut r = rng(1);
    for _ in 0..200 {
        let a = random_feasible_alpha(&mut r, &p);
        assert!(p.duality_gap(&a).unwrap() >= -1e-12);
        assert!(p.dual_value(&a).unwrap() <= opt.primal + 1e-12);
    }
}
