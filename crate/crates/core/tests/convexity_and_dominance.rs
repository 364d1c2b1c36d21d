//! Property suite for the objective families and the optimizer: midpoint
//! convexity, the supporting-hyperplane inequality of the subgradient,
//! dominance of optimized weights over the baselines, and grid-search
//! oracles on tiny instances.

use consensus_design::moments::{self, WeightVector};
use consensus_design::netsim;
use consensus_design::optimizer::{self, SubgradientSchedule};
use consensus_design::spectrum::{phi_n, psi_n, subgrad_phi_n, sym_eig};
use consensus_design::supergraph::{self, LinkStatModel, Supergraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn paper_style_model(rng: &mut ChaCha8Rng, n_nodes: usize, radius: f64) -> LinkStatModel {
    loop {
        let graph = supergraph::generate_geometric(n_nodes, radius, rng).unwrap();
        if !graph.is_connected() {
            continue;
        }
        let probs = supergraph::assign_probabilities(&graph, 0.6, radius).unwrap();
        return supergraph::build_correlations(&graph, &probs, 0.2).unwrap();
    }
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> WeightVector {
    WeightVector::new((0..m).map(|_| rng.random_range(-0.2..0.8)).collect()).unwrap()
}

fn midpoint(x: &WeightVector, y: &WeightVector) -> WeightVector {
    WeightVector::new(
        x.values()
            .iter()
            .zip(y.values())
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
    )
    .unwrap()
}

#[test]
fn phi_and_psi_are_midpoint_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let model = paper_style_model(&mut rng, 12, 0.5);
    let graph = model.graph().clone();
    let m = graph.n_edges();
    let n_nodes = graph.n_nodes();
    let indices = [1usize, n_nodes.div_ceil(4), n_nodes - 1];
    for n in indices {
        for pair in 0..60 {
            let x = random_weights(&mut rng, m);
            let y = random_weights(&mut rng, m);
            let mid = midpoint(&x, &y);

            let lhs = phi_n(&mid, &model, n).unwrap();
            let rhs = 0.5 * (phi_n(&x, &model, n).unwrap() + phi_n(&y, &model, n).unwrap());
            assert!(lhs <= rhs + 1e-9, "phi_{n}, pair {pair}: {lhs} > {rhs}");

            let lhs = psi_n(&mid, &graph, n).unwrap();
            let rhs = 0.5 * (psi_n(&x, &graph, n).unwrap() + psi_n(&y, &graph, n).unwrap());
            assert!(lhs <= rhs + 1e-9, "psi_{n}, pair {pair}: {lhs} > {rhs}");
        }
    }
}

#[test]
fn subgradient_supports_the_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let model = paper_style_model(&mut rng, 10, 0.55);
    let m = model.graph().n_edges();
    let n_nodes = model.graph().n_nodes();
    let mut checked = 0usize;
    while checked < 40 {
        let n = [1usize, 3, n_nodes - 1][checked % 3];
        let x = random_weights(&mut rng, m);
        let moment = moments::error_moment_matrix(&x, &model).unwrap();
        let eig = sym_eig(moment.matrix()).unwrap();
        if eig.eigenvalues()[n - 1] - eig.eigenvalues()[n] <= 1e-6 {
            continue;
        }
        let g = subgrad_phi_n(&x, &model, n).unwrap();
        let y = random_weights(&mut rng, m);
        let fx = phi_n(&x, &model, n).unwrap();
        let fy = phi_n(&y, &model, n).unwrap();
        let inner: f64 = g
            .iter()
            .zip(x.values().iter().zip(y.values()))
            .map(|(gi, (xi, yi))| gi * (yi - xi))
            .sum();
        assert!(
            fy >= fx + inner - 1e-9,
            "hyperplane violated at n = {n}: {fy} < {fx} + {inner}"
        );
        checked += 1;
    }
}

#[test]
fn optimized_weights_dominate_baselines() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..3 {
        let model = paper_style_model(&mut rng, 11 + round, 0.5);
        let graph = model.graph();
        let mw = optimizer::metropolis_weights(graph);
        let sgbw = optimizer::sgbw_weights(graph).unwrap();
        let schedule = SubgradientSchedule {
            max_iters: 600,
            ..SubgradientSchedule::default()
        };
        let init = optimizer::feasible_metropolis_init(&model, schedule.feasibility_margin).unwrap();
        for n in [1usize, 3] {
            let result = optimizer::optimize(n, &model, &init, &schedule).unwrap();
            let opt = result.best_value;
            let at_mw = phi_n(&mw, &model, n).unwrap();
            let at_sgbw = phi_n(&sgbw, &model, n).unwrap();
            assert!(opt <= at_mw + 1e-9, "n={n} round={round}: {opt} > MW {at_mw}");
            assert!(
                opt <= at_sgbw + 1e-9,
                "n={n} round={round}: {opt} > SGBW {at_sgbw}"
            );
        }
    }
}

#[test]
fn static_optimum_on_path_matches_grid_search() {
    let graph = Supergraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
    let init = optimizer::metropolis_weights(&graph);
    let result = optimizer::optimize_static(1, &graph, &init, &SubgradientSchedule::default())
        .unwrap();

    // Exhaustive 2-D grid at 1e-3 resolution over [0, 1]^2.
    let mut best = f64::INFINITY;
    let steps = 1000;
    for a in 0..=steps {
        for b in 0..=steps {
            let w = WeightVector::new(vec![a as f64 / steps as f64, b as f64 / steps as f64])
                .unwrap();
            let v = psi_n(&w, &graph, 1).unwrap();
            if v < best {
                best = v;
            }
        }
    }
    assert!(
        (result.best_value - best).abs() < 1e-3,
        "optimizer {} vs grid {best}",
        result.best_value
    );
    // Grid optimum sits at w = (1/2, 1/2) with psi_1 = 1/4.
    assert!((best - 0.25).abs() < 1e-3);
}

#[test]
fn two_node_random_grid_oracle() {
    let graph = Supergraph::new(2, vec![(0, 1)]).unwrap();
    let model = LinkStatModel::independent(&graph, vec![0.8]).unwrap();
    let init = WeightVector::new(vec![0.1]).unwrap();
    let result =
        optimizer::optimize(1, &model, &init, &SubgradientSchedule::default()).unwrap();
    let mut best = f64::INFINITY;
    for a in 0..=1000 {
        let w = WeightVector::new(vec![a as f64 / 1000.0]).unwrap();
        best = best.min(phi_n(&w, &model, 1).unwrap());
    }
    assert!((result.best_value - best).abs() < 1e-3);
}

#[test]
fn mean_square_contraction_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(321);
    let model = paper_style_model(&mut rng, 20, 0.45);
    let weights =
        optimizer::feasible_metropolis_init(&model, 1e-3).unwrap();
    let lambda_1 = {
        let m = moments::error_moment_matrix(&weights, &model).unwrap();
        sym_eig(m.matrix()).unwrap().top()
    };
    assert!(lambda_1 < 1.0);

    let sampler = netsim::build_sampler(&model).unwrap();
    let k_max = 60usize;
    let traj = netsim::monte_carlo_mse(&weights, &sampler, k_max, 200, 7171).unwrap();

    // Endpoint bound with slack for Monte Carlo noise.
    assert!(
        traj.mse[k_max] <= traj.mse[0] * lambda_1.powi(k_max as i32) * 10.0,
        "endpoint {} above bound",
        traj.mse[k_max]
    );
    // Per-step worst-case contraction, within propagated standard errors.
    for k in 0..k_max {
        let ratio = traj.mse[k + 1] / traj.mse[k];
        let se = ratio
            * (traj.stderr[k + 1] / traj.mse[k + 1] + traj.stderr[k] / traj.mse[k]);
        assert!(
            ratio <= lambda_1 + 3.0 * se + 1e-12,
            "step {k}: ratio {ratio} > {lambda_1} + 3 x {se:e}"
        );
    }
}

#[test]
fn trial_partitioning_does_not_change_aggregates() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let model = paper_style_model(&mut rng, 9, 0.55);
    let weights = optimizer::metropolis_weights(model.graph());
    let sampler = netsim::build_sampler(&model).unwrap();
    let seed = 4321u64;
    let k_max = 30usize;
    let n_trials = 12usize;
    let full = netsim::monte_carlo_mse(&weights, &sampler, k_max, n_trials, seed).unwrap();

    // Re-derive each trial on its own substream, as a second worker would,
    // and aggregate in trial order.
    let mut sum = vec![0.0f64; k_max + 1];
    for t in 0..n_trials {
        let mut trial_rng = ChaCha8Rng::seed_from_u64(seed);
        trial_rng.set_stream(t as u64);
        let x0 = {
            use rand_distr::StandardNormal;
            let n = model.graph().n_nodes();
            let x: Vec<f64> = (0..n).map(|_| trial_rng.sample(StandardNormal)).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            let mut e: Vec<f64> = x.iter().map(|v| v - mean).collect();
            let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in e.iter_mut() {
                *v /= norm;
            }
            e
        };
        let traj = netsim::run_consensus(&weights, &sampler, &x0, k_max, &mut trial_rng).unwrap();
        for (k, v) in traj.into_iter().enumerate() {
            sum[k] += v;
        }
    }
    for k in 0..=k_max {
        assert_eq!(full.mse[k], sum[k] / n_trials as f64, "k = {k}");
    }
}
