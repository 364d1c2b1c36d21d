use consensus_design::moments::{self, WeightVector};
use consensus_design::netsim;
use consensus_design::optimizer::{self, StepRule, SubgradientSchedule};
use consensus_design::spectrum::sym_eig;
use consensus_design::supergraph::{self, LinkStatModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn iters_to(traj: &[f64], frac: f64) -> Option<usize> {
    traj.iter().position(|&v| v / traj[0] <= frac)
}

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let iters: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let a: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (graph, radius) = supergraph::generate_with_edge_count(120, 449, 200, &mut rng).unwrap();
    let model = LinkStatModel::geometric(&graph, 0.6, 0.2, radius).unwrap();
    let schedule = SubgradientSchedule { max_iters: iters, a, step_rule: StepRule::InvSqrt, ..SubgradientSchedule::default() };
    let init = optimizer::feasible_metropolis_init(&model, 1e-3).unwrap();
    let sampler = netsim::build_sampler(&model).unwrap();

    for n in [1usize, 15, 30] {
        let t0 = Instant::now();
        let res = optimizer::optimize(n, &model, &init, &schedule).unwrap();
        let m = moments::error_moment_matrix(&res.best_weights, &model).unwrap();
        let eig = sym_eig(m.matrix()).unwrap();
        let lam = eig.eigenvalues();
        let traj = netsim::monte_carlo_mse(&res.best_weights, &sampler, 100, 100, seed).unwrap();
        println!(
            "n={n:>2}: phi_n={:.4} lam1={:.5} lam5={:.5} lam30={:.5} lam60={:.5} to1%={:?} to0.1%={:?} ({:?})",
            res.best_value, lam[0], lam[4], lam[29], lam[59],
            iters_to(&traj.mse, 1e-2), iters_to(&traj.mse, 1e-3), t0.elapsed()
        );
    }
}
