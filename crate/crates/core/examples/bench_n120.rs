use consensus_design::moments::{self, WeightVector};
use consensus_design::netsim;
use consensus_design::optimizer::{self, SubgradientSchedule};
use consensus_design::spectrum::{phi_n, sym_eig};
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
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (graph, radius) = supergraph::generate_with_edge_count(120, 449, 200, &mut rng).unwrap();
    let model = LinkStatModel::geometric(&graph, 0.6, 0.2, radius).unwrap();
    println!("seed={seed} iters={iters} N={} M={}", graph.n_nodes(), graph.n_edges());

    let schedule = SubgradientSchedule { max_iters: iters, ..SubgradientSchedule::default() };
    let init = optimizer::feasible_metropolis_init(&model, 1e-3).unwrap();

    let mw = optimizer::metropolis_weights(&graph);
    let t0 = Instant::now();
    let sgbw = optimizer::sgbw_weights(&graph).unwrap();
    println!("sgbw opt in {:?}", t0.elapsed());

    let mut schemes: Vec<(String, WeightVector)> = vec![("mw".into(), mw), ("sgbw".into(), sgbw)];
    for n in [1usize, 15, 30] {
        let t0 = Instant::now();
        let res = optimizer::optimize(n, &model, &init, &schedule).unwrap();
        println!("phi_{n}: best={:.6} used {} iters in {:?}", res.best_value, res.iterations_used, t0.elapsed());
        schemes.push((format!("phi{n}"), res.best_weights));
    }

    let sampler = netsim::build_sampler(&model).unwrap();
    println!("clamp probe fraction so far: {:.4}", sampler.clamp_fraction());
    for (name, w) in &schemes {
        let phi1v = phi_n(w, &model, 1).unwrap();
        let m = moments::error_moment_matrix(w, &model).unwrap();
        let top = sym_eig(m.matrix()).unwrap();
        let t0 = Instant::now();
        let traj = netsim::monte_carlo_mse(w, &sampler, 100, 100, seed).unwrap();
        let i1 = iters_to(&traj.mse, 1e-2);
        let i01 = iters_to(&traj.mse, 1e-3);
        println!(
            "{name:>6}: phi1={phi1v:.4} lam1={:.4} to1%={:?} to0.1%={:?} (sim {:?})",
            top.top(), i1, i01, t0.elapsed()
        );
    }
}
