//! Finite-difference oracles for the moment-matrix derivative and the Ky Fan
//! subgradient. The moment matrix is quadratic in the weights, so central
//! differences are exact up to rounding there; the objective itself is
//! checked at points with an open eigenvalue gap where it is differentiable.

use consensus_design::moments::{self, WeightVector};
use consensus_design::spectrum::{phi_n, subgrad_phi_n, sym_eig};
use consensus_design::supergraph::{self, LinkStatModel, Supergraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-6;

fn random_connected_model(rng: &mut ChaCha8Rng, n_nodes: usize) -> (Supergraph, LinkStatModel) {
    loop {
        let graph = supergraph::generate_geometric(n_nodes, 0.5, rng).unwrap();
        if !graph.is_connected() {
            continue;
        }
        let probs = supergraph::assign_probabilities(&graph, 0.6, 0.5).unwrap();
        let model = supergraph::build_correlations(&graph, &probs, 0.2).unwrap();
        return (graph, model);
    }
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> WeightVector {
    WeightVector::new((0..m).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn perturbed(weights: &WeightVector, e: usize, delta: f64) -> WeightVector {
    let mut v = weights.values().to_vec();
    v[e] += delta;
    WeightVector::new(v).unwrap()
}

#[test]
fn moment_derivative_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(515);
    for point in 0..50 {
        let (graph, model) = random_connected_model(&mut rng, 6 + point % 5);
        let m = graph.n_edges();
        let weights = random_weights(&mut rng, m, -0.1, 0.5);
        let e = rng.random_range(0..m);

        let analytic = moments::moment_derivative(&weights, &model, e).unwrap();
        let plus = moments::error_moment_matrix(&perturbed(&weights, e, FD_STEP), &model).unwrap();
        let minus =
            moments::error_moment_matrix(&perturbed(&weights, e, -FD_STEP), &model).unwrap();

        let mut num = 0.0f64;
        let mut den = 0.0f64;
        let n = graph.n_nodes();
        for i in 0..n {
            for j in 0..n {
                let fd = (plus.matrix()[[i, j]] - minus.matrix()[[i, j]]) / (2.0 * FD_STEP);
                num += (fd - analytic[[i, j]]).powi(2);
                den += fd * fd;
            }
        }
        let rel = num.sqrt() / den.sqrt().max(1e-12);
        assert!(rel < 1e-5, "point {point}, edge {e}: relative error {rel:e}");
    }
}

fn eigen_gap(weights: &WeightVector, model: &LinkStatModel, n: usize) -> f64 {
    let m = moments::error_moment_matrix(weights, model).unwrap();
    let eig = sym_eig(m.matrix()).unwrap();
    eig.eigenvalues()[n - 1] - eig.eigenvalues()[n]
}

#[test]
fn subgradient_matches_objective_differences_at_gap_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(616);
    let mut checked = 0usize;
    while checked < 12 {
        let (graph, model) = random_connected_model(&mut rng, 9);
        let m = graph.n_edges();
        let base = consensus_design::optimizer::metropolis_weights(&graph);
        let weights = WeightVector::new(
            base.values()
                .iter()
                .map(|w| w * rng.random_range(0.7..1.3))
                .collect(),
        )
        .unwrap();
        for n in [1usize, 3, graph.n_nodes() - 1] {
            if eigen_gap(&weights, &model, n) <= 1e-6 {
                continue;
            }
            let grad = subgrad_phi_n(&weights, &model, n).unwrap();
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for e in 0..m {
                let up = phi_n(&perturbed(&weights, e, FD_STEP), &model, n).unwrap();
                let down = phi_n(&perturbed(&weights, e, -FD_STEP), &model, n).unwrap();
                let fd = (up - down) / (2.0 * FD_STEP);
                num += (fd - grad[e]).powi(2);
                den += fd * fd;
            }
            let rel = num.sqrt() / den.sqrt().max(1e-12);
            assert!(rel < 1e-5, "n = {n}: relative error {rel:e}");
            checked += 1;
        }
    }
}
