use consensus_design::moments;
use consensus_design::optimizer::{self, SubgradientSchedule};
use consensus_design::spectrum::sym_eig;
use consensus_design::supergraph::{self, LinkStatModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (graph, _r) = supergraph::generate_with_edge_count(120, 449, 200, &mut rng).unwrap();
    let det = LinkStatModel::deterministic(&graph);
    let init = optimizer::metropolis_weights(&graph);
    // Re-run the static optimization manually, fresh-basis each step, to find
    // the first iterate whose moment matrix breaks sym_eig.
    let schedule = SubgradientSchedule::default();
    let mut x = init.values().to_vec();
    let mut scale = None;
    for t in 1..=2000usize {
        let m = moments::error_moment_matrix(
            &consensus_design::WeightVector::new(x.clone()).unwrap(), &det).unwrap();
        match sym_eig(m.matrix()) {
            Ok(eig) => {
                let g = consensus_design::spectrum::subgrad_phi_n(
                    &consensus_design::WeightVector::new(x.clone()).unwrap(), &det, 1).unwrap();
                let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if gnorm < 1e-14 { println!("stationary at t={t}"); break; }
                let s = *scale.get_or_insert(schedule.a / gnorm);
                let step = s / (t as f64).sqrt();
                for (xi, gi) in x.iter_mut().zip(&g) { *xi -= step * gi; }
                if t % 200 == 0 {
                    println!("t={t} phi1={:.6} gnorm={:.3e}", eig.top(), gnorm);
                }
            }
            Err(e) => {
                println!("FRESH-basis failure at t={t}: {e}");
                // dump matrix stats
                let n = m.matrix().nrows();
                let fro: f64 = m.matrix().iter().map(|v| v*v).sum::<f64>().sqrt();
                println!("n={n} fro={fro:.3e}");
                std::fs::write("/tmp/bad_matrix.txt",
                    m.matrix().iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join("\n")).unwrap();
                break;
            }
        }
    }
    println!("done");
}
