//! Symmetric eigendecomposition and the spectral objectives built on it.
//!
//! `phi_n` sums the `n` largest eigenvalues of the error-moment matrix
//! `E[W^2] - J`; `psi_n` is its static special case (all links alive). Both
//! are convex in the weights, and the Ky Fan structure gives a subgradient
//! from the top-`n` eigenvectors.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::moments::{self, WeightVector};
use crate::supergraph::{LinkStatModel, Supergraph};

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 64;

/// Eigenvalues sorted descending with matching orthonormal eigenvector
/// columns. Eigenvector signs are fixed so the largest-magnitude component is
/// positive, which makes repeated decompositions reproducible.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal matrix whose column `i` pairs with eigenvalue `i`.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest eigenvalue.
    pub fn top(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Sum of the `n` largest eigenvalues.
    pub fn kyfan_sum(&self, n: usize) -> f64 {
        self.eigenvalues[..n].iter().sum()
    }

    /// Largest eigenvalue in modulus.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()))
    }

    /// `Q diag(lambda) Q^T`, for reconstruction checks.
    pub fn reconstruct(&self) -> Array2<f64> {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            for r in 0..n {
                scaled[[r, i]] *= l;
            }
        }
        scaled.dot(&self.eigenvectors.t())
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations sweep the strict upper triangle until the off-diagonal Frobenius
/// norm falls below `1e-12` (relative to the input norm for matrices larger
/// than unit scale). Input asymmetry beyond `1e-10` is an error; smaller
/// asymmetry is symmetrized away before iterating.
pub fn sym_eig(matrix: &Array2<f64>) -> Result<SpectralDecomposition> {
    sym_eig_with_basis(matrix, None)
}

/// [`sym_eig`] seeded with an orthonormal basis `Q0`: the sweeps run on
/// `Q0^T A Q0` and the returned eigenvectors are composed with `Q0`. With a
/// basis close to the eigenbasis (as in an optimizer loop, where consecutive
/// matrices differ slightly) the rotation work collapses to a few sweeps.
pub(crate) fn sym_eig_with_basis(
    matrix: &Array2<f64>,
    basis: Option<&Array2<f64>>,
) -> Result<SpectralDecomposition> {
    let (rows, cols) = matrix.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let n = rows;
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }

    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            max_asym = max_asym.max((matrix[[i, j]] - matrix[[j, i]]).abs());
        }
    }
    if max_asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(max_asym));
    }

    // Flat row-major working copy (symmetrized) and the transposed rotation
    // accumulator: row `j` of `qt` is the j-th basis vector in progress, so
    // rotations touch two contiguous rows.
    let mut a = vec![0.0f64; n * n];
    let mut qt = vec![0.0f64; n * n];
    match basis {
        None => {
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
                }
            }
            for i in 0..n {
                qt[i * n + i] = 1.0;
            }
        }
        Some(q0) => {
            let rotated = q0.t().dot(matrix).dot(q0);
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = 0.5 * (rotated[[i, j]] + rotated[[j, i]]);
                }
            }
            for i in 0..n {
                for j in 0..n {
                    qt[i * n + j] = q0[[j, i]];
                }
            }
        }
    }

    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * fro.max(1.0);

    let mut converged = n == 1;
    for sweep in 0..MAX_SWEEPS {
        let mut off_sq = 0.0f64;
        let mut off_abs = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let v = a[i * n + j];
                off_sq += 2.0 * v * v;
                off_abs += v.abs();
            }
        }
        if off_sq.sqrt() <= tol {
            converged = true;
            break;
        }
        // Early sweeps rotate only entries above a shrinking threshold;
        // later sweeps rotate everything and zero truly negligible entries.
        let thresh = if sweep < 3 {
            0.2 * off_abs / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[p * n + r];
                let g = 100.0 * apr.abs();
                let app = a[p * n + p];
                let arr = a[r * n + r];
                if sweep > 3 && app.abs() + g == app.abs() && arr.abs() + g == arr.abs() {
                    a[p * n + r] = 0.0;
                    continue;
                }
                if apr.abs() <= thresh || apr == 0.0 {
                    continue;
                }
                let h = arr - app;
                let t = if h.abs() + g == h.abs() {
                    apr / h
                } else {
                    let theta = 0.5 * h / apr;
                    let sign = if theta < 0.0 { -1.0 } else { 1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let delta = t * apr;
                a[p * n + p] = app - delta;
                a[r * n + r] = arr + delta;
                a[p * n + r] = 0.0;

                // Upper triangle only, in the three index ranges around p, r.
                for j in 0..p {
                    let ajp = a[j * n + p];
                    let ajr = a[j * n + r];
                    a[j * n + p] = ajp - s * (ajr + ajp * tau);
                    a[j * n + r] = ajr + s * (ajp - ajr * tau);
                }
                for j in p + 1..r {
                    let apj = a[p * n + j];
                    let ajr = a[j * n + r];
                    a[p * n + j] = apj - s * (ajr + apj * tau);
                    a[j * n + r] = ajr + s * (apj - ajr * tau);
                }
                for j in r + 1..n {
                    let apj = a[p * n + j];
                    let arj = a[r * n + j];
                    a[p * n + j] = apj - s * (arj + apj * tau);
                    a[r * n + j] = arj + s * (apj - arj * tau);
                }
                let (head, tail) = qt.split_at_mut(r * n);
                let row_p = &mut head[p * n..p * n + n];
                let row_r = &mut tail[..n];
                for (vp, vr) in row_p.iter_mut().zip(row_r.iter_mut()) {
                    let qp = *vp;
                    let qr = *vr;
                    *vp = qp - s * (qr + qp * tau);
                    *vr = qr + s * (qp - qr * tau);
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigNoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let vector = &qt[src * n..src * n + n];
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for (row, v) in vector.iter().enumerate() {
            if v.abs() > best_mag {
                best_mag = v.abs();
                best = row;
            }
        }
        let flip = if vector[best] < 0.0 { -1.0 } else { 1.0 };
        for (row, v) in vector.iter().enumerate() {
            eigenvectors[[row, col]] = flip * v;
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn check_mode_index(n: usize, n_nodes: usize) -> Result<()> {
    if n_nodes < 2 || n < 1 || n > n_nodes - 1 {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue count n must lie in 1..={} for {n_nodes} nodes, got {n}",
            n_nodes.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Sum of the `n` largest eigenvalues of `E[W^2] - J`; the random-topology
/// design objective. Nonnegative for every admissible model.
pub fn phi_n(weights: &WeightVector, model: &LinkStatModel, n: usize) -> Result<f64> {
    check_mode_index(n, model.graph().n_nodes())?;
    let m = moments::assemble_moment(model, weights.values())?;
    let decomposition = sym_eig(&m)?;
    Ok(decomposition.kyfan_sum(n).max(0.0))
}

/// Sum of the `n` largest squared eigenvalues of `W - J`; the static design
/// objective. Equals `phi_n` on the deterministic model and is implemented by
/// delegation to it.
pub fn psi_n(weights: &WeightVector, graph: &Supergraph, n: usize) -> Result<f64> {
    let model = LinkStatModel::deterministic(graph);
    phi_n(weights, &model, n)
}

/// Subgradient of `phi_n` at `weights`: `g_e = tr(G dM/dW_e)` with
/// `G = sum_{i<=n} q_i q_i^T` over the top-`n` eigenvectors of the moment
/// matrix. Exact gradient when the eigenvalue gap at position `n` is open.
pub fn subgrad_phi_n(weights: &WeightVector, model: &LinkStatModel, n: usize) -> Result<Vec<f64>> {
    check_mode_index(n, model.graph().n_nodes())?;
    let m = moments::assemble_moment(model, weights.values())?;
    let decomposition = sym_eig(&m)?;
    Ok(subgrad_from_decomposition(
        weights.values(),
        model,
        &decomposition,
        n,
    ))
}

/// Subgradient computed from an already-available decomposition of the moment
/// matrix for these weights. The trace pairing is evaluated entry-sparsely:
/// every derivative term touches at most two edge difference vectors.
pub(crate) fn subgrad_from_decomposition(
    weights: &[f64],
    model: &LinkStatModel,
    decomposition: &SpectralDecomposition,
    n: usize,
) -> Vec<f64> {
    let graph = model.graph();
    let n_nodes = graph.n_nodes();
    let q = decomposition.eigenvectors();

    // G = Q_n Q_n^T.
    let mut g: Array2<f64> = Array2::zeros((n_nodes, n_nodes));
    for col in 0..n {
        for i in 0..n_nodes {
            let qi = q[[i, col]];
            if qi == 0.0 {
                continue;
            }
            for j in 0..n_nodes {
                g[[i, j]] += qi * q[[j, col]];
            }
        }
    }

    let probs = model.probs();
    let gamma = model.cross_cov();
    let edges = graph.edges();
    // d_e^T G d_f where d_e = u_i - u_j.
    let pair_quad = |e: usize, f: usize| -> f64 {
        let (i, j) = edges[e];
        let (k, l) = edges[f];
        g[[i, k]] - g[[i, l]] - g[[j, k]] + g[[j, l]]
    };

    let mut grad = vec![0.0f64; edges.len()];
    for e in 0..edges.len() {
        let quad_ee = pair_quad(e, e);
        let mut value = probs[e] * (4.0 * weights[e] - 2.0) * quad_ee;
        let (i, j) = edges[e];
        for &f in adjacent_edges(graph, i, j, e) {
            let pi = probs[e] * probs[f] + gamma[[e, f]];
            let s = edge_overlap(edges[e], edges[f]);
            value += 2.0 * pi * weights[f] * s * pair_quad(e, f);
        }
        grad[e] = value;
    }
    grad
}

/// Iterator over the edges adjacent to edge `e` with endpoints `(i, j)`.
fn adjacent_edges<'a>(
    graph: &'a Supergraph,
    i: usize,
    j: usize,
    e: usize,
) -> impl Iterator<Item = &'a usize> {
    graph
        .incident_edges(i)
        .iter()
        .chain(graph.incident_edges(j).iter())
        .filter(move |&&f| f != e)
}

/// `d_e^T d_f` for difference vectors oriented low-to-high endpoint.
fn edge_overlap(e: (usize, usize), f: (usize, usize)) -> f64 {
    let (i, j) = e;
    let (k, l) = f;
    let mut s = 0.0;
    if i == k {
        s += 1.0;
    }
    if i == l {
        s -= 1.0;
    }
    if j == k {
        s -= 1.0;
    }
    if j == l {
        s += 1.0;
    }
    s
}

/// Convergence-rate summary for a weight choice.
#[derive(Debug, Clone, Copy)]
pub struct RateReport {
    /// Static asymptotic rate `|lambda_1(W - J)|` with all links alive.
    pub r_as: f64,
    /// Static worst-case per-step rate; equals `r_as` for symmetric weights
    /// (computed once, aliased).
    pub r_step: f64,
    /// `0.5 ln lambda_1(E[W^2] - J)`, the mean-square asymptotic-rate bound.
    pub ms_bound: f64,
    /// Mean-square convergence: `lambda_1(E[W^2] - J) < 1`.
    pub feasible: bool,
}

/// Static and mean-square convergence rates of a weight choice on its model.
pub fn rates(weights: &WeightVector, model: &LinkStatModel) -> Result<RateReport> {
    let graph = model.graph();
    let all_active = vec![true; graph.n_edges()];
    let w_static = moments::realized_state_matrix(weights, &all_active, graph)?;
    let n = graph.n_nodes();
    let mut shifted = w_static;
    for i in 0..n {
        for j in 0..n {
            shifted[[i, j]] -= 1.0 / n as f64;
        }
    }
    let r_as = sym_eig(&shifted)?.spectral_radius();

    let m = moments::assemble_moment(model, weights.values())?;
    let lambda_1 = sym_eig(&m)?.top();
    Ok(RateReport {
        r_as,
        r_step: r_as,
        ms_bound: 0.5 * lambda_1.ln(),
        feasible: lambda_1 < 1.0,
    })
}

/// Per-mode error amplitudes of the static recursion after `k` steps:
/// `zeta_i(k) = lambda_i^k (q_i^T e0)` over the `N - 1` modes orthogonal to
/// the consensus direction, ordered by eigenvalue modulus descending.
///
/// `e0` must be a consensus error vector (orthogonal to the all-ones
/// direction within `1e-10`).
pub fn mode_decomposition(
    weights: &WeightVector,
    graph: &Supergraph,
    e0: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    let n = graph.n_nodes();
    if e0.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: e0.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidParameter(
            "mode decomposition needs at least two nodes".into(),
        ));
    }
    let norm = e0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let overlap = e0.iter().sum::<f64>().abs() / (n as f64).sqrt();
    if overlap > 1e-10 * norm.max(1.0) {
        return Err(Error::NotOrthogonal(overlap));
    }

    let all_active = vec![true; graph.n_edges()];
    let w = moments::realized_state_matrix(weights, &all_active, graph)?;
    let mut shifted = w.clone();
    for i in 0..n {
        for j in 0..n {
            shifted[[i, j]] -= 1.0 / n as f64;
        }
    }
    // Separate the consensus eigenvector exactly by shifting its eigenvalue
    // above the rest of the spectrum: W - J + mu*J agrees with W - J on the
    // complement of the all-ones direction.
    let fro: f64 = shifted.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mu = fro + 1.0;
    let mut separated = shifted;
    for i in 0..n {
        for j in 0..n {
            separated[[i, j]] += mu / n as f64;
        }
    }
    let decomposition = sym_eig(&separated)?;
    let q = decomposition.eigenvectors();

    let mut consensus_mode = 0usize;
    let mut best_overlap = -1.0f64;
    for col in 0..n {
        let s: f64 = (0..n).map(|row| q[[row, col]]).sum();
        if s.abs() > best_overlap {
            best_overlap = s.abs();
            consensus_mode = col;
        }
    }

    let mut modes: Vec<(f64, f64)> = Vec::with_capacity(n - 1);
    for col in 0..n {
        if col == consensus_mode {
            continue;
        }
        let lambda = decomposition.eigenvalues()[col];
        let coeff: f64 = (0..n).map(|row| q[[row, col]] * e0[row]).sum();
        modes.push((lambda, coeff));
    }
    modes.sort_by(|a, b| {
        b.0.abs()
            .partial_cmp(&a.0.abs())
            .expect("finite eigenvalues")
            .then(b.0.partial_cmp(&a.0).expect("finite eigenvalues"))
    });

    Ok(modes
        .into_iter()
        .map(|(lambda, coeff)| lambda.powi(k as i32) * coeff)
        .collect())
}
