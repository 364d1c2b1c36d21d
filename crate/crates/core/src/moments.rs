//! Realized state matrices and the closed-form first and second moments of
//! the random consensus iteration.
//!
//! With `A_e = (u_i - u_j)(u_i - u_j)^T` the elementary block of edge
//! `e = {i, j}`, a realization is `W = I - sum_e delta_e W_e A_e` and the
//! error-moment matrix is assembled exactly as
//!
//! `M = I - 2 sum_e P_e W_e A_e + S^2 + corrections - J`
//!
//! where `S = sum_e P_e W_e A_e`, the corrections carry the covariance part
//! `Gamma_ef W_e W_f A_e A_f` (nonzero only for edges sharing a node, since
//! `A_e A_f = 0` otherwise), and `J = 11^T / N`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::supergraph::{LinkStatModel, Supergraph};

/// One real weight per supergraph edge, in canonical edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    /// Rejects NaN and infinite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteWeight(bad));
        }
        Ok(Self { values })
    }

    pub fn constant(value: f64, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}

fn check_weight_len(weights: &[f64], graph: &Supergraph) -> Result<()> {
    if weights.len() != graph.n_edges() {
        return Err(Error::LengthMismatch {
            expected: graph.n_edges(),
            got: weights.len(),
        });
    }
    Ok(())
}

/// Elementary edge block `A_e`: `+1` at `(i, i)` and `(j, j)`, `-1` at
/// `(i, j)` and `(j, i)`. Satisfies `A_e 1 = 0` and `A_e^2 = 2 A_e`.
pub fn edge_outer(graph: &Supergraph, e: usize) -> Result<Array2<f64>> {
    let (i, j) = graph.endpoints(e)?;
    let n = graph.n_nodes();
    let mut a = Array2::zeros((n, n));
    a[[i, i]] = 1.0;
    a[[j, j]] = 1.0;
    a[[i, j]] = -1.0;
    a[[j, i]] = -1.0;
    Ok(a)
}

/// State matrix of one realization: `W = I - sum_{e active} W_e A_e`.
/// Symmetric with unit row sums by construction.
pub fn realized_state_matrix(
    weights: &WeightVector,
    active: &[bool],
    graph: &Supergraph,
) -> Result<Array2<f64>> {
    check_weight_len(weights.values(), graph)?;
    if active.len() != graph.n_edges() {
        return Err(Error::LengthMismatch {
            expected: graph.n_edges(),
            got: active.len(),
        });
    }
    let n = graph.n_nodes();
    let mut w = Array2::eye(n);
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        if !active[e] {
            continue;
        }
        let we = weights[e];
        w[[i, i]] -= we;
        w[[j, j]] -= we;
        w[[i, j]] += we;
        w[[j, i]] += we;
    }
    Ok(w)
}

/// First moment `E[W] = I - sum_e P_e W_e A_e`.
pub fn expected_state_matrix(
    weights: &WeightVector,
    model: &LinkStatModel,
) -> Result<Array2<f64>> {
    let graph = model.graph();
    check_weight_len(weights.values(), graph)?;
    let n = graph.n_nodes();
    let mut w = Array2::eye(n);
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let pw = model.probs()[e] * weights[e];
        w[[i, i]] -= pw;
        w[[j, j]] -= pw;
        w[[i, j]] += pw;
        w[[j, i]] += pw;
    }
    Ok(w)
}

/// The mean-square error dynamics matrix `M = E[W^2] - J` together with the
/// inputs it was built from.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    matrix: Array2<f64>,
    weights: WeightVector,
    model: LinkStatModel,
}

impl MomentMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn model(&self) -> &LinkStatModel {
        &self.model
    }

    /// Checks the structural invariants: symmetry (1e-12), `M 1 = 0`
    /// (1e-10 entrywise) and positive semidefiniteness (eigenvalues above
    /// -1e-10).
    pub fn verify(&self) -> Result<()> {
        let n = self.matrix.nrows();
        let mut max_asym = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                max_asym = max_asym.max((self.matrix[[i, j]] - self.matrix[[j, i]]).abs());
            }
        }
        if max_asym > 1e-12 {
            return Err(Error::NotSymmetric(max_asym));
        }
        for i in 0..n {
            let row_sum: f64 = (0..n).map(|j| self.matrix[[i, j]]).sum();
            if row_sum.abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "moment matrix does not annihilate the all-ones vector (row {i}: {row_sum:e})"
                )));
            }
        }
        let min_eig = *crate::spectrum::sym_eig(&self.matrix)?
            .eigenvalues()
            .last()
            .expect("nonempty spectrum");
        if min_eig < -1e-10 {
            return Err(Error::NotPositiveSemidefinite(min_eig));
        }
        Ok(())
    }
}

/// Closed-form `M = E[W^2] - J`, exact under the model's first and second
/// link moments.
pub fn error_moment_matrix(weights: &WeightVector, model: &LinkStatModel) -> Result<MomentMatrix> {
    let matrix = assemble_moment(model, weights.values())?;
    Ok(MomentMatrix {
        matrix,
        weights: weights.clone(),
        model: model.clone(),
    })
}

/// Raw assembly used by the objective and the optimizer loop.
pub(crate) fn assemble_moment(model: &LinkStatModel, weights: &[f64]) -> Result<Array2<f64>> {
    let graph = model.graph();
    check_weight_len(weights, graph)?;
    let n = graph.n_nodes();
    let probs = model.probs();
    let gamma = model.cross_cov();
    let edges = graph.edges();

    // S = sum_e P_e W_e A_e.
    let mut s: Array2<f64> = Array2::zeros((n, n));
    for (e, &(i, j)) in edges.iter().enumerate() {
        let pw = probs[e] * weights[e];
        s[[i, i]] += pw;
        s[[j, j]] += pw;
        s[[i, j]] -= pw;
        s[[j, i]] -= pw;
    }

    let mut m = s.dot(&s);

    // Variance corrections on the diagonal pairs: Gamma_ee W_e^2 A_e^2 with
    // A_e^2 = 2 A_e.
    for (e, &(i, j)) in edges.iter().enumerate() {
        let c = 2.0 * gamma[[e, e]] * weights[e] * weights[e];
        if c != 0.0 {
            m[[i, i]] += c;
            m[[j, j]] += c;
            m[[i, j]] -= c;
            m[[j, i]] -= c;
        }
    }

    // Covariance corrections: Gamma_ef W_e W_f (A_e A_f + A_f A_e) over edge
    // pairs sharing a node, with A_e A_f = (d_e^T d_f) d_e d_f^T.
    for &(e, f) in graph.adjacent_edge_pairs() {
        let gef = gamma[[e, f]];
        if gef == 0.0 {
            continue;
        }
        let (i, j) = edges[e];
        let (k, l) = edges[f];
        let mut overlap = 0.0;
        if i == k {
            overlap += 1.0;
        }
        if i == l {
            overlap -= 1.0;
        }
        if j == k {
            overlap -= 1.0;
        }
        if j == l {
            overlap += 1.0;
        }
        let c = gef * weights[e] * weights[f] * overlap;
        // d_e d_f^T and its transpose.
        m[[i, k]] += c;
        m[[i, l]] -= c;
        m[[j, k]] -= c;
        m[[j, l]] += c;
        m[[k, i]] += c;
        m[[l, i]] -= c;
        m[[k, j]] -= c;
        m[[l, j]] += c;
    }

    // I - 2S - J.
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        for j in 0..n {
            let base = if i == j { 1.0 } else { 0.0 };
            m[[i, j]] += base - 2.0 * s[[i, j]] - inv_n;
        }
    }

    // Symmetrize away accumulation-order roundoff.
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
    Ok(m)
}

/// Exact derivative of the moment matrix with respect to one weight:
/// `dM/dW_e = (4 P_e W_e - 2 P_e) A_e
///            + sum_{f adjacent to e} Pi_ef W_f (A_e A_f + A_f A_e)`
/// with `Pi_ef = P_e P_f + Gamma_ef`.
pub fn moment_derivative(
    weights: &WeightVector,
    model: &LinkStatModel,
    e: usize,
) -> Result<Array2<f64>> {
    let graph = model.graph();
    check_weight_len(weights.values(), graph)?;
    let (i, j) = graph.endpoints(e)?;
    let n = graph.n_nodes();
    let probs = model.probs();
    let gamma = model.cross_cov();
    let edges = graph.edges();

    let mut d: Array2<f64> = Array2::zeros((n, n));
    let diag = probs[e] * (4.0 * weights[e] - 2.0);
    d[[i, i]] += diag;
    d[[j, j]] += diag;
    d[[i, j]] -= diag;
    d[[j, i]] -= diag;

    for &f in graph
        .incident_edges(i)
        .iter()
        .chain(graph.incident_edges(j).iter())
    {
        if f == e {
            continue;
        }
        let (k, l) = edges[f];
        let pi = probs[e] * probs[f] + gamma[[e, f]];
        let mut overlap = 0.0;
        if i == k {
            overlap += 1.0;
        }
        if i == l {
            overlap -= 1.0;
        }
        if j == k {
            overlap -= 1.0;
        }
        if j == l {
            overlap += 1.0;
        }
        let c = pi * weights[f] * overlap;
        d[[i, k]] += c;
        d[[i, l]] -= c;
        d[[j, k]] -= c;
        d[[j, l]] += c;
        d[[k, i]] += c;
        d[[l, i]] -= c;
        d[[k, j]] -= c;
        d[[l, j]] += c;
    }
    Ok(d)
}

/// Monte Carlo estimate of `E[W^2]`: the average of `W(omega)^2` over sampled
/// topologies. Independent of the closed-form assembly; used to validate it.
pub fn monte_carlo_moment_oracle<R: Rng + ?Sized>(
    weights: &WeightVector,
    model: &LinkStatModel,
    n_samples: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter(
            "need at least one sample".into(),
        ));
    }
    let graph = model.graph();
    check_weight_len(weights.values(), graph)?;
    let sampler = crate::netsim::build_sampler(model)?;
    let n = graph.n_nodes();
    let mut sum: Array2<f64> = Array2::zeros((n, n));
    let mut active = vec![false; graph.n_edges()];
    for _ in 0..n_samples {
        sampler.sample_into(rng, &mut active);
        let w = realized_state_matrix(weights, &active, graph)?;
        sum += &w.dot(&w);
    }
    Ok(sum / n_samples as f64)
}

// ---------------------------------------------------------------------------
// Weight file: M lines "e W_e" with 1-based canonical edge index, written
// with 17 significant digits for exact round-trips.
// ---------------------------------------------------------------------------

pub fn write_weights<W: Write>(out: &mut W, weights: &WeightVector) -> Result<()> {
    for (e, w) in weights.values().iter().enumerate() {
        writeln!(out, "{} {:.16e}", e + 1, w)?;
    }
    Ok(())
}

pub fn read_weights<R: Read>(input: R) -> Result<WeightVector> {
    let reader = BufReader::new(input);
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let e: usize = parts
            .next()
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: "missing edge index".into(),
            })?
            .parse()
            .map_err(|_| Error::Parse {
                line: line_no,
                message: "unparseable edge index".into(),
            })?;
        let w: f64 = parts
            .next()
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: "missing weight".into(),
            })?
            .parse()
            .map_err(|_| Error::Parse {
                line: line_no,
                message: "unparseable weight".into(),
            })?;
        if e != entries.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected edge index {}, got {e}", entries.len() + 1),
            });
        }
        entries.push(w);
    }
    WeightVector::new(entries)
}

pub fn write_weight_file<P: AsRef<Path>>(path: P, weights: &WeightVector) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_weights(&mut out, weights)
}

pub fn read_weight_file<P: AsRef<Path>>(path: P) -> Result<WeightVector> {
    read_weights(File::open(path)?)
}
