//! Random geometric supergraphs and the per-link failure statistics they carry.
//!
//! The supergraph collects every link with nonzero activation probability.
//! Edges live in a fixed canonical order (pairs `(i, j)` with `i < j`, sorted
//! lexicographically); everything downstream — weights, probabilities,
//! cross-covariances — is indexed by that order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// Undirected supergraph with canonical edge ordering.
///
/// Coordinates are present for geometrically generated graphs and absent for
/// graphs loaded from edge lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Supergraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    coordinates: Option<Vec<[f64; 2]>>,
    incident: Vec<Vec<usize>>,
    adjacent_pairs: Vec<(usize, usize)>,
}

impl Supergraph {
    /// Builds a supergraph from an explicit edge list. Pairs are normalized to
    /// `i < j` and sorted lexicographically; self-loops and duplicates are
    /// rejected.
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::with_coordinates(n_nodes, edges, None)
    }

    fn with_coordinates(
        n_nodes: usize,
        edges: Vec<(usize, usize)>,
        coordinates: Option<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        if let Some(coords) = &coordinates {
            if coords.len() != n_nodes {
                return Err(Error::LengthMismatch {
                    expected: n_nodes,
                    got: coords.len(),
                });
            }
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= n_nodes {
                return Err(Error::NodeIndexOutOfRange {
                    index: j,
                    n_nodes,
                });
            }
            canonical.push((i, j));
        }
        canonical.sort_unstable();
        for w in canonical.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateEdge(w[0].0, w[0].1));
            }
        }

        let mut incident = vec![Vec::new(); n_nodes];
        for (e, &(i, j)) in canonical.iter().enumerate() {
            incident[i].push(e);
            incident[j].push(e);
        }
        let mut adjacent_pairs = Vec::new();
        for list in &incident {
            for (a, &e) in list.iter().enumerate() {
                for &f in &list[a + 1..] {
                    adjacent_pairs.push((e.min(f), e.max(f)));
                }
            }
        }
        adjacent_pairs.sort_unstable();

        Ok(Self {
            n_nodes,
            edges: canonical,
            coordinates,
            incident,
            adjacent_pairs,
        })
    }

    /// Builds the geometric graph on the given coordinates: an edge joins every
    /// pair at Euclidean distance strictly below `radius`.
    pub fn from_coordinates(coordinates: Vec<[f64; 2]>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive and finite, got {radius}"
            )));
        }
        let n = coordinates.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if point_distance(coordinates[i], coordinates[j]) < radius {
                    edges.push((i, j));
                }
            }
        }
        Self::with_coordinates(n, edges, Some(coordinates))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge list in canonical order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn endpoints(&self, e: usize) -> Result<(usize, usize)> {
        self.edges
            .get(e)
            .copied()
            .ok_or(Error::EdgeIndexOutOfRange {
                index: e,
                n_edges: self.edges.len(),
            })
    }

    pub fn coordinates(&self) -> Option<&[[f64; 2]]> {
        self.coordinates.as_deref()
    }

    /// Edge indices incident to node `v`, ascending.
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    /// All unordered pairs of distinct edges sharing a node, with `e < f`,
    /// sorted. These are exactly the pairs that may carry nonzero
    /// cross-covariance.
    pub fn adjacent_edge_pairs(&self) -> &[(usize, usize)] {
        &self.adjacent_pairs
    }

    /// Euclidean length of edge `e`, if coordinates are present.
    pub fn edge_length(&self, e: usize) -> Option<f64> {
        let coords = self.coordinates.as_ref()?;
        let (i, j) = self.edges.get(e).copied()?;
        Some(point_distance(coords[i], coords[j]))
    }

    /// Connectivity flag; generation reports rather than enforces it, the
    /// caller decides whether to resample.
    pub fn is_connected(&self) -> bool {
        if self.n_nodes == 0 {
            return false;
        }
        let mut seen = vec![false; self.n_nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1usize;
        while let Some(v) = stack.pop() {
            for &e in &self.incident[v] {
                let (i, j) = self.edges[e];
                let u = if i == v { j } else { i };
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n_nodes
    }
}

fn point_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Samples `n_nodes` positions i.i.d. uniform on the unit square and connects
/// every pair at distance strictly below `radius`. Regeneration with the same
/// stream is bit-identical.
pub fn generate_geometric<R: Rng + ?Sized>(
    n_nodes: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Supergraph> {
    if n_nodes < 2 {
        return Err(Error::InvalidParameter(format!(
            "geometric generation needs at least 2 nodes, got {n_nodes}"
        )));
    }
    let coordinates: Vec<[f64; 2]> = (0..n_nodes)
        .map(|_| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            [x, y]
        })
        .collect();
    Supergraph::from_coordinates(coordinates, radius)
}

/// Draws coordinates, then selects the connection radius from the order
/// statistics of the pairwise distances so the graph has exactly
/// `target_edges` edges; resamples until the result is connected (or a
/// distance tie makes the exact count unreachable on that draw).
///
/// Returns the graph and the radius that realized it.
pub fn generate_with_edge_count<R: Rng + ?Sized>(
    n_nodes: usize,
    target_edges: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<(Supergraph, f64)> {
    if n_nodes < 2 {
        return Err(Error::InvalidParameter(format!(
            "geometric generation needs at least 2 nodes, got {n_nodes}"
        )));
    }
    let total_pairs = n_nodes * (n_nodes - 1) / 2;
    if target_edges == 0 || target_edges > total_pairs {
        return Err(Error::InvalidParameter(format!(
            "target edge count {target_edges} unreachable for {n_nodes} nodes"
        )));
    }
    for _ in 0..max_attempts {
        let coordinates: Vec<[f64; 2]> = (0..n_nodes)
            .map(|_| {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                [x, y]
            })
            .collect();
        let mut distances = Vec::with_capacity(total_pairs);
        for i in 0..n_nodes {
            for j in i + 1..n_nodes {
                distances.push(point_distance(coordinates[i], coordinates[j]));
            }
        }
        distances.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let inner = distances[target_edges - 1];
        let radius = if target_edges == total_pairs {
            inner + 1.0
        } else {
            let outer = distances[target_edges];
            if outer - inner < 1e-12 {
                continue; // tie at the cut; resample
            }
            0.5 * (inner + outer)
        };
        let graph = Supergraph::from_coordinates(coordinates, radius)?;
        debug_assert_eq!(graph.n_edges(), target_edges);
        if graph.is_connected() {
            return Ok((graph, radius));
        }
    }
    Err(Error::EdgeCountUnreachable {
        target: target_edges,
        attempts: max_attempts,
    })
}

/// Per-edge activation probabilities `P_e = 1 - c1 (delta_e / radius)^2` from
/// the stored node coordinates.
pub fn assign_probabilities(graph: &Supergraph, c1: f64, radius: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&c1) {
        return Err(Error::InvalidParameter(format!(
            "c1 must lie in [0, 1), got {c1}"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    if graph.coordinates().is_none() {
        return Err(Error::MissingCoordinates);
    }
    let mut probs = Vec::with_capacity(graph.n_edges());
    for e in 0..graph.n_edges() {
        let delta = graph.edge_length(e).expect("coordinates present");
        let ratio = delta / radius;
        let p = 1.0 - c1 * ratio * ratio;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidProbability { index: e, value: p });
        }
        probs.push(p);
    }
    Ok(probs)
}

/// Constants a geometric model was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub c1: f64,
    pub c2: f64,
    pub radius: f64,
}

/// Joint first and second moments of the link activation indicators: per-edge
/// probabilities `P` and the cross-covariance matrix `Gamma` with
/// `Gamma_ee = P_e (1 - P_e)` on the diagonal.
#[derive(Debug, Clone)]
pub struct LinkStatModel {
    graph: Supergraph,
    probs: Vec<f64>,
    cross_cov: Array2<f64>,
    params: Option<ModelParams>,
}

impl LinkStatModel {
    /// Model from explicit probabilities and off-diagonal covariance entries
    /// `(e, f, R_ef)` with `e != f`. The diagonal is always `P_e (1 - P_e)`.
    pub fn from_moments(
        graph: &Supergraph,
        probs: Vec<f64>,
        off_diagonal: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let m = graph.n_edges();
        if probs.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: probs.len(),
            });
        }
        for (e, &p) in probs.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) || !p.is_finite() {
                return Err(Error::InvalidProbability { index: e, value: p });
            }
        }
        let mut cross_cov = Array2::zeros((m, m));
        for (e, &p) in probs.iter().enumerate() {
            cross_cov[[e, e]] = p * (1.0 - p);
        }
        for &(e, f, r) in off_diagonal {
            if e >= m || f >= m {
                return Err(Error::EdgeIndexOutOfRange {
                    index: e.max(f),
                    n_edges: m,
                });
            }
            if e == f {
                return Err(Error::InvalidParameter(format!(
                    "cross-covariance entry ({e}, {f}) targets the diagonal"
                )));
            }
            if !r.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite cross-covariance at ({e}, {f})"
                )));
            }
            cross_cov[[e, f]] = r;
            cross_cov[[f, e]] = r;
        }
        Ok(Self {
            graph: graph.clone(),
            probs,
            cross_cov,
            params: None,
        })
    }

    /// All links permanently alive: `P = 1`, `Gamma = 0`. The random-topology
    /// machinery reduces to the static network on this model.
    pub fn deterministic(graph: &Supergraph) -> Self {
        let m = graph.n_edges();
        Self {
            graph: graph.clone(),
            probs: vec![1.0; m],
            cross_cov: Array2::zeros((m, m)),
            params: None,
        }
    }

    /// Independent links with the given probabilities (diagonal `Gamma`).
    pub fn independent(graph: &Supergraph, probs: Vec<f64>) -> Result<Self> {
        Self::from_moments(graph, probs, &[])
    }

    /// The geometric model: `P_e = 1 - c1 (delta_e / radius)^2` and adjacent
    /// pairs correlated with `R = c2 * Pmin * (1 - Pmax)`.
    pub fn geometric(graph: &Supergraph, c1: f64, c2: f64, radius: f64) -> Result<Self> {
        let probs = assign_probabilities(graph, c1, radius)?;
        let mut model = build_correlations(graph, &probs, c2)?;
        model.params = Some(ModelParams { c1, c2, radius });
        Ok(model)
    }

    pub fn graph(&self) -> &Supergraph {
        &self.graph
    }

    pub fn n_edges(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cross_cov(&self) -> &Array2<f64> {
        &self.cross_cov
    }

    pub fn params(&self) -> Option<ModelParams> {
        self.params
    }
}

/// Cross-covariances for spatially correlated link failures: exactly the edge
/// pairs sharing a node are correlated, with `R = c2 * Pmin * (1 - Pmax)`.
pub fn build_correlations(
    graph: &Supergraph,
    probs: &[f64],
    c2: f64,
) -> Result<LinkStatModel> {
    if !(0.0..1.0).contains(&c2) {
        return Err(Error::InvalidParameter(format!(
            "c2 must lie in [0, 1), got {c2}"
        )));
    }
    if probs.len() != graph.n_edges() {
        return Err(Error::LengthMismatch {
            expected: graph.n_edges(),
            got: probs.len(),
        });
    }
    let mut off = Vec::with_capacity(graph.adjacent_edge_pairs().len());
    for &(e, f) in graph.adjacent_edge_pairs() {
        let p_min = probs[e].min(probs[f]);
        let p_max = probs[e].max(probs[f]);
        let r = c2 * p_min * (1.0 - p_max);
        if r != 0.0 {
            off.push((e, f, r));
        }
    }
    LinkStatModel::from_moments(graph, probs.to_vec(), &off)
}

/// Report from [`validate_model`].
#[derive(Debug, Clone)]
pub struct ModelValidity {
    /// Smallest eigenvalue of `Gamma` is at least `-1e-10`.
    pub psd: bool,
    pub min_covariance_eigenvalue: f64,
    /// Off-diagonal entries exceeding the Cauchy-Schwarz bound.
    pub cauchy_schwarz_violations: usize,
    pub max_cauchy_schwarz_excess: f64,
    /// Fraction of clamped conditional means in a fixed-seed probe run of the
    /// topology sampler; `None` when the PSD check failed (no sampler exists).
    pub clamp_fraction: Option<f64>,
    pub probe_samples: usize,
}

impl ModelValidity {
    pub fn cauchy_schwarz_ok(&self) -> bool {
        self.cauchy_schwarz_violations == 0
    }
}

const PSD_TOLERANCE: f64 = 1e-10;
const PROBE_SAMPLES: usize = 10_000;
const PROBE_SEED: u64 = 0x5641_4C49_4441_5445; // fixed; the probe is deterministic

/// Checks that a joint binary distribution with moments `(P, Gamma)` can
/// exist and that the sequential sampler built on them behaves: positive
/// semidefiniteness of `Gamma`, Cauchy-Schwarz on every off-diagonal entry,
/// and the clamp rate of the conditional linear family on a probe run.
pub fn validate_model(model: &LinkStatModel) -> ModelValidity {
    let gamma = model.cross_cov();
    let m = model.n_edges();

    let mut violations = 0usize;
    let mut max_excess = 0.0f64;
    for e in 0..m {
        for f in e + 1..m {
            let bound = (gamma[[e, e]] * gamma[[f, f]]).sqrt();
            let excess = gamma[[e, f]].abs() - bound;
            if excess > 1e-12 {
                violations += 1;
                max_excess = max_excess.max(excess);
            }
        }
    }

    let min_eig = if m == 0 {
        0.0
    } else {
        let decomp = crate::spectrum::sym_eig(gamma).expect("covariance matrix is symmetric");
        *decomp
            .eigenvalues()
            .last()
            .expect("at least one eigenvalue")
    };
    let psd = min_eig >= -PSD_TOLERANCE;

    let clamp_fraction = if psd {
        crate::netsim::clamp_probe(model, min_eig, PROBE_SAMPLES, PROBE_SEED).ok()
    } else {
        None
    };

    ModelValidity {
        psd,
        min_covariance_eigenvalue: min_eig,
        cauchy_schwarz_violations: violations,
        max_cauchy_schwarz_excess: max_excess,
        clamp_fraction,
        probe_samples: PROBE_SAMPLES,
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------
//
// Graph file: header "N M", then M lines "i j P" with 1-based node indices,
// i < j, in canonical edge order. Correlation file: lines "e f R" with
// 1-based edge indices, e < f, for the nonzero off-diagonal entries.

pub fn write_graph<W: Write>(out: &mut W, graph: &Supergraph, probs: &[f64]) -> Result<()> {
    if probs.len() != graph.n_edges() {
        return Err(Error::LengthMismatch {
            expected: graph.n_edges(),
            got: probs.len(),
        });
    }
    writeln!(out, "{} {}", graph.n_nodes(), graph.n_edges())?;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        writeln!(out, "{} {} {:.15e}", i + 1, j + 1, probs[e])?;
    }
    Ok(())
}

pub fn read_graph<R: Read>(input: R) -> Result<(Supergraph, Vec<f64>)> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty graph file"))??;
    let mut parts = header.split_whitespace();
    let n_nodes: usize = parse_field(&mut parts, 1, "node count")?;
    let n_edges: usize = parse_field(&mut parts, 1, "edge count")?;
    let mut edges = Vec::with_capacity(n_edges);
    let mut probs = Vec::with_capacity(n_edges);
    for k in 0..n_edges {
        let line_no = k + 2;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(line_no, "unexpected end of graph file"))??;
        let mut parts = line.split_whitespace();
        let i: usize = parse_field(&mut parts, line_no, "node index")?;
        let j: usize = parse_field(&mut parts, line_no, "node index")?;
        let p: f64 = parse_field(&mut parts, line_no, "probability")?;
        if i == 0 || j == 0 || i >= j {
            return Err(parse_err(line_no, "expected 1-based node pair with i < j"));
        }
        edges.push((i - 1, j - 1));
        probs.push(p);
    }
    let graph = Supergraph::new(n_nodes, edges)?;
    Ok((graph, probs))
}

pub fn write_correlations<W: Write>(out: &mut W, model: &LinkStatModel) -> Result<()> {
    let gamma = model.cross_cov();
    let m = model.n_edges();
    for e in 0..m {
        for f in e + 1..m {
            let r = gamma[[e, f]];
            if r != 0.0 {
                writeln!(out, "{} {} {:.15e}", e + 1, f + 1, r)?;
            }
        }
    }
    Ok(())
}

pub fn read_correlations<R: Read>(input: R) -> Result<Vec<(usize, usize, f64)>> {
    let reader = BufReader::new(input);
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let e: usize = parse_field(&mut parts, line_no, "edge index")?;
        let f: usize = parse_field(&mut parts, line_no, "edge index")?;
        let r: f64 = parse_field(&mut parts, line_no, "cross-covariance")?;
        if e == 0 || f == 0 || e >= f {
            return Err(parse_err(line_no, "expected 1-based edge pair with e < f"));
        }
        entries.push((e - 1, f - 1, r));
    }
    Ok(entries)
}

pub fn write_graph_file<P: AsRef<Path>>(
    path: P,
    graph: &Supergraph,
    probs: &[f64],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_graph(&mut out, graph, probs)
}

pub fn read_graph_file<P: AsRef<Path>>(path: P) -> Result<(Supergraph, Vec<f64>)> {
    read_graph(File::open(path)?)
}

pub fn write_correlation_file<P: AsRef<Path>>(path: P, model: &LinkStatModel) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_correlations(&mut out, model)
}

pub fn read_correlation_file<P: AsRef<Path>>(path: P) -> Result<Vec<(usize, usize, f64)>> {
    read_correlations(File::open(path)?)
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

fn parse_field<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
    what: &str,
) -> Result<T> {
    parts
        .next()
        .ok_or_else(|| parse_err(line, &format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, &format!("unparseable {what}")))
}
