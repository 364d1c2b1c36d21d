//! Correlated random-topology sampling and Monte Carlo consensus runs.
//!
//! Link activations are drawn sequentially in canonical edge order through a
//! conditional linear family: edge `e` is Bernoulli with conditional mean
//! `P_e + b_e^T (y_prev - P_prev)`, where `b_e` solves the covariance block
//! of the preceding edges against `e`'s cross-covariance column. Whenever no
//! clamping occurs this reproduces the target means and cross-covariances
//! exactly.

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::moments::WeightVector;
use crate::supergraph::LinkStatModel;

const PSD_TOLERANCE: f64 = 1e-10;
const RIDGE: f64 = 1e-10;
/// Conditional means for strictly interior marginals are clamped to
/// `[CLAMP_EPS, 1 - CLAMP_EPS]`; exact 0/1 marginals are honored exactly.
const CLAMP_EPS: f64 = 1e-9;

/// Sequential sampler for correlated link activations.
///
/// The clamp counter runs across all draws made through a sampler instance;
/// concurrent use aggregates into it.
#[derive(Debug)]
pub struct TopologySampler {
    model: LinkStatModel,
    /// `coeffs[e]` regresses edge `e` on edges `0..e`.
    coeffs: Vec<Vec<f64>>,
    used_ridge: bool,
    clamps: AtomicU64,
    draws: AtomicU64,
}

/// Builds the sampler, first checking that the cross-covariance matrix is
/// positive semidefinite (within `1e-10`); otherwise no joint binary
/// distribution with these moments exists and the caller should shrink the
/// correlation constant.
pub fn build_sampler(model: &LinkStatModel) -> Result<TopologySampler> {
    let min_eig = if model.n_edges() == 0 {
        0.0
    } else {
        *crate::spectrum::sym_eig(model.cross_cov())?
            .eigenvalues()
            .last()
            .expect("nonempty spectrum")
    };
    TopologySampler::build_with_min_eig(model, min_eig)
}

impl TopologySampler {
    pub(crate) fn build_with_min_eig(model: &LinkStatModel, min_eig: f64) -> Result<Self> {
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite(min_eig));
        }
        let (coeffs, used_ridge) = conditional_coefficients(model)?;
        Ok(Self {
            model: model.clone(),
            coeffs,
            used_ridge,
            clamps: AtomicU64::new(0),
            draws: AtomicU64::new(0),
        })
    }

    pub fn model(&self) -> &LinkStatModel {
        &self.model
    }

    /// Regression vector of edge `e` on its predecessors.
    pub fn coefficients(&self, e: usize) -> &[f64] {
        &self.coeffs[e]
    }

    /// True when a degenerate covariance block forced the ridge fallback.
    pub fn used_ridge_fallback(&self) -> bool {
        self.used_ridge
    }

    /// Unclamped conditional mean of edge `e` given the outcomes of edges
    /// `0..e`.
    pub fn conditional_mean(&self, e: usize, prefix: &[bool]) -> f64 {
        let probs = self.model.probs();
        let mut mu = probs[e];
        for (i, &b) in self.coeffs[e].iter().enumerate() {
            if b != 0.0 {
                let y = if prefix[i] { 1.0 } else { 0.0 };
                mu += b * (y - probs[i]);
            }
        }
        mu
    }

    /// Draws one topology into `active`. Edges with an exact 0/1 marginal are
    /// set without consuming randomness.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, active: &mut Vec<bool>) {
        let m = self.model.n_edges();
        active.clear();
        active.resize(m, false);
        let probs = self.model.probs();
        let mut clamped = 0u64;
        let mut drawn = 0u64;
        for e in 0..m {
            let p = probs[e];
            let y = if p >= 1.0 {
                true
            } else if p <= 0.0 {
                false
            } else {
                let mut mu = p;
                for (i, &b) in self.coeffs[e].iter().enumerate() {
                    if b != 0.0 {
                        let yi = if active[i] { 1.0 } else { 0.0 };
                        mu += b * (yi - probs[i]);
                    }
                }
                drawn += 1;
                let bounded = mu.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
                if bounded != mu {
                    clamped += 1;
                }
                rng.random::<f64>() < bounded
            };
            active[e] = y;
        }
        if drawn > 0 {
            self.draws.fetch_add(drawn, Ordering::Relaxed);
        }
        if clamped > 0 {
            self.clamps.fetch_add(clamped, Ordering::Relaxed);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let mut active = Vec::new();
        self.sample_into(rng, &mut active);
        active
    }

    pub fn clamp_count(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }

    pub fn draw_count(&self) -> u64 {
        self.draws.load(Ordering::Relaxed)
    }

    /// Fraction of draws whose conditional mean needed clamping.
    pub fn clamp_fraction(&self) -> f64 {
        let draws = self.draw_count();
        if draws == 0 {
            0.0
        } else {
            self.clamp_count() as f64 / draws as f64
        }
    }
}

/// Incremental semidefinite LDL^T of the covariance matrix, yielding each
/// edge's regression vector. Pivots below tolerance are treated as exact
/// zeros; an inconsistent zero-pivot column (which cannot occur for moments
/// admitting a joint distribution) falls back to a ridge least-squares solve.
fn conditional_coefficients(model: &LinkStatModel) -> Result<(Vec<Vec<f64>>, bool)> {
    let gamma = model.cross_cov();
    let m = model.n_edges();
    let scale = (0..m)
        .map(|e| gamma[[e, e]])
        .fold(0.0f64, f64::max)
        .max(1.0);
    let pivot_tol = 1e-12 * scale;
    let consistency_tol = 1e-8 * scale;

    let mut lower: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut pivots: Vec<f64> = Vec::with_capacity(m);
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut used_ridge = false;

    for e in 0..m {
        // Forward solve L u = gamma[0..e, e].
        let mut u = vec![0.0f64; e];
        for i in 0..e {
            let mut v = gamma[[i, e]];
            for j in 0..i {
                v -= lower[i][j] * u[j];
            }
            u[i] = v;
        }
        let mut inconsistent = false;
        let mut row = vec![0.0f64; e];
        for i in 0..e {
            if pivots[i] > pivot_tol {
                row[i] = u[i] / pivots[i];
            } else {
                row[i] = 0.0;
                if u[i].abs() > consistency_tol {
                    inconsistent = true;
                }
            }
        }

        let b = if inconsistent {
            used_ridge = true;
            ridge_solve(model, e)?
        } else {
            // Backward solve L^T b = row.
            let mut b = vec![0.0f64; e];
            for i in (0..e).rev() {
                let mut v = row[i];
                for j in i + 1..e {
                    v -= lower[j][i] * b[j];
                }
                b[i] = v;
            }
            b
        };
        coeffs.push(b);

        let mut d = gamma[[e, e]];
        for i in 0..e {
            d -= row[i] * u[i];
        }
        if d < -1e-8 * scale {
            return Err(Error::NotPositiveSemidefinite(d));
        }
        pivots.push(d.max(0.0));
        lower.push(row);
    }
    Ok((coeffs, used_ridge))
}

/// Least-squares solve of `(Gamma_block + ridge I) b = gamma_col` by fresh
/// Cholesky; only reached on degenerate, inconsistent blocks.
fn ridge_solve(model: &LinkStatModel, e: usize) -> Result<Vec<f64>> {
    let gamma = model.cross_cov();
    let mut block = vec![0.0f64; e * e];
    for i in 0..e {
        for j in 0..e {
            block[i * e + j] = gamma[[i, j]];
        }
        block[i * e + i] += RIDGE;
    }
    let mut chol = vec![0.0f64; e * e];
    for i in 0..e {
        for j in 0..=i {
            let mut v = block[i * e + j];
            for k in 0..j {
                v -= chol[i * e + k] * chol[j * e + k];
            }
            if i == j {
                if v <= 0.0 {
                    return Err(Error::NotPositiveSemidefinite(v));
                }
                chol[i * e + i] = v.sqrt();
            } else {
                chol[i * e + j] = v / chol[j * e + j];
            }
        }
    }
    let mut y = vec![0.0f64; e];
    for i in 0..e {
        let mut v = gamma[[i, e]];
        for k in 0..i {
            v -= chol[i * e + k] * y[k];
        }
        y[i] = v / chol[i * e + i];
    }
    let mut b = vec![0.0f64; e];
    for i in (0..e).rev() {
        let mut v = y[i];
        for k in i + 1..e {
            v -= chol[k * e + i] * b[k];
        }
        b[i] = v / chol[i * e + i];
    }
    Ok(b)
}

/// Deterministic fixed-seed probe of the clamp rate, used by model
/// validation.
pub(crate) fn clamp_probe(
    model: &LinkStatModel,
    min_eig: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let sampler = TopologySampler::build_with_min_eig(model, min_eig)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active = Vec::new();
    for _ in 0..n_samples {
        sampler.sample_into(&mut rng, &mut active);
    }
    Ok(sampler.clamp_fraction())
}

/// Runs the consensus error recursion `e(k+1) = (W(k) - J) e(k)` for `k_max`
/// steps with a fresh topology per step, returning `||e(k)||^2` for
/// `k = 0..=k_max`. The initial error is `x0` minus its average.
pub fn run_consensus<R: Rng + ?Sized>(
    weights: &WeightVector,
    sampler: &TopologySampler,
    x0: &[f64],
    k_max: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let graph = sampler.model().graph();
    let n = graph.n_nodes();
    if x0.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if weights.len() != graph.n_edges() {
        return Err(Error::LengthMismatch {
            expected: graph.n_edges(),
            got: weights.len(),
        });
    }
    let mean = x0.iter().sum::<f64>() / n as f64;
    let mut err: Vec<f64> = x0.iter().map(|&x| x - mean).collect();
    let mut next = vec![0.0f64; n];
    let mut active = Vec::new();

    let mut out = Vec::with_capacity(k_max + 1);
    out.push(err.iter().map(|x| x * x).sum());
    for _ in 0..k_max {
        sampler.sample_into(rng, &mut active);
        next.copy_from_slice(&err);
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            if active[e] {
                let flow = weights[e] * (err[i] - err[j]);
                next[i] -= flow;
                next[j] += flow;
            }
        }
        let drift = next.iter().sum::<f64>() / n as f64;
        for v in next.iter_mut() {
            *v -= drift;
        }
        std::mem::swap(&mut err, &mut next);
        out.push(err.iter().map(|x| x * x).sum());
    }
    Ok(out)
}

/// Mean squared consensus error over repeated trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTrajectory {
    /// Mean of `||e(k)||^2` over trials, `k = 0..=K`.
    pub mse: Vec<f64>,
    /// Standard error of each mean; all zeros for a single trial.
    pub stderr: Vec<f64>,
    pub n_trials: usize,
    pub seed: u64,
}

impl ErrorTrajectory {
    pub fn horizon(&self) -> usize {
        self.mse.len().saturating_sub(1)
    }

    /// Writes the CSV form: header `k,mse,stderr`, one row per iteration.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "k,mse,stderr")?;
        for (k, (mse, se)) in self.mse.iter().zip(&self.stderr).enumerate() {
            writeln!(out, "{k},{mse:.16e},{se:.16e}")?;
        }
        Ok(())
    }

    /// Reads the CSV form; `n_trials` and `seed` are not part of the file and
    /// come back as zero.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: "empty trajectory file".into(),
            })??;
        if header.trim() != "k,mse,stderr" {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header {header:?}"),
            });
        }
        let mut mse = Vec::new();
        let mut stderr = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let line_no = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let k: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "bad iteration index".into(),
                })?;
            if k != mse.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected iteration {}, got {k}", mse.len()),
                });
            }
            let m: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "bad mse value".into(),
                })?;
            let se: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "bad stderr value".into(),
                })?;
            mse.push(m);
            stderr.push(se);
        }
        Ok(Self {
            mse,
            stderr,
            n_trials: 0,
            seed: 0,
        })
    }
}

/// Stream id offset separating trial substreams from other consumers of the
/// same master seed.
const TRIAL_STREAM_BASE: u64 = 0;

/// Monte Carlo mean squared error over `n_trials` independent trials.
///
/// Each trial draws a standard-normal initial condition, centers and
/// normalizes it to a unit-norm error vector, and runs the consensus
/// recursion on an independent topology stream. Trial `t` uses the ChaCha
/// stream `t` of the master seed, so results do not depend on how trials are
/// partitioned across workers.
pub fn monte_carlo_mse(
    weights: &WeightVector,
    sampler: &TopologySampler,
    k_max: usize,
    n_trials: usize,
    seed: u64,
) -> Result<ErrorTrajectory> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let n = sampler.model().graph().n_nodes();
    let mut sum = vec![0.0f64; k_max + 1];
    let mut sum_sq = vec![0.0f64; k_max + 1];
    for t in 0..n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(TRIAL_STREAM_BASE + t as u64);
        let e0 = unit_error_vector(n, &mut rng);
        let traj = run_consensus(weights, sampler, &e0, k_max, &mut rng)?;
        for (k, v) in traj.into_iter().enumerate() {
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let nf = n_trials as f64;
    let mse: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let stderr: Vec<f64> = if n_trials == 1 {
        vec![0.0; k_max + 1]
    } else {
        sum_sq
            .iter()
            .zip(&mse)
            .map(|(&sq, &mean)| {
                let var = ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
                (var / nf).sqrt()
            })
            .collect()
    };
    Ok(ErrorTrajectory {
        mse,
        stderr,
        n_trials,
        seed,
    })
}

/// Centered, unit-norm error vector from i.i.d. standard normals.
fn unit_error_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        let mut e: Vec<f64> = x.iter().map(|&v| v - mean).collect();
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for v in e.iter_mut() {
                *v /= norm;
            }
            return e;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supergraph::{LinkStatModel, Supergraph};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn two_edge_path() -> Supergraph {
        Supergraph::new(3, vec![(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn diagonal_covariance_gives_zero_coefficients() {
        let g = two_edge_path();
        let model = LinkStatModel::independent(&g, vec![0.5, 0.7]).unwrap();
        let sampler = build_sampler(&model).unwrap();
        assert!(sampler.coefficients(0).is_empty());
        assert_eq!(sampler.coefficients(1), &[0.0]);
        assert!(!sampler.used_ridge_fallback());
    }

    #[test]
    fn two_edge_regression_coefficient() {
        let g = two_edge_path();
        let model =
            LinkStatModel::from_moments(&g, vec![0.5, 0.5], &[(0, 1, 0.1)]).unwrap();
        let sampler = build_sampler(&model).unwrap();
        // b = 0.1 / 0.25 = 0.4, so the conditional mean is 0.5 +- 0.2.
        assert!((sampler.coefficients(1)[0] - 0.4).abs() < 1e-14);
        assert!((sampler.conditional_mean(1, &[true]) - 0.7).abs() < 1e-14);
        assert!((sampler.conditional_mean(1, &[false]) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn non_psd_model_is_rejected() {
        let g = two_edge_path();
        let model =
            LinkStatModel::from_moments(&g, vec![0.5, 0.5], &[(0, 1, 0.3)]).unwrap();
        assert!(matches!(
            build_sampler(&model),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn certain_links_always_active_without_consuming_randomness() {
        let g = two_edge_path();
        let model = LinkStatModel::from_moments(&g, vec![1.0, 1.0], &[]).unwrap();
        let sampler = build_sampler(&model).unwrap();
        let mut r = rng(4);
        let before: f64 = r.clone().random();
        for _ in 0..50 {
            assert_eq!(sampler.sample(&mut r), vec![true, true]);
        }
        // No draws consumed, no clamps counted.
        assert_eq!(r.random::<f64>(), before);
        assert_eq!(sampler.draw_count(), 0);
        assert_eq!(sampler.clamp_count(), 0);
    }

    #[test]
    fn empirical_frequencies_match_probabilities() {
        let g = two_edge_path();
        let model =
            LinkStatModel::from_moments(&g, vec![0.35, 0.8], &[(0, 1, 0.05)]).unwrap();
        let sampler = build_sampler(&model).unwrap();
        let mut r = rng(11);
        let draws = 100_000usize;
        let mut counts = [0usize; 2];
        let mut joint = 0usize;
        let mut active = Vec::new();
        for _ in 0..draws {
            sampler.sample_into(&mut r, &mut active);
            for e in 0..2 {
                if active[e] {
                    counts[e] += 1;
                }
            }
            if active[0] && active[1] {
                joint += 1;
            }
        }
        let f0 = counts[0] as f64 / draws as f64;
        let f1 = counts[1] as f64 / draws as f64;
        assert!((f0 - 0.35).abs() < 0.01, "{f0}");
        assert!((f1 - 0.8).abs() < 0.01, "{f1}");
        let cov = joint as f64 / draws as f64 - f0 * f1;
        assert!((cov - 0.05).abs() < 0.02, "{cov}");
        assert_eq!(sampler.clamp_count(), 0);
    }

    /// Exhaustive check of the sequential construction on a tiny model: the
    /// joint distribution implied by the conditional means must reproduce the
    /// target first and second moments exactly when nothing clamps.
    #[test]
    fn enumeration_reproduces_moments_exactly() {
        let g = Supergraph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let model = LinkStatModel::from_moments(
            &g,
            vec![0.55, 0.4, 0.7],
            &[(0, 1, 0.06), (1, 2, 0.04)],
        )
        .unwrap();
        let sampler = build_sampler(&model).unwrap();
        let m = 3usize;
        let mut mean = vec![0.0f64; m];
        let mut second = vec![vec![0.0f64; m]; m];
        for mask in 0..(1usize << m) {
            let outcome: Vec<bool> = (0..m).map(|e| mask >> e & 1 == 1).collect();
            let mut p = 1.0f64;
            for e in 0..m {
                let mu = sampler.conditional_mean(e, &outcome[..e]);
                assert!((-1e-12..=1.0 + 1e-12).contains(&mu), "mean out of range");
                p *= if outcome[e] { mu } else { 1.0 - mu };
            }
            for e in 0..m {
                if outcome[e] {
                    mean[e] += p;
                    for f in 0..m {
                        if outcome[f] {
                            second[e][f] += p;
                        }
                    }
                }
            }
        }
        let gamma = model.cross_cov();
        for e in 0..m {
            assert!((mean[e] - model.probs()[e]).abs() < 1e-12, "mean {e}");
            for f in 0..m {
                let cov = second[e][f] - mean[e] * mean[f];
                assert!(
                    (cov - gamma[[e, f]]).abs() < 1e-12,
                    "cov ({e}, {f}): {cov} vs {}",
                    gamma[[e, f]]
                );
            }
        }
    }

    #[test]
    fn consensus_run_trivial_cases() {
        let g = two_edge_path();
        let model = LinkStatModel::independent(&g, vec![0.9, 0.9]).unwrap();
        let sampler = build_sampler(&model).unwrap();
        let w = WeightVector::constant(0.3, 2).unwrap();

        // K = 0 returns only the initial energy.
        let x0 = [1.0, -0.5, -0.5];
        let traj = run_consensus(&w, &sampler, &x0, 0, &mut rng(1)).unwrap();
        assert_eq!(traj.len(), 1);
        assert!((traj[0] - 1.5).abs() < 1e-12);

        // A consensus initial condition stays at zero error.
        let ones = [2.5, 2.5, 2.5];
        let traj = run_consensus(&w, &sampler, &ones, 10, &mut rng(2)).unwrap();
        for v in traj {
            assert!(v.abs() < 1e-28);
        }
    }

    #[test]
    fn deterministic_run_matches_mode_energies() {
        let g = two_edge_path();
        let det = LinkStatModel::deterministic(&g);
        let sampler = build_sampler(&det).unwrap();
        let w = WeightVector::constant(0.25, 2).unwrap();
        let x0 = [0.9, -0.1, -0.8];
        let traj = run_consensus(&w, &sampler, &x0, 100, &mut rng(3)).unwrap();
        let mean = x0.iter().sum::<f64>() / 3.0;
        let e0: Vec<f64> = x0.iter().map(|&x| x - mean).collect();
        for (k, &got) in traj.iter().enumerate() {
            let modes =
                crate::spectrum::mode_decomposition(&w, &g, &e0, k).unwrap();
            let want: f64 = modes.iter().map(|z| z * z).sum();
            let rel = (got - want).abs() / want.max(1e-300);
            assert!(rel < 1e-8 || got < 1e-250, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn single_trial_has_zero_stderr() {
        let g = two_edge_path();
        let model = LinkStatModel::independent(&g, vec![0.8, 0.6]).unwrap();
        let sampler = build_sampler(&model).unwrap();
        let w = WeightVector::constant(0.3, 2).unwrap();
        let traj = monte_carlo_mse(&w, &sampler, 20, 1, 99).unwrap();
        assert!(traj.stderr.iter().all(|&s| s == 0.0));
        assert!((traj.mse[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let g = two_edge_path();
        let model =
            LinkStatModel::from_moments(&g, vec![0.7, 0.6], &[(0, 1, 0.03)]).unwrap();
        let s1 = build_sampler(&model).unwrap();
        let s2 = build_sampler(&model).unwrap();
        let w = WeightVector::constant(0.35, 2).unwrap();
        let a = monte_carlo_mse(&w, &s1, 50, 25, 1234).unwrap();
        let b = monte_carlo_mse(&w, &s2, 50, 25, 1234).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let traj = ErrorTrajectory {
            mse: vec![1.0, 0.25, 1.0 / 3.0],
            stderr: vec![0.0, 0.01, 0.0025],
            n_trials: 4,
            seed: 9,
        };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = ErrorTrajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.mse, traj.mse);
        assert_eq!(back.stderr, traj.stderr);
    }

    #[test]
    fn mass_is_conserved_by_realized_matrices() {
        let g = two_edge_path();
        let model =
            LinkStatModel::from_moments(&g, vec![0.7, 0.6], &[(0, 1, 0.03)]).unwrap();
        let sampler = build_sampler(&model).unwrap();
        let w = WeightVector::constant(0.35, 2).unwrap();
        let mut r = rng(8);
        let mut x = vec![0.4, -1.2, 2.2];
        let target: f64 = x.iter().sum::<f64>() / 3.0;
        let mut active = Vec::new();
        for _ in 0..200 {
            sampler.sample_into(&mut r, &mut active);
            let state =
                crate::moments::realized_state_matrix(&w, &active, &g).unwrap();
            let mut next = vec![0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    next[i] += state[[i, j]] * x[j];
                }
            }
            x = next;
            let avg = x.iter().sum::<f64>() / 3.0;
            assert!((avg - target).abs() < 1e-12);
        }
    }
}
