//! Weight design by the feasible/infeasible switching subgradient method,
//! plus the baseline weight rules it is compared against.
//!
//! At a feasible point (`phi_1 < 1 - margin`) the iterate steps along a
//! subgradient of the objective `phi_n`; at an infeasible point it steps
//! along a subgradient of the constraint function `phi_1`. The best feasible
//! iterate seen is returned.

use crate::error::{Error, Result};
use crate::moments::{self, WeightVector};
use crate::spectrum;
use crate::supergraph::{LinkStatModel, Supergraph};

/// Step-size rule of the subgradient scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `a` at every iteration.
    Constant,
    /// `a / sqrt(t)`.
    InvSqrt,
    /// `a / t`.
    InvT,
}

/// Schedule of the subgradient scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSchedule {
    pub step_rule: StepRule,
    /// Base step coefficient.
    pub a: f64,
    /// Divide the step by `max(|g_0|, |g_t|)`: near the optimum this is the
    /// scale-free `a / |g_0|` coefficient, while far from it the move length
    /// in weight space is capped by the bare step, which keeps the iterates
    /// bounded on objectives whose subgradients grow with distance.
    pub normalize_by_initial_subgradient: bool,
    pub max_iters: usize,
    /// Slack converting the open constraint `phi_1 < 1` into the checkable
    /// `phi_1 < 1 - margin`.
    pub feasibility_margin: f64,
    /// Stop once an improvement of the best value falls below this gap.
    pub target_gap: Option<f64>,
}

impl Default for SubgradientSchedule {
    fn default() -> Self {
        Self {
            step_rule: StepRule::InvSqrt,
            a: 0.1,
            normalize_by_initial_subgradient: true,
            max_iters: 2000,
            feasibility_margin: 1e-3,
            target_gap: None,
        }
    }
}

impl SubgradientSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step coefficient must be positive, got {}",
                self.a
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.feasibility_margin > 0.0 && self.feasibility_margin < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "feasibility margin must lie in (0, 1), got {}",
                self.feasibility_margin
            )));
        }
        Ok(())
    }

    fn step(&self, scale: f64, t: usize) -> f64 {
        match self.step_rule {
            StepRule::Constant => scale,
            StepRule::InvSqrt => scale / (t as f64).sqrt(),
            StepRule::InvT => scale / t as f64,
        }
    }
}

/// One evaluated iterate of the subgradient run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Objective value `phi_n` at the iterate.
    pub value: f64,
    /// Whether the iterate satisfied `phi_1 < 1 - margin`.
    pub feasible: bool,
    /// Step size taken from the iterate.
    pub step: f64,
}

/// Outcome of a subgradient run.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_weights: WeightVector,
    /// Objective value at the best feasible iterate.
    pub best_value: f64,
    /// Every evaluated iterate, in order.
    pub trace: Vec<IterationRecord>,
    pub iterations_used: usize,
}

impl OptimizationResult {
    /// Writes the trace CSV: header `iter,value,feasible,step`.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "iter,value,feasible,step")?;
        for (t, rec) in self.trace.iter().enumerate() {
            writeln!(
                out,
                "{},{:.16e},{},{:.16e}",
                t + 1,
                rec.value,
                rec.feasible,
                rec.step
            )?;
        }
        Ok(())
    }
}

/// Metropolis weights `W_e = 1 / (1 + max(d_i, d_j))` from the supergraph
/// degrees; the standard heuristic baseline.
pub fn metropolis_weights(graph: &Supergraph) -> WeightVector {
    let values = graph
        .edges()
        .iter()
        .map(|&(i, j)| 1.0 / (1.0 + graph.degree(i).max(graph.degree(j)) as f64))
        .collect();
    WeightVector::new(values).expect("metropolis weights are finite")
}

/// Supergraph-based weights: the weights minimizing `psi_1` on the supergraph
/// treated as static, found by the module's own subgradient scheme from the
/// Metropolis initialization.
pub fn sgbw_weights(graph: &Supergraph) -> Result<WeightVector> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let init = metropolis_weights(graph);
    let result = optimize_static(1, graph, &init, &SubgradientSchedule::default())?;
    Ok(result.best_weights)
}

/// Minimizes `phi_n` over the weights subject to `phi_1 < 1`, by switching
/// subgradient steps. Returns the best feasible iterate; errors when no
/// feasible iterate is ever seen (the error carries the trace).
pub fn optimize(
    n: usize,
    model: &LinkStatModel,
    init: &WeightVector,
    schedule: &SubgradientSchedule,
) -> Result<OptimizationResult> {
    schedule.validate()?;
    let graph = model.graph();
    let n_nodes = graph.n_nodes();
    if n_nodes < 2 || n < 1 || n > n_nodes - 1 {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue count n must lie in 1..={} for {n_nodes} nodes, got {n}",
            n_nodes.saturating_sub(1)
        )));
    }
    if init.len() != graph.n_edges() {
        return Err(Error::LengthMismatch {
            expected: graph.n_edges(),
            got: init.len(),
        });
    }

    let mut x: Vec<f64> = init.values().to_vec();
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut step_scale: Option<f64> = None;
    let mut iterations_used = 0usize;
    // Consecutive iterates have nearby moment matrices; seeding each
    // decomposition with the previous eigenbasis cuts the sweep count.
    let mut warm: Option<ndarray::Array2<f64>> = None;

    for t in 1..=schedule.max_iters {
        iterations_used = t;
        let m = moments::assemble_moment(model, &x)?;
        let decomposition = spectrum::sym_eig_with_basis(&m, warm.as_ref())?;
        warm = Some(decomposition.eigenvectors().clone());
        let phi_1 = decomposition.top();
        let value = decomposition.kyfan_sum(n).max(0.0);
        let feasible = phi_1 < 1.0 - schedule.feasibility_margin;

        let mut converged = false;
        if feasible {
            let improved = best.as_ref().map_or(true, |(_, bv)| value < *bv);
            if improved {
                let gap_hit = match (&best, schedule.target_gap) {
                    (Some((_, bv)), Some(gap)) => bv - value < gap,
                    _ => false,
                };
                best = Some((x.clone(), value));
                converged = gap_hit;
            }
        }

        let grad = if feasible {
            spectrum::subgrad_from_decomposition(&x, model, &decomposition, n)
        } else {
            spectrum::subgrad_from_decomposition(&x, model, &decomposition, 1)
        };
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if feasible && grad_norm < 1e-14 {
            // Stationary feasible point of a convex objective: optimal.
            trace.push(IterationRecord {
                value,
                feasible,
                step: 0.0,
            });
            break;
        }

        let initial_norm = *step_scale.get_or_insert(grad_norm);
        let divisor = if schedule.normalize_by_initial_subgradient {
            initial_norm.max(grad_norm).max(1e-300)
        } else {
            1.0
        };
        let step = schedule.step(schedule.a / divisor, t);
        trace.push(IterationRecord {
            value,
            feasible,
            step,
        });
        if converged {
            break;
        }
        if grad_norm == 0.0 {
            // Infeasible stationary point: no descent direction for the
            // constraint; further iterations cannot help.
            break;
        }
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= step * gi;
        }
        if x.iter().any(|v| !v.is_finite()) {
            if best.is_some() {
                break;
            }
            return Err(Error::Diverged(t));
        }
    }

    match best {
        Some((weights, value)) => Ok(OptimizationResult {
            best_weights: WeightVector::new(weights)?,
            best_value: value,
            trace,
            iterations_used,
        }),
        None => Err(Error::NoFeasibleIterate {
            iterations: iterations_used,
            trace,
        }),
    }
}

/// Minimizes the static objective `psi_n` on the graph: identical to running
/// [`optimize`] on the deterministic (all links alive) model.
pub fn optimize_static(
    n: usize,
    graph: &Supergraph,
    init: &WeightVector,
    schedule: &SubgradientSchedule,
) -> Result<OptimizationResult> {
    let model = LinkStatModel::deterministic(graph);
    optimize(n, &model, init, schedule)
}

/// Metropolis initialization made feasible for the model: the weights are
/// halved (up to 20 times) until `phi_1 < 1 - margin`; shrinking toward zero
/// approaches `phi_1 = 1` from feasible directions on connected graphs.
pub fn feasible_metropolis_init(
    model: &LinkStatModel,
    feasibility_margin: f64,
) -> Result<WeightVector> {
    const MAX_HALVINGS: usize = 20;
    let mut weights = metropolis_weights(model.graph());
    for _ in 0..=MAX_HALVINGS {
        if spectrum::phi_n(&weights, model, 1)? < 1.0 - feasibility_margin {
            return Ok(weights);
        }
        weights = WeightVector::new(weights.values().iter().map(|w| 0.5 * w).collect())?;
    }
    Err(Error::InfeasibleInitialization(MAX_HALVINGS))
}
