//! Iteration driver shared by every iterative mean/median solver.

use crate::error::{Error, Result};
use crate::linalg::{relative_error, HpdMatrix};
use crate::metric::{distance, log_map, norm, MetricKind};

use super::{SolverConfig, SolverReport, StepRule};

/// Sufficient-decrease constant of the Armijo rule.
pub(crate) const ARMIJO_C: f64 = 1e-4;

/// Median terms closer than this fraction of ‖R‖_F are dropped from the weighted sums.
pub(crate) const D_FLOOR_REL: f64 = 1e-9;

/// One averaging objective linearised at the current iterate.
pub(crate) trait Model {
    type State;

    fn eval(&self, r: HpdMatrix) -> Result<Self::State>;
    fn point<'s>(&self, s: &'s Self::State) -> &'s HpdMatrix;
    fn objective(&self, s: &Self::State) -> f64;
    /// Squared metric norm of the Riemannian gradient.
    fn grad_norm_sq(&self, s: &Self::State) -> f64;
    /// Gradient step length represented by a unit step parameter.
    fn step_scale(&self, s: &Self::State) -> f64;
    fn candidate(&self, s: &Self::State, step: f64) -> Result<HpdMatrix>;
    fn residual(&self, s: &Self::State) -> f64;
    /// True when more than half of the weight sits on the iterate itself (medians).
    fn collapsed(&self, _s: &Self::State) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Stepping {
    FixedPoint,
    Rule(StepRule),
}

fn with_trace(e: Error, trace: &[f64]) -> Error {
    match e {
        Error::DomainError(message) | Error::NumericalFailure { message, .. } => {
            Error::NumericalFailure {
                message,
                trace: trace.to_vec(),
            }
        }
        other => other,
    }
}

pub(crate) fn frob_delta(a: &HpdMatrix, b: &HpdMatrix) -> f64 {
    (a.as_hermitian() - b.as_hermitian()).frobenius_norm()
}

pub(crate) fn run<M: Model>(
    model: &M,
    init: HpdMatrix,
    cfg: &SolverConfig,
    stepping: Stepping,
) -> Result<SolverReport> {
    let mut state = model.eval(init)?;
    let mut objective_trace = vec![model.objective(&state)];
    let mut delta_trace = Vec::new();
    let mut converged = model.collapsed(&state);
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iter {
        let next = match stepping {
            Stepping::FixedPoint => model
                .candidate(&state, 1.0)
                .and_then(|c| model.eval(c))
                .map_err(|e| with_trace(e, &delta_trace))?,
            Stepping::Rule(rule) => {
                line_search(model, &state, rule).map_err(|e| with_trace(e, &delta_trace))?
            }
        };
        let delta = frob_delta(model.point(&next), model.point(&state));
        iterations += 1;
        delta_trace.push(delta);
        objective_trace.push(model.objective(&next));
        state = next;
        if !delta.is_finite() {
            return Err(Error::NumericalFailure {
                message: "iterate became non-finite".into(),
                trace: delta_trace,
            });
        }
        converged = delta <= cfg.tol || model.collapsed(&state);
    }

    let final_delta = delta_trace.last().copied().unwrap_or(0.0);
    let stationarity_residual = model.residual(&state);
    Ok(SolverReport {
        result: model.point(&state).clone(),
        iterations,
        final_delta,
        stationarity_residual,
        converged,
        objective_trace,
        delta_trace,
    })
}

/// Backtracking along the model's descent curve.
///
/// A fixed step is accepted whenever it does not increase the objective; once it
/// does, the search falls back to Armijo sufficient decrease with halving.
fn line_search<M: Model>(model: &M, state: &M::State, rule: StepRule) -> Result<M::State> {
    let (mut step, shrink, max_halvings, strict) = match rule {
        StepRule::Fixed(eta) => (eta, 0.5, 30, false),
        StepRule::Armijo {
            initial,
            shrink,
            max_halvings,
        } => (initial, shrink, max_halvings, true),
    };
    let f0 = model.objective(state);
    let g2 = model.grad_norm_sq(state);
    let scale = model.step_scale(state);
    let slack = 1e-12 * f0.abs();
    let mut last = None;
    let mut last_err = None;
    for attempt in 0..=max_halvings {
        match model.candidate(state, step).and_then(|c| model.eval(c)) {
            Ok(cand) => {
                let f1 = model.objective(&cand);
                let bound = if strict || attempt > 0 {
                    f0 - ARMIJO_C * step * scale * g2
                } else {
                    f0
                };
                if f1 <= bound + slack {
                    return Ok(cand);
                }
                last = Some(cand);
            }
            Err(e @ (Error::DomainError(_) | Error::NumericalFailure { .. })) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        step *= shrink;
    }
    // Every trial step failed the decrease test: the iterate is stationary to
    // working precision, so take the shortest trial step.
    last.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::numerical("line search found no admissible step"))
    })
}

/// Exact optimality test for a median located at a data point.
///
/// The data point `Rₖ` nearest to `r` minimises `Σ wᵢ d(Rᵢ, ·)` locally iff the
/// metric norm of `Σ_{i≠k} wᵢ Log_{Rₖ}(Rᵢ)/d(Rᵢ, Rₖ)` does not exceed the weight
/// sitting on `Rₖ`. Returns `(k, objective at Rₖ)` when it holds.
pub(crate) fn vertex_median(
    kind: MetricKind,
    points: &[HpdMatrix],
    weights: &[f64],
    r: &HpdMatrix,
) -> Result<Option<(usize, f64)>> {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = distance(kind, p, r)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    let k = best.0;
    let pk = &points[k];
    let floor = D_FLOOR_REL * pk.frobenius_norm();
    let mut own = 0.0;
    let mut pull = crate::linalg::HermitianMatrix::zeros(pk.dim());
    let mut objective = 0.0;
    for (p, &w) in points.iter().zip(weights) {
        let d = distance(kind, p, pk)?;
        objective += w * d;
        if d <= floor || relative_error(p.as_matrix(), pk.as_matrix()) == 0.0 {
            own += w;
        } else {
            pull = &pull + &log_map(kind, pk, p)?.scale(w / d);
        }
    }
    let g = norm(kind, pk, &pull)?;
    Ok((g <= own * (1.0 + 1e-12)).then_some((k, objective)))
}
