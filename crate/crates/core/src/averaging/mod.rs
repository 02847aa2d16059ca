//! Means and medians of HPD matrices under the four metrics.
//!
//! Every solver works on normalised weights internally; the public entry points
//! use uniform weights, and [`solve_weighted`] exposes the general case for
//! contaminated objectives.

mod airm;
mod bw;
pub(crate) mod engine;
mod flat;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HpdMatrix};
use crate::metric::{distance, squared_distance, MetricKind};

use engine::Stepping;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Median,
}

impl Statistic {
    pub const ALL: [Statistic; 2] = [Statistic::Mean, Statistic::Median];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Median => "median",
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Statistic::Mean),
            "median" => Ok(Statistic::Median),
            _ => Err(Error::invalid(format!("unknown statistic '{s}'"))),
        }
    }
}

/// A batch of same-size HPD matrices together with the averaging it asks for.
#[derive(Clone, Debug)]
pub struct AveragingProblem {
    pub matrices: Vec<HpdMatrix>,
    pub kind: MetricKind,
    pub statistic: Statistic,
}

impl AveragingProblem {
    pub fn new(matrices: Vec<HpdMatrix>, kind: MetricKind, statistic: Statistic) -> Result<Self> {
        validate(&matrices)?;
        Ok(Self {
            matrices,
            kind,
            statistic,
        })
    }
}

#[derive(Clone, Debug, Default)]
pub enum Init {
    #[default]
    ArithmeticMean,
    Explicit(HpdMatrix),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    Armijo {
        initial: f64,
        shrink: f64,
        max_halvings: usize,
    },
}

impl StepRule {
    /// Armijo backtracking starting from the full (Weiszfeld-normalised) step.
    pub const ARMIJO: StepRule = StepRule::Armijo {
        initial: 1.0,
        shrink: 0.5,
        max_halvings: 30,
    };

    fn validate(&self) -> Result<()> {
        match *self {
            StepRule::Fixed(eta) if eta > 0.0 && eta.is_finite() => Ok(()),
            StepRule::Fixed(eta) => Err(Error::invalid(format!(
                "step size must be positive, got {eta}"
            ))),
            StepRule::Armijo {
                initial, shrink, ..
            } => {
                if !(initial > 0.0 && initial.is_finite()) {
                    return Err(Error::invalid("Armijo initial step must be positive"));
                }
                if !(shrink > 0.0 && shrink < 1.0) {
                    return Err(Error::invalid("Armijo shrink factor must lie in (0, 1)"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub init: Init,
    /// Stop once ‖R_{t+1} − R_t‖_F ≤ tol.
    pub tol: f64,
    pub max_iter: usize,
    /// `None` selects the per-solver default: fixed η = 1/2 for gradient means,
    /// Armijo from the Weiszfeld step for medians.
    pub step: Option<StepRule>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::benchmark()
    }
}

impl SolverConfig {
    pub const BENCHMARK_TOL: f64 = 1e-5;
    pub const DETECTION_TOL: f64 = 1e-3;
    pub const DEFAULT_MAX_ITER: usize = 500;

    pub fn benchmark() -> Self {
        Self {
            init: Init::ArithmeticMean,
            tol: Self::BENCHMARK_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
            step: None,
        }
    }

    pub fn detection() -> Self {
        Self {
            tol: Self::DETECTION_TOL,
            ..Self::benchmark()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_init(mut self, init: HpdMatrix) -> Self {
        self.init = Init::Explicit(init);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if let Some(step) = &self.step {
            step.validate()?;
        }
        Ok(())
    }

    fn mean_stepping(&self) -> Stepping {
        Stepping::Rule(self.step.unwrap_or(StepRule::Fixed(0.5)))
    }

    fn median_stepping(&self) -> Stepping {
        Stepping::Rule(self.step.unwrap_or(StepRule::ARMIJO))
    }
}

#[derive(Clone, Debug)]
pub struct SolverReport {
    pub result: HpdMatrix,
    pub iterations: usize,
    pub final_delta: f64,
    pub stationarity_residual: f64,
    pub converged: bool,
    /// Objective at the initial point and after every iteration.
    pub objective_trace: Vec<f64>,
    /// ‖R_{t+1} − R_t‖_F per iteration.
    pub delta_trace: Vec<f64>,
}

impl SolverReport {
    fn closed_form(result: HpdMatrix, objective: f64) -> Self {
        Self {
            result,
            iterations: 0,
            final_delta: 0.0,
            stationarity_residual: 0.0,
            converged: true,
            objective_trace: vec![objective],
            delta_trace: Vec::new(),
        }
    }
}

/// Which BW mean iteration to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BwMeanSolver {
    FixedA,
    FixedB,
    Rgd,
}

fn validate(matrices: &[HpdMatrix]) -> Result<()> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::invalid("averaging needs at least one matrix"))?;
    let n = first.dim();
    if let Some(bad) = matrices.iter().position(|m| m.dim() != n) {
        return Err(Error::invalid(format!(
            "matrix {bad} has dimension {} but matrix 0 has {n}",
            matrices[bad].dim()
        )));
    }
    Ok(())
}

fn normalized_weights(matrices: &[HpdMatrix], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    validate(matrices)?;
    let m = matrices.len();
    let w = match weights {
        None => return Ok(vec![1.0 / m as f64; m]),
        Some(w) => w,
    };
    if w.len() != m {
        return Err(Error::invalid(format!(
            "{} weights given for {m} matrices",
            w.len()
        )));
    }
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("weights must not all be zero"));
    }
    Ok(w.iter().map(|x| x / total).collect())
}

fn weighted_sum(matrices: &[HpdMatrix], w: &[f64]) -> CMatrix {
    let n = matrices[0].dim();
    let mut acc = CMatrix::zeros(n, n);
    for (m, &wi) in matrices.iter().zip(w) {
        acc += m.as_matrix() * crate::linalg::C64::from(wi);
    }
    acc
}

fn initial_point(matrices: &[HpdMatrix], w: &[f64], cfg: &SolverConfig) -> Result<HpdMatrix> {
    match &cfg.init {
        Init::ArithmeticMean => HpdMatrix::from_raw(&weighted_sum(matrices, w)),
        Init::Explicit(r) if r.dim() == matrices[0].dim() => Ok(r.clone()),
        Init::Explicit(r) => Err(Error::invalid(format!(
            "initial point has dimension {} but the data have {}",
            r.dim(),
            matrices[0].dim()
        ))),
    }
}

/// Weighted objective `Σ wᵢ d(Rᵢ, R)²` (mean) or `Σ wᵢ d(Rᵢ, R)` (median), with
/// uniform weights 1/m when `weights` is `None`.
pub fn objective(
    kind: MetricKind,
    statistic: Statistic,
    matrices: &[HpdMatrix],
    weights: Option<&[f64]>,
    r: &HpdMatrix,
) -> Result<f64> {
    let w = normalized_weights(matrices, weights)?;
    let mut f = 0.0;
    for (m, wi) in matrices.iter().zip(&w) {
        f += wi
            * match statistic {
                Statistic::Mean => squared_distance(kind, m, r)?,
                Statistic::Median => distance(kind, m, r)?,
            };
    }
    Ok(f)
}

/// Entrywise weighted average `Σ Rᵢ / m`.
pub fn arithmetic_mean(matrices: &[HpdMatrix]) -> Result<HpdMatrix> {
    let w = normalized_weights(matrices, None)?;
    HpdMatrix::from_raw(&weighted_sum(matrices, &w))
}

pub fn le_mean(matrices: &[HpdMatrix]) -> Result<HpdMatrix> {
    let w = normalized_weights(matrices, None)?;
    flat::le_mean(matrices, &w)
}

pub fn airm_mean(matrices: &[HpdMatrix], cfg: &SolverConfig) -> Result<SolverReport> {
    solve_weighted(matrices, None, MetricKind::Airm, Statistic::Mean, cfg)
}

pub fn airm_median(matrices: &[HpdMatrix], cfg: &SolverConfig) -> Result<SolverReport> {
    solve_weighted(matrices, None, MetricKind::Airm, Statistic::Median, cfg)
}

pub fn le_median(matrices: &[HpdMatrix], cfg: &SolverConfig) -> Result<SolverReport> {
    solve_weighted(matrices, None, MetricKind::Le, Statistic::Median, cfg)
}

pub fn euclidean_median(matrices: &[HpdMatrix], cfg: &SolverConfig) -> Result<SolverReport> {
    solve_weighted(
        matrices,
        None,
        MetricKind::Euclidean,
        Statistic::Median,
        cfg,
    )
}

/// `R ← (1/m) Σ (R^{1/2} Rᵢ R^{1/2})^{1/2}`.
pub fn bw_mean_fixed_a(matrices: &[HpdMatrix], cfg: &SolverConfig) -> Result<SolverReport> {
    bw_mean_with(matrices, None, BwMeanSolver::FixedA, cfg)
}

/// `R ← R^{-1/2} ((1/m) Σ (R^{1/2} Rᵢ R^{1/2})^{1/2})² R^{-1/2}`.
pub fn bw_mean_fixed_b(matrices: &[HpdMatrix], cfg: &SolverConfig) -> Result<SolverReport> {
    bw_mean_with(matrices, None, BwMeanSolver::FixedB, cfg)
}

/// Riemannian gradient descent `R ← S R S`, `S = I − 2η (1/m) Σ (I − Rᵢ # R⁻¹)`.
pub fn bw_mean_rgd(matrices: &[HpdMatrix], cfg: &SolverConfig) -> Result<SolverReport> {
    bw_mean_with(matrices, None, BwMeanSolver::Rgd, cfg)
}

pub fn bw_median_rgd(matrices: &[HpdMatrix], cfg: &SolverConfig) -> Result<SolverReport> {
    solve_weighted(matrices, None, MetricKind::Bw, Statistic::Median, cfg)
}

/// Weighted BW mean with an explicit choice of iteration.
pub fn bw_mean_with(
    matrices: &[HpdMatrix],
    weights: Option<&[f64]>,
    solver: BwMeanSolver,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    cfg.validate()?;
    let w = normalized_weights(matrices, weights)?;
    let init = initial_point(matrices, &w, cfg)?;
    bw::mean(matrices, &w, solver, init, cfg)
}

/// Dispatches to the solver for the problem's metric and statistic. BW means use
/// Riemannian gradient descent.
pub fn solve(problem: &AveragingProblem, cfg: &SolverConfig) -> Result<SolverReport> {
    solve_weighted(
        &problem.matrices,
        None,
        problem.kind,
        problem.statistic,
        cfg,
    )
}

/// As [`solve`] with weights `w` (normalised to sum to one).
pub fn solve_weighted(
    matrices: &[HpdMatrix],
    weights: Option<&[f64]>,
    kind: MetricKind,
    statistic: Statistic,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    cfg.validate()?;
    let w = normalized_weights(matrices, weights)?;
    let closed = |r: HpdMatrix| -> Result<SolverReport> {
        let f = objective(kind, statistic, matrices, Some(&w), &r)?;
        Ok(SolverReport::closed_form(r, f))
    };
    match (kind, statistic) {
        (MetricKind::Euclidean, Statistic::Mean) => {
            closed(HpdMatrix::from_raw(&weighted_sum(matrices, &w))?)
        }
        (MetricKind::Le, Statistic::Mean) => closed(flat::le_mean(matrices, &w)?),
        (MetricKind::Bw, Statistic::Mean) => {
            let init = initial_point(matrices, &w, cfg)?;
            bw::mean(matrices, &w, BwMeanSolver::Rgd, init, cfg)
        }
        (MetricKind::Airm, Statistic::Mean) => {
            let init = initial_point(matrices, &w, cfg)?;
            let model = airm::AirmModel::new(matrices, &w, Statistic::Mean);
            engine::run(&model, init, cfg, cfg.mean_stepping())
        }
        (_, Statistic::Median) => {
            let init = initial_point(matrices, &w, cfg)?;
            let report = match kind {
                MetricKind::Airm => {
                    let model = airm::AirmModel::new(matrices, &w, Statistic::Median);
                    engine::run(&model, init, cfg, cfg.median_stepping())?
                }
                MetricKind::Bw => {
                    let model = bw::BwModel::new(matrices, &w, bw::Variant::Median);
                    engine::run(&model, init, cfg, cfg.median_stepping())?
                }
                MetricKind::Le => {
                    // The plain log-domain fixed point unless a step rule is forced.
                    let model = flat::LeMedian::new(matrices, &w);
                    let stepping = cfg.step.map_or(Stepping::FixedPoint, Stepping::Rule);
                    engine::run(&model, init, cfg, stepping)?
                }
                MetricKind::Euclidean => {
                    let model = flat::EuclideanMedian::new(matrices, &w);
                    engine::run(&model, init, cfg, cfg.median_stepping())?
                }
            };
            snap_to_vertex(kind, matrices, &w, report)
        }
    }
}

/// Replaces a median estimate by a data point when that point is provably optimal
/// and no worse than the iterate.
fn snap_to_vertex(
    kind: MetricKind,
    matrices: &[HpdMatrix],
    w: &[f64],
    mut report: SolverReport,
) -> Result<SolverReport> {
    let current = *report
        .objective_trace
        .last()
        .expect("trace holds the initial objective");
    if let Some((k, f)) = engine::vertex_median(kind, matrices, w, &report.result)? {
        if f <= current + 1e-12 * current.abs() {
            report.result = matrices[k].clone();
            report.stationarity_residual = 0.0;
            report.converged = true;
        }
    }
    Ok(report)
}
