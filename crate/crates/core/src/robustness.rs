//! Influence functions of geometric means and medians under outlier contamination.
//!
//! The contaminated objective mixes the clean data with weight `1 − ε` and the
//! outliers with weight `ε`. Writing the contaminated estimate as `R̄ + εH + O(ε²)`
//! and differentiating the stationarity condition at `ε = 0` gives the linear
//! equation `D G[H] = −Gₒ(R̄)`, where `G` is the clean gradient field and `Gₒ` the
//! outlier one. It is solved in an orthonormal Hermitian basis, with the columns
//! of `D G` taken by central differences of the analytic gradient.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{self, SolverConfig, SolverReport, Statistic};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_basis, CMatrix, HermitianBasis, HermitianMatrix, HpdMatrix, C64};
use crate::metric::{distance, grad_sq_dist, norm, MetricKind};
use crate::montecarlo::{hash_json, Exec};
use crate::signal::{
    make_observation, toeplitz_cov, ClutterModel, ClutterParams, Hypothesis, RngStream, Snapshot,
    SteeringSpec,
};

/// Largest condition number of the Hessian-action system that is still solved.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Relative finite-difference step `h / ‖R̄‖_F`.
pub const FD_STEP_REL: f64 = 1e-5;

/// Median terms within this fraction of ‖R‖_F of the evaluation point are dropped.
const D_FLOOR_REL: f64 = 1e-9;

const PHASE_CLEAN: u32 = 0;
const PHASE_OUTLIERS: u32 = 1;

/// `(1/k) Σ grad d²(Pᵢ, R)` for means, `(1/k) Σ grad d(Pᵢ, R)` for medians. Median
/// terms closer than the floor contribute nothing.
fn gradient_field(
    kind: MetricKind,
    statistic: Statistic,
    points: &[HpdMatrix],
    r: &HpdMatrix,
) -> Result<HermitianMatrix> {
    let n = r.dim();
    let mut acc = CMatrix::zeros(n, n);
    let floor = D_FLOOR_REL * r.frobenius_norm();
    for p in points {
        let g = grad_sq_dist(kind, p, r)?;
        match statistic {
            Statistic::Mean => acc += g.as_matrix(),
            Statistic::Median => {
                // ‖grad d²‖ = 2d, and unlike the BW trace formula it does not
                // cancel catastrophically when p is close to r.
                let d = 0.5 * norm(kind, r, &g)?;
                if d > floor {
                    acc += g.as_matrix() * C64::from(0.5 / d);
                }
            }
        }
    }
    Ok(HermitianMatrix::symmetrized(
        &(acc / C64::from(points.len() as f64)),
    ))
}

fn check_sets(clean: &[HpdMatrix], outliers: &[HpdMatrix]) -> Result<usize> {
    let first = clean
        .first()
        .ok_or_else(|| Error::invalid("the clean set is empty"))?;
    if outliers.is_empty() {
        return Err(Error::invalid("the outlier set is empty"));
    }
    let n = first.dim();
    if clean.iter().chain(outliers).any(|p| p.dim() != n) {
        return Err(Error::invalid(
            "clean data and outliers have different dimensions",
        ));
    }
    Ok(n)
}

/// Riemannian gradient at `r` of
/// `(1−ε)(1/m) Σ d^k(Rᵢ, R) + ε (1/n) Σ d^k(Pⱼ, R)`, with `k = 2` for means and
/// `k = 1` for medians.
pub fn contaminated_grad(
    kind: MetricKind,
    statistic: Statistic,
    clean: &[HpdMatrix],
    outliers: &[HpdMatrix],
    eps: f64,
    r: &HpdMatrix,
) -> Result<HermitianMatrix> {
    let n = check_sets(clean, outliers)?;
    if r.dim() != n {
        return Err(Error::invalid("evaluation point has the wrong dimension"));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("eps must lie in [0, 1), got {eps}")));
    }
    let g = gradient_field(kind, statistic, clean, r)?.scale(1.0 - eps);
    if eps == 0.0 {
        return Ok(g);
    }
    let o = gradient_field(kind, statistic, outliers, r)?.scale(eps);
    Ok(&g + &o)
}

/// Contaminated objective matching [`contaminated_grad`].
pub fn contaminated_objective(
    kind: MetricKind,
    statistic: Statistic,
    clean: &[HpdMatrix],
    outliers: &[HpdMatrix],
    eps: f64,
    r: &HpdMatrix,
) -> Result<f64> {
    check_sets(clean, outliers)?;
    let fc = averaging::objective(kind, statistic, clean, None, r)?;
    let fo = averaging::objective(kind, statistic, outliers, None, r)?;
    Ok((1.0 - eps) * fc + eps * fo)
}

/// The clean estimate `R̄` with its linearised stationarity operator, factored once
/// and reused for any number of outlier sets.
#[derive(Clone, Debug)]
pub struct InfluenceOperator {
    kind: MetricKind,
    statistic: Statistic,
    rbar: HpdMatrix,
    basis: HermitianBasis,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
    report: SolverReport,
}

impl InfluenceOperator {
    pub fn new(
        kind: MetricKind,
        statistic: Statistic,
        clean: &[HpdMatrix],
        cfg: &SolverConfig,
    ) -> Result<Self> {
        let report = averaging::solve_weighted(clean, None, kind, statistic, cfg)?;
        Self::at(kind, statistic, clean, report)
    }

    /// Builds the operator at an already computed estimate.
    pub fn at(
        kind: MetricKind,
        statistic: Statistic,
        clean: &[HpdMatrix],
        report: SolverReport,
    ) -> Result<Self> {
        let rbar = report.result.clone();
        let n = rbar.dim();
        if clean.is_empty() || clean.iter().any(|p| p.dim() != n) {
            return Err(Error::invalid("clean data do not match the estimate"));
        }
        let scale = rbar.frobenius_norm();
        if statistic == Statistic::Median {
            for (index, p) in clean.iter().enumerate() {
                let d = distance(kind, p, &rbar)?;
                if d <= D_FLOOR_REL * scale {
                    return Err(Error::DegenerateMedian { index, distance: d });
                }
            }
        }

        let basis = hermitian_basis(n)?;
        let h = FD_STEP_REL * scale;
        let dim = basis.len();
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        for (col, e) in basis.elements().iter().enumerate() {
            let step = e.scale(h);
            let plus = HpdMatrix::new(rbar.as_hermitian() + &step)?;
            let minus = HpdMatrix::new(rbar.as_hermitian() - &step)?;
            let gp = gradient_field(kind, statistic, clean, &plus)?;
            let gm = gradient_field(kind, statistic, clean, &minus)?;
            let diff = (&gp - &gm).scale(0.5 / h);
            for (row, c) in basis.coefficients(&diff).into_iter().enumerate() {
                a[(row, col)] = c;
            }
        }

        let sv = a.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        if !(condition <= CONDITION_LIMIT) {
            return Err(Error::SingularHessian {
                condition,
                limit: CONDITION_LIMIT,
            });
        }
        Ok(Self {
            kind,
            statistic,
            rbar,
            basis,
            lu: a.lu(),
            condition,
            report,
        })
    }

    pub fn rbar(&self) -> &HpdMatrix {
        &self.rbar
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn report(&self) -> &SolverReport {
        &self.report
    }

    /// First-order shift `H` caused by the outlier set.
    pub fn influence(&self, outliers: &[HpdMatrix]) -> Result<HermitianMatrix> {
        if outliers.is_empty() {
            return Err(Error::invalid("the outlier set is empty"));
        }
        if outliers.iter().any(|p| p.dim() != self.rbar.dim()) {
            return Err(Error::invalid("outliers have the wrong dimension"));
        }
        let g = gradient_field(self.kind, self.statistic, outliers, &self.rbar)?;
        let b = nalgebra::DVector::from_vec(self.basis.coefficients(&g));
        let x = self
            .lu
            .solve(&(-b))
            .ok_or_else(|| Error::numerical("Hessian-action system is singular"))?;
        Ok(self.basis.assemble(x.as_slice()))
    }
}

/// Influence matrix `H` of the outliers on the clean estimate, computed at the
/// clean mean or median obtained under `cfg`.
pub fn influence_matrix(
    kind: MetricKind,
    statistic: Statistic,
    clean: &[HpdMatrix],
    outliers: &[HpdMatrix],
    cfg: &SolverConfig,
) -> Result<HermitianMatrix> {
    check_sets(clean, outliers)?;
    InfluenceOperator::new(kind, statistic, clean, cfg)?.influence(outliers)
}

/// `‖H‖_F / ‖R̄‖_F`.
pub fn influence_value(h: &HermitianMatrix, rbar: &HpdMatrix) -> f64 {
    h.frobenius_norm() / rbar.frobenius_norm()
}

/// How outliers are generated: Toeplitz autocovariances of `a·s + c` with `a` set
/// by the SCR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierModel {
    pub steering: SteeringSpec,
    pub scr_db: f64,
    pub clutter: ClutterParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    /// Clean sample count.
    pub m: usize,
    /// Outlier counts at which the influence is evaluated.
    pub n_range: Vec<usize>,
    pub outliers: OutlierModel,
    pub metric: MetricKind,
    pub statistic: Statistic,
    pub repeats: usize,
    pub master_seed: u64,
    /// Reuse one clean set for every repeat instead of redrawing it.
    #[serde(default)]
    pub fix_clean: bool,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl ContaminationSpec {
    fn base(metric: MetricKind, statistic: Statistic, repeats: usize, n_range: Vec<usize>) -> Self {
        let clutter = ClutterParams {
            texture_on: false,
            ..ClutterParams::paper()
        };
        Self {
            m: 50,
            n_range,
            outliers: OutlierModel {
                steering: SteeringSpec::ideal(clutter.n, 0.2),
                scr_db: 40.0,
                clutter,
            },
            metric,
            statistic,
            repeats,
            master_seed: 0,
            fix_clean: false,
            solver_tol: SolverConfig::BENCHMARK_TOL,
            solver_max_iter: 2000,
        }
    }

    /// m = 50, n ∈ {1, 5, 10, 20, 40}, 100 repeats.
    pub fn desk(metric: MetricKind, statistic: Statistic) -> Self {
        Self::base(metric, statistic, 100, vec![1, 5, 10, 20, 40])
    }

    /// m = 50, n = 1..=40, 1000 repeats.
    pub fn paper(metric: MetricKind, statistic: Statistic) -> Self {
        Self::base(metric, statistic, 1000, (1..=40).collect())
    }

    pub fn n_dim(&self) -> usize {
        self.outliers.clutter.n
    }

    pub fn validate(&self) -> Result<()> {
        let model = &self.outliers;
        model.clutter.validate()?;
        model.steering.validate()?;
        if model.steering.n != model.clutter.n {
            return Err(Error::invalid(format!(
                "steering length {} does not match clutter dimension {}",
                model.steering.n, model.clutter.n
            )));
        }
        if !model.scr_db.is_finite() {
            return Err(Error::invalid("outlier SCR must be finite"));
        }
        if self.m < 2 {
            return Err(Error::invalid(format!(
                "m must be at least 2, got {}",
                self.m
            )));
        }
        if self.n_range.is_empty() || self.n_range.contains(&0) {
            return Err(Error::invalid("n_range must be nonempty with every n ≥ 1"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        self.solver_config().validate()
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::benchmark()
            .with_tol(self.solver_tol)
            .with_max_iter(self.solver_max_iter)
    }

    pub fn config_hash(&self) -> String {
        hash_json(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRow {
    pub n: usize,
    /// Mean of f over the repeats that succeeded.
    pub f_mean: f64,
    pub f_stderr: f64,
    /// Mean ‖H‖_F.
    pub h_norm: f64,
    pub repeats: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceResult {
    pub metric: MetricKind,
    pub statistic: Statistic,
    pub rows: Vec<InfluenceRow>,
    /// Mean ‖R̄‖_F over successful repeats.
    pub rbar_norm: f64,
    pub max_condition: f64,
    pub mean_solver_iterations: f64,
    /// Repeats dropped because the clean estimate or the linear system failed.
    pub dropped: usize,
    pub config_hash: String,
    pub seed: u64,
}

struct Repeat {
    rbar_norm: f64,
    condition: f64,
    iterations: usize,
    /// `(f, ‖H‖_F)` per entry of `n_range`.
    values: Vec<(f64, f64)>,
}

fn draw_covs(
    clutter: &ClutterModel,
    count: usize,
    target: Option<(&Snapshot, f64)>,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<HpdMatrix>> {
    (0..count)
        .map(|_| {
            let x = match target {
                None => clutter.sample(rng),
                Some((s, scr_db)) => make_observation(Hypothesis::H1, clutter, s, scr_db, rng)?,
            };
            toeplitz_cov(&x)
        })
        .collect()
}

fn run_repeat(
    spec: &ContaminationSpec,
    clutter: &ClutterModel,
    target: &Snapshot,
    index: usize,
) -> Result<Repeat> {
    let clean_index = if spec.fix_clean { 0 } else { index as u32 };
    let mut rng = RngStream::for_trial(spec.master_seed, PHASE_CLEAN, clean_index).rng();
    let clean = draw_covs(clutter, spec.m, None, &mut rng)?;
    let op = InfluenceOperator::new(spec.metric, spec.statistic, &clean, &spec.solver_config())?;

    let mut rng = RngStream::for_trial(spec.master_seed, PHASE_OUTLIERS, index as u32).rng();
    let mut values = Vec::with_capacity(spec.n_range.len());
    for &n in &spec.n_range {
        let outliers = draw_covs(clutter, n, Some((target, spec.outliers.scr_db)), &mut rng)?;
        let h = op.influence(&outliers)?;
        values.push((influence_value(&h, op.rbar()), h.frobenius_norm()));
    }
    Ok(Repeat {
        rbar_norm: op.rbar().frobenius_norm(),
        condition: op.condition(),
        iterations: op.report().iterations,
        values,
    })
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Mean influence value per outlier count over independent repeats. Repeats whose
/// clean estimate or linear system fails are dropped and logged.
pub fn influence_curve(spec: &ContaminationSpec, exec: Exec) -> Result<InfluenceResult> {
    spec.validate()?;
    let clutter = ClutterModel::new(&spec.outliers.clutter)?;
    let target = spec.outliers.steering.target()?;
    let outcomes: Vec<Result<Repeat>> = exec.install(|| {
        (0..spec.repeats)
            .into_par_iter()
            .map(|i| run_repeat(spec, &clutter, &target, i))
            .collect()
    })?;

    let mut ok = Vec::with_capacity(outcomes.len());
    let mut dropped = 0;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => ok.push(r),
            Err(e @ Error::InvalidInput(_)) => return Err(e),
            Err(e) => {
                log::warn!(
                    "influence repeat {i} ({} {}) dropped: {e}",
                    spec.metric,
                    spec.statistic
                );
                dropped += 1;
            }
        }
    }
    if ok.is_empty() {
        return Err(Error::numerical(format!(
            "all {} influence repeats failed for {} {}",
            spec.repeats, spec.metric, spec.statistic
        )));
    }

    let rows = spec
        .n_range
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let f: Vec<f64> = ok.iter().map(|r| r.values[k].0).collect();
            let h: Vec<f64> = ok.iter().map(|r| r.values[k].1).collect();
            let (f_mean, f_stderr) = mean_and_stderr(&f);
            InfluenceRow {
                n,
                f_mean,
                f_stderr,
                h_norm: mean_and_stderr(&h).0,
                repeats: ok.len(),
            }
        })
        .collect();
    let norms: Vec<f64> = ok.iter().map(|r| r.rbar_norm).collect();
    let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
    Ok(InfluenceResult {
        metric: spec.metric,
        statistic: spec.statistic,
        rows,
        rbar_norm: mean_and_stderr(&norms).0,
        max_condition: ok.iter().map(|r| r.condition).fold(0.0, f64::max),
        mean_solver_iterations: mean_and_stderr(&iters).0,
        dropped,
        config_hash: spec.config_hash(),
        seed: spec.master_seed,
    })
}

#[cfg(test)]
mod tests;
