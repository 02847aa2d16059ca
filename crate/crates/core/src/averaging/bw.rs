//! Bures–Wasserstein barycentre iterations and the BW geometric median.

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, CMatrix, HermitianMatrix, HpdMatrix, C64};

use super::engine::{self, Model, Stepping, D_FLOOR_REL};
use super::{BwMeanSolver, SolverConfig, SolverReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Variant {
    Mean(BwMeanSolver),
    Median,
}

pub(crate) struct BwModel<'a> {
    points: &'a [HpdMatrix],
    weights: &'a [f64],
    variant: Variant,
}

pub(crate) struct BwState {
    r: HpdMatrix,
    isqrt: HpdMatrix,
    objective: f64,
    /// Σ wᵢ (R^{1/2} Rᵢ R^{1/2})^{1/2} for means; Σ' (wᵢ/dᵢ) (·)^{1/2} for the median.
    roots: CMatrix,
    /// Σ' wᵢ/dᵢ for the median, 1 for means.
    inv_dist_weight: f64,
    excluded_weight: f64,
    /// L_R of the (negative) descent direction: Σ wᵢ (I − Rᵢ # R⁻¹), over dᵢ for the median.
    k: HermitianMatrix,
}

impl<'a> BwModel<'a> {
    pub(crate) fn new(points: &'a [HpdMatrix], weights: &'a [f64], variant: Variant) -> Self {
        Self {
            points,
            weights,
            variant,
        }
    }

    fn is_median(&self) -> bool {
        self.variant == Variant::Median
    }
}

pub(crate) fn mean(
    points: &[HpdMatrix],
    weights: &[f64],
    solver: BwMeanSolver,
    init: HpdMatrix,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    let model = BwModel::new(points, weights, Variant::Mean(solver));
    let stepping = match solver {
        BwMeanSolver::FixedA | BwMeanSolver::FixedB => Stepping::FixedPoint,
        BwMeanSolver::Rgd => cfg.mean_stepping(),
    };
    engine::run(&model, init, cfg, stepping)
}

fn sandwich(s: &CMatrix, r: &HpdMatrix) -> Result<HpdMatrix> {
    let eig = eig_hermitian(&HermitianMatrix::symmetrized(s))?;
    if !(eig.min_eigenvalue() > 0.0) {
        return Err(Error::domain(format!(
            "BW step factor lost positivity (smallest eigenvalue {:e})",
            eig.min_eigenvalue()
        )));
    }
    HpdMatrix::from_raw(&r.congruence_by(s))
}

impl Model for BwModel<'_> {
    type State = BwState;

    fn eval(&self, r: HpdMatrix) -> Result<BwState> {
        let n = r.dim();
        let sqrt = r.sqrt();
        let isqrt = r.inv_sqrt();
        let floor = D_FLOOR_REL * r.frobenius_norm();
        let tr_r = r.trace();
        let mut roots = CMatrix::zeros(n, n);
        let mut objective = 0.0;
        let mut inv_dist_weight = 0.0;
        let mut excluded_weight = 0.0;
        for (p, &w) in self.points.iter().zip(self.weights) {
            let inner = HermitianMatrix::symmetrized(&p.congruence_by(sqrt.as_matrix()));
            let eig = eig_hermitian(&inner)?;
            let tr_sqrt: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
            let d2 = (tr_r + p.trace() - 2.0 * tr_sqrt).max(0.0);
            let root = eig.apply(|l| l.max(0.0).sqrt());
            if self.is_median() {
                let d = d2.sqrt();
                objective += w * d;
                if d < floor {
                    excluded_weight += w;
                } else {
                    inv_dist_weight += w / d;
                    roots += root * C64::from(w / d);
                }
            } else {
                objective += w * d2;
                roots += root * C64::from(w);
            }
        }
        if !self.is_median() {
            inv_dist_weight = 1.0;
        }
        let transported =
            HermitianMatrix::symmetrized(&(isqrt.as_matrix() * &roots * isqrt.as_matrix()));
        let k = &HermitianMatrix::identity(n).scale(inv_dist_weight) - &transported;
        Ok(BwState {
            r,
            isqrt,
            objective,
            roots,
            inv_dist_weight,
            excluded_weight,
            k,
        })
    }

    fn point<'s>(&self, s: &'s BwState) -> &'s HpdMatrix {
        &s.r
    }

    fn objective(&self, s: &BwState) -> f64 {
        s.objective
    }

    fn grad_norm_sq(&self, s: &BwState) -> f64 {
        // ‖grad‖² = tr(K R K) for the median, 4 tr(K R K) for the mean.
        let krk = (s.k.as_matrix() * s.r.as_matrix() * s.k.as_matrix())
            .trace()
            .re;
        if self.is_median() {
            krk
        } else {
            4.0 * krk
        }
    }

    fn step_scale(&self, s: &BwState) -> f64 {
        if !self.is_median() {
            1.0
        } else if s.inv_dist_weight > 0.0 {
            1.0 / s.inv_dist_weight
        } else {
            0.0
        }
    }

    fn candidate(&self, s: &BwState, step: f64) -> Result<HpdMatrix> {
        let n = s.r.dim();
        match self.variant {
            Variant::Mean(BwMeanSolver::FixedA) => HpdMatrix::from_raw(&s.roots),
            Variant::Mean(BwMeanSolver::FixedB) => HpdMatrix::from_raw(
                &(s.isqrt.as_matrix() * &s.roots * &s.roots * s.isqrt.as_matrix()),
            ),
            Variant::Mean(BwMeanSolver::Rgd) => {
                let factor = CMatrix::identity(n, n) - s.k.as_matrix() * C64::from(2.0 * step);
                sandwich(&factor, &s.r)
            }
            Variant::Median => {
                let tau = step * self.step_scale(s);
                let factor = CMatrix::identity(n, n) - s.k.as_matrix() * C64::from(tau);
                sandwich(&factor, &s.r)
            }
        }
    }

    fn residual(&self, s: &BwState) -> f64 {
        let scale = if self.is_median() {
            self.points.len() as f64
        } else {
            1.0
        };
        scale * s.k.frobenius_norm()
    }

    fn collapsed(&self, s: &BwState) -> bool {
        self.is_median() && s.excluded_weight > 0.5
    }
}
