//! Affine-invariant mean (Karcher flow) and median (Riemannian Weiszfeld).

use crate::error::Result;
use crate::linalg::{eig_hermitian, exp_hpd, HermitianMatrix, HpdMatrix};

use super::engine::{Model, D_FLOOR_REL};
use super::Statistic;

pub(crate) struct AirmModel<'a> {
    points: &'a [HpdMatrix],
    weights: &'a [f64],
    statistic: Statistic,
}

pub(crate) struct AirmState {
    r: HpdMatrix,
    sqrt: HpdMatrix,
    objective: f64,
    /// Whitened descent direction: Σ wᵢ Log(R^{-1/2} Rᵢ R^{-1/2}) for the mean,
    /// the same sum with weights wᵢ/dᵢ over non-excluded terms for the median.
    dir: HermitianMatrix,
    /// Σ' wᵢ/dᵢ (median only).
    inv_dist_weight: f64,
    excluded_weight: f64,
}

impl<'a> AirmModel<'a> {
    pub(crate) fn new(points: &'a [HpdMatrix], weights: &'a [f64], statistic: Statistic) -> Self {
        Self {
            points,
            weights,
            statistic,
        }
    }
}

impl Model for AirmModel<'_> {
    type State = AirmState;

    fn eval(&self, r: HpdMatrix) -> Result<AirmState> {
        let n = r.dim();
        let sqrt = r.sqrt();
        let isqrt = r.inv_sqrt();
        let floor = D_FLOOR_REL * r.frobenius_norm();
        let mut dir = HermitianMatrix::zeros(n);
        let mut objective = 0.0;
        let mut inv_dist_weight = 0.0;
        let mut excluded_weight = 0.0;
        for (p, &w) in self.points.iter().zip(self.weights) {
            let white = HermitianMatrix::symmetrized(&p.congruence_by(isqrt.as_matrix()));
            let eig = eig_hermitian(&white)?;
            let d = eig
                .eigenvalues
                .iter()
                .map(|l| l.ln().powi(2))
                .sum::<f64>()
                .sqrt();
            let log = HermitianMatrix::symmetrized(&eig.apply(f64::ln));
            match self.statistic {
                Statistic::Mean => {
                    objective += w * d * d;
                    dir = &dir + &log.scale(w);
                }
                Statistic::Median => {
                    objective += w * d;
                    if d < floor {
                        excluded_weight += w;
                    } else {
                        inv_dist_weight += w / d;
                        dir = &dir + &log.scale(w / d);
                    }
                }
            }
        }
        Ok(AirmState {
            r,
            sqrt,
            objective,
            dir,
            inv_dist_weight,
            excluded_weight,
        })
    }

    fn point<'s>(&self, s: &'s AirmState) -> &'s HpdMatrix {
        &s.r
    }

    fn objective(&self, s: &AirmState) -> f64 {
        s.objective
    }

    fn grad_norm_sq(&self, s: &AirmState) -> f64 {
        let g = s.dir.frobenius_norm().powi(2);
        match self.statistic {
            Statistic::Mean => 4.0 * g,
            Statistic::Median => g,
        }
    }

    fn step_scale(&self, s: &AirmState) -> f64 {
        match self.statistic {
            Statistic::Mean => 1.0,
            Statistic::Median if s.inv_dist_weight > 0.0 => 1.0 / s.inv_dist_weight,
            Statistic::Median => 0.0,
        }
    }

    fn candidate(&self, s: &AirmState, step: f64) -> Result<HpdMatrix> {
        // Mean: Exp_R(-η grad) with grad = -2 R^{1/2} dir R^{1/2}.
        // Median: Exp_R(-τ grad) with grad = -R^{1/2} dir R^{1/2}, τ = step / Σ' wᵢ/dᵢ.
        let c = match self.statistic {
            Statistic::Mean => 2.0 * step,
            Statistic::Median => step * self.step_scale(s),
        };
        let e = exp_hpd(&s.dir.scale(c))?;
        HpdMatrix::from_raw(&e.congruence_by(s.sqrt.as_matrix()))
    }

    fn residual(&self, s: &AirmState) -> f64 {
        let tangent = s.sqrt.as_matrix() * s.dir.as_matrix() * s.sqrt.as_matrix();
        let scale = match self.statistic {
            Statistic::Mean => 1.0,
            Statistic::Median => self.points.len() as f64,
        };
        scale * tangent.norm()
    }

    fn collapsed(&self, s: &AirmState) -> bool {
        self.statistic == Statistic::Median && s.excluded_weight > 0.5
    }
}
