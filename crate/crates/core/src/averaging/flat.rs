//! Solvers for the two flat geometries: Frobenius and log-Euclidean.

use crate::error::Result;
use crate::linalg::{exp_hpd, HermitianMatrix, HpdMatrix};

use super::engine::{Model, D_FLOOR_REL};

/// `exp(Σ wᵢ log Rᵢ)`.
pub(crate) fn le_mean(points: &[HpdMatrix], weights: &[f64]) -> Result<HpdMatrix> {
    let n = points[0].dim();
    let mut acc = HermitianMatrix::zeros(n);
    for (p, &w) in points.iter().zip(weights) {
        acc = &acc + &p.log().scale(w);
    }
    exp_hpd(&acc)
}

/// Weiszfeld state shared by both flat medians. Coordinates are the matrix itself
/// (Frobenius) or its logarithm (log-Euclidean).
pub(crate) struct FlatState {
    r: HpdMatrix,
    coord: HermitianMatrix,
    objective: f64,
    /// Σ' wᵢ xᵢ/dᵢ / Σ' wᵢ/dᵢ: the full Weiszfeld update in coordinates.
    target: HermitianMatrix,
    inv_dist_weight: f64,
    excluded_weight: f64,
}

fn weiszfeld_state(
    r: HpdMatrix,
    coord: HermitianMatrix,
    data: &[HermitianMatrix],
    weights: &[f64],
) -> FlatState {
    let floor = D_FLOOR_REL * r.frobenius_norm();
    let mut sum = HermitianMatrix::zeros(r.dim());
    let mut objective = 0.0;
    let mut inv_dist_weight = 0.0;
    let mut excluded_weight = 0.0;
    for (x, &w) in data.iter().zip(weights) {
        let d = (x - &coord).frobenius_norm();
        objective += w * d;
        if d < floor {
            excluded_weight += w;
        } else {
            inv_dist_weight += w / d;
            sum = &sum + &x.scale(w / d);
        }
    }
    let target = if inv_dist_weight > 0.0 {
        sum.scale(1.0 / inv_dist_weight)
    } else {
        coord.clone()
    };
    FlatState {
        r,
        coord,
        objective,
        target,
        inv_dist_weight,
        excluded_weight,
    }
}

fn flat_grad_norm_sq(s: &FlatState) -> f64 {
    (s.inv_dist_weight * (&s.target - &s.coord).frobenius_norm()).powi(2)
}

fn flat_step_scale(s: &FlatState) -> f64 {
    if s.inv_dist_weight > 0.0 {
        1.0 / s.inv_dist_weight
    } else {
        0.0
    }
}

fn flat_step(s: &FlatState, step: f64) -> HermitianMatrix {
    &s.coord + &(&s.target - &s.coord).scale(step)
}

/// Log-domain fixed point `log R ← Σ' wᵢ log Rᵢ/dᵢ / Σ' wᵢ/dᵢ`.
pub(crate) struct LeMedian<'a> {
    logs: Vec<HermitianMatrix>,
    weights: &'a [f64],
}

impl<'a> LeMedian<'a> {
    pub(crate) fn new(points: &[HpdMatrix], weights: &'a [f64]) -> Self {
        Self {
            logs: points.iter().map(HpdMatrix::log).collect(),
            weights,
        }
    }
}

impl Model for LeMedian<'_> {
    type State = FlatState;

    fn eval(&self, r: HpdMatrix) -> Result<FlatState> {
        let coord = r.log();
        Ok(weiszfeld_state(r, coord, &self.logs, self.weights))
    }

    fn point<'s>(&self, s: &'s FlatState) -> &'s HpdMatrix {
        &s.r
    }

    fn objective(&self, s: &FlatState) -> f64 {
        s.objective
    }

    fn grad_norm_sq(&self, s: &FlatState) -> f64 {
        flat_grad_norm_sq(s)
    }

    fn step_scale(&self, s: &FlatState) -> f64 {
        flat_step_scale(s)
    }

    fn candidate(&self, s: &FlatState, step: f64) -> Result<HpdMatrix> {
        exp_hpd(&flat_step(s, step))
    }

    /// Log-domain fixed-point displacement.
    fn residual(&self, s: &FlatState) -> f64 {
        (&s.target - &s.coord).frobenius_norm()
    }

    fn collapsed(&self, s: &FlatState) -> bool {
        s.excluded_weight > 0.5
    }
}

/// Frobenius-norm Weiszfeld iteration.
pub(crate) struct EuclideanMedian<'a> {
    data: Vec<HermitianMatrix>,
    weights: &'a [f64],
}

impl<'a> EuclideanMedian<'a> {
    pub(crate) fn new(points: &[HpdMatrix], weights: &'a [f64]) -> Self {
        Self {
            data: points.iter().map(|p| p.as_hermitian().clone()).collect(),
            weights,
        }
    }
}

impl Model for EuclideanMedian<'_> {
    type State = FlatState;

    fn eval(&self, r: HpdMatrix) -> Result<FlatState> {
        let coord = r.as_hermitian().clone();
        Ok(weiszfeld_state(r, coord, &self.data, self.weights))
    }

    fn point<'s>(&self, s: &'s FlatState) -> &'s HpdMatrix {
        &s.r
    }

    fn objective(&self, s: &FlatState) -> f64 {
        s.objective
    }

    fn grad_norm_sq(&self, s: &FlatState) -> f64 {
        flat_grad_norm_sq(s)
    }

    fn step_scale(&self, s: &FlatState) -> f64 {
        flat_step_scale(s)
    }

    fn candidate(&self, s: &FlatState, step: f64) -> Result<HpdMatrix> {
        HpdMatrix::new(flat_step(s, step))
    }

    fn residual(&self, s: &FlatState) -> f64 {
        self.data.len() as f64 * flat_grad_norm_sq(s).sqrt()
    }

    fn collapsed(&self, s: &FlatState) -> bool {
        s.excluded_weight > 0.5
    }
}
