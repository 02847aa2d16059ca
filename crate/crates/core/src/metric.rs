//! AIRM, log-Euclidean and Bures–Wasserstein geometry on the HPD cone, plus the
//! flat Euclidean geometry used for the arithmetic mean.
//!
//! Conventions used throughout:
//!
//! | kind | ⟨A, B⟩_P | distance |
//! |------|----------|----------|
//! | AIRM | tr(P⁻¹ A P⁻¹ B) | ‖Log(P₁^{-1/2} P₂ P₁^{-1/2})‖_F |
//! | LE | ⟨D_P Log A, D_P Log B⟩_F | ‖Log P₂ − Log P₁‖_F |
//! | BW | ½ tr(L_P[A] B) | √(tr P₁ + tr P₂ − 2 tr (P₁^{1/2} P₂ P₁^{1/2})^{1/2}) |
//! | Euclidean | tr(A B) | ‖P₂ − P₁‖_F |
//!
//! `L_P` is the Lyapunov operator, see [`lyapunov_solve`](crate::linalg::lyapunov_solve).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_same_dim, eig_hermitian, exp_divided_difference, exp_hpd, frechet_derivative,
    frechet_log, lyapunov_raw, symmetrize, CMatrix, EigenDecomposition, HermitianMatrix, HpdMatrix,
    C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Airm,
    Le,
    Bw,
    Euclidean,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Airm,
        MetricKind::Le,
        MetricKind::Bw,
        MetricKind::Euclidean,
    ];

    /// The three Riemannian geometries (excludes Euclidean).
    pub const RIEMANNIAN: [MetricKind; 3] = [MetricKind::Airm, MetricKind::Le, MetricKind::Bw];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Airm => "airm",
            MetricKind::Le => "le",
            MetricKind::Bw => "bw",
            MetricKind::Euclidean => "euclidean",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "airm" => Ok(MetricKind::Airm),
            "le" => Ok(MetricKind::Le),
            "bw" => Ok(MetricKind::Bw),
            "euclidean" => Ok(MetricKind::Euclidean),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// Eigendecomposition of the whitened matrix `P₁^{-1/2} P₂ P₁^{-1/2}`.
fn whitened(p1: &HpdMatrix, p2: &HpdMatrix) -> Result<EigenDecomposition> {
    let w = p2.congruence_by(p1.inv_sqrt().as_matrix());
    let eig = eig_hermitian(&HermitianMatrix::symmetrized(&w))?;
    if !(eig.min_eigenvalue() > 0.0) {
        return Err(Error::numerical(format!(
            "whitened matrix lost positivity (eigenvalue {:e})",
            eig.min_eigenvalue()
        )));
    }
    Ok(eig)
}

/// `P⁻¹ # Q = P^{-1/2} (P^{1/2} Q P^{1/2})^{1/2} P^{-1/2}`, which also equals `Q # P⁻¹`.
pub(crate) fn bw_transport(p: &HpdMatrix, q: &HpdMatrix) -> Result<CMatrix> {
    let s = p.sqrt();
    let inner = HermitianMatrix::symmetrized(&q.congruence_by(s.as_matrix()));
    let root = eig_hermitian(&inner)?.apply(|l| l.max(0.0).sqrt());
    let si = p.inv_sqrt();
    Ok(symmetrize(&(si.as_matrix() * root * si.as_matrix())))
}

/// Squared BW distance as `‖P^{1/2} − Q^{1/2} U‖_F²`, with `U` the unitary polar
/// factor aligning `Q^{1/2}` to `P^{1/2}`. Equal to
/// `tr P + tr Q − 2 tr (P^{1/2} Q P^{1/2})^{1/2}` but free of its cancellation
/// when `P ≈ Q`.
fn bw_polar_residual(p: &HpdMatrix, q: &HpdMatrix) -> Result<f64> {
    let ps = p.sqrt();
    let qs = q.sqrt();
    let svd = (qs.as_matrix() * ps.as_matrix()).svd(true, true);
    let (w, vt) = svd
        .u
        .zip(svd.v_t)
        .ok_or_else(|| Error::numerical("SVD failed in BW distance"))?;
    Ok((ps.as_matrix() - qs.as_matrix() * w * vt).norm_squared())
}

pub fn distance(kind: MetricKind, p1: &HpdMatrix, p2: &HpdMatrix) -> Result<f64> {
    Ok(squared_distance(kind, p1, p2)?.sqrt())
}

pub fn squared_distance(kind: MetricKind, p1: &HpdMatrix, p2: &HpdMatrix) -> Result<f64> {
    check_same_dim(p1, p2)?;
    Ok(match kind {
        MetricKind::Airm => whitened(p1, p2)?
            .eigenvalues
            .iter()
            .map(|l| l.ln().powi(2))
            .sum(),
        MetricKind::Le => (&p2.log() - &p1.log()).frobenius_norm().powi(2),
        MetricKind::Bw => bw_polar_residual(p1, p2)?,
        MetricKind::Euclidean => (p2.as_hermitian() - p1.as_hermitian())
            .frobenius_norm()
            .powi(2),
    })
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!(
            "geodesic parameter must lie in [0, 1], got {t}"
        )));
    }
    Ok(())
}

/// Point at parameter `t` on the geodesic from `p1` (t = 0) to `p2` (t = 1).
pub fn geodesic(kind: MetricKind, p1: &HpdMatrix, p2: &HpdMatrix, t: f64) -> Result<HpdMatrix> {
    check_same_dim(p1, p2)?;
    check_t(t)?;
    match kind {
        MetricKind::Airm => {
            let w = whitened(p1, p2)?;
            let wt = w.apply(|l| l.powf(t));
            HpdMatrix::from_raw(&symmetrize(
                &(p1.sqrt().as_matrix() * wt * p1.sqrt().as_matrix()),
            ))
        }
        MetricKind::Le => {
            let x = &p1.log().scale(1.0 - t) + &p2.log().scale(t);
            exp_hpd(&x)
        }
        MetricKind::Bw => {
            let m = bw_transport(p1, p2)?;
            let p = p1.as_matrix();
            let cross = p * &m + &m * p;
            let x = p * C64::from((1.0 - t) * (1.0 - t))
                + p2.as_matrix() * C64::from(t * t)
                + cross * C64::from(t * (1.0 - t));
            HpdMatrix::from_raw(&x)
        }
        MetricKind::Euclidean => HpdMatrix::from_raw(
            &(p1.as_matrix() * C64::from(1.0 - t) + p2.as_matrix() * C64::from(t)),
        ),
    }
}

/// Riemannian exponential map at `p` along the tangent vector `v`.
///
/// For BW the result `(I + L_P[V]) P (I + L_P[V])` is only defined while
/// `I + L_P[V]` stays positive definite; otherwise a `DomainError` names the
/// offending eigenvalue.
pub fn exp_map(kind: MetricKind, p: &HpdMatrix, v: &HermitianMatrix) -> Result<HpdMatrix> {
    if p.dim() != v.dim() {
        return Err(Error::invalid("tangent vector dimension mismatch"));
    }
    match kind {
        MetricKind::Airm => {
            let s = p.sqrt();
            let si = p.inv_sqrt();
            let inner =
                HermitianMatrix::symmetrized(&(si.as_matrix() * v.as_matrix() * si.as_matrix()));
            let e = exp_hpd(&inner)?;
            HpdMatrix::from_raw(&e.congruence_by(s.as_matrix()))
        }
        MetricKind::Le => exp_hpd(&(&p.log() + &frechet_log(p, v))),
        MetricKind::Bw => {
            let l = lyapunov_raw(p.eigen(), v.as_matrix());
            let s = l.as_matrix() + CMatrix::identity(p.dim(), p.dim());
            let lo = eig_hermitian(&HermitianMatrix::symmetrized(&s))?.min_eigenvalue();
            if lo <= 0.0 {
                return Err(Error::domain(format!(
                    "BW exponential leaves the HPD cone: I + L_P[V] has eigenvalue {lo:e}"
                )));
            }
            HpdMatrix::from_raw(&p.congruence_by(&s))
        }
        MetricKind::Euclidean => HpdMatrix::new(p.as_hermitian() + v).map_err(|e| match e {
            Error::DomainError(msg) => {
                Error::domain(format!("Euclidean step leaves the HPD cone: {msg}"))
            }
            other => other,
        }),
    }
}

/// Riemannian logarithm map: the initial velocity of the geodesic from `p1` to `p2`.
pub fn log_map(kind: MetricKind, p1: &HpdMatrix, p2: &HpdMatrix) -> Result<HermitianMatrix> {
    check_same_dim(p1, p2)?;
    Ok(match kind {
        MetricKind::Airm => {
            let w = whitened(p1, p2)?;
            let lw = w.apply(f64::ln);
            let s = p1.sqrt();
            HermitianMatrix::symmetrized(&(s.as_matrix() * lw * s.as_matrix()))
        }
        MetricKind::Le => {
            let l1 = p1.log();
            let diff = &p2.log() - &l1;
            let eig = eig_hermitian(&l1)?;
            frechet_derivative(&eig, diff.as_matrix(), exp_divided_difference)
        }
        MetricKind::Bw => {
            let n = p1.dim();
            let m = bw_transport(p1, p2)? - CMatrix::identity(n, n);
            let p = p1.as_matrix();
            HermitianMatrix::symmetrized(&(p * &m + &m * p))
        }
        MetricKind::Euclidean => p2.as_hermitian() - p1.as_hermitian(),
    })
}

/// Metric inner product ⟨a, b⟩ at `p`.
pub fn inner_product(
    kind: MetricKind,
    p: &HpdMatrix,
    a: &HermitianMatrix,
    b: &HermitianMatrix,
) -> Result<f64> {
    if a.dim() != p.dim() || b.dim() != p.dim() {
        return Err(Error::invalid("tangent vector dimension mismatch"));
    }
    Ok(match kind {
        MetricKind::Airm => {
            let pi = p.inv();
            let x =
                HermitianMatrix::symmetrized(&(pi.as_matrix() * a.as_matrix() * pi.as_matrix()));
            x.inner(b)
        }
        MetricKind::Le => frechet_log(p, a).inner(&frechet_log(p, b)),
        MetricKind::Bw => 0.5 * lyapunov_raw(p.eigen(), a.as_matrix()).inner(b),
        MetricKind::Euclidean => a.inner(b),
    })
}

pub fn norm(kind: MetricKind, p: &HpdMatrix, v: &HermitianMatrix) -> Result<f64> {
    Ok(inner_product(kind, p, v, v)?.max(0.0).sqrt())
}

/// Riemannian gradient at `r` of `R ↦ d²(pref, R)`, i.e. `−2 Log_R(pref)`.
pub fn grad_sq_dist(kind: MetricKind, pref: &HpdMatrix, r: &HpdMatrix) -> Result<HermitianMatrix> {
    Ok(log_map(kind, r, pref)?.scale(-2.0))
}

/// Riemannian gradient at `r` of `R ↦ d(pref, R)`. Zero at `r = pref`, where the
/// distance is not differentiable.
pub fn grad_dist(kind: MetricKind, pref: &HpdMatrix, r: &HpdMatrix) -> Result<HermitianMatrix> {
    let d = distance(kind, pref, r)?;
    if d == 0.0 {
        return Ok(HermitianMatrix::zeros(r.dim()));
    }
    Ok(grad_sq_dist(kind, pref, r)?.scale(0.5 / d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{geometric_midpoint, relative_error as rel_err};
    use crate::randmat::{random_commuting_pair, random_hermitian, random_hpd, random_invertible};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn sc(v: f64) -> HpdMatrix {
        HpdMatrix::scalar(v).unwrap()
    }

    fn val(h: &HermitianMatrix) -> f64 {
        h.get(0, 0).re
    }

    #[test]
    fn self_distance_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_hpd(&mut rng, 5);
        for k in MetricKind::ALL {
            assert!(distance(k, &p, &p).unwrap() < 1e-10, "{k}");
        }
    }

    #[test]
    fn scalar_distances() {
        assert!(
            (distance(MetricKind::Airm, &sc(2.0), &sc(8.0)).unwrap() - 4f64.ln()).abs() < 1e-12
        );
        assert!((distance(MetricKind::Bw, &sc(1.0), &sc(4.0)).unwrap() - 1.0).abs() < 1e-12);
        let d = distance(
            MetricKind::Airm,
            &HpdMatrix::from_real_diagonal(&[1.0, E * E]).unwrap(),
            &HpdMatrix::identity(2),
        )
        .unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_invalid_input() {
        let a = HpdMatrix::identity(2);
        let b = HpdMatrix::identity(3);
        for k in MetricKind::ALL {
            assert!(matches!(distance(k, &a, &b), Err(Error::InvalidInput(_))));
            assert!(matches!(log_map(k, &a, &b), Err(Error::InvalidInput(_))));
        }
    }

    #[test]
    fn geodesic_endpoints_and_midpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p1 = random_hpd(&mut rng, 4);
        let p2 = random_hpd(&mut rng, 4);
        for k in MetricKind::ALL {
            let g0 = geodesic(k, &p1, &p2, 0.0).unwrap();
            let g1 = geodesic(k, &p1, &p2, 1.0).unwrap();
            assert!(rel_err(g0.as_matrix(), p1.as_matrix()) < 1e-8, "{k}");
            assert!(rel_err(g1.as_matrix(), p2.as_matrix()) < 1e-8, "{k}");
            assert!(matches!(
                geodesic(k, &p1, &p2, 1.5),
                Err(Error::InvalidInput(_))
            ));
            assert!(geodesic(k, &p1, &p2, -0.1).is_err());
        }
        let mid = geodesic(MetricKind::Airm, &p1, &p2, 0.5).unwrap();
        let pw = geometric_midpoint(&p1, &p2).unwrap();
        assert!(rel_err(mid.as_matrix(), pw.as_matrix()) < 1e-10);

        let m = geodesic(MetricKind::Airm, &sc(2.0), &sc(8.0), 0.5).unwrap();
        assert!((m.as_matrix()[(0, 0)].re - 4.0).abs() < 1e-12);
        let m = geodesic(MetricKind::Bw, &sc(1.0), &sc(9.0), 0.5).unwrap();
        assert!((m.as_matrix()[(0, 0)].re - 4.0).abs() < 1e-12);
    }

    #[test]
    fn geodesic_distance_is_linear_in_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p1 = random_hpd(&mut rng, 3);
        let p2 = random_hpd(&mut rng, 3);
        for k in MetricKind::ALL {
            let d = distance(k, &p1, &p2).unwrap();
            let g = geodesic(k, &p1, &p2, 0.3).unwrap();
            assert!(
                (distance(k, &p1, &g).unwrap() - 0.3 * d).abs() < 1e-8,
                "{k}"
            );
        }
    }

    #[test]
    fn scalar_maps() {
        let e = exp_map(
            MetricKind::Bw,
            &sc(1.0),
            &HermitianMatrix::from_real_diagonal(&[2.0]),
        )
        .unwrap();
        assert!((e.as_matrix()[(0, 0)].re - 4.0).abs() < 1e-12);
        let l = log_map(MetricKind::Airm, &sc(1.0), &sc(E * E)).unwrap();
        assert!((val(&l) - 2.0).abs() < 1e-12);
        let l = log_map(MetricKind::Bw, &sc(1.0), &sc(4.0)).unwrap();
        assert!((val(&l) - 2.0).abs() < 1e-12);
        for k in MetricKind::ALL {
            let z = log_map(k, &sc(3.0), &sc(3.0)).unwrap();
            assert!(val(&z).abs() < 1e-12);
            let p = exp_map(k, &sc(3.0), &HermitianMatrix::zeros(1)).unwrap();
            assert!((p.as_matrix()[(0, 0)].re - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_log_roundtrip_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let p = random_hpd(&mut rng, 8);
            let q = random_hpd(&mut rng, 8);
            for k in MetricKind::ALL {
                let v = log_map(k, &p, &q).unwrap();
                let back = exp_map(k, &p, &v).unwrap();
                assert!(rel_err(back.as_matrix(), q.as_matrix()) < 1e-8, "{k}");
            }
        }
    }

    #[test]
    fn log_map_norm_equals_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_hpd(&mut rng, 5);
        let q = random_hpd(&mut rng, 5);
        for k in MetricKind::ALL {
            let v = log_map(k, &p, &q).unwrap();
            let n = norm(k, &p, &v).unwrap();
            let d = distance(k, &p, &q).unwrap();
            assert!((n - d).abs() < 1e-8 * d.max(1.0), "{k}: {n} vs {d}");
        }
    }

    #[test]
    fn bw_exp_reports_leaving_the_cone() {
        let v = HermitianMatrix::from_real_diagonal(&[-4.0]);
        match exp_map(MetricKind::Bw, &sc(1.0), &v) {
            Err(Error::DomainError(msg)) => assert!(msg.contains("eigenvalue")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn gradients_vanish_at_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_hpd(&mut rng, 4);
        for k in MetricKind::ALL {
            assert!(
                grad_sq_dist(k, &p, &p).unwrap().frobenius_norm() < 1e-7,
                "{k}"
            );
        }
        let g = grad_sq_dist(MetricKind::Bw, &sc(4.0), &sc(1.0)).unwrap();
        assert!((val(&g) + 4.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 1e-5;
        for k in MetricKind::ALL {
            let pref = random_hpd(&mut rng, 4);
            let r = random_hpd(&mut rng, 4);
            let g = grad_sq_dist(k, &pref, &r).unwrap();
            for _ in 0..5 {
                let y = random_hermitian(&mut rng, 4);
                let f = |t: f64| {
                    let rt = HpdMatrix::new(r.as_hermitian() + &y.scale(t)).unwrap();
                    squared_distance(k, &pref, &rt).unwrap()
                };
                let fd = (f(h) - f(-h)) / (2.0 * h);
                let an = inner_product(k, &r, &g, &y).unwrap();
                assert!(
                    (fd - an).abs() <= 1e-4 * an.abs().max(1e-3),
                    "{k}: {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn commuting_pairs_airm_equals_le() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (a, b) = random_commuting_pair(&mut rng, 4);
            let da = distance(MetricKind::Airm, &a, &b).unwrap();
            let dl = distance(MetricKind::Le, &a, &b).unwrap();
            assert!((da - dl).abs() < 1e-8);
        }
    }

    #[test]
    fn airm_is_congruence_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_hpd(&mut rng, 4);
        let q = random_hpd(&mut rng, 4);
        let g = random_invertible(&mut rng, 4);
        let d0 = distance(MetricKind::Airm, &p, &q).unwrap();
        let d1 = distance(
            MetricKind::Airm,
            &p.congruence(&g).unwrap(),
            &q.congruence(&g).unwrap(),
        )
        .unwrap();
        assert!((d0 - d1).abs() < 1e-7);
    }

    #[test]
    fn inner_products_are_symmetric_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_hpd(&mut rng, 3);
        let a = random_hermitian(&mut rng, 3);
        let b = random_hermitian(&mut rng, 3);
        for k in MetricKind::ALL {
            let ab = inner_product(k, &p, &a, &b).unwrap();
            let ba = inner_product(k, &p, &b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-10 * ab.abs().max(1.0));
            assert!(inner_product(k, &p, &a, &a).unwrap() > 0.0);
        }
    }

    #[test]
    fn metric_kind_parses() {
        assert_eq!("BW".parse::<MetricKind>().unwrap(), MetricKind::Bw);
        assert!("kl".parse::<MetricKind>().is_err());
    }
}
