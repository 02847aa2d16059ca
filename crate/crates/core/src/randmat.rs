//! Random Hermitian and HPD matrices for tests and solver benchmarks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, HermitianMatrix, HpdMatrix, C64};

/// Matrix of i.i.d. standard circular complex normals (E|gᵢⱼ|² = 1).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let g = complex_gaussian(rng, n, n);
    HermitianMatrix::symmetrized(&(&g + g.adjoint()))
}

/// `G Gᴴ / n + I/10`: well conditioned, eigenvalues of order one.
pub fn random_hpd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HpdMatrix {
    let g = complex_gaussian(rng, n, n);
    let p =
        &g * g.adjoint() / C64::new(n as f64, 0.0) + CMatrix::identity(n, n) * C64::new(0.1, 0.0);
    HpdMatrix::from_raw(&p).expect("Gram matrix plus identity is HPD")
}

/// Random HPD matrices that share an eigenbasis (a commuting family).
pub fn random_commuting_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (HpdMatrix, HpdMatrix) {
    let u = random_hermitian(rng, n)
        .eigen()
        .expect("eigendecomposition")
        .unitary;
    let make = |rng: &mut R| {
        let d = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new((rng.random::<f64>() * 3.0 - 1.5).exp(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        HpdMatrix::from_raw(&(&u * d * u.adjoint())).expect("positive spectrum")
    };
    let a = make(rng);
    let b = make(rng);
    (a, b)
}

/// Random invertible matrix (complex Gaussian, shifted away from singularity).
pub fn random_invertible<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    complex_gaussian(rng, n, n) + CMatrix::identity(n, n) * C64::new(1.5, 0.0)
}
