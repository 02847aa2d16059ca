//! Dense complex Hermitian and HPD matrix algebra.
//!
//! Every matrix function is evaluated through the Hermitian eigendecomposition
//! `A = U diag(λ) Uᴴ`, so `f(A) = U diag(f(λ)) Uᴴ`. Results are re-symmetrized
//! with `(X + Xᴴ)/2` before they are wrapped, which keeps long iterations from
//! drifting off the Hermitian subspace.
//!
//! [`HpdMatrix`] carries its eigendecomposition: the positivity check at
//! construction needs it anyway, and the solvers reuse it for square roots,
//! inverses and logarithms.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance on ‖A − Aᴴ‖ accepted by the checked constructors.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Smallest admissible eigenvalue of an HPD matrix, relative to its largest.
pub const EPS_PD: f64 = 1e-12;

const EIG_MAX_ITER: usize = 10_000;

/// `(X + Xᴴ)/2`, with the diagonal made exactly real.
pub fn symmetrize(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        out[(j, j)] = C64::new(x[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let v = (x[(i, j)] + x[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

fn frobenius(x: &CMatrix) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖A − B‖_F / ‖B‖_F, or the absolute error when B = 0.
pub fn relative_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = frobenius(&(a - b));
    let nb = frobenius(b);
    if nb > 0.0 {
        diff / nb
    } else {
        diff
    }
}

/// Complex N×N matrix equal to its conjugate transpose.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: CMatrix,
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianMatrix{}", self.entries)
    }
}

impl HermitianMatrix {
    /// Checked constructor: square, finite, and Hermitian to within [`HERMITIAN_TOL`]
    /// relative to the matrix norm. The stored value is symmetrized.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::invalid(format!(
                "expected a nonempty square matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        let asym = frobenius(&(&entries - entries.adjoint()));
        let scale = frobenius(&entries).max(1.0);
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::invalid(format!(
                "matrix is not Hermitian: ‖A − Aᴴ‖_F = {asym:e}"
            )));
        }
        Ok(Self::symmetrized(&entries))
    }

    /// Unchecked: stores `(X + Xᴴ)/2`. `x` must be square.
    pub fn symmetrized(x: &CMatrix) -> Self {
        Self {
            entries: symmetrize(x),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: CMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut entries = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            entries[(i, i)] = C64::new(d, 0.0);
        }
        Self { entries }
    }

    /// Builds from a row-major list of real entries (must be symmetric).
    pub fn from_real_rows(n: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::invalid("row data length does not match n²"));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            C64::new(rows[i * n + j], 0.0)
        }))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.entries)
    }

    /// Frobenius inner product Re tr(A Bᴴ) = Re tr(A B) for Hermitian A, B.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn scale(&self, c: f64) -> HermitianMatrix {
        Self {
            entries: self.entries.map(|z| z * c),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn eigen(&self) -> Result<EigenDecomposition> {
        eig_hermitian(self)
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            entries: &self.entries - &rhs.entries,
        }
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix {
            entries: -&self.entries,
        }
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, c: f64) -> HermitianMatrix {
        self.scale(c)
    }
}

/// `A = U diag(λ) Uᴴ` with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub unitary: CMatrix,
    pub eigenvalues: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(f(λ)) Uᴴ`, symmetrized.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.with_values(&vals)
    }

    fn with_values(&self, vals: &[f64]) -> CMatrix {
        let mut scaled = self.unitary.clone();
        for (j, &v) in vals.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        symmetrize(&(scaled * self.unitary.adjoint()))
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.with_values(&self.eigenvalues)
    }

    /// Uᴴ A U for an arbitrary matrix A.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.unitary.adjoint() * a * &self.unitary
    }

    /// U B Uᴴ, symmetrized.
    pub fn from_eigenbasis(&self, b: &CMatrix) -> CMatrix {
        symmetrize(&(&self.unitary * b * self.unitary.adjoint()))
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// Hermitian eigendecomposition, eigenvalues sorted descending.
pub fn eig_hermitian(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::invalid(
            "eigendecomposition of a matrix with non-finite entries",
        ));
    }
    eig_raw(&a.entries)
}

fn eig_raw(a: &CMatrix) -> Result<EigenDecomposition> {
    let n = a.nrows();
    let eig = nalgebra::linalg::SymmetricEigen::try_new(a.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::numerical("Hermitian eigensolver did not converge"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let unitary = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition {
        unitary,
        eigenvalues,
    })
}

/// Hermitian positive-definite matrix; owns its eigendecomposition.
#[derive(Clone)]
pub struct HpdMatrix {
    herm: HermitianMatrix,
    eig: Arc<EigenDecomposition>,
}

impl fmt::Debug for HpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HpdMatrix{}", self.herm.entries)
    }
}

impl PartialEq for HpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.herm == other.herm
    }
}

impl HpdMatrix {
    /// Rejects matrices whose smallest eigenvalue is ≤ [`EPS_PD`] × largest.
    pub fn new(herm: HermitianMatrix) -> Result<Self> {
        let eig = eig_hermitian(&herm)?;
        Self::from_decomposition(herm, eig)
    }

    /// Wraps `herm` with an eigendecomposition already computed for it.
    pub(crate) fn from_decomposition(
        herm: HermitianMatrix,
        eig: EigenDecomposition,
    ) -> Result<Self> {
        let (lo, hi) = (eig.min_eigenvalue(), eig.max_eigenvalue());
        if !(hi > 0.0) || lo <= EPS_PD * hi {
            return Err(Error::domain(format!(
                "matrix is not positive definite: eigenvalue range [{lo:e}, {hi:e}]"
            )));
        }
        Ok(Self {
            herm,
            eig: Arc::new(eig),
        })
    }

    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(entries)?)
    }

    /// Symmetrizes `x` and checks positivity.
    pub(crate) fn from_raw(x: &CMatrix) -> Result<Self> {
        let herm = HermitianMatrix::symmetrized(x);
        if !herm.is_finite() {
            return Err(Error::domain("matrix contains non-finite entries"));
        }
        Self::new(herm)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(HermitianMatrix::identity(n)).expect("identity is HPD")
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::from_real_diagonal(diag))
    }

    /// 1×1 matrix `[v]`.
    pub fn scalar(v: f64) -> Result<Self> {
        Self::from_real_diagonal(&[v])
    }

    /// Builds `U diag(vals) Uᴴ` from an existing eigenbasis. The values are exact
    /// images of positive eigenvalues, so only strict positivity is checked.
    fn from_eigen_values(eig: &EigenDecomposition, vals: Vec<f64>) -> Result<Self> {
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if !hi.is_finite() || !(lo > 0.0) {
            return Err(Error::domain(format!(
                "matrix function left the HPD cone: eigenvalue range [{lo:e}, {hi:e}]"
            )));
        }
        let herm = HermitianMatrix {
            entries: eig.with_values(&vals),
        };
        let n = vals.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
        let eig = EigenDecomposition {
            unitary: CMatrix::from_fn(n, n, |r, c| eig.unitary[(r, order[c])]),
            eigenvalues: order.iter().map(|&i| vals[i]).collect(),
        };
        Ok(Self {
            herm,
            eig: Arc::new(eig),
        })
    }

    pub fn dim(&self) -> usize {
        self.herm.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.herm
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.herm.entries
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn trace(&self) -> f64 {
        self.herm.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.herm.frobenius_norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig.min_eigenvalue()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eig.max_eigenvalue()
    }

    pub fn sqrt(&self) -> HpdMatrix {
        self.pow(0.5)
    }

    pub fn inv_sqrt(&self) -> HpdMatrix {
        self.pow(-0.5)
    }

    pub fn inv(&self) -> HpdMatrix {
        self.pow(-1.0)
    }

    /// `P^t` for real t.
    pub fn pow(&self, t: f64) -> HpdMatrix {
        let vals = self.eig.eigenvalues.iter().map(|&l| l.powf(t)).collect();
        Self::from_eigen_values(&self.eig, vals).expect("power of an HPD matrix overflowed")
    }

    /// Principal matrix logarithm.
    pub fn log(&self) -> HermitianMatrix {
        HermitianMatrix {
            entries: self.eig.apply(f64::ln),
        }
    }

    /// Euclidean log-determinant, Σ ln λᵢ.
    pub fn log_det(&self) -> f64 {
        self.eig.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    pub fn scaled(&self, c: f64) -> Result<HpdMatrix> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        let vals = self.eig.eigenvalues.iter().map(|&l| l * c).collect();
        Self::from_eigen_values(&self.eig, vals)
    }

    /// `X P X` for Hermitian X, symmetrized. Not necessarily positive definite.
    pub fn congruence_by(&self, x: &CMatrix) -> CMatrix {
        symmetrize(&(x * self.as_matrix() * x))
    }

    /// `Gᴴ P G` for an arbitrary square G; HPD iff G is invertible.
    pub fn congruence(&self, g: &CMatrix) -> Result<HpdMatrix> {
        if g.nrows() != self.dim() || g.ncols() != self.dim() {
            return Err(Error::invalid("congruence factor has the wrong shape"));
        }
        HpdMatrix::from_raw(&(g.adjoint() * self.as_matrix() * g))
    }
}

/// Matrix function selector for [`matrix_fn`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatrixFunction {
    Exp,
    Log,
    Sqrt,
    Inv,
    Pow(f64),
}

/// `U diag(f(λ)) Uᴴ`. `Log`, `Sqrt`, `Inv` and `Pow` require a positive-definite argument.
pub fn matrix_fn(a: &HermitianMatrix, f: MatrixFunction) -> Result<HermitianMatrix> {
    if let MatrixFunction::Exp = f {
        let eig = eig_hermitian(a)?;
        return Ok(HermitianMatrix {
            entries: eig.apply(f64::exp),
        });
    }
    let p = HpdMatrix::new(a.clone()).map_err(|e| match e {
        Error::DomainError(msg) => Error::domain(format!("{f:?} requires an HPD argument: {msg}")),
        other => other,
    })?;
    Ok(match f {
        MatrixFunction::Log => p.log(),
        MatrixFunction::Sqrt => p.sqrt().herm,
        MatrixFunction::Inv => p.inv().herm,
        MatrixFunction::Pow(t) => p.pow(t).herm,
        MatrixFunction::Exp => unreachable!(),
    })
}

/// Matrix exponential of a Hermitian matrix, which is HPD.
pub fn exp_hpd(a: &HermitianMatrix) -> Result<HpdMatrix> {
    let eig = eig_hermitian(a)?;
    let vals = eig.eigenvalues.iter().map(|l| l.exp()).collect();
    HpdMatrix::from_eigen_values(&eig, vals)
}

/// Solves `P X + X P = A` in the eigenbasis of P: `X̃ᵢⱼ = Ãᵢⱼ / (λᵢ + λⱼ)`.
pub fn lyapunov_solve(p: &HpdMatrix, a: &HermitianMatrix) -> Result<HermitianMatrix> {
    if p.dim() != a.dim() {
        return Err(Error::invalid(format!(
            "Lyapunov operands differ in dimension: {} vs {}",
            p.dim(),
            a.dim()
        )));
    }
    Ok(lyapunov_raw(p.eigen(), a.as_matrix()))
}

pub(crate) fn lyapunov_raw(eig: &EigenDecomposition, a: &CMatrix) -> HermitianMatrix {
    let mut t = eig.to_eigenbasis(a);
    let l = &eig.eigenvalues;
    for j in 0..t.ncols() {
        for i in 0..t.nrows() {
            t[(i, j)] /= l[i] + l[j];
        }
    }
    HermitianMatrix {
        entries: eig.from_eigenbasis(&t),
    }
}

/// Geometric midpoint `P1 # P2 = P1^{1/2} (P1^{-1/2} P2 P1^{-1/2})^{1/2} P1^{1/2}`.
pub fn geometric_midpoint(p1: &HpdMatrix, p2: &HpdMatrix) -> Result<HpdMatrix> {
    check_same_dim(p1, p2)?;
    let s = p1.sqrt();
    let si = p1.inv_sqrt();
    let inner = HpdMatrix::from_raw(&p2.congruence_by(si.as_matrix()))?;
    HpdMatrix::from_raw(&inner.sqrt().congruence_by(s.as_matrix()))
}

pub(crate) fn check_same_dim(p1: &HpdMatrix, p2: &HpdMatrix) -> Result<()> {
    if p1.dim() != p2.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            p1.dim(),
            p2.dim()
        )));
    }
    Ok(())
}

/// √tr(A Aᴴ).
pub fn frobenius_norm(a: &HermitianMatrix) -> f64 {
    a.frobenius_norm()
}

/// Fréchet derivative of a scalar function lifted to Hermitian matrices, at the matrix
/// with eigendecomposition `eig`, along `v` (Daleckii–Krein): in the eigenbasis,
/// entry (i, j) of `v` is multiplied by the divided difference `f[λᵢ, λⱼ]`.
pub(crate) fn frechet_derivative(
    eig: &EigenDecomposition,
    v: &CMatrix,
    divided_difference: impl Fn(f64, f64) -> f64,
) -> HermitianMatrix {
    let mut t = eig.to_eigenbasis(v);
    let l = &eig.eigenvalues;
    for j in 0..t.ncols() {
        for i in 0..t.nrows() {
            t[(i, j)] *= divided_difference(l[i], l[j]);
        }
    }
    HermitianMatrix {
        entries: eig.from_eigenbasis(&t),
    }
}

fn degenerate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Divided difference of ln: `(ln a − ln b)/(a − b)`, `1/a` on the diagonal.
pub(crate) fn log_divided_difference(a: f64, b: f64) -> f64 {
    if degenerate(a, b) {
        2.0 / (a + b)
    } else {
        let x = (a - b) / b;
        x.ln_1p() / (a - b)
    }
}

/// Divided difference of exp: `(eᵃ − eᵇ)/(a − b)`, `eᵃ` on the diagonal.
pub(crate) fn exp_divided_difference(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0) {
        (0.5 * (a + b)).exp()
    } else {
        b.exp() * d.exp_m1() / d
    }
}

/// `D_P Log [V]` for HPD P.
pub fn frechet_log(p: &HpdMatrix, v: &HermitianMatrix) -> HermitianMatrix {
    frechet_derivative(p.eigen(), v.as_matrix(), log_divided_difference)
}

/// `D_X exp [V]` for Hermitian X.
pub fn frechet_exp(x: &HermitianMatrix, v: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = eig_hermitian(x)?;
    Ok(frechet_derivative(
        &eig,
        v.as_matrix(),
        exp_divided_difference,
    ))
}

/// Orthonormal (Frobenius) basis of the real vector space of N×N Hermitian matrices.
#[derive(Clone, Debug)]
pub struct HermitianBasis {
    dim: usize,
    elements: Vec<HermitianMatrix>,
}

impl HermitianBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Coordinates ⟨Eₐ, A⟩_F.
    pub fn coefficients(&self, a: &HermitianMatrix) -> Vec<f64> {
        self.elements.iter().map(|e| e.inner(a)).collect()
    }

    /// Σ cₐ Eₐ.
    pub fn assemble(&self, coeffs: &[f64]) -> HermitianMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (e, &c) in self.elements.iter().zip(coeffs) {
            out += e.as_matrix() * C64::new(c, 0.0);
        }
        HermitianMatrix::symmetrized(&out)
    }
}

/// Diagonal units Eᵢᵢ, then (eᵢeⱼᵀ + eⱼeᵢᵀ)/√2 for i < j, then i(eᵢeⱼᵀ − eⱼeᵢᵀ)/√2 for i < j.
pub fn hermitian_basis(n: usize) -> Result<HermitianBasis> {
    if n == 0 {
        return Err(Error::invalid("Hermitian basis needs N ≥ 1"));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = CMatrix::zeros(n, n);
        e[(i, i)] = C64::new(1.0, 0.0);
        elements.push(HermitianMatrix { entries: e });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut e = CMatrix::zeros(n, n);
            e[(i, j)] = C64::new(r, 0.0);
            e[(j, i)] = C64::new(r, 0.0);
            elements.push(HermitianMatrix { entries: e });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut e = CMatrix::zeros(n, n);
            e[(i, j)] = C64::new(0.0, r);
            e[(j, i)] = C64::new(0.0, -r);
            elements.push(HermitianMatrix { entries: e });
        }
    }
    Ok(HermitianBasis { dim: n, elements })
}
