//! Target and clutter simulation plus the covariance estimators fed to the detectors.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, CMatrix, HermitianMatrix, HpdMatrix, C64};

pub type CVector = DVector<C64>;

/// Relative diagonal loading applied by [`toeplitz_cov`] and [`scm`].
pub const LOADING: f64 = 1e-6;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One radar snapshot: N complex pulse samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    values: CVector,
}

impl Snapshot {
    pub fn new(values: CVector) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("snapshot must have at least one sample"));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("snapshot contains non-finite samples"));
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &CVector {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn scaled(&self, c: C64) -> Snapshot {
        Snapshot {
            values: &self.values * c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutterParams {
    pub n: usize,
    pub cnr_db: f64,
    pub rho: f64,
    pub fc: f64,
    pub shape_alpha: f64,
    pub scale_beta: f64,
    /// `false` gives the Gaussian-clutter benchmark (τ ≡ 1).
    pub texture_on: bool,
}

impl ClutterParams {
    /// N = 8, 20 dB CNR, ρ = 0.9, f_c = 0.2, Gamma(4, 3) texture.
    pub fn paper() -> Self {
        Self {
            n: 8,
            cnr_db: 20.0,
            rho: 0.9,
            fc: 0.2,
            shape_alpha: 4.0,
            scale_beta: 3.0,
            texture_on: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!(
                "clutter needs N ≥ 2, got {}",
                self.n
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if !(0.0..1.0).contains(&self.fc) {
            return Err(Error::invalid(format!(
                "fc must lie in [0, 1), got {}",
                self.fc
            )));
        }
        if !(self.shape_alpha > 0.0 && self.scale_beta > 0.0)
            || !self.shape_alpha.is_finite()
            || !self.scale_beta.is_finite()
        {
            return Err(Error::invalid("gamma shape and scale must be positive"));
        }
        if self.cnr_db.is_nan() || self.cnr_db == f64::INFINITY {
            return Err(Error::invalid("cnr_db must be finite or -inf"));
        }
        Ok(())
    }

    /// σ_c² in linear units; `-inf` dB disables the clutter term.
    pub fn cnr_linear(&self) -> f64 {
        db_to_linear(self.cnr_db)
    }

    /// E[τ]: αβ with texture, 1 without.
    pub fn texture_mean(&self) -> f64 {
        if self.texture_on {
            self.shape_alpha * self.scale_beta
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SteeringMode {
    Ideal {
        fd: f64,
    },
    Mismatched {
        theta_mis_deg: f64,
        orthogonal_draw_seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec {
    pub mode: SteeringMode,
    pub n: usize,
}

impl SteeringSpec {
    pub fn ideal(n: usize, fd: f64) -> Self {
        Self {
            mode: SteeringMode::Ideal { fd },
            n,
        }
    }

    pub fn mismatched(n: usize, theta_mis_deg: f64, orthogonal_draw_seed: u64) -> Self {
        Self {
            mode: SteeringMode::Mismatched {
                theta_mis_deg,
                orthogonal_draw_seed,
            },
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid("steering dimension must be at least 1"));
        }
        match self.mode {
            SteeringMode::Ideal { fd } => check_doppler(fd),
            SteeringMode::Mismatched { theta_mis_deg, .. } => check_theta(theta_mis_deg),
        }
    }

    /// Signature actually carried by the target.
    pub fn target(&self) -> Result<Snapshot> {
        match self.mode {
            SteeringMode::Ideal { fd } => steering_ideal(self.n, fd),
            SteeringMode::Mismatched {
                theta_mis_deg,
                orthogonal_draw_seed,
            } => steering_mismatched(
                self.n,
                theta_mis_deg,
                &mut RngStream::new(orthogonal_draw_seed, 0).rng(),
            ),
        }
    }

    /// Signature the detectors assume: the target itself when ideal, `e₁/√N`
    /// (the zero-mismatch signature) otherwise.
    pub fn nominal(&self) -> Result<Snapshot> {
        match self.mode {
            SteeringMode::Ideal { fd } => steering_ideal(self.n, fd),
            SteeringMode::Mismatched { .. } => {
                let mut v = CVector::zeros(self.n);
                v[0] = C64::new(1.0 / (self.n as f64).sqrt(), 0.0);
                Snapshot::new(v)
            }
        }
    }
}

fn check_doppler(f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::invalid(format!(
            "normalized Doppler must lie in [0, 1), got {f}"
        )));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=90.0).contains(&theta) {
        return Err(Error::invalid(format!(
            "mismatch angle must lie in [0, 90] degrees, got {theta}"
        )));
    }
    Ok(())
}

/// Reproducible random stream: a ChaCha8 generator keyed by the master seed and
/// positioned on its own stream, so draws never depend on execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Stream `(phase << 32) | index`, the layout used by the experiment drivers.
    pub fn for_trial(master_seed: u64, phase: u32, index: u32) -> Self {
        Self::new(master_seed, ((phase as u64) << 32) | index as u64)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Circular standard complex normal vector, E[wwᴴ] = I.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// `(1/√N)(1, e^{−i2πf}, …, e^{−i2πf(N−1)})`.
pub fn steering_ideal(n: usize, fd: f64) -> Result<Snapshot> {
    if n < 1 {
        return Err(Error::invalid("steering dimension must be at least 1"));
    }
    check_doppler(fd)?;
    let scale = 1.0 / (n as f64).sqrt();
    Snapshot::new(CVector::from_fn(n, |k, _| {
        C64::from_polar(scale, -2.0 * PI * fd * k as f64)
    }))
}

/// `(1/√N) e^{i2π} (e₁ cos θ + (y/‖y‖) sin θ)` with y a CN(0, I) draw projected
/// orthogonal to e₁.
pub fn steering_mismatched<R: Rng + ?Sized>(
    n: usize,
    theta_mis_deg: f64,
    rng: &mut R,
) -> Result<Snapshot> {
    if n < 2 {
        return Err(Error::invalid("a mismatched signature needs N ≥ 2"));
    }
    check_theta(theta_mis_deg)?;
    let mut y = None;
    for _ in 0..10 {
        let mut draw = standard_complex_normal(rng, n);
        draw[0] = C64::new(0.0, 0.0);
        let norm = draw.norm();
        if norm >= 1e-12 {
            y = Some(draw / C64::from(norm));
            break;
        }
    }
    let y = y.ok_or_else(|| Error::numerical("orthogonal component degenerate after 10 draws"))?;
    let theta = theta_mis_deg.to_radians();
    let mut s = y * C64::from(theta.sin());
    s[0] += C64::from(theta.cos());
    let phase = C64::from_polar(1.0, 2.0 * PI);
    Snapshot::new(s * (phase / (n as f64).sqrt()))
}

/// Speckle covariance `Σ = Σ₀ + I`, `Σ₀(i,j) = σ_c² ρ^{|i−j|} e^{i2πf_c(i−j)}`.
///
/// The phase runs opposite to [`steering_ideal`], so the clutter ridge of Σ₀ lies
/// along `steering_ideal(N, 1 − f_c)`.
pub fn sigma_matrix(params: &ClutterParams) -> Result<HpdMatrix> {
    params.validate()?;
    let n = params.n;
    let s2 = params.cnr_linear();
    let m = CMatrix::from_fn(n, n, |i, j| {
        let lag = i as f64 - j as f64;
        let mut v = C64::from_polar(s2 * params.rho.powf(lag.abs()), 2.0 * PI * params.fc * lag);
        if i == j {
            v += 1.0;
        }
        v
    });
    HpdMatrix::from_raw(&m)
}

/// Compound-Gaussian clutter generator with the speckle colouring factor cached.
#[derive(Clone, Debug)]
pub struct ClutterModel {
    params: ClutterParams,
    sigma: HpdMatrix,
    colour: CMatrix,
    texture: Option<Gamma<f64>>,
}

impl ClutterModel {
    pub fn new(params: &ClutterParams) -> Result<Self> {
        let sigma = sigma_matrix(params)?;
        let colour = sigma.sqrt().as_matrix().clone();
        let texture = if params.texture_on {
            Some(
                Gamma::new(params.shape_alpha, params.scale_beta)
                    .map_err(|e| Error::invalid(format!("gamma texture: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            params: params.clone(),
            sigma,
            colour,
            texture,
        })
    }

    pub fn params(&self) -> &ClutterParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn sigma(&self) -> &HpdMatrix {
        &self.sigma
    }

    /// Clutter autocovariance used for SCR/INR scaling: E[τ]·Σ.
    pub fn scr_covariance(&self) -> HpdMatrix {
        self.sigma
            .scaled(self.params.texture_mean())
            .expect("texture mean is positive")
    }

    pub fn sample_texture<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.texture.map_or(1.0, |g| g.sample(rng))
    }

    /// `c = √τ Σ^{1/2} w`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Snapshot {
        let tau = self.sample_texture(rng);
        let w = standard_complex_normal(rng, self.n());
        Snapshot {
            values: (&self.colour * w) * C64::from(tau.sqrt()),
        }
    }
}

pub fn sample_clutter<R: Rng + ?Sized>(params: &ClutterParams, rng: &mut R) -> Result<Snapshot> {
    Ok(ClutterModel::new(params)?.sample(rng))
}

fn quad_inverse(s: &Snapshot, r: &HpdMatrix) -> Result<f64> {
    if s.len() != r.dim() {
        return Err(Error::invalid(format!(
            "signature has length {} but the covariance is {}×{}",
            s.len(),
            r.dim(),
            r.dim()
        )));
    }
    let eig = r.eigen();
    let t = eig.unitary.adjoint() * s.values();
    Ok(t.iter()
        .zip(&eig.eigenvalues)
        .map(|(v, l)| v.norm_sqr() / l)
        .sum())
}

/// `|a| = √(10^{SCR/10} / (sᴴ R⁻¹ s))`.
pub fn amplitude_from_scr(scr_db: f64, s: &Snapshot, r: &HpdMatrix) -> Result<f64> {
    let q = quad_inverse(s, r)?;
    if !(q > 0.0) {
        return Err(Error::invalid("signature must be nonzero"));
    }
    Ok((db_to_linear(scr_db) / q).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

/// CUT snapshot: clutter alone under H0, `a·s + c` under H1 with real `a ≥ 0`.
pub fn make_observation<R: Rng + ?Sized>(
    hypothesis: Hypothesis,
    clutter: &ClutterModel,
    target: &Snapshot,
    scr_db: f64,
    rng: &mut R,
) -> Result<Snapshot> {
    let c = clutter.sample(rng);
    match hypothesis {
        Hypothesis::H0 => Ok(c),
        Hypothesis::H1 => {
            let a = amplitude_from_scr(scr_db, target, &clutter.scr_covariance())?;
            Snapshot::new(c.values + target.values() * C64::from(a))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSpec {
    pub fi: f64,
    pub inr_db: f64,
    pub count: usize,
}

impl InterferenceSpec {
    /// Two interferers at f_i = 0.2; the 10 dB INR is a configuration default.
    pub fn paper() -> Self {
        Self {
            fi: 0.2,
            inr_db: 10.0,
            count: 2,
        }
    }
}

/// `m` clutter snapshots; the first `count` also carry `b·steering_ideal(N, f_i)`
/// with |b| set from the INR like an SCR amplitude and a uniform random phase.
pub fn make_secondary_set<R: Rng + ?Sized>(
    m: usize,
    clutter: &ClutterModel,
    interference: Option<&InterferenceSpec>,
    rng: &mut R,
) -> Result<Vec<Snapshot>> {
    if m == 0 {
        return Err(Error::invalid("secondary set needs m ≥ 1"));
    }
    let jam = match interference {
        Some(spec) if spec.count > m => {
            return Err(Error::invalid(format!(
                "{} interferers requested for {m} secondary snapshots",
                spec.count
            )))
        }
        Some(spec) if spec.count > 0 => {
            let v = steering_ideal(clutter.n(), spec.fi)?;
            let b = amplitude_from_scr(spec.inr_db, &v, &clutter.scr_covariance())?;
            Some((spec.count, v, b))
        }
        _ => None,
    };
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut c = clutter.sample(rng);
        if let Some((count, v, b)) = &jam {
            if i < *count {
                let phase: f64 = rng.random::<f64>() * 2.0 * PI;
                c.values += v.values() * C64::from_polar(*b, phase);
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// `r_k = (1/N) Σ_{l=0}^{N−k−1} x_l conj(x_{l+k})`.
pub fn autocorr_estimate(x: &Snapshot) -> Vec<C64> {
    let n = x.len();
    let v = x.values();
    (0..n)
        .map(|k| (0..n - k).map(|l| v[l] * v[l + k].conj()).sum::<C64>() / n as f64)
        .collect()
}

/// Adds `δ (tr/N) I` when the smallest eigenvalue is below `δ tr/N`.
fn loaded(h: HermitianMatrix) -> Result<HpdMatrix> {
    let n = h.dim();
    let floor = LOADING * h.trace() / n as f64;
    if !(floor > 0.0) {
        return Err(Error::domain("covariance estimate has zero trace"));
    }
    let mut eig = eig_hermitian(&h)?;
    if eig.min_eigenvalue() < floor {
        // Shifting by a multiple of I keeps the eigenvectors.
        let shifted = &h + &HermitianMatrix::identity(n).scale(floor);
        eig.eigenvalues.iter_mut().for_each(|l| *l += floor);
        return HpdMatrix::from_decomposition(shifted, eig);
    }
    HpdMatrix::from_decomposition(h, eig)
}

/// Hermitian Toeplitz matrix with `r_k` on the k-th subdiagonal.
pub fn toeplitz_cov(x: &Snapshot) -> Result<HpdMatrix> {
    let r = autocorr_estimate(x);
    let n = r.len();
    let m = CMatrix::from_fn(n, n, |i, j| if i >= j { r[i - j] } else { r[j - i].conj() });
    loaded(HermitianMatrix::symmetrized(&m))
}

/// `(1/m) Σ xᵢ xᵢᴴ`, loaded when (near) singular.
pub fn scm(snapshots: &[Snapshot]) -> Result<HpdMatrix> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::invalid("SCM needs at least one snapshot"))?;
    let n = first.len();
    let mut acc = CMatrix::zeros(n, n);
    for x in snapshots {
        if x.len() != n {
            return Err(Error::invalid("snapshots have different lengths"));
        }
        acc += x.values() * x.values().adjoint();
    }
    acc /= C64::from(snapshots.len() as f64);
    loaded(HermitianMatrix::symmetrized(&acc))
}

#[cfg(test)]
mod tests;
