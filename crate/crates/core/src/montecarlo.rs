//! Threshold calibration, detection-probability sweeps and the BW solver benchmark.
//!
//! Every trial draws its own secondary set and CUT from
//! `RngStream::for_trial(master_seed, phase, trial)`: phase 0 is calibration and
//! phase k+1 is sweep point k. Trials run on a rayon pool and are collected in
//! index order, so results do not depend on the worker count.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::averaging::{self, BwMeanSolver, SolverConfig, SolverReport, Statistic};
use crate::detect::{amf_whitened, anmf_whitened, matrix_cfar_stat, DetectorSpec, Whitener};
use crate::error::{Error, Result};
use crate::linalg::{relative_error, HpdMatrix, C64};
use crate::metric::MetricKind;
use crate::randmat::random_hpd;
use crate::signal::{
    amplitude_from_scr, make_secondary_set, scm, steering_ideal, steering_mismatched, toeplitz_cov,
    ClutterModel, ClutterParams, InterferenceSpec, RngStream, Snapshot, SteeringMode, SteeringSpec,
};

/// Share of dropped calibration trials above which a warning is attached.
pub const DEGRADED_DROP_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Scr,
    Fd,
    Mismatch,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Scr => "scr",
            SweepKind::Fd => "fd",
            SweepKind::Mismatch => "mismatch",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scr" => Ok(SweepKind::Scr),
            "fd" => Ok(SweepKind::Fd),
            "mismatch" => Ok(SweepKind::Mismatch),
            _ => Err(Error::invalid(format!(
                "unknown sweep '{s}' (expected scr, fd or mismatch)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    /// Secondary snapshots per trial.
    pub m: usize,
    pub clutter: ClutterParams,
    /// Target signature for the SCR sweep. The fd sweep replaces it by the ideal
    /// signature at each grid point; the mismatch sweep keeps its draw seed.
    pub steering: SteeringSpec,
    pub interference: Option<InterferenceSpec>,
    pub pfa: f64,
    pub trials_pd: usize,
    pub calib_trials: usize,
    pub detectors: Vec<DetectorSpec>,
    pub scr_grid_db: Vec<f64>,
    pub fd_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    /// SCR used by the fd and mismatch sweeps.
    pub scr_db: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// Default calibration size, ⌈100/pfa⌉.
    pub fn default_calib_trials(pfa: f64) -> usize {
        (100.0 / pfa).ceil() as usize
    }

    /// Uniform grid of `count` points on [0, 1).
    pub fn uniform_fd_grid(count: usize) -> Vec<f64> {
        (0..count).map(|k| k as f64 / count as f64).collect()
    }

    /// Laptop-scale scenario: N = 8, m = N, pfa = 10⁻², 10⁴ calibration trials,
    /// 200 trials per point.
    pub fn desk(sweep: SweepKind) -> Self {
        let n = 8;
        let mut cfg = Self {
            n,
            m: n,
            clutter: ClutterParams::paper(),
            steering: SteeringSpec::ideal(n, 0.2),
            interference: Some(InterferenceSpec::paper()),
            pfa: 1e-2,
            trials_pd: 200,
            calib_trials: 10_000,
            detectors: DetectorSpec::standard_set(),
            scr_grid_db: Vec::new(),
            fd_grid: Vec::new(),
            theta_grid: Vec::new(),
            scr_db: 25.0,
            solver_tol: SolverConfig::DETECTION_TOL,
            solver_max_iter: SolverConfig::DEFAULT_MAX_ITER,
            master_seed: 1,
        };
        match sweep {
            SweepKind::Scr => cfg.scr_grid_db = vec![10.0, 12.5, 15.0, 17.5, 20.0, 22.5, 25.0],
            SweepKind::Fd => cfg.fd_grid = Self::uniform_fd_grid(21),
            SweepKind::Mismatch => {
                cfg.m = 3 * n;
                cfg.steering = SteeringSpec::mismatched(n, 30.0, 7);
                cfg.theta_grid = vec![1.0, 15.0, 30.0];
            }
        }
        cfg
    }

    /// Full-scale scenario: pfa = 10⁻³, ⌈100/pfa⌉ calibration trials, 2000 trials
    /// per point. Hours of compute on a single core.
    pub fn paper(sweep: SweepKind) -> Self {
        let mut cfg = Self::desk(sweep);
        cfg.pfa = 1e-3;
        cfg.calib_trials = Self::default_calib_trials(cfg.pfa);
        cfg.trials_pd = 2000;
        if sweep == SweepKind::Scr {
            cfg.scr_grid_db = (0..=8).map(|k| 5.0 * k as f64).collect();
        }
        cfg
    }

    pub fn sweep_kind(&self) -> Result<SweepKind> {
        let axes = [
            (SweepKind::Scr, self.scr_grid_db.len()),
            (SweepKind::Fd, self.fd_grid.len()),
            (SweepKind::Mismatch, self.theta_grid.len()),
        ];
        let active: Vec<SweepKind> = axes
            .iter()
            .filter(|(_, n)| *n > 0)
            .map(|(k, _)| *k)
            .collect();
        match active.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::invalid(
                "exactly one of scr_grid_db, fd_grid, theta_grid must be nonempty",
            )),
        }
    }

    pub fn axis(&self) -> Result<&[f64]> {
        Ok(match self.sweep_kind()? {
            SweepKind::Scr => &self.scr_grid_db,
            SweepKind::Fd => &self.fd_grid,
            SweepKind::Mismatch => &self.theta_grid,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.clutter.validate()?;
        self.steering.validate()?;
        if self.clutter.n != self.n || self.steering.n != self.n {
            return Err(Error::invalid(format!(
                "dimension mismatch: n = {}, clutter.n = {}, steering.n = {}",
                self.n, self.clutter.n, self.steering.n
            )));
        }
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::invalid(format!(
                "pfa must lie in (0, 1), got {}",
                self.pfa
            )));
        }
        let min_calib = (1.0 / self.pfa).ceil() as usize;
        if self.calib_trials < min_calib {
            return Err(Error::invalid(format!(
                "calib_trials must be at least ⌈1/pfa⌉ = {min_calib}, got {}",
                self.calib_trials
            )));
        }
        if self.trials_pd == 0 {
            return Err(Error::invalid("trials_pd must be at least 1"));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("at least one detector is required"));
        }
        if let Some(jam) = &self.interference {
            if jam.count > self.m {
                return Err(Error::invalid(format!(
                    "{} interferers requested for m = {}",
                    jam.count, self.m
                )));
            }
            if !(0.0..1.0).contains(&jam.fi) {
                return Err(Error::invalid("interference Doppler must lie in [0, 1)"));
            }
        }
        let sweep = self.sweep_kind()?;
        let axis = self.axis()?;
        // An SCR of +inf means a saturating target (amplitude 1e6).
        let allowed = |v: &f64| v.is_finite() || (sweep == SweepKind::Scr && *v == f64::INFINITY);
        if !axis.iter().all(allowed) {
            return Err(Error::invalid("sweep axis values must be finite"));
        }
        if axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sweep axis must be strictly increasing"));
        }
        match sweep {
            SweepKind::Fd if axis.iter().any(|f| !(0.0..1.0).contains(f)) => {
                return Err(Error::invalid("fd_grid values must lie in [0, 1)"))
            }
            SweepKind::Mismatch if axis.iter().any(|t| !(0.0..=90.0).contains(t)) => {
                return Err(Error::invalid("theta_grid values must lie in [0, 90]"))
            }
            _ => {}
        }
        if sweep == SweepKind::Mismatch && self.n < 2 {
            return Err(Error::invalid("mismatch sweep needs n ≥ 2"));
        }
        self.solver_config().validate()
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::detection()
            .with_tol(self.solver_tol)
            .with_max_iter(self.solver_max_iter)
    }

    /// SHA-256 of the canonical JSON encoding, as 16 hex digits.
    pub fn config_hash(&self) -> String {
        hash_json(self)
    }
}

/// SHA-256 of the JSON encoding of `value`, as 16 hex digits.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serialises");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Worker-count control for the trial loops; `None` uses rayon's global pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Exec {
    pub workers: Option<usize>,
}

impl Exec {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: Some(workers),
        }
    }

    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.workers {
            None => Ok(f()),
            Some(0) => Err(Error::invalid("workers must be at least 1")),
            Some(w) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// γ as the K-th largest statistic, K = ⌈pfa·n⌉, with the number of strict
/// exceedances. NaN entries must be filtered out first.
pub fn gamma_from_stats(stats: &[f64], pfa: f64) -> Result<(f64, usize)> {
    if stats.is_empty() {
        return Err(Error::invalid("no statistics to calibrate on"));
    }
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::invalid(format!("pfa must lie in (0, 1), got {pfa}")));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // Guard the product against rounding above an integer (0.01 · 1000 = 10.000000000000002).
    let k = ((pfa * sorted.len() as f64) * (1.0 - 1e-12))
        .ceil()
        .max(1.0) as usize;
    let gamma = sorted[k - 1];
    let exceed = sorted.iter().take_while(|&&v| v > gamma).count();
    Ok((gamma, exceed))
}

/// Pd estimate with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdEstimate {
    pub pd: f64,
    pub stderr: f64,
    pub detections: usize,
    /// Trials that produced a statistic.
    pub trials: usize,
    pub dropped: usize,
}

impl PdEstimate {
    pub fn from_counts(detections: usize, trials: usize, dropped: usize) -> Self {
        let (pd, stderr) = if trials == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let p = detections as f64 / trials as f64;
            (p, (p * (1.0 - p) / trials as f64).sqrt())
        };
        Self {
            pd,
            stderr,
            detections,
            trials,
            dropped,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub detector: DetectorSpec,
    /// Axis value whose nominal signature the threshold belongs to (fd sweep);
    /// `None` when one threshold serves the whole sweep.
    pub axis: Option<f64>,
    pub gamma: f64,
    pub calib_trials: usize,
    pub exceedances: usize,
    pub dropped: usize,
    pub nonconverged: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub entries: Vec<ThresholdEntry>,
}

impl ThresholdTable {
    pub fn gamma(&self, detector: DetectorSpec, axis: Option<f64>) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.detector == detector && (e.axis.is_none() || e.axis == axis))
            .map(|e| e.gamma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdRow {
    pub axis: f64,
    pub detector: DetectorSpec,
    pub estimate: PdEstimate,
    pub gamma: f64,
    pub nonconverged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdCurve {
    pub sweep: SweepKind,
    pub axis: Vec<f64>,
    /// Axis-major, detectors in configuration order.
    pub rows: Vec<PdRow>,
    pub config_hash: String,
    pub seed: u64,
}

impl PdCurve {
    pub fn series(&self, detector: DetectorSpec) -> Vec<&PdRow> {
        self.rows
            .iter()
            .filter(|r| r.detector == detector)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: PdCurve,
    pub thresholds: ThresholdTable,
    pub warnings: Vec<String>,
}

/// What the CUT contains.
#[derive(Clone, Debug)]
enum Cut {
    Noise,
    Target { signature: Snapshot, amplitude: f64 },
}

/// Statistics of one trial: `stats[detector][variant]`, NaN where the detector's
/// estimator failed.
struct TrialOutcome {
    stats: Vec<Vec<f64>>,
    nonconverged: Vec<bool>,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    clutter: ClutterModel,
    averagings: Vec<(MetricKind, Statistic)>,
    need_scm: bool,
    need_cut_cov: bool,
    solver: SolverConfig,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut averagings = Vec::new();
        for d in &cfg.detectors {
            if let Some(a) = d.averaging() {
                if !averagings.contains(&a) {
                    averagings.push(a);
                }
            }
        }
        Ok(Self {
            cfg,
            clutter: ClutterModel::new(&cfg.clutter)?,
            averagings,
            need_scm: cfg
                .detectors
                .iter()
                .any(|d| matches!(d, DetectorSpec::Amf | DetectorSpec::Anmf)),
            need_cut_cov: cfg
                .detectors
                .iter()
                .any(|d| matches!(d, DetectorSpec::MatrixCfar(..))),
            solver: cfg.solver_config(),
        })
    }

    fn trial(&self, stream: RngStream, cut: &Cut, nominals: &[Snapshot]) -> Result<TrialOutcome> {
        let mut rng = stream.rng();
        let secondary = make_secondary_set(
            self.cfg.m,
            &self.clutter,
            self.cfg.interference.as_ref(),
            &mut rng,
        )?;
        let mut x = self.clutter.sample(&mut rng);
        if let Cut::Target {
            signature,
            amplitude,
        } = cut
        {
            x = Snapshot::new(x.values() + signature.values() * C64::from(*amplitude))?;
        }

        let scm_white = if self.need_scm {
            scm(&secondary).ok().map(|r| Whitener::new(&r))
        } else {
            None
        };
        let mut averages: BTreeMap<(u8, u8), Option<SolverReport>> = BTreeMap::new();
        if !self.averagings.is_empty() {
            let covs: Result<Vec<HpdMatrix>> = secondary.iter().map(toeplitz_cov).collect();
            for &(kind, stat) in &self.averagings {
                let report = covs.as_ref().ok().and_then(|c| {
                    averaging::solve_weighted(c, None, kind, stat, &self.solver)
                        .map_err(|e| log::debug!("{kind} {stat} solver failed: {e}"))
                        .ok()
                });
                averages.insert(key(kind, stat), report);
            }
        }
        let cut_cov = if self.need_cut_cov {
            toeplitz_cov(&x).ok()
        } else {
            None
        };

        let nv = nominals.len();
        let steering_white = |w: &Whitener| -> Result<(Vec<_>, _)> {
            let ws = nominals
                .iter()
                .map(|s| w.apply(s))
                .collect::<Result<Vec<_>>>()?;
            Ok((ws, w.apply(&x)?))
        };

        let mut stats = Vec::with_capacity(self.cfg.detectors.len());
        let mut nonconverged = Vec::with_capacity(self.cfg.detectors.len());
        for det in &self.cfg.detectors {
            let report = det
                .averaging()
                .and_then(|(k, s)| averages[&key(k, s)].as_ref());
            nonconverged.push(report.is_some_and(|r| !r.converged));
            let row = match *det {
                DetectorSpec::Amf | DetectorSpec::Anmf => match &scm_white {
                    Some(w) => {
                        let (ws, wx) = steering_white(w)?;
                        ws.iter()
                            .map(|s| match det {
                                DetectorSpec::Amf => amf_whitened(&wx, s),
                                _ => anmf_whitened(&wx, s),
                            })
                            .collect()
                    }
                    None => vec![f64::NAN; nv],
                },
                DetectorSpec::GeometricAmf(..) => match report {
                    Some(r) => {
                        let (ws, wx) = steering_white(&Whitener::new(&r.result))?;
                        ws.iter().map(|s| amf_whitened(&wx, s)).collect()
                    }
                    None => vec![f64::NAN; nv],
                },
                DetectorSpec::MatrixCfar(kind, _) => {
                    let v = match (report, &cut_cov) {
                        (Some(r), Some(c)) => {
                            matrix_cfar_stat(&r.result, c, kind).unwrap_or(f64::NAN)
                        }
                        _ => f64::NAN,
                    };
                    vec![v; nv]
                }
            };
            stats.push(row);
        }
        Ok(TrialOutcome {
            stats,
            nonconverged,
        })
    }

    fn run_trials(
        &self,
        exec: Exec,
        phase: u32,
        count: usize,
        cut: &Cut,
        nominals: &[Snapshot],
    ) -> Result<Vec<TrialOutcome>> {
        let seed = self.cfg.master_seed;
        exec.install(|| {
            (0..count)
                .into_par_iter()
                .map(|t| self.trial(RngStream::for_trial(seed, phase, t as u32), cut, nominals))
                .collect::<Result<Vec<_>>>()
        })?
    }
}

fn key(kind: MetricKind, stat: Statistic) -> (u8, u8) {
    (kind as u8, stat as u8)
}

/// One sweep point: the target actually present and the signature detectors assume.
struct AxisPoint {
    value: f64,
    target: Snapshot,
    scr_db: f64,
    /// Index into the calibration variants.
    variant: usize,
}

fn sweep_layout(cfg: &ScenarioConfig) -> Result<(SweepKind, Vec<AxisPoint>, Vec<Snapshot>)> {
    let kind = cfg.sweep_kind()?;
    let axis = cfg.axis()?;
    let mut points = Vec::with_capacity(axis.len());
    let nominals = match kind {
        SweepKind::Scr => {
            let target = cfg.steering.target()?;
            for &v in axis {
                points.push(AxisPoint {
                    value: v,
                    target: target.clone(),
                    scr_db: v,
                    variant: 0,
                });
            }
            vec![cfg.steering.nominal()?]
        }
        SweepKind::Fd => {
            let mut nominals = Vec::with_capacity(axis.len());
            for (k, &fd) in axis.iter().enumerate() {
                let s = steering_ideal(cfg.n, fd)?;
                points.push(AxisPoint {
                    value: fd,
                    target: s.clone(),
                    scr_db: cfg.scr_db,
                    variant: k,
                });
                nominals.push(s);
            }
            nominals
        }
        SweepKind::Mismatch => {
            let seed = match cfg.steering.mode {
                SteeringMode::Mismatched {
                    orthogonal_draw_seed,
                    ..
                } => orthogonal_draw_seed,
                SteeringMode::Ideal { .. } => cfg.master_seed,
            };
            for &theta in axis {
                // One orthogonal draw per scenario: every θ rotates the same y.
                let target = steering_mismatched(cfg.n, theta, &mut RngStream::new(seed, 0).rng())?;
                points.push(AxisPoint {
                    value: theta,
                    target,
                    scr_db: cfg.scr_db,
                    variant: 0,
                });
            }
            vec![SteeringSpec::mismatched(cfg.n, 0.0, seed).nominal()?]
        }
    };
    Ok((kind, points, nominals))
}

fn calibrate_engine(
    engine: &Engine<'_>,
    exec: Exec,
    kind: SweepKind,
    points: &[AxisPoint],
    nominals: &[Snapshot],
    warnings: &mut Vec<String>,
) -> Result<Vec<Vec<ThresholdEntry>>> {
    let cfg = engine.cfg;
    let outcomes = engine.run_trials(exec, 0, cfg.calib_trials, &Cut::Noise, nominals)?;
    let mut table = Vec::with_capacity(cfg.detectors.len());
    for (d, det) in cfg.detectors.iter().enumerate() {
        let nonconverged = outcomes.iter().filter(|o| o.nonconverged[d]).count();
        let mut per_variant = Vec::with_capacity(nominals.len());
        for (v, point) in points.iter().enumerate().take(nominals.len()) {
            let valid: Vec<f64> = outcomes
                .iter()
                .map(|o| o.stats[d][v])
                .filter(|s| !s.is_nan())
                .collect();
            let dropped = cfg.calib_trials - valid.len();
            if valid.is_empty() {
                return Err(Error::numerical(format!(
                    "every calibration trial failed for {det}"
                )));
            }
            if dropped as f64 > DEGRADED_DROP_FRACTION * cfg.calib_trials as f64 {
                let msg = format!(
                    "CalibrationDegraded: {det} dropped {dropped} of {} trials",
                    cfg.calib_trials
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            let (gamma, exceedances) = gamma_from_stats(&valid, cfg.pfa)?;
            let axis = (kind == SweepKind::Fd).then_some(point.value);
            per_variant.push(ThresholdEntry {
                detector: *det,
                axis,
                gamma,
                calib_trials: valid.len(),
                exceedances,
                dropped,
                nonconverged,
            });
        }
        table.push(per_variant);
    }
    Ok(table)
}

/// Calibrates every configured detector from one shared set of H0 trials.
pub fn calibrate(cfg: &ScenarioConfig, exec: Exec) -> Result<(ThresholdTable, Vec<String>)> {
    let engine = Engine::new(cfg)?;
    let (kind, points, nominals) = sweep_layout(cfg)?;
    let mut warnings = Vec::new();
    let table = calibrate_engine(&engine, exec, kind, &points, &nominals, &mut warnings)?;
    Ok((
        ThresholdTable {
            entries: table.into_iter().flatten().collect(),
        },
        warnings,
    ))
}

/// Threshold for a single detector (for the fd sweep, at the first grid point).
pub fn calibrate_threshold(
    cfg: &ScenarioConfig,
    detector: DetectorSpec,
    exec: Exec,
) -> Result<ThresholdEntry> {
    let single = ScenarioConfig {
        detectors: vec![detector],
        ..cfg.clone()
    };
    let (table, _) = calibrate(&single, exec)?;
    Ok(table
        .entries
        .into_iter()
        .next()
        .expect("one detector calibrated"))
}

fn amplitude(engine: &Engine<'_>, target: &Snapshot, scr_db: f64) -> Result<f64> {
    if scr_db == f64::INFINITY {
        return Ok(1e6);
    }
    amplitude_from_scr(scr_db, target, &engine.clutter.scr_covariance())
}

/// One H0 trial of the scenario: the first calibration trial's statistic for each
/// detector (first signature variant), NaN where the estimator failed.
pub fn dry_run(cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    let engine = Engine::new(cfg)?;
    let (_, _, nominals) = sweep_layout(cfg)?;
    let outcome = engine.trial(
        RngStream::for_trial(cfg.master_seed, 0, 0),
        &Cut::Noise,
        &nominals,
    )?;
    Ok(outcome.stats.into_iter().map(|row| row[0]).collect())
}

/// Pd of one detector at one axis point of the sweep, against threshold `gamma`.
pub fn estimate_pd(
    cfg: &ScenarioConfig,
    detector: DetectorSpec,
    gamma: f64,
    point: usize,
    exec: Exec,
) -> Result<PdEstimate> {
    let single = ScenarioConfig {
        detectors: vec![detector],
        ..cfg.clone()
    };
    let engine = Engine::new(&single)?;
    let (_, points, nominals) = sweep_layout(&single)?;
    let p = points
        .get(point)
        .ok_or_else(|| Error::invalid(format!("sweep has no point {point}")))?;
    let cut = Cut::Target {
        signature: p.target.clone(),
        amplitude: amplitude(&engine, &p.target, p.scr_db)?,
    };
    let nominal = &nominals[p.variant.min(nominals.len() - 1)];
    let outcomes = engine.run_trials(
        exec,
        point as u32 + 1,
        single.trials_pd,
        &cut,
        std::slice::from_ref(nominal),
    )?;
    Ok(count_detections(&outcomes, 0, gamma))
}

fn count_detections(outcomes: &[TrialOutcome], d: usize, gamma: f64) -> PdEstimate {
    let valid: Vec<f64> = outcomes
        .iter()
        .map(|o| o.stats[d][0])
        .filter(|s| !s.is_nan())
        .collect();
    let detections = valid.iter().filter(|&&s| s > gamma).count();
    PdEstimate::from_counts(detections, valid.len(), outcomes.len() - valid.len())
}

/// Calibrates once, then estimates Pd at every point of the configured axis.
pub fn run_sweep(cfg: &ScenarioConfig, exec: Exec) -> Result<SweepResult> {
    let engine = Engine::new(cfg)?;
    let (kind, points, nominals) = sweep_layout(cfg)?;
    let mut warnings = Vec::new();
    let table = calibrate_engine(&engine, exec, kind, &points, &nominals, &mut warnings)?;

    let mut rows = Vec::new();
    for (k, p) in points.iter().enumerate() {
        let cut = Cut::Target {
            signature: p.target.clone(),
            amplitude: amplitude(&engine, &p.target, p.scr_db)?,
        };
        let nominal = std::slice::from_ref(&nominals[p.variant]);
        let outcomes = engine.run_trials(exec, k as u32 + 1, cfg.trials_pd, &cut, nominal)?;
        for (d, det) in cfg.detectors.iter().enumerate() {
            let gamma = table[d][p.variant].gamma;
            rows.push(PdRow {
                axis: p.value,
                detector: *det,
                estimate: count_detections(&outcomes, d, gamma),
                gamma,
                nonconverged: outcomes.iter().filter(|o| o.nonconverged[d]).count(),
            });
        }
    }
    Ok(SweepResult {
        curve: PdCurve {
            sweep: kind,
            axis: points.iter().map(|p| p.value).collect(),
            rows,
            config_hash: cfg.config_hash(),
            seed: cfg.master_seed,
        },
        thresholds: ThresholdTable {
            entries: table.into_iter().flatten().collect(),
        },
        warnings,
    })
}

fn expect_sweep(cfg: &ScenarioConfig, want: SweepKind) -> Result<()> {
    let got = cfg.sweep_kind()?;
    if got != want {
        return Err(Error::invalid(format!(
            "configuration describes a {} sweep, not a {} sweep",
            got.name(),
            want.name()
        )));
    }
    Ok(())
}

pub fn run_scr_sweep(cfg: &ScenarioConfig, exec: Exec) -> Result<SweepResult> {
    expect_sweep(cfg, SweepKind::Scr)?;
    run_sweep(cfg, exec)
}

pub fn run_fd_sweep(cfg: &ScenarioConfig, exec: Exec) -> Result<SweepResult> {
    expect_sweep(cfg, SweepKind::Fd)?;
    run_sweep(cfg, exec)
}

pub fn run_mismatch_sweep(cfg: &ScenarioConfig, exec: Exec) -> Result<SweepResult> {
    expect_sweep(cfg, SweepKind::Mismatch)?;
    run_sweep(cfg, exec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: String,
    pub iterations: usize,
    pub seconds: f64,
    pub final_delta: f64,
    pub converged: bool,
    pub stationarity_residual: f64,
    pub delta_trace: Vec<f64>,
    /// Largest relative Frobenius distance to the other solvers' results.
    pub pairwise_dist: f64,
    /// Set when the solver hard-failed; numeric fields are then NaN.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    /// `agreement[i][j]` = ‖Rᵢ − Rⱼ‖_F / ‖Rⱼ‖_F.
    pub agreement: Vec<Vec<f64>>,
}

pub const BENCH_SOLVERS: [(&str, BwMeanSolver); 3] = [
    ("fixed_a", BwMeanSolver::FixedA),
    ("fixed_b", BwMeanSolver::FixedB),
    ("rgd", BwMeanSolver::Rgd),
];

/// BW mean of `count_m` random N×N HPD matrices by the three BW iterations from
/// the arithmetic-mean start.
pub fn bench_bw_solvers(count_m: usize, n: usize, tol: f64, seed: u64) -> Result<BenchResult> {
    if count_m < 2 {
        return Err(Error::invalid("benchmark needs at least two matrices"));
    }
    if n < 1 {
        return Err(Error::invalid("benchmark needs n ≥ 1"));
    }
    let mut rng = RngStream::new(seed, 0).rng();
    let data: Vec<HpdMatrix> = (0..count_m).map(|_| random_hpd(&mut rng, n)).collect();
    let cfg = SolverConfig::benchmark().with_tol(tol);
    let mut reports = Vec::with_capacity(BENCH_SOLVERS.len());
    for (name, solver) in BENCH_SOLVERS {
        let start = Instant::now();
        let report = averaging::bw_mean_with(&data, None, solver, &cfg);
        let seconds = start.elapsed().as_secs_f64();
        reports.push((name, report.map(|r| (r, seconds))));
    }
    let results: Vec<Option<&HpdMatrix>> = reports
        .iter()
        .map(|(_, r)| r.as_ref().ok().map(|(rep, _)| &rep.result))
        .collect();
    let k = results.len();
    let mut agreement = vec![vec![f64::NAN; k]; k];
    for i in 0..k {
        for j in 0..k {
            if let (Some(a), Some(b)) = (results[i], results[j]) {
                agreement[i][j] = relative_error(a.as_matrix(), b.as_matrix());
            }
        }
    }
    let mut rows = Vec::with_capacity(k);
    for (i, (name, r)) in reports.into_iter().enumerate() {
        let pairwise_dist = (0..k)
            .filter(|&j| j != i)
            .map(|j| agreement[i][j])
            .fold(f64::NAN, f64::max);
        rows.push(match r {
            Ok((rep, seconds)) => BenchRow {
                solver: name.to_string(),
                iterations: rep.iterations,
                seconds,
                final_delta: rep.final_delta,
                converged: rep.converged,
                stationarity_residual: rep.stationarity_residual,
                delta_trace: rep.delta_trace,
                pairwise_dist,
                error: None,
            },
            Err(e) => BenchRow {
                solver: name.to_string(),
                iterations: 0,
                seconds: f64::NAN,
                final_delta: f64::NAN,
                converged: false,
                stationarity_residual: f64::NAN,
                delta_trace: Vec::new(),
                pairwise_dist,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(BenchResult { rows, agreement })
}

#[cfg(test)]
mod tests;
