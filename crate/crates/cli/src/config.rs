//! Run configuration: a TOML document of overrides applied on top of a preset.
//!
//! Every table rejects unknown keys. Command-line flags are applied after the
//! file, so they win.

use std::path::{Path, PathBuf};

use matcfar::averaging::Statistic;
use matcfar::detect::DetectorSpec;
use matcfar::metric::MetricKind;
use matcfar::montecarlo::{ScenarioConfig, SweepKind};
use matcfar::robustness::ContaminationSpec;
use matcfar::signal::{InterferenceSpec, SteeringMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Desk,
    Paper,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub bench: Option<BenchSection>,
    pub detect: Option<DetectSection>,
    pub influence: Option<InfluenceSection>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub tol: Option<f64>,
    pub timing: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterSection {
    pub cnr_db: Option<f64>,
    pub rho: Option<f64>,
    pub fc: Option<f64>,
    pub shape_alpha: Option<f64>,
    pub scale_beta: Option<f64>,
    pub texture_on: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceSection {
    pub enabled: Option<bool>,
    pub fi: Option<f64>,
    pub inr_db: Option<f64>,
    pub count: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectSection {
    pub sweep: Option<SweepKind>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub pfa: Option<f64>,
    pub trials_pd: Option<usize>,
    pub calib_trials: Option<usize>,
    pub detectors: Option<Vec<DetectorSpec>>,
    pub scr_grid_db: Option<Vec<f64>>,
    pub fd_grid: Option<Vec<f64>>,
    pub theta_grid: Option<Vec<f64>>,
    pub scr_db: Option<f64>,
    /// Target Doppler for the SCR sweep.
    pub target_fd: Option<f64>,
    /// Seed of the orthogonal component of the mismatched signature.
    pub orthogonal_draw_seed: Option<u64>,
    pub solver_tol: Option<f64>,
    pub solver_max_iter: Option<usize>,
    pub clutter: Option<ClutterSection>,
    pub interference: Option<InterferenceSection>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluenceSection {
    /// Matrix dimension N.
    pub dim: Option<usize>,
    pub m: Option<usize>,
    pub n_range: Option<Vec<usize>>,
    pub repeats: Option<usize>,
    /// `<metric>-<mean|median>` pairs, e.g. `"bw-mean"`.
    pub averagings: Option<Vec<String>>,
    pub scr_db: Option<f64>,
    pub target_fd: Option<f64>,
    pub fix_clean: Option<bool>,
    pub solver_tol: Option<f64>,
    pub solver_max_iter: Option<usize>,
    pub clutter: Option<ClutterSection>,
}

/// Values given on the command line; `None` leaves the file or preset value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub pfa: Option<f64>,
    pub trials: Option<usize>,
    pub calib_trials: Option<usize>,
    pub repeats: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 1;

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim().is_empty() {
            return Err(CliError::Config("configuration file is empty".into()));
        }
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// Fully resolved settings shared by every command.
#[derive(Clone, Debug)]
pub struct Common {
    pub preset: Preset,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
}

pub fn common(file: &RunConfig, flags: &Overrides) -> Result<Common, CliError> {
    let workers = flags.workers.or(file.workers);
    if workers == Some(0) {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    Ok(Common {
        preset: flags.preset.or(file.preset).unwrap_or_default(),
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        workers,
        out: flags
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchSettings {
    pub m: usize,
    pub n: usize,
    pub tol: f64,
    pub seed: u64,
}

pub fn bench_settings(
    file: &RunConfig,
    common: &Common,
) -> Result<(BenchSettings, bool), CliError> {
    let s = file.bench.clone().unwrap_or_default();
    let settings = BenchSettings {
        m: s.m.unwrap_or(10),
        n: s.n.unwrap_or(8),
        tol: s.tol.unwrap_or(1e-5),
        seed: common.seed,
    };
    if settings.m < 2 || settings.n < 1 || !(settings.tol > 0.0) {
        return Err(CliError::Config(format!(
            "bench needs m ≥ 2, n ≥ 1 and tol > 0, got m = {}, n = {}, tol = {}",
            settings.m, settings.n, settings.tol
        )));
    }
    Ok((settings, s.timing.unwrap_or(false)))
}

fn apply_clutter(c: &mut matcfar::signal::ClutterParams, s: &ClutterSection) {
    if let Some(v) = s.cnr_db {
        c.cnr_db = v;
    }
    if let Some(v) = s.rho {
        c.rho = v;
    }
    if let Some(v) = s.fc {
        c.fc = v;
    }
    if let Some(v) = s.shape_alpha {
        c.shape_alpha = v;
    }
    if let Some(v) = s.scale_beta {
        c.scale_beta = v;
    }
    if let Some(v) = s.texture_on {
        c.texture_on = v;
    }
}

/// The scenario for `sweep` (flag, else file, else SCR), validated.
pub fn scenario(
    file: &RunConfig,
    flags: &Overrides,
    common: &Common,
    sweep: Option<SweepKind>,
) -> Result<ScenarioConfig, CliError> {
    let d = file.detect.clone().unwrap_or_default();
    let sweep = sweep.or(d.sweep).unwrap_or(SweepKind::Scr);
    let mut cfg = match common.preset {
        Preset::Desk => ScenarioConfig::desk(sweep),
        Preset::Paper => ScenarioConfig::paper(sweep),
    };
    if let Some(n) = d.n {
        cfg.n = n;
        cfg.clutter.n = n;
        cfg.steering.n = n;
    }
    if let Some(m) = d.m {
        cfg.m = m;
    }
    if let Some(c) = &d.clutter {
        apply_clutter(&mut cfg.clutter, c);
    }
    if let Some(i) = &d.interference {
        if i.enabled == Some(false) {
            cfg.interference = None;
        } else {
            let mut spec = cfg
                .interference
                .clone()
                .unwrap_or_else(InterferenceSpec::paper);
            if let Some(v) = i.fi {
                spec.fi = v;
            }
            if let Some(v) = i.inr_db {
                spec.inr_db = v;
            }
            if let Some(v) = i.count {
                spec.count = v;
            }
            cfg.interference = Some(spec);
        }
    }
    match &mut cfg.steering.mode {
        SteeringMode::Ideal { fd } => {
            if let Some(v) = d.target_fd {
                *fd = v;
            }
        }
        SteeringMode::Mismatched {
            orthogonal_draw_seed,
            ..
        } => {
            if let Some(v) = d.orthogonal_draw_seed {
                *orthogonal_draw_seed = v;
            }
        }
    }
    // Only the grid of the selected sweep is read, so one file can drive all three.
    match sweep {
        SweepKind::Scr => {
            if let Some(g) = d.scr_grid_db {
                cfg.scr_grid_db = g;
            }
        }
        SweepKind::Fd => {
            if let Some(g) = d.fd_grid {
                cfg.fd_grid = g;
            }
        }
        SweepKind::Mismatch => {
            if let Some(g) = d.theta_grid {
                cfg.theta_grid = g;
            }
        }
    }
    if let Some(v) = d.detectors {
        cfg.detectors = v;
    }
    if let Some(v) = d.scr_db {
        cfg.scr_db = v;
    }
    if let Some(v) = d.solver_tol {
        cfg.solver_tol = v;
    }
    if let Some(v) = d.solver_max_iter {
        cfg.solver_max_iter = v;
    }
    let pfa_changed = flags.pfa.or(d.pfa);
    if let Some(v) = pfa_changed {
        cfg.pfa = v;
    }
    cfg.calib_trials = match flags.calib_trials.or(d.calib_trials) {
        Some(v) => v,
        None if pfa_changed.is_some() && common.preset == Preset::Paper => {
            ScenarioConfig::default_calib_trials(cfg.pfa)
        }
        None => cfg.calib_trials,
    };
    if let Some(v) = flags.trials.or(d.trials_pd) {
        cfg.trials_pd = v;
    }
    cfg.master_seed = common.seed;
    cfg.validate()
        .map_err(|e| CliError::Config(format!("detect: {e}")))?;
    Ok(cfg)
}

fn parse_averaging(s: &str) -> Result<(MetricKind, Statistic), CliError> {
    let err = || {
        CliError::Config(format!(
            "unknown averaging '{s}' (expected <metric>-<mean|median>)"
        ))
    };
    let (kind, stat) = s.split_once('-').ok_or_else(err)?;
    Ok((
        kind.parse().map_err(|_| err())?,
        stat.parse().map_err(|_| err())?,
    ))
}

/// One contamination spec per requested (metric, statistic); all six Riemannian
/// pairs by default.
pub fn influence_specs(
    file: &RunConfig,
    flags: &Overrides,
    common: &Common,
) -> Result<Vec<ContaminationSpec>, CliError> {
    let s = file.influence.clone().unwrap_or_default();
    let pairs = match &s.averagings {
        Some(list) if list.is_empty() => {
            return Err(CliError::Config("influence: averagings is empty".into()))
        }
        Some(list) => list
            .iter()
            .map(|a| parse_averaging(a))
            .collect::<Result<Vec<_>, _>>()?,
        None => MetricKind::RIEMANNIAN
            .iter()
            .flat_map(|&k| Statistic::ALL.iter().map(move |&st| (k, st)))
            .collect(),
    };
    let mut specs = Vec::with_capacity(pairs.len());
    for (kind, stat) in pairs {
        let mut spec = match common.preset {
            Preset::Desk => ContaminationSpec::desk(kind, stat),
            Preset::Paper => ContaminationSpec::paper(kind, stat),
        };
        if let Some(n) = s.dim {
            spec.outliers.clutter.n = n;
            spec.outliers.steering.n = n;
        }
        if let Some(c) = &s.clutter {
            apply_clutter(&mut spec.outliers.clutter, c);
        }
        if let (Some(v), SteeringMode::Ideal { fd }) =
            (s.target_fd, &mut spec.outliers.steering.mode)
        {
            *fd = v;
        }
        if let Some(v) = s.m {
            spec.m = v;
        }
        if let Some(v) = &s.n_range {
            spec.n_range = v.clone();
        }
        if let Some(v) = flags.repeats.or(s.repeats) {
            spec.repeats = v;
        }
        if let Some(v) = s.scr_db {
            spec.outliers.scr_db = v;
        }
        if let Some(v) = s.fix_clean {
            spec.fix_clean = v;
        }
        if let Some(v) = s.solver_tol {
            spec.solver_tol = v;
        }
        if let Some(v) = s.solver_max_iter {
            spec.solver_max_iter = v;
        }
        spec.master_seed = common.seed;
        spec.validate()
            .map_err(|e| CliError::Config(format!("influence: {e}")))?;
        specs.push(spec);
    }
    Ok(specs)
}
