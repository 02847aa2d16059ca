//! Command implementations behind the `matcfar` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use matcfar::montecarlo::{self, Exec, SweepKind};
use matcfar::robustness;
use serde::Serialize;

use config::{Common, Overrides, RunConfig};
use output::{fmt_f64, write_csv, write_json};

/// Exit status: configuration problems are 2, everything else that fails is 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn exec(common: &Common) -> Exec {
    Exec {
        workers: common.workers,
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// Files written by a command.
#[derive(Debug, Clone)]
pub struct Written {
    pub csv: PathBuf,
    pub json: PathBuf,
}

pub fn cmd_validate(config: Option<&Path>, flags: &Overrides) -> Result<String, CliError> {
    let file = RunConfig::load_opt(config)?;
    let common = config::common(&file, flags)?;
    let (bench, timing) = config::bench_settings(&file, &common)?;
    let scenario = config::scenario(&file, flags, &common, None)?;
    let influence = config::influence_specs(&file, flags, &common)?;

    let trial = montecarlo::dry_run(&scenario).map_err(runtime)?;
    let dry: Vec<_> = scenario
        .detectors
        .iter()
        .zip(&trial)
        .map(|(d, v)| (d.to_string(), *v))
        .collect();

    #[derive(Serialize)]
    struct Effective<'a> {
        preset: config::Preset,
        seed: u64,
        workers: Option<usize>,
        out: &'a Path,
        bench: &'a config::BenchSettings,
        bench_timing: bool,
        detect: &'a montecarlo::ScenarioConfig,
        detect_config_hash: String,
        influence: &'a [robustness::ContaminationSpec],
        dry_run_h0_statistics: Vec<(String, f64)>,
    }
    let summary = Effective {
        preset: common.preset,
        seed: common.seed,
        workers: common.workers,
        out: &common.out,
        bench: &bench,
        bench_timing: timing,
        detect: &scenario,
        detect_config_hash: scenario.config_hash(),
        influence: &influence,
        dry_run_h0_statistics: dry,
    };
    serde_json::to_string_pretty(&summary).map_err(runtime)
}

pub fn cmd_bench_mean(
    config: Option<&Path>,
    flags: &Overrides,
    timing_flag: bool,
) -> Result<Written, CliError> {
    let file = RunConfig::load_opt(config)?;
    let common = config::common(&file, flags)?;
    let (settings, timing_file) = config::bench_settings(&file, &common)?;
    let timing = timing_flag || timing_file;
    prepare_out(&common.out)?;

    let result = montecarlo::bench_bw_solvers(settings.m, settings.n, settings.tol, settings.seed)
        .map_err(runtime)?;
    let hash = montecarlo::hash_json(&settings);
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            let failed = r.error.is_some();
            let num = |v: f64| if failed { "NA".to_string() } else { fmt_f64(v) };
            vec![
                r.solver.clone(),
                if failed {
                    "NA".into()
                } else {
                    r.iterations.to_string()
                },
                if timing && !failed {
                    fmt_f64(r.seconds)
                } else {
                    "NA".into()
                },
                num(r.final_delta),
                num(r.pairwise_dist),
            ]
        })
        .collect();
    let csv = common.out.join("bench_mean.csv");
    write_csv(
        &csv,
        &hash,
        settings.seed,
        &[
            "solver",
            "iterations",
            "seconds",
            "final_delta",
            "pairwise_dist",
        ],
        &rows,
    )?;

    #[derive(Serialize)]
    struct Row<'a> {
        solver: &'a str,
        iterations: usize,
        seconds: Option<f64>,
        final_delta: f64,
        converged: bool,
        stationarity_residual: f64,
        pairwise_dist: f64,
        error: &'a Option<String>,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        command: &'static str,
        config_hash: &'a str,
        seed: u64,
        config: &'a config::BenchSettings,
        agreement: &'a [Vec<f64>],
        rows: Vec<Row<'a>>,
    }
    let json = common.out.join("bench_mean.json");
    write_json(
        &json,
        &Summary {
            command: "bench-mean",
            config_hash: &hash,
            seed: settings.seed,
            config: &settings,
            agreement: &result.agreement,
            rows: result
                .rows
                .iter()
                .map(|r| Row {
                    solver: &r.solver,
                    iterations: r.iterations,
                    seconds: timing.then_some(r.seconds),
                    final_delta: r.final_delta,
                    converged: r.converged,
                    stationarity_residual: r.stationarity_residual,
                    pairwise_dist: r.pairwise_dist,
                    error: &r.error,
                })
                .collect(),
        },
    )?;

    let failures: Vec<String> = result
        .rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.solver)))
        .collect();
    if !failures.is_empty() {
        return Err(CliError::Runtime(format!(
            "solver failure (partial output in {}): {}",
            csv.display(),
            failures.join("; ")
        )));
    }
    Ok(Written { csv, json })
}

pub fn cmd_detect(
    config: Option<&Path>,
    flags: &Overrides,
    sweep: Option<SweepKind>,
) -> Result<Written, CliError> {
    let file = RunConfig::load_opt(config)?;
    let common = config::common(&file, flags)?;
    let cfg = config::scenario(&file, flags, &common, sweep)?;
    let sweep = cfg.sweep_kind().map_err(runtime)?;
    prepare_out(&common.out)?;

    let result = montecarlo::run_sweep(&cfg, exec(&common)).map_err(runtime)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let hash = cfg.config_hash();
    let rows: Vec<Vec<String>> = result
        .curve
        .rows
        .iter()
        .map(|r| {
            let (metric, statistic) = match r.detector.averaging() {
                Some((k, s)) => (k.name().to_string(), s.name().to_string()),
                None => ("NA".into(), "NA".into()),
            };
            vec![
                fmt_f64(r.axis),
                r.detector.to_string(),
                metric,
                statistic,
                fmt_f64(r.estimate.pd),
                fmt_f64(r.estimate.stderr),
                r.estimate.trials.to_string(),
                fmt_f64(r.gamma),
            ]
        })
        .collect();
    let stem = format!("detect_{}", sweep.name());
    let csv = common.out.join(format!("{stem}.csv"));
    write_csv(
        &csv,
        &hash,
        cfg.master_seed,
        &[
            "axis",
            "detector",
            "metric",
            "statistic",
            "pd",
            "stderr",
            "trials",
            "gamma",
        ],
        &rows,
    )?;

    #[derive(Serialize)]
    struct Summary<'a> {
        command: &'static str,
        sweep: SweepKind,
        config_hash: &'a str,
        seed: u64,
        config: &'a montecarlo::ScenarioConfig,
        thresholds: &'a montecarlo::ThresholdTable,
        warnings: &'a [String],
    }
    let json = common.out.join(format!("{stem}.json"));
    write_json(
        &json,
        &Summary {
            command: "detect",
            sweep,
            config_hash: &hash,
            seed: cfg.master_seed,
            config: &cfg,
            thresholds: &result.thresholds,
            warnings: &result.warnings,
        },
    )?;
    Ok(Written { csv, json })
}

pub fn cmd_influence(config: Option<&Path>, flags: &Overrides) -> Result<Written, CliError> {
    let file = RunConfig::load_opt(config)?;
    let common = config::common(&file, flags)?;
    let specs = config::influence_specs(&file, flags, &common)?;
    prepare_out(&common.out)?;

    let mut results = Vec::with_capacity(specs.len());
    for spec in &specs {
        results.push(robustness::influence_curve(spec, exec(&common)).map_err(runtime)?);
    }
    let hash = montecarlo::hash_json(&specs);
    let mut rows = Vec::new();
    for r in &results {
        for row in &r.rows {
            rows.push(vec![
                row.n.to_string(),
                r.metric.name().to_string(),
                r.statistic.name().to_string(),
                fmt_f64(row.f_mean),
                fmt_f64(row.f_stderr),
                row.repeats.to_string(),
            ]);
        }
    }
    let csv = common.out.join("influence.csv");
    write_csv(
        &csv,
        &hash,
        common.seed,
        &["n", "metric", "statistic", "f_mean", "f_stderr", "repeats"],
        &rows,
    )?;

    #[derive(Serialize)]
    struct Summary<'a> {
        command: &'static str,
        config_hash: &'a str,
        seed: u64,
        config: &'a [robustness::ContaminationSpec],
        results: &'a [robustness::InfluenceResult],
    }
    let json = common.out.join("influence.json");
    write_json(
        &json,
        &Summary {
            command: "influence",
            config_hash: &hash,
            seed: common.seed,
            config: &specs,
            results: &results,
        },
    )?;
    Ok(Written { csv, json })
}
