use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use matcfar::montecarlo::SweepKind;
use matcfar_cli::config::{Overrides, Preset};
use matcfar_cli::{cmd_bench_mean, cmd_detect, cmd_influence, cmd_validate, CliError};

#[derive(Parser)]
#[command(
    name = "matcfar",
    version,
    about = "Matrix-CFAR detection and HPD averaging experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the trial loops.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Scr,
    Fd,
    Mismatch,
}

impl From<SweepArg> for SweepKind {
    fn from(s: SweepArg) -> Self {
        match s {
            SweepArg::Scr => SweepKind::Scr,
            SweepArg::Fd => SweepKind::Fd,
            SweepArg::Mismatch => SweepKind::Mismatch,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and dry-run one trial per detector.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare the BW mean fixed-point and gradient-descent solvers.
    BenchMean {
        #[command(flatten)]
        common: CommonArgs,
        /// Record wall-clock seconds (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Calibrate thresholds and sweep detection probability.
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        sweep: Option<SweepArg>,
        #[arg(long)]
        pfa: Option<f64>,
        /// Trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        calib_trials: Option<usize>,
    },
    /// Influence functions of the geometric means and medians.
    Influence {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn overrides(c: &CommonArgs) -> Overrides {
    Overrides {
        preset: c.preset,
        seed: c.seed,
        workers: c.workers,
        out: c.out.clone(),
        ..Overrides::default()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { common } => {
            let text = cmd_validate(common.config.as_deref(), &overrides(&common))?;
            println!("{text}");
        }
        Command::BenchMean { common, timing } => {
            let w = cmd_bench_mean(common.config.as_deref(), &overrides(&common), timing)?;
            println!("{}", w.csv.display());
        }
        Command::Detect {
            common,
            sweep,
            pfa,
            trials,
            calib_trials,
        } => {
            let flags = Overrides {
                pfa,
                trials,
                calib_trials,
                ..overrides(&common)
            };
            let w = cmd_detect(common.config.as_deref(), &flags, sweep.map(Into::into))?;
            println!("{}", w.csv.display());
        }
        Command::Influence { common, repeats } => {
            let flags = Overrides {
                repeats,
                ..overrides(&common)
            };
            let w = cmd_influence(common.config.as_deref(), &flags)?;
            println!("{}", w.csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("matcfar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
