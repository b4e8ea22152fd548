mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Format};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "isac", version, about = "Pilot, training-length and beamforming design for ISAC frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; standard output by default.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the best pilot length, pilot powers and beam.
    Design,
    /// Sweep an achievable region.
    Region {
        #[command(subcommand)]
        kind: RegionKind,
    },
    /// Optimized pilots against equal-power, DFT and Gaussian pilots.
    ComparePilots,
    /// Monte Carlo checks of the analytic models.
    Validate {
        #[command(subcommand)]
        what: ValidateKind,
    },
    /// Pd/Pfa table of a design.
    DetectEval {
        /// Design JSON written by `design`.
        #[arg(long)]
        design: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RegionKind {
    MseMi,
    RateMi,
}

#[derive(Subcommand)]
enum ValidateKind {
    Detect,
    Estimate,
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.params.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let fmt = |default| cli.format.unwrap_or(default);
    match &cli.command {
        Command::Design => commands::design(&cfg, fmt(Format::Json)),
        Command::Region { kind: RegionKind::MseMi } => commands::region_mse_mi(&cfg, fmt(Format::Csv)),
        Command::Region { kind: RegionKind::RateMi } => commands::region_rate_mi(&cfg, fmt(Format::Csv)),
        Command::ComparePilots => commands::compare_pilots(&cfg, fmt(Format::Csv)),
        Command::Validate { what: ValidateKind::Detect } => commands::validate_detect(&cfg, fmt(Format::Json)),
        Command::Validate { what: ValidateKind::Estimate } => commands::validate_estimate(&cfg, fmt(Format::Json)),
        Command::DetectEval { design } => commands::detect_eval(&cfg, design.as_deref(), fmt(Format::Csv)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match run(&cli) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("isac: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("isac: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
