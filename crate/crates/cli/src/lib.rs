//! `panto`: classify, simulate and verify stochastic pantograph equations.

pub mod commands;
pub mod config;
pub mod exit;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Display;
use crate::config::{read_file, resolve, split_overrides, SEED_ENV};
use crate::exit::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "panto",
    version,
    about = "Exponents, simulation and verification for stochastic pantograph equations",
    after_help = "Any config field can be overridden with --section.key=value, e.g. --sim.n-paths=20000.\n\
                  PANTO_SEED overrides sim.master_seed. Exit codes: 0 ok, 2 config, 3 regime, 4 verdict, 5 numeric."
)]
struct Cli {
    /// Worker threads for simulation; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config, or a manifest written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the analytic exponents of the model.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "both")]
        format: Display,
    },
    /// Simulate, estimate and check the estimates against the analytic report.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Dump simulated trajectories.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write every path, not just the first.
        #[arg(long)]
        dump: bool,
    },
    /// Solve the drift equation deterministically.
    Det {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate moment curves and exponents without a verdict.
    Moments {
        #[command(flatten)]
        common: Common,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match try_run(args, out) {
        Ok(()) => exit::OK,
        Err(Failure::Clap(e)) => {
            let _ = write!(err, "{}", e.render());
            if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            }
        }
        Err(Failure::Cli(e)) => {
            let _ = writeln!(err, "panto: {e}");
            e.code()
        }
    }
}

enum Failure {
    Clap(clap::Error),
    Cli(CliError),
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Cli(e)
    }
}

fn try_run(args: Vec<String>, out: &mut dyn Write) -> Result<(), Failure> {
    let (rest, overrides) = split_overrides(args)?;
    let cli = Cli::try_parse_from(rest).map_err(Failure::Clap)?;
    let common = match &cli.command {
        Command::Classify { common, .. }
        | Command::Verify { common }
        | Command::Simulate { common, .. }
        | Command::Det { common }
        | Command::Moments { common } => common,
    };
    let file = common.config.as_deref().map(read_file).transpose()?;
    let seed = std::env::var(SEED_ENV).ok();
    let mut cfg = resolve(file, seed.as_deref(), &overrides, common.out.clone())?;
    if let Command::Simulate { dump: true, .. } = cli.command {
        cfg.output.dump_paths = true;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    // the simulation runs inside the pool; its report is buffered and printed after
    let mut buf = Vec::new();
    let result = pool.install(|| -> Result<(), CliError> {
        let out = &mut buf;
        match &cli.command {
            Command::Classify { format, .. } => commands::classify(&cfg, *format, out).map(drop),
            Command::Verify { .. } => commands::verify(&mut cfg, out).map(drop),
            Command::Simulate { .. } => commands::simulate(&mut cfg, out).map(drop),
            Command::Det { .. } => commands::det(&mut cfg, out).map(drop),
            Command::Moments { .. } => commands::moments(&mut cfg, out).map(drop),
        }
    });
    out.write_all(&buf).map_err(CliError::from)?;
    result?;
    Ok(())
}
