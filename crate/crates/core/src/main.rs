//! `raylift` command-line interface: every invocation reads a JSON config,
//! runs one command, writes a JSON report, and exits 0 only when the run
//! converged and every validity check passed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use raylift::runner::{parse_config, run, write_report, Command, RunConfig, DEFAULT_REPORT_PATH};

#[derive(Debug, Parser)]
#[command(
    name = "raylift",
    version,
    about = "Excited states of Hermitian operators through level-shifted ground-state solves"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON report (overrides the config's `output_path`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the solver RNG seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Ground-state solve of the configured operator.
    Solve(CommonArgs),
    /// First excited state via one deflation rung.
    Excited {
        #[command(flatten)]
        common: CommonArgs,
        /// Pin the level shift instead of using the spectral-bound selector.
        #[arg(long)]
        shift: Option<f64>,
    },
    /// Climb k deflation rungs and report the whole ladder.
    Ladder {
        #[command(flatten)]
        common: CommonArgs,
        /// Ladder depth (overrides the config's `k`).
        #[arg(long)]
        k: Option<usize>,
        /// Pin the level shift for every rung.
        #[arg(long)]
        shift: Option<f64>,
    },
    /// Scan the density functional over an occupation grid.
    DftScan {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid points per free density coordinate.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Run the built-in verification suite against the dense oracle.
    Verify(CommonArgs),
}

impl CliCommand {
    fn common(&self) -> &CommonArgs {
        match self {
            CliCommand::Solve(common) | CliCommand::Verify(common) => common,
            CliCommand::Excited { common, .. }
            | CliCommand::Ladder { common, .. }
            | CliCommand::DftScan { common, .. } => common,
        }
    }

    fn command(&self) -> Command {
        match self {
            CliCommand::Solve(_) => Command::Solve,
            CliCommand::Excited { .. } => Command::Excited,
            CliCommand::Ladder { .. } => Command::Ladder,
            CliCommand::DftScan { .. } => Command::DftScan,
            CliCommand::Verify(_) => Command::Verify,
        }
    }

    /// Fold CLI flags into the parsed config; flags win over config values.
    fn apply(&self, config: &mut RunConfig) {
        config.command = self.command();
        let common = self.common();
        if let Some(path) = &common.out {
            config.output_path = Some(path.clone());
        }
        if let Some(seed) = common.seed {
            config.solver.seed = seed;
        }
        match self {
            CliCommand::Excited { shift, .. } => {
                if shift.is_some() {
                    config.shift_override = *shift;
                }
            }
            CliCommand::Ladder { k, shift, .. } => {
                if k.is_some() {
                    config.k = *k;
                }
                if shift.is_some() {
                    config.shift_override = *shift;
                }
            }
            CliCommand::DftScan { resolution, .. } => {
                if resolution.is_some() {
                    config.scan_resolution = *resolution;
                }
            }
            CliCommand::Solve(_) | CliCommand::Verify(_) => {}
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.command.common();

    let text = match std::fs::read_to_string(&common.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return ExitCode::FAILURE;
        }
    };

    // Parse leniently first so CLI overrides (e.g. a --k flag fixing a
    // missing ladder depth) apply before validation.
    let mut config: RunConfig = match serde_json::from_str(&text) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: invalid config {}: {e}", common.config.display());
            return ExitCode::FAILURE;
        }
    };
    cli.command.apply(&mut config);
    if let Err(e) = parse_config(&serde_json::to_string(&config).expect("config reserializes")) {
        eprintln!("error: invalid config {}: {e}", common.config.display());
        return ExitCode::FAILURE;
    }

    let report = run(&config);
    let out_path = config
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_REPORT_PATH));
    if let Err(e) = write_report(&out_path, &report) {
        eprintln!("error: cannot write report to {}: {e}", out_path.display());
        return ExitCode::FAILURE;
    }

    match (&report.error, report.success) {
        (Some(message), _) => {
            eprintln!("run failed: {message} (report: {})", out_path.display());
            ExitCode::FAILURE
        }
        (None, true) => {
            println!("ok (report: {})", out_path.display());
            ExitCode::SUCCESS
        }
        (None, false) => {
            eprintln!(
                "completed with failing checks (report: {})",
                out_path.display()
            );
            ExitCode::FAILURE
        }
    }
}
