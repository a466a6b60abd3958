use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qubot_cli::commands::{self, Outcome};
use qubot_cli::config::{resolve, Overrides, PresetName};
use qubot_cli::CliError;
use qubot_core::ensemble::SweepKind;

#[derive(Parser)]
#[command(
    name = "qubot",
    version,
    about = "Entanglement-qubot landscapes, simulations and sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter preset.
    #[arg(long, value_enum)]
    preset: Option<PresetName>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectories (per sweep point for sweeps).
    #[arg(long)]
    trajectories: Option<usize>,
    /// Worker threads.
    #[arg(long, env = "QUBOT_SIM_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the embedded acceptance assertions; exit 3 if any fails.
    #[arg(long)]
    check: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum SweepArg {
    Position,
    Temperature,
}

#[derive(Subcommand)]
enum Command {
    /// Spin pattern and Bell-state potential landscapes.
    Landscape(Common),
    /// Ensemble of coupled spin-motion trajectories.
    Simulate(Common),
    /// Corrector-position or bath-occupation sweep.
    Sweep {
        #[arg(value_enum)]
        kind: SweepArg,
        #[command(flatten)]
        common: Common,
    },
    /// Error-table verification and dipolar equilibria.
    LogicalCheck {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corrupt one expected table entry (exercises the failure path).
        #[arg(long, hide = true)]
        inject_sign_error: bool,
    },
}

fn configure(c: &Common) -> Result<qubot_cli::config::RunConfig, CliError> {
    let overrides = Overrides {
        seed: c.seed,
        trajectories: c.trajectories,
        workers: c.workers,
        out: c.out.clone(),
    };
    resolve(c.preset, c.config.as_deref(), &overrides)
}

fn finish(outcome: Outcome, out: &std::path::Path, check: bool) -> Result<(), CliError> {
    let paths = outcome.artifacts.write_all(out)?;
    for line in &outcome.report {
        println!("{line}");
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    for c in &outcome.checks {
        println!("{}", c.line());
    }
    if check && !outcome.checks_pass() {
        let failed: Vec<&str> = outcome
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CliError::Check(failed.join(", ")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Landscape(c) => {
            let cfg = configure(&c)?;
            finish(commands::landscape(&cfg, c.check)?, &cfg.out, c.check)
        }
        Command::Simulate(c) => {
            let cfg = configure(&c)?;
            finish(commands::simulate(&cfg, c.check)?, &cfg.out, c.check)
        }
        Command::Sweep { kind, common } => {
            let cfg = configure(&common)?;
            let kind = match kind {
                SweepArg::Position => SweepKind::CorrectorPosition,
                SweepArg::Temperature => SweepKind::TemperatureNbar,
            };
            finish(
                commands::sweep_command(&cfg, kind, common.check)?,
                &cfg.out,
                common.check,
            )
        }
        Command::LogicalCheck {
            out,
            inject_sign_error,
        } => {
            let (outcome, _) = commands::logical_check(inject_sign_error)?;
            finish(outcome, &out.unwrap_or_else(|| PathBuf::from("out")), true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Bad flags are configuration errors (exit 1); --help and
        // --version print and succeed.
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                CliError::Config(String::new()).exit_code()
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qubot: {e}");
            e.exit_code()
        }
    }
}
