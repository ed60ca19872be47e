use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use harvest_cli::output::{render, Format};
use harvest_cli::verify::{self, Suite};
use harvest_cli::{exit, run_points, CliError, ConfigError, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "harvest", version, about = "Delta-switched detector entanglement harvesting from coherent field states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for sweep points.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the relative quadrature tolerance of every point.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Suppress warnings and summaries on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One detector, one row.
    Single { file: PathBuf },
    /// Two detectors, one row.
    Pair { file: PathBuf },
    /// One row per sweep value.
    Sweep { file: PathBuf },
    /// Run a seeded verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
    /// As `sweep`, with the Fock-space comparison enabled for every point.
    Oracle { file: PathBuf },
}

fn invalid(file: &Path, field: &str, message: &str) -> ConfigError {
    ConfigError::Invalid {
        file: file.display().to_string(),
        field: field.into(),
        message: message.into(),
    }
}

fn load(file: &Path, detectors: Option<usize>, sweep_allowed: bool) -> Result<Scenario, ConfigError> {
    let scenario = Scenario::load(file)?;
    if let Some(count) = detectors {
        if scenario.detectors.len() != count {
            return Err(invalid(file, "detectors", &format!("this subcommand needs exactly {count} detector(s)")));
        }
    }
    if !sweep_allowed && scenario.sweep.is_some() {
        return Err(invalid(file, "sweep", "use the `sweep` subcommand for sweeps"));
    }
    Ok(scenario)
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_file(cli: &Cli, file: &Path, detectors: Option<usize>, sweep_allowed: bool, force_oracle: bool) -> Result<(), CliError> {
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid(Path::new("--tol"), "tol", "must be positive and finite").into());
        }
    }
    let scenario = load(file, detectors, sweep_allowed)?;
    let points = scenario.points().map_err(|e| match e {
        ConfigError::Invalid { field, message, .. } => invalid(file, &field, &message),
        other => other,
    })?;
    let opts = RunOptions {
        rel_tol: cli.tol,
        force_oracle,
        jobs: cli.jobs,
    };
    let rows = run_points(&points, &opts)?;
    if !cli.quiet {
        for row in &rows {
            for w in &row.warnings {
                eprintln!("warning: {}: {w}", row.scenario_id);
            }
        }
    }
    emit(cli, &render(&rows, cli.format).map_err(CliError::Output)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::SUCCESS } as u8);
        }
    };
    let result = match &cli.command {
        Command::Single { file } => run_file(&cli, file, Some(1), false, false),
        Command::Pair { file } => run_file(&cli, file, Some(2), false, false),
        Command::Sweep { file } => run_file(&cli, file, None, true, false),
        Command::Oracle { file } => run_file(&cli, file, None, true, true),
        Command::Verify { suite, seed } => {
            let reports = verify::run(*suite, *seed);
            let text: String = reports.iter().map(|r| r.to_string()).collect();
            match emit(&cli, &text) {
                Ok(()) if reports.iter().all(|r| r.passed()) => Ok(()),
                Ok(()) => {
                    if !cli.quiet {
                        eprintln!("verification failures present");
                    }
                    return ExitCode::from(exit::VERIFICATION as u8);
                }
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
