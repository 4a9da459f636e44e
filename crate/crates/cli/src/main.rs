use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nlsqfem::lab::{parse_csv, render_markdown, run_experiment, verify, ExperimentConfig};
use nlsqfem::Error;

#[derive(Parser)]
#[command(
    name = "nlsqfem",
    version,
    about = "Least-squares finite element experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a key = value file.
    Run {
        config: PathBuf,
        /// Override a configuration key, e.g. `--set cycles=4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write the table to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the final state to this VTK file.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Pretty-print a CSV table.
    Table {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
    /// Run the oracle checks.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } | Error::SolverFailure(_) => EXIT_NONCONVERGENCE,
        Error::Configuration(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn load_config(path: &PathBuf, overrides: &[String]) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Configuration(format!("override '{o}' is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            config,
            overrides,
            csv,
            vtk,
        } => {
            let mut cfg = load_config(&config, &overrides)?;
            if csv.is_some() {
                cfg.csv = csv;
            }
            if vtk.is_some() {
                cfg.vtk = vtk;
            }
            let rows = run_experiment(&cfg)?;
            print!("{}", render_markdown(&rows));
        }
        Command::Table { csv, format } => {
            let text = fs::read_to_string(&csv)?;
            let rows = parse_csv(&text)?;
            match format {
                Format::Md => print!("{}", render_markdown(&rows)),
                Format::Csv => print!("{}", nlsqfem::lab::format_csv(&rows)),
            }
        }
        Command::Verify => {
            let checks = verify()?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if failed > 0 {
                return Err(Error::InvalidArgument(format!(
                    "{failed} oracle checks failed"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
