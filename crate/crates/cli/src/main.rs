use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxent_core::scenario::{builtin_scenario, infer_mean, parse_scenario, run, to_json, BUILTIN_NAMES};
use maxent_core::{Error, Scenario};

/// Maximum-entropy inference and continuity/openness probes.
#[derive(Parser)]
#[command(name = "maxent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its report.
    Run {
        file: PathBuf,
        /// Report path (standard output when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for one CSV table per probe report.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Worker threads (all cores when absent).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a builtin scenario, or print it with --emit.
    Builtin {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(BUILTIN_NAMES))]
        name: String,
        #[arg(long)]
        emit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Infer the state for one mean value of a scenario.
    Infer {
        file: PathBuf,
        /// Orthonormal mean value coordinates, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        mean: Vec<f64>,
    },
}

fn load(path: &Path) -> Result<Scenario, Error> {
    parse_scenario(&fs::read_to_string(path)?)
}

fn execute(mut scenario: Scenario, out: Option<&Path>, csv: Option<&Path>, seed: Option<u64>) -> Result<bool, Error> {
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let report = run(&scenario)?;
    let json = report.to_json();
    match out {
        Some(p) => fs::write(p, &json)?,
        None => print!("{json}"),
    }
    if let Some(dir) = csv {
        fs::create_dir_all(dir)?;
        for (stem, table) in report.csv_tables()? {
            fs::write(dir.join(format!("{stem}.csv")), table)?;
        }
    }
    for o in report.outcomes.iter().filter(|o| !o.error.is_empty()) {
        eprintln!("probe {} ({}) failed: {}", o.index, o.kind, o.error);
    }
    Ok(report.ok())
}

fn threads(n: Option<usize>) -> Result<(), Error> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run {
            file,
            out,
            csv,
            threads: n,
            seed,
        } => {
            threads(n)?;
            execute(load(&file)?, out.as_deref(), csv.as_deref(), seed)
        }
        Command::Builtin {
            name,
            emit,
            out,
            csv,
            threads: n,
            seed,
        } => {
            let scenario = builtin_scenario(&name)?;
            if emit {
                print!("{}", scenario.to_json());
                return Ok(true);
            }
            threads(n)?;
            execute(scenario, out.as_deref(), csv.as_deref(), seed)
        }
        Command::Infer { file, mean } => {
            let row = infer_mean(&load(&file)?, &mean)?;
            print!("{}", to_json(&row));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
