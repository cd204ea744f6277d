use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fisherloss::checks::run_suite;
use fisherloss::registry::Registry;
use fisherloss::scenario::{self, Scenario};
use fisherloss::Error;

/// Fisher information before and after observation kernels.
#[derive(Parser, Debug)]
#[command(name = "fisherloss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every (theta, kernel chain, estimator) cell of a scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Information as one kernel parameter varies.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an invariant suite: core, loss, identity, adjudication or all.
    Check { suite: String },
}

const EXIT_INVARIANT: u8 = 3;

fn load(config: &PathBuf, seed: Option<u64>) -> Result<Scenario, Error> {
    let mut s = Scenario::load(config)?;
    s.resolve(seed);
    Ok(s)
}

fn output_path(out: Option<PathBuf>, s: &Scenario) -> Result<PathBuf, Error> {
    out.or_else(|| s.config.output.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("no output path: pass --out or set `output`".into()))
}

fn execute(cmd: Command) -> Result<u8, Error> {
    let registry = Registry::builtin();
    match cmd {
        Command::Run { config, out, seed } => {
            let s = load(&config, seed)?;
            let out = output_path(out, &s)?;
            let rows = scenario::run(&s, &registry).map_err(|e| tag(&s, e))?;
            scenario::write_outputs(&s, &out, &scenario::write_csv(&rows))?;
            eprintln!("{}: {} rows written to {}", s.config.id, rows.len(), out.display());
            Ok(0)
        }
        Command::Sweep { config, param, grid, out, seed } => {
            let s = load(&config, seed)?;
            let from_config = s.config.sweep.clone();
            let param = param
                .or_else(|| from_config.as_ref().map(|w| w.param.clone()))
                .ok_or_else(|| Error::Config("no sweep parameter: pass --param or set `sweep.param`".into()))?;
            let grid = grid
                .or_else(|| from_config.map(|w| w.grid))
                .ok_or_else(|| Error::Config("no sweep grid: pass --grid or set `sweep.grid`".into()))?;
            let out = output_path(out, &s)?;
            let rows = scenario::sweep(&s, &registry, &param, &grid).map_err(|e| tag(&s, e))?;
            scenario::write_outputs(&s, &out, &scenario::sweep_csv(&param, &rows))?;
            eprintln!("{}: {} sweep rows written to {}", s.config.id, rows.len(), out.display());
            Ok(0)
        }
        Command::Check { suite } => {
            let outcomes = run_suite(&suite)?;
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            for o in &outcomes {
                println!("{o}");
            }
            println!("{} checks, {failed} failed", outcomes.len());
            Ok(if failed == 0 { 0 } else { EXIT_INVARIANT })
        }
    }
}

/// Prefix numeric and enumeration errors with the scenario id.
fn tag(s: &Scenario, e: Error) -> Error {
    match e.exit_code() {
        2 => Error::Numeric(format!("scenario {}: {e}", s.config.id)),
        _ => e,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
