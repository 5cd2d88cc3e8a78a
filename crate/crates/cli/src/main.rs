//! `whichpath`: run interferometer and Bell scenarios from the command line.
//!
//! Exit codes: 0 success, 1 bad configuration, 2 failed invariant check,
//! 3 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use whichpath::scenario::{self, list_scenarios, OutputFormat, Scenario};
use whichpath::{Error, Execution};

#[derive(Parser)]
#[command(name = "whichpath", version, about = "Which-path interferometer and branching simulator")]
struct Cli {
    /// Run loops on one thread instead of the rayon pool.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario and write its artifacts.
    Run {
        /// Built-in scenario name or path to a JSON scenario file.
        #[arg(long)]
        scenario: String,
        /// Output directory.
        #[arg(long, env = "WHICHPATH_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Overrides the scenario's sampling seed.
        #[arg(long, env = "WHICHPATH_SEED")]
        seed: Option<u64>,
    },
    /// List built-in scenarios.
    List,
    /// Run only the invariant checks (all built-ins when no scenario is given).
    Check {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, env = "WHICHPATH_SEED")]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Svg => OutputFormat::Svg,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 2,
        Error::Io { .. } => 3,
        _ => 1,
    }
}

fn load(name: &str, seed: Option<u64>) -> Result<Scenario, Error> {
    let s = Scenario::load(name)?;
    Ok(match seed {
        Some(seed) => s.with_seed(seed),
        None => s,
    })
}

fn print_checks(checks: &[scenario::Check]) {
    for c in checks {
        let tag = if c.passed { "ok  " } else { "FAIL" };
        println!("  [{tag}] {:<28} {:.3e} (tol {:.0e})", c.name, c.value, c.tolerance);
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::List => {
            for (name, desc) in list_scenarios() {
                println!("{name:<12} {desc}");
            }
            Ok(true)
        }
        Command::Run {
            scenario,
            out,
            format,
            seed,
        } => {
            let start = Instant::now();
            let s = load(&scenario, seed)?;
            let ev = scenario::evaluate(&s, exec)?;
            let report = scenario::write(&ev, &out, format.into())?;
            println!("scenario {}", report.scenario);
            for f in &report.files {
                println!("  wrote {}", f.display());
            }
            print_checks(&report.checks);
            println!("  wall time {:.3} s", start.elapsed().as_secs_f64());
            Ok(report.passed())
        }
        Command::Check { scenario, seed } => {
            let names = match scenario {
                Some(n) => vec![n],
                None => list_scenarios().into_iter().map(|(n, _)| n).collect(),
            };
            let mut all = true;
            for name in names {
                let ev = scenario::evaluate(&load(&name, seed)?, exec)?;
                println!("scenario {}", ev.scenario.name);
                print_checks(&ev.checks);
                all &= ev.failed_checks().is_empty();
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: invariant checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
