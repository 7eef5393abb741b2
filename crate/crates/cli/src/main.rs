//! `twobundle`: runs JSON scenarios against the twobundle library.
//!
//! Exit codes: 0 all suites pass, 1 a suite failed, 2 the scenario could not
//! be read or parsed, 3 the scenario names something that cannot be built.

mod build;
mod report;
mod scenario;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use build::World;
use scenario::Scenario;
use suites::SuiteError;

#[derive(Parser)]
#[command(name = "twobundle", version, about = "Parallel transport on quasi-principal 2-bundles: scenario runner")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Scenario file to run.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,

    /// Where to write the JSON report (stdout if absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Overrides the scenario seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Overrides every sample grid.
    #[arg(long, value_name = "K")]
    grid: Option<usize>,

    /// Runs only the named suites (repeatable).
    #[arg(long = "suite", value_name = "NAME")]
    suites: Vec<String>,

    /// Prints residuals for every suite.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Lists every builtin name.
    ListBuiltins,
}

const EXIT_FAIL: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_BUILD: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Some(Command::ListBuiltins) => {
            print!("{}", list_builtins());
            ExitCode::SUCCESS
        }
        None => match run(&cli) {
            Ok(code) => code,
            Err((code, msg)) => {
                eprintln!("error: {msg}");
                ExitCode::from(code)
            }
        },
    }
}

fn list_builtins() -> String {
    format!("{}suites: {}\n", twobundle::builtins::list_builtins(), suites::suite_names().join(", "))
}

fn run(cli: &Cli) -> Result<ExitCode, (u8, String)> {
    let path = cli.scenario.as_ref().ok_or((EXIT_SCHEMA, "--scenario is required".to_string()))?;
    let text = std::fs::read_to_string(path).map_err(|e| (EXIT_SCHEMA, format!("{}: {e}", path.display())))?;
    let s = Scenario::parse(&text).map_err(|e| (EXIT_SCHEMA, format!("{}: {e}", path.display())))?;

    let known = suites::suite_names();
    for name in s.checks.iter().map(|c| &c.suite).chain(&cli.suites) {
        if !known.contains(&name.as_str()) {
            return Err((EXIT_BUILD, format!("unknown suite {name}")));
        }
    }
    let world = World::build(&s, cli.grid).map_err(|e| (EXIT_BUILD, e))?;
    let seed = cli.seed.unwrap_or(s.seed);

    let mut outcomes = Vec::new();
    for check in s.checks.iter().filter(|c| cli.suites.is_empty() || cli.suites.contains(&c.suite)) {
        let outcome = suites::run(&world, check, seed, &s.tolerances).map_err(|SuiteError::Build(e)| (EXIT_BUILD, e))?;
        eprintln!("{} {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.name);
        if cli.verbose {
            for (label, v) in outcome.residuals.entries() {
                eprintln!("    {label} = {v:.3e}");
            }
        }
        if !outcome.pass || cli.verbose {
            for d in &outcome.details {
                eprintln!("    {d}");
            }
        }
        outcomes.push(outcome);
    }

    let json = report::report_json(&s.name, &outcomes);
    let text = serde_json::to_string_pretty(&json).expect("report serializes") + "\n";
    match &cli.out {
        Some(out) => std::fs::write(out, text).map_err(|e| (EXIT_SCHEMA, format!("{}: {e}", out.display())))?,
        None => print!("{text}"),
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    eprintln!("{}: {} of {} suites passed", s.name, outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAIL) })
}
