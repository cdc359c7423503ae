//! `qsts`: validate feeders, run scenarios, sweep inverter functions and
//! rebuild comparison reports from result directories.
//!
//! Exit status: 0 success, 2 parse error, 3 invalid model or scenario,
//! 4 run finished with unconverged timesteps, 5 file-system error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use qsts_core::error::{Error, HarmonicsError, IoError, SimError};
use qsts_core::io::feeder_file::FeederDescription;
use qsts_core::io::pipeline::{report_from_dir, run_to_dir, sweep_to_dir};
use qsts_core::io::read_text;
use qsts_core::io::scenario::{load_scenario, LoadedScenario, SCENARIO_SCHEMA};
use qsts_core::io::report::ComparisonTable;
use qsts_core::metrics::MetricOptions;
use qsts_core::{build_network, Network};

const EXIT_PARSE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_UNCONVERGED: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "qsts", version, about = "Quasi-static time-series feeder simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a feeder or scenario file and report what it contains.
    Validate {
        /// Feeder or scenario file; the `schema` field decides which.
        path: Option<PathBuf>,
        #[arg(long, conflicts_with = "path")]
        scenario: Option<PathBuf>,
    },
    /// Run the scenario's function over its profiles and write one bundle.
    Run(RunArgs),
    /// Run the baseline and every function in the sweep list.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Average capacitor cost factors into the impact index too.
        #[arg(long)]
        include_capacitors: bool,
    },
    /// Recompute the comparison from the CSV bundles of a sweep.
    Report {
        /// Directory written by `qsts sweep`.
        results: PathBuf,
        /// Where to write the report; defaults to the results directory.
        #[arg(long, env = "QSTS_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        include_capacitors: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; `QSTS_OUT_DIR` is used when the flag is absent.
    #[arg(long, env = "QSTS_OUT_DIR", default_value = "qsts-out")]
    out: PathBuf,
    /// Seed for generated profiles, overriding the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the sweep.
    #[arg(long)]
    parallel: Option<usize>,
    /// Harmonic snapshot timesteps, e.g. "600,720"; replaces the scenario's list.
    #[arg(long, value_delimiter = ',')]
    harmonics: Option<Vec<usize>>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(IoError::Parse { .. }) => EXIT_PARSE,
        Error::Io(_) => EXIT_IO,
        Error::Sim(SimError::PowerFlow(_)) => EXIT_UNCONVERGED,
        Error::Harmonics(HarmonicsError::UnconvergedFundamental | HarmonicsError::PowerFlow(_)) => EXIT_UNCONVERGED,
        Error::Sim(_) | Error::Metrics(_) | Error::Harmonics(_) => EXIT_INVALID,
    }
}

fn describe(net: &Network) -> String {
    format!(
        "{} buses, {} lines, {} regulators, {} capacitor banks, {} loads, {} PV units",
        net.buses.len(),
        net.lines.len(),
        net.regulators.len(),
        net.capacitors.len(),
        net.loads.len(),
        net.pv_units.len()
    )
}

fn validate(path: &Path) -> Result<(), Error> {
    let text = read_text(path)?;
    let is_scenario = text
        .parse::<toml::Table>()
        .ok()
        .and_then(|t| t.get("schema").and_then(|s| s.as_str()).map(|s| s == SCENARIO_SCHEMA))
        .unwrap_or(false);
    if is_scenario {
        let loaded = load_scenario(path, None)?;
        println!(
            "valid scenario: {} steps of {} s, {} functions in sweep; feeder has {}",
            loaded.scenario.steps,
            loaded.scenario.dt_s,
            loaded.sweep.len(),
            describe(&loaded.scenario.network)
        );
    } else {
        let desc = FeederDescription::from_toml_str(&text).map_err(|e| match e {
            IoError::Parse { what, message } => IoError::parse(format!("{what} {}", path.display()), message),
            other => other,
        })?;
        println!("valid feeder: {}", describe(&build_network(&desc)?));
    }
    Ok(())
}

fn load(args: &RunArgs) -> Result<LoadedScenario, Error> {
    let mut loaded = load_scenario(&args.scenario, args.seed)?;
    if let Some(h) = &args.harmonics {
        loaded.harmonic_timesteps = h.clone();
    }
    Ok(loaded)
}

fn print_table(table: &ComparisonTable) {
    println!("{:<26} {:>7} {:>9} {:>9} {:>12}", "function", "taps", "switches", "cii", "loss cut %");
    for r in &table.rows {
        println!(
            "{:<26} {:>7} {:>9} {:>9.4} {:>12.2}",
            r.label, r.total_taps, r.total_switches, r.cii, r.loss_reduction_pct
        );
    }
}

/// Runs the command and returns the exit status for a finished run.
fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Validate { path, scenario } => {
            let Some(path) = path.or(scenario) else {
                return Err(SimError::InvalidScenario("give a feeder or scenario path".into()).into());
            };
            validate(&path)?;
            Ok(0)
        }
        Command::Run(args) => {
            let loaded = load(&args)?;
            let run = run_to_dir(&loaded, &loaded.harmonic_timesteps, &args.out)?;
            let flagged = run.flagged_power_flow() + run.flagged_control();
            println!("{}: {} steps written to {}", run.label, run.len(), args.out.display());
            Ok(if flagged > 0 {
                eprintln!("{flagged} timesteps did not converge");
                EXIT_UNCONVERGED
            } else {
                0
            })
        }
        Command::Sweep {
            run: args,
            include_capacitors,
        } => {
            if let Some(n) = args.parallel {
                // Only fails if a pool already exists, in which case that one is used.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            let loaded = load(&args)?;
            let options = MetricOptions {
                include_capacitors_in_cii: include_capacitors,
            };
            info!("sweeping {} functions", loaded.sweep.len());
            let out = sweep_to_dir(&loaded, &loaded.harmonic_timesteps, &args.out, options)?;
            print_table(&out.table);
            let flagged: usize = std::iter::once(&out.baseline)
                .chain(&out.runs)
                .map(|r| r.flagged_power_flow() + r.flagged_control())
                .sum();
            Ok(if flagged > 0 {
                eprintln!("{flagged} timesteps did not converge");
                EXIT_UNCONVERGED
            } else {
                0
            })
        }
        Command::Report {
            results,
            out,
            include_capacitors,
        } => {
            let options = MetricOptions {
                include_capacitors_in_cii: include_capacitors,
            };
            let out = out.unwrap_or_else(|| results.clone());
            let table = report_from_dir(&results, &out, options)?;
            print_table(&table);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
