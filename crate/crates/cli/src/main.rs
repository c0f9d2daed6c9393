use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use contact_cli::report::summary_table;
use contact_cli::run::{effective_spec, run_spec, RunOverrides};
use contact_cli::suite::{run_suite, Fault, SuiteOptions, DEFAULT_SEED};
use contact_cli::{configure_threads, replay, spec, CliError, CliResult, EXIT_INPUT};

/// Numerical checks of contact jets, contact maps and degenerate ellipticity.
///
/// Exit codes: 0 all checks passed, 1 a violation was found, 2 inconclusive
/// or nothing to check, 3 input error. CONTACT_THREADS sets the worker count.
#[derive(Parser)]
#[command(name = "contact-verify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a JSON problem specification.
    Run {
        spec: PathBuf,
        /// Directory for report.json, decay.csv and plots; without it the
        /// report is printed.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Decay tolerance of the radii schedule.
        #[arg(long)]
        tol: Option<f64>,
        /// Write a log-log SVG per check with decay tables.
        #[arg(long)]
        plots: bool,
    },
    /// Run the built-in acceptance battery.
    PaperSuite {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        decay_tol: Option<f64>,
        /// Inject a known defect to check that the battery catches it.
        #[arg(long, value_enum)]
        fault: Option<Fault>,
        #[arg(long)]
        plots: bool,
    },
    /// Re-run one check of a report and re-confirm its witness.
    Replay {
        report: PathBuf,
        #[arg(long)]
        check: String,
    },
}

fn read(path: &PathBuf) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> CliResult<i32> {
    configure_threads()?;
    match cli.command {
        Command::Run { spec: path, out, seed, tol, plots } => {
            let parsed = spec::parse(&read(&path)?).map_err(|e| match e {
                CliError::Parse { .. } => CliError::Input { path: path.display().to_string(), message: e.to_string() },
                other => other,
            })?;
            let spec = effective_spec(parsed, RunOverrides { seed, decay_tol: tol })?;
            let report = run_spec(&spec)?;
            match out {
                Some(dir) => {
                    report.write(&dir, plots)?;
                    print!("{}", summary_table(&report));
                }
                None => print!("{}", report.to_json()),
            }
            Ok(report.summary.exit_code)
        }
        Command::PaperSuite { out, seed, decay_tol, fault, plots } => {
            if let Some(t) = decay_tol {
                if !(t.is_finite() && t > 0.0) {
                    return Err(CliError::input("--decay-tol", "tolerance must be positive and finite"));
                }
            }
            let report = run_suite(&SuiteOptions { seed, decay_tol, fault })?;
            let table = summary_table(&report);
            if let Some(dir) = out {
                report.write(&dir, plots)?;
                std::fs::write(dir.join("summary.txt"), &table).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            print!("{table}");
            Ok(report.summary.exit_code)
        }
        Command::Replay { report, check } => {
            let outcome = replay::replay_text(&read(&report)?, &check)?;
            println!("{}", serde_json::to_string_pretty(&outcome).expect("outcome serialises"));
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
