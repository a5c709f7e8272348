use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recopt_cli::commands;
use recopt_cli::config::Override;
use recopt_cli::CliError;

/// Battery scheduling for renewable energy communities.
///
/// Any `--section.key=value` argument overrides the corresponding scenario-file entry,
/// for example `--battery.capacity=0` or `--simulation.forecaster=ar`.
#[derive(Parser)]
#[command(name = "recopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Seed of the synthetic community.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the report bundle.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(short, long, default_value = "report")]
        out: PathBuf,
        /// Validate only; write nothing.
        #[arg(long)]
        check: bool,
    },
    /// Validate a scenario without running it.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Compare forecasters on the scenario's signals.
    ForecastEval {
        #[command(flatten)]
        common: Common,
        /// Also write forecast_eval.csv here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Dump and solve the controller's problem for one hour.
    SolveOnce {
        #[command(flatten)]
        common: Common,
        /// Hour index into the data; defaults to the simulation start.
        #[arg(long)]
        hour: Option<usize>,
        /// Write instance.lp and plan.csv here instead of printing.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

/// Separates `--section.key=value` overrides from the arguments clap understands.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    args.into_iter().partition(|a| {
        let Some(body) = a.strip_prefix("--") else {
            return true;
        };
        !body.split_once('=').is_some_and(|(key, _)| key.contains('.'))
    })
}

fn execute(cli: Cli, raw_overrides: &[String]) -> Result<(), CliError> {
    let mut overrides = raw_overrides
        .iter()
        .map(|a| Override::parse(&a[2..]))
        .collect::<Result<Vec<_>, _>>()?;
    let common = match &cli.command {
        Command::Run { common, .. }
        | Command::Check { common }
        | Command::ForecastEval { common, .. }
        | Command::SolveOnce { common, .. } => common,
    };
    if let Some(seed) = common.seed {
        overrides.push(Override {
            path: vec!["simulation".into(), "seed".into()],
            value: toml::Value::Integer(seed as i64),
        });
    }
    let scenario = &common.scenario;
    match &cli.command {
        Command::Run { out, check: true, .. } => {
            log::debug!("check only; {} is left untouched", out.display());
            println!("{}", commands::check(scenario, &overrides)?);
        }
        Command::Check { .. } => println!("{}", commands::check(scenario, &overrides)?),
        Command::Run { out, .. } => {
            let bundle = commands::run(scenario, out, &overrides)?;
            if let Some(summary) = bundle.file("summary.txt") {
                print!("{summary}");
            }
        }
        Command::ForecastEval { out, .. } => print!("{}", commands::forecast_eval(scenario, out.as_deref(), &overrides)?),
        Command::SolveOnce { hour, out, .. } => {
            let (lp, plan) = commands::solve_once(scenario, *hour, out.as_deref(), &overrides)?;
            if out.is_none() {
                print!("{lp}\n{plan}");
            } else {
                print!("{plan}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RECOPT_LOG", "warn")).init();
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
