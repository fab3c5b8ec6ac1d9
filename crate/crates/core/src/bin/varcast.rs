use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use varcast::evaluation::MapeDenominator;
use varcast::runner::{
    backtest_all, emit_report, format_tables, load_bundle_reports, read_forecasts, read_returns, run_experiment,
    ExperimentConfig, PARALLELISM_ENV,
};

#[derive(Parser)]
#[command(version, about = "10-day VaR forecasting and backtesting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured model and write a report bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides the config.
        #[arg(long, env = PARALLELISM_ENV)]
        parallelism: Option<usize>,
    },
    /// Backtest a forecast file against a `date,value` file of log returns.
    Backtest {
        #[arg(long)]
        forecasts: PathBuf,
        #[arg(long)]
        returns: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
        #[arg(long, default_value_t = 10)]
        horizon: u32,
        /// Divide MAPE errors by the realized return instead of the forecast.
        #[arg(long)]
        actual_denominator: bool,
    },
    /// Recompute and print the tables of a written bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(flagged) => ExitCode::from(u8::from(flagged)),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether the result carries flags.
fn run(cli: Cli) -> varcast::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            parallelism,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if parallelism.is_some() {
                config.parallelism = parallelism;
            }
            let dir = out
                .or_else(|| config.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("varcast-out"));
            let bundle = run_experiment(&config)?;
            emit_report(&bundle, &dir)?;
            let reports: Vec<_> = bundle.runs.iter().map(|r| r.report.clone()).collect();
            print!("{}", format_tables(&reports));
            println!(
                "\n{} dates, {} models, {} flags, {:.1}s; written to {}",
                bundle.metadata.n_dates,
                bundle.runs.len(),
                bundle.flags.len(),
                bundle.metadata.wall_clock_secs,
                dir.display()
            );
            Ok(bundle.has_flags())
        }
        Command::Backtest {
            forecasts,
            returns,
            confidence,
            horizon,
            actual_denominator,
        } => {
            let f = read_forecasts(&forecasts, horizon, confidence)?;
            let r = read_returns(&returns)?;
            let denominator = if actual_denominator {
                MapeDenominator::Actual
            } else {
                MapeDenominator::Forecast
            };
            let reports = backtest_all(&f, &r, 1.0 - confidence, denominator)?;
            print!("{}", format_tables(&reports));
            Ok(false)
        }
        Command::Report { bundle } => {
            let reports = load_bundle_reports(&bundle)?;
            print!("{}", format_tables(&reports));
            let flags = std::fs::read_to_string(bundle.join("flags.csv")).unwrap_or_default();
            let n_flags = flags.lines().count().saturating_sub(1);
            if n_flags > 0 {
                println!("\n{n_flags} flagged model-dates; see flags.csv");
            }
            Ok(n_flags > 0)
        }
    }
}
