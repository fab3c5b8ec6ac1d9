//! Config-driven experiments: rolling calibration of every model over an
//! out-of-sample span, backtests, and report files.

mod config;
mod experiment;
mod report;

pub use config::{DbnConfig, ExperimentConfig, Family, ModelGrid, ModelKind, ModelVariant, Variant, PARALLELISM_ENV};
pub use experiment::{
    config_hash, resolve_parallelism, run_experiment, run_on, ExperimentData, Flag, ModelRun, NetworkRun, ReportBundle,
    RunMetadata, TraceRow,
};
pub use report::{
    backtest_all, emit_report, format_tables, load_bundle_reports, read_forecasts, read_returns, write_backtest_csv,
    write_forecasts, write_returns, FORECAST_HEADER,
};
