use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind};
use super::experiment::{NetworkRun, ReportBundle};
use crate::distributions::InnovationKind;
use crate::error::{Error, Result};
use crate::evaluation::{backtest, BacktestReport, MapeDenominator};
use crate::market_data::ReturnSeries;
use crate::risk::RiskForecast;
use crate::volatility::VolKind;

pub const FORECAST_HEADER: [&str; 4] = ["date", "model_id", "stressed", "var_fraction"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            row: 0,
            message: format!("{other:?}"),
        },
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes forecasts as `date,model_id,stressed,var_fraction`.
pub fn write_forecasts(path: &Path, forecasts: &[RiskForecast]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(FORECAST_HEADER).map_err(|e| csv_err(path, e))?;
    for f in forecasts {
        w.write_record([
            f.date.to_string(),
            f.model_id.clone(),
            f.stressed.to_string(),
            f.var_fraction.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a forecast file; the horizon and confidence are not stored in it
/// and must be supplied.
pub fn read_forecasts(path: &Path, horizon: u32, confidence: f64) -> Result<Vec<RiskForecast>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != FORECAST_HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            row: 0,
            message: format!("expected header {}", FORECAST_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let bad = |message: String| Error::Format {
            path: path.to_path_buf(),
            row,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let date =
            NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| bad(format!("bad date `{}`: {e}", &rec[0])))?;
        let stressed = rec[2]
            .parse()
            .map_err(|_| bad(format!("bad stressed flag `{}`", &rec[2])))?;
        let var_fraction: f64 = rec[3].parse().map_err(|_| bad(format!("bad VaR `{}`", &rec[3])))?;
        out.push(RiskForecast {
            date,
            model_id: rec[1].to_string(),
            horizon_days: horizon,
            confidence,
            var_fraction,
            stressed,
        });
    }
    Ok(out)
}

/// Writes returns as `date,value`.
pub fn write_returns(path: &Path, returns: &ReturnSeries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["date", "value"]).map_err(|e| csv_err(path, e))?;
    for (d, v) in returns.dates().iter().zip(returns.values()) {
        w.write_record([d.to_string(), v.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `date,value` file of log returns.
pub fn read_returns(path: &Path) -> Result<ReturnSeries> {
    let s = crate::market_data::load_price_series(path, "returns", &crate::market_data::ColumnMapping::default())?;
    ReturnSeries::new("returns", s.dates().to_vec(), s.values().to_vec())
}

/// Backtests every `(model_id, stressed)` series in a forecast collection.
pub fn backtest_all(
    forecasts: &[RiskForecast],
    returns: &ReturnSeries,
    alpha: f64,
    denominator: MapeDenominator,
) -> Result<Vec<BacktestReport>> {
    let mut groups: Vec<((String, bool), Vec<RiskForecast>)> = Vec::new();
    for f in forecasts {
        let key = (f.model_id.clone(), f.stressed);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(f.clone()),
            None => groups.push((key, vec![f.clone()])),
        }
    }
    groups
        .iter()
        .map(|(_, g)| backtest(g, returns, alpha, denominator))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct MetadataFile {
    config_hash: String,
    data_first: NaiveDate,
    data_last: NaiveDate,
    out_of_sample_first: NaiveDate,
    out_of_sample_last: NaiveDate,
    staging_start: NaiveDate,
    forecast_dates: usize,
    models: usize,
    flags: usize,
    threads: usize,
    wall_clock_secs: f64,
    version: String,
}

/// Writes a run's files under `dir` and returns their paths:
/// one forecast file per model variant, the backtest and summary tables,
/// flags, realized returns, network traces and structures, the config and
/// run metadata.
pub fn emit_report(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();

    let fdir = dir.join("forecasts");
    create_dir(&fdir)?;
    for run in &bundle.runs {
        let path = fdir.join(format!("{}.csv", run.variant.file_stem()));
        write_forecasts(&path, &run.forecasts)?;
        written.push(path);
    }

    let reports: Vec<BacktestReport> = bundle.runs.iter().map(|r| r.report.clone()).collect();
    if !reports.is_empty() {
        let path = dir.join("backtest.csv");
        write_backtest_csv(&path, &reports)?;
        written.push(path);
        let path = dir.join("summary.txt");
        write_text(&path, &format_tables(&reports))?;
        written.push(path);
    }

    let path = dir.join("flags.csv");
    let mut w = writer(&path)?;
    w.write_record(["date", "model_id", "stressed", "message"])
        .map_err(|e| csv_err(&path, e))?;
    for f in &bundle.flags {
        w.write_record([
            f.date.to_string(),
            f.model_id.clone(),
            f.stressed.to_string(),
            f.message.clone(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join("returns.csv");
    write_returns(&path, &bundle.returns)?;
    written.push(path);

    if !bundle.networks.is_empty() {
        let ndir = dir.join("networks");
        create_dir(&ndir)?;
        for net in &bundle.networks {
            written.extend(write_network(&ndir, net)?);
        }
    }

    let path = dir.join("config.toml");
    write_text(&path, &bundle.config.to_toml())?;
    written.push(path);

    let m = &bundle.metadata;
    let meta = MetadataFile {
        config_hash: m.config_hash.clone(),
        data_first: m.data_span.0,
        data_last: m.data_span.1,
        out_of_sample_first: m.out_of_sample.0,
        out_of_sample_last: m.out_of_sample.1,
        staging_start: m.staging_start,
        forecast_dates: m.n_dates,
        models: bundle.runs.len(),
        flags: bundle.flags.len(),
        threads: m.threads,
        wall_clock_secs: m.wall_clock_secs,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let path = dir.join("metadata.toml");
    write_text(&path, &toml::to_string(&meta).expect("metadata serializes"))?;
    written.push(path);
    Ok(written)
}

fn write_network(dir: &Path, net: &NetworkRun) -> Result<Vec<PathBuf>> {
    let tag = net.algorithm.tag();
    let path = dir.join(format!("{tag}-trace.csv"));
    let mut w = writer(&path)?;
    w.write_record(["date", "predicted_close", "forecast_return"])
        .map_err(|e| csv_err(&path, e))?;
    for row in &net.trace {
        w.write_record([
            row.date.to_string(),
            row.predicted_close.to_string(),
            row.forecast_return.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let mut out = vec![path];
    if let Some(s) = &net.final_structure {
        let path = dir.join(format!("{tag}-structure.txt"));
        write_text(&path, &s.to_edge_list())?;
        out.push(path);
    }
    Ok(out)
}

pub fn write_backtest_csv(path: &Path, reports: &[BacktestReport]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "model_id",
        "stressed",
        "days",
        "breaches",
        "zone",
        "kupiec_lr",
        "kupiec_p",
        "kupiec_reject",
        "christoffersen_lr",
        "christoffersen_p",
        "christoffersen_reject",
        "christoffersen_defined",
        "mae",
        "rmse",
        "mape",
        "smape",
        "breach_dates",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in reports {
        let c = &r.christoffersen;
        w.write_record([
            r.model_id.clone(),
            r.stressed.to_string(),
            r.n_days.to_string(),
            r.n_breaches.to_string(),
            r.zone.to_string(),
            r.kupiec.statistic.to_string(),
            r.kupiec.p_value.to_string(),
            r.kupiec.reject.to_string(),
            c.test.statistic.to_string(),
            c.test.p_value.to_string(),
            c.test.reject.to_string(),
            c.defined.to_string(),
            r.errors.mae.to_string(),
            r.errors.rmse.to_string(),
            r.errors.mape.map_or(String::new(), |m| m.to_string()),
            r.errors.smape.to_string(),
            r.breach_dates
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Re-derives the backtests of a written bundle from its forecast files and
/// realized returns.
pub fn load_bundle_reports(dir: &Path) -> Result<Vec<BacktestReport>> {
    let config = ExperimentConfig::from_toml(
        &std::fs::read_to_string(dir.join("config.toml")).map_err(|e| Error::io(dir.join("config.toml"), e))?,
    )?;
    let returns = read_returns(&dir.join("returns.csv"))?;
    let fdir = dir.join("forecasts");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&fdir)
        .map_err(|e| Error::io(&fdir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut reports = Vec::new();
    for f in files {
        let forecasts = read_forecasts(&f, config.horizon, config.confidence)?;
        if forecasts.is_empty() {
            continue;
        }
        reports.extend(backtest_all(
            &forecasts,
            &returns,
            config.alpha(),
            config.mape_denominator,
        )?);
    }
    reports.sort_by_key(|r| (row_order(&r.model_id), r.stressed));
    Ok(reports)
}

fn row_order(model_id: &str) -> (usize, usize) {
    match ModelKind::parse(model_id) {
        Ok(ModelKind::Parametric(s)) => (
            match s.kind {
                VolKind::Arch1 => 0,
                VolKind::Garch11 => 1,
                VolKind::Egarch11 => 2,
                VolKind::RiskMetrics => 3,
            },
            usize::from(s.innovation == InnovationKind::SkewedT),
        ),
        Ok(ModelKind::Historical) => (4, 0),
        Ok(ModelKind::DeltaNormal) => (5, 0),
        Ok(ModelKind::Network(a)) => (6 + a as usize, 0),
        Err(_) => (usize::MAX, 0),
    }
}

fn row_label(kind: &ModelKind) -> String {
    match kind {
        ModelKind::Parametric(s) => match s.kind {
            VolKind::Arch1 => "ARCH(1)".into(),
            VolKind::Garch11 => "GARCH(1,1)".into(),
            VolKind::Egarch11 => "EGARCH(1,1)".into(),
            VolKind::RiskMetrics => "RiskMetrics".into(),
        },
        ModelKind::Historical => "Historical Simulation".into(),
        ModelKind::DeltaNormal => "Delta-Normal".into(),
        ModelKind::Network(a) => match a {
            crate::dbn::Algorithm::PcStable => "PC (Stable)".into(),
            crate::dbn::Algorithm::Mmhc => "MMHC".into(),
            crate::dbn::Algorithm::SiHitonPc => "SI-HITON-PC".into(),
        },
    }
}

/// Breach counts and error measures as model × distribution grids, VaR
/// first and then SVaR, followed by the regulatory backtests.
pub fn format_tables(reports: &[BacktestReport]) -> String {
    let mut out = String::new();
    for stressed in [false, true] {
        let subset: Vec<&BacktestReport> = reports.iter().filter(|r| r.stressed == stressed).collect();
        if subset.is_empty() {
            continue;
        }
        let what = if stressed { "SVaR" } else { "VaR" };
        let grid = to_grid(&subset);
        let _ = writeln!(out, "Breaches of the 10-day {what}");
        let _ = writeln!(out, "{:<24}{:>14}{:>14}", "", "Normal", "Skewed t");
        for (label, normal, skewt) in &grid {
            let cell = |r: &Option<&BacktestReport>| r.map_or(String::new(), |r| r.n_breaches.to_string());
            let _ = writeln!(out, "{label:<24}{:>14}{:>14}", cell(normal), cell(skewt));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Error measures of the 10-day {what}");
        let _ = writeln!(
            out,
            "{:<24}{:>10}{:>10}{:>10}  {:>10}{:>10}{:>10}",
            "", "MAE", "RMSE", "MAPE %", "MAE", "RMSE", "MAPE %"
        );
        for (label, normal, skewt) in &grid {
            let cells = |r: &Option<&BacktestReport>| match r {
                Some(r) => format!(
                    "{:>10.4}{:>10.4}{:>10.3}",
                    r.errors.mae,
                    r.errors.rmse,
                    r.errors.mape_or_smape()
                ),
                None => format!("{:>30}", ""),
            };
            let _ = writeln!(out, "{label:<24}{}  {}", cells(normal), cells(skewt));
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "Backtests at the 1% level");
    let _ = writeln!(
        out,
        "{:<28}{:>7}{:>7}{:>9}{:>11}{:>8}{:>11}{:>8}",
        "model", "days", "breach", "zone", "Kupiec LR", "reject", "Chr. LR", "reject"
    );
    for r in reports {
        let name = if r.stressed {
            format!("{} (SVaR)", r.model_id)
        } else {
            r.model_id.clone()
        };
        let (clr, crej) = if r.christoffersen.defined {
            (
                format!("{:.3}", r.christoffersen.test.statistic),
                r.christoffersen.test.reject.to_string(),
            )
        } else {
            ("n/a".to_string(), "n/a".to_string())
        };
        let _ = writeln!(
            out,
            "{name:<28}{:>7}{:>7}{:>9}{:>11.3}{:>8}{:>11}{:>8}",
            r.n_days, r.n_breaches, r.zone, r.kupiec.statistic, r.kupiec.reject, clr, crej
        );
    }
    out
}

type GridRow<'a> = (String, Option<&'a BacktestReport>, Option<&'a BacktestReport>);

fn to_grid<'a>(reports: &[&'a BacktestReport]) -> Vec<GridRow<'a>> {
    let mut rows: BTreeMap<usize, GridRow<'a>> = BTreeMap::new();
    for r in reports {
        let Ok(kind) = ModelKind::parse(&r.model_id) else {
            continue;
        };
        let (order, col) = row_order(&r.model_id);
        let entry = rows.entry(order).or_insert_with(|| (row_label(&kind), None, None));
        if col == 0 {
            entry.1 = Some(r);
        } else {
            entry.2 = Some(r);
        }
    }
    rows.into_values().collect()
}
