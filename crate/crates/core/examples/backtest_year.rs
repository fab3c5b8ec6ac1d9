//! Roll a delta-normal VaR through 2008 and backtest it: traffic light,
//! Kupiec, Christoffersen, and forecast error measures.

use chrono::NaiveDate;
use varcast::evaluation::{backtest, kupiec_pof, traffic_light, MapeDenominator};
use varcast::market_data::{log_returns, PanelManifest};
use varcast::risk::{delta_normal_var, scale_to_horizon, RiskForecast};

pub fn run_example() -> varcast::Result<()> {
    let manifest = PanelManifest::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/panel.toml"))?;
    let returns = log_returns(&manifest.load_target()?)?;
    let from = NaiveDate::from_ymd_opt(2008, 1, 2).unwrap();
    let to = NaiveDate::from_ymd_opt(2008, 12, 31).unwrap();

    let mut forecasts = Vec::new();
    for (i, date) in returns.dates().iter().enumerate() {
        if *date < from || *date > to {
            continue;
        }
        let v = delta_normal_var(&returns.values()[i - 1264..i], 0.01)?;
        forecasts.push(RiskForecast {
            date: *date,
            model_id: "delta-normal".into(),
            horizon_days: 10,
            confidence: 0.99,
            var_fraction: scale_to_horizon(v.loss, 10),
            stressed: false,
        });
    }

    let report = backtest(&forecasts, &returns, 0.01, MapeDenominator::Forecast)?;
    println!(
        "{} days, {} breaches on {:?}",
        report.n_days, report.n_breaches, report.breach_dates
    );
    println!("zone {}", report.zone);
    println!(
        "kupiec LR {:.3} (p {:.4}), reject: {}",
        report.kupiec.statistic, report.kupiec.p_value, report.kupiec.reject
    );
    println!(
        "christoffersen LR {:.3}, defined: {}, transitions {:?}",
        report.christoffersen.test.statistic, report.christoffersen.defined, report.christoffersen.transitions
    );
    println!(
        "MAE {:.4}  RMSE {:.4}  MAPE {:.2}%",
        report.errors.mae,
        report.errors.rmse,
        report.errors.mape_or_smape()
    );

    // The zones and acceptance region for a regulator's 250-day year.
    let accepted: Vec<usize> = (0..=20).filter(|x| !kupiec_pof(*x, 250, 0.01, 0.01).reject).collect();
    println!("kupiec non-rejection at N=250: {:?}", accepted);
    for x in [4, 5, 9, 10] {
        println!("{x} breaches in 250 days: {}", traffic_light(x, 250, 0.01));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
