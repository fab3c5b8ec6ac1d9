//! 99% VaR on one date from historical simulation, delta-normal, and a
//! fitted GARCH(1,1), each scaled to ten days.

use chrono::NaiveDate;
use varcast::distributions::InnovationKind;
use varcast::market_data::{log_returns, PanelManifest};
use varcast::risk::{delta_normal_var, hs_var, parametric_var, scale_to_horizon};
use varcast::volatility::{fit, FitOptions, VolKind, VolModelSpec};

pub fn run_example() -> varcast::Result<()> {
    let manifest = PanelManifest::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/panel.toml"))?;
    let returns = log_returns(&manifest.load_target()?)?;
    let date = NaiveDate::from_ymd_opt(2008, 9, 29).unwrap();
    let i = returns.position(date).expect("a trading day");
    // Forecast for `date` uses returns up to the day before.
    let window = &returns.values()[i - 1264..i];
    let alpha = 0.01;

    let hs = hs_var(window, alpha)?;
    let dn = delta_normal_var(window, alpha)?;
    let model = fit(
        VolModelSpec::new(VolKind::Garch11, InnovationKind::SkewedT),
        window,
        &FitOptions::default(),
    )?;
    let garch = parametric_var(&model, alpha)?;

    println!("VaR for {date}, realized return {:.4}", returns.values()[i]);
    for (name, v) in [("historical", hs), ("delta-normal", dn), ("garch11-skewt", garch)] {
        let ten_day = scale_to_horizon(v.loss, 10);
        let breach = -returns.values()[i] > ten_day;
        println!(
            "{name:<14} 1-day {:.4}  10-day {:.4}  breach: {breach}",
            v.loss, ten_day
        );
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
