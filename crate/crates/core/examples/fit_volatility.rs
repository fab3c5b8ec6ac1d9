//! Calibrate each conditional-variance model on the five years of returns
//! ending just before the Lehman weekend.

use chrono::NaiveDate;
use varcast::distributions::InnovationKind;
use varcast::market_data::{log_returns, PanelManifest};
use varcast::volatility::{fit, forecast_variance, FitOptions, VolKind, VolModelSpec};

pub fn run_example() -> varcast::Result<()> {
    let manifest = PanelManifest::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/panel.toml"))?;
    let returns = log_returns(&manifest.load_target()?)?;
    let end = returns
        .position(NaiveDate::from_ymd_opt(2008, 9, 12).unwrap())
        .expect("a trading day");
    let window = &returns.values()[end + 1 - 1264..=end];

    let options = FitOptions::default();
    for kind in [
        VolKind::Arch1,
        VolKind::Garch11,
        VolKind::Egarch11,
        VolKind::RiskMetrics,
    ] {
        for innovation in [InnovationKind::Normal, InnovationKind::SkewedT] {
            let spec = VolModelSpec::new(kind, innovation);
            let model = fit(spec, window, &options)?;
            let params = model
                .named_params()
                .iter()
                .map(|(name, v)| format!("{name}={v:.4}"))
                .collect::<Vec<_>>()
                .join(" ");
            println!(
                "{:<22} ll={:>9.2} next-day vol={:.3}%  {}",
                spec.tag(),
                model.loglik,
                100.0 * forecast_variance(&model).sqrt(),
                params
            );
        }
    }

    let garch = fit(
        VolModelSpec::new(VolKind::Garch11, InnovationKind::Normal),
        window,
        &options,
    )?;
    let se = garch.standard_errors(window)?;
    for ((name, v), s) in garch.named_params().iter().zip(se) {
        println!("garch11 {name:<6} {v:>10.6} ± {s:.6}");
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
