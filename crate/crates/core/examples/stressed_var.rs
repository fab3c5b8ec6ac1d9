//! Build the stressed window from the worst returns of the available history
//! and compare stressed and standard historical-simulation VaR.

use chrono::NaiveDate;
use varcast::market_data::{log_returns, PanelManifest};
use varcast::risk::{hs_var, scale_to_horizon, stressed_window};

pub fn run_example() -> varcast::Result<()> {
    let manifest = PanelManifest::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/panel.toml"))?;
    let returns = log_returns(&manifest.load_target()?)?;
    let w = 1264;
    let i = returns
        .position(NaiveDate::from_ymd_opt(2015, 8, 24).unwrap())
        .expect("a trading day");

    let history = returns.slice(0..i);
    let stressed = stressed_window(history.dates(), history.values(), w, None)?;
    let first = stressed.members.first().expect("non-empty");
    let last = stressed.members.last().expect("non-empty");
    println!(
        "pool {} to {}, {} worst returns from {} to {}",
        stressed.source_span.0,
        stressed.source_span.1,
        stressed.len(),
        first.date,
        last.date
    );
    let worst = stressed
        .members
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("non-empty");
    println!("worst member {} on {}", worst.value, worst.date);

    let svar = hs_var(&stressed.values(), 0.01)?;
    let var = hs_var(&returns.values()[i - w..i], 0.01)?;
    println!("10-day 99% VaR  {:.4}", scale_to_horizon(var.loss, 10));
    println!("10-day 99% SVaR {:.4}", scale_to_horizon(svar.loss, 10));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
