//! Load the bundled S&P 500 closes and describe their daily log returns.

use chrono::NaiveDate;
use varcast::market_data::{log_returns, PanelManifest};

pub fn run_example() -> varcast::Result<()> {
    let manifest = PanelManifest::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/panel.toml"))?;
    let prices = manifest.load_target()?;
    let returns = log_returns(&prices)?;

    let first = NaiveDate::from_ymd_opt(1991, 3, 15).unwrap();
    let last = NaiveDate::from_ymd_opt(2020, 2, 14).unwrap();
    let lo = returns.dates().partition_point(|d| *d < first);
    let hi = returns.dates().partition_point(|d| *d <= last);
    let span = returns.slice(lo..hi);
    let s = span.summary().expect("span holds returns");

    println!("{} returns, {} to {}", s.n, first, last);
    println!("mean      {:>8.4}%", 100.0 * s.mean);
    println!("sd        {:>8.4}%", 100.0 * s.sd);
    println!("min       {:>8.4}%", 100.0 * s.min);
    println!("max       {:>8.4}%", 100.0 * s.max);
    println!("skewness  {:>8.4}", s.skewness);
    println!("kurtosis  {:>8.4}", s.kurtosis);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
