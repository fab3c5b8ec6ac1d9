//! Run a small configured experiment end to end and write its report bundle.

use varcast::runner::{emit_report, format_tables, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
manifest = "data/panel.toml"
start = "2008-09-02"
end = "2008-12-31"
seed = 7

[models]
families = ["hs", "delta-normal", "riskmetrics"]
innovations = ["normal"]
variants = ["standard", "stressed"]
"#;

pub fn run_example() -> varcast::Result<()> {
    let mut config = ExperimentConfig::from_toml(CONFIG)?;
    config.manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(&config.manifest);

    let bundle = run_experiment(&config)?;
    let reports: Vec<_> = bundle.runs.iter().map(|r| r.report.clone()).collect();
    println!("{}", format_tables(&reports));
    println!(
        "{} dates, {} flags, config {}",
        bundle.metadata.n_dates,
        bundle.flags.len(),
        &bundle.metadata.config_hash[..12]
    );

    let out = std::env::temp_dir().join("varcast-example-run");
    let files = emit_report(&bundle, &out)?;
    println!("wrote {} files under {}", files.len(), out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
