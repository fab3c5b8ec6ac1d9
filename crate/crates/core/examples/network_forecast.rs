//! Learn a two-slice network over the bundled panel with each algorithm,
//! forecast the next S&P close, and turn the forecast into a VaR.

use chrono::NaiveDate;
use varcast::dbn::{fit_parameters, forecast_return, learn_structure, Algorithm, LearnerSettings, TwoSliceDataset};
use varcast::market_data::PanelManifest;
use varcast::risk::{bn_var, scale_to_horizon};

pub fn run_example() -> varcast::Result<()> {
    let manifest = PanelManifest::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/panel.toml"))?;
    let panel = manifest.load_panel()?;
    let w = 1264;
    // Forecast the close of panel row `p` from the `w` rows before it.
    let p = panel
        .position(NaiveDate::from_ymd_opt(2019, 6, 3).unwrap())
        .expect("a trading day");
    let data = TwoSliceDataset::from_rows(&panel, p - w..p)?;
    println!("{} slice pairs over {} nodes", data.n_rows(), data.n_nodes());

    let target = panel.target();
    let returns: Vec<f64> = target.windows(2).map(|c| (c[1] / c[0]).ln()).collect();
    let settings = LearnerSettings::default();
    for algo in Algorithm::ALL {
        let structure = learn_structure(&data, algo, &settings)?;
        let model = fit_parameters(&structure, &data)?;
        let predicted = model.forecast_one_step(&panel.row(p - 1))?;
        let r = forecast_return(predicted, target[p - 1])?;
        let var = bn_var(&returns[p - w..p - 1], r, 0.01)?;
        let parents: Vec<String> = structure
            .parents(structure.target_node())
            .into_iter()
            .map(|n| structure.node_label(n))
            .collect();
        println!(
            "{algo:<12} {:>2} edges, AIC {:>10.1}, target parents {:?}",
            structure.n_edges(),
            model.fit_aic(),
            parents
        );
        println!(
            "             close {:.2} -> {:.2} (actual {:.2}), 10-day VaR {:.4}",
            target[p - 1],
            predicted,
            target[p],
            scale_to_horizon(var.loss, 10)
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
