//! Normal and skewed Student-t innovations side by side.

use varcast::distributions::InnovationDist;

pub fn run_example() -> varcast::Result<()> {
    let dists = [
        ("normal", InnovationDist::Normal),
        ("t(8)", InnovationDist::skewed_t(8.0, 1.0)?),
        ("skew-t(6, 0.85)", InnovationDist::skewed_t(6.0, 0.85)?),
        ("skew-t(4, 1.2)", InnovationDist::skewed_t(4.0, 1.2)?),
    ];

    println!(
        "{:<16} {:>9} {:>9} {:>9} {:>9}",
        "", "q(0.01)", "q(0.99)", "f(0)", "E|z|"
    );
    for (name, d) in &dists {
        println!(
            "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            name,
            d.quantile(0.01)?,
            d.quantile(0.99)?,
            d.density(0.0),
            d.expected_abs()
        );
    }

    // Left-skewed innovations put more mass below the 1% normal quantile.
    let z = InnovationDist::Normal.quantile(0.01)?;
    for (name, d) in &dists {
        println!("P({name} < {z:.3}) = {:.5}", d.cdf(z));
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
