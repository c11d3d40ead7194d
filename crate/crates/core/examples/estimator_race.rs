//! Monte Carlo race: bias, spread and coverage of TWFE against the
//! heterogeneity-robust estimators under a dynamic-effects design.
//!
//! Run with `cargo run --release --example estimator_race`.

use paneldid::simulate::{estimator_race, DgpConfig, Estimator, Preset, RaceOptions};

fn main() -> paneldid::Result<()> {
    let config = DgpConfig::preset(Preset::Heterogeneous).with_seed(2024);
    let race = estimator_race(&config, &Estimator::ALL, RaceOptions { replications: 50, bootstrap_draws: 49 })?;
    println!("true ATT {:.5}", race.truth);
    println!("{:<11} {:>9} {:>9} {:>8} {:>8}", "estimator", "mean", "bias", "sd", "coverage");
    for r in &race.rows {
        println!("{:<11} {:>9.5} {:>+9.5} {:>8.5} {:>8.2}", r.estimator.as_str(), r.mean, r.bias, r.sd, r.coverage);
    }
    race.write_csv(std::io::stdout())?;
    Ok(())
}
