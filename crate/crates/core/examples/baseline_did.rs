//! Baseline, event-study and multi-group designs fitted with the weighted
//! two-way fixed-effects engine on a simulated panel.
//!
//! Run with `cargo run --release --example baseline_did`.

use paneldid::did_spec::{build, event_column_name, DidSpec, SpecKind};
use paneldid::engine::wls_fit;
use paneldid::simulate::{generate, DgpConfig, Preset};

fn main() -> paneldid::Result<()> {
    let sim = generate(&DgpConfig::preset(Preset::Homogeneous).with_seed(3))?;

    for kind in [SpecKind::Baseline, SpecKind::MultiGroup, SpecKind::StaggeredTwfe] {
        let spec = DidSpec::new(kind).with_placebo(kind != SpecKind::StaggeredTwfe);
        let fit = wls_fit(&build(&sim.data, &sim.design, &spec)?)?;
        println!("{kind}: {} observations, {} clusters", fit.n_obs, fit.n_clusters);
        for row in fit.table(0.95) {
            println!("  {:<22} {:>9.5} ({:.5}) {}", row.name, row.estimate, row.se, row.stars);
        }
    }

    let spec = DidSpec::new(SpecKind::EventStudy);
    let fit = wls_fit(&build(&sim.data, &sim.design, &spec)?)?;
    println!("event study relative to {}:", spec.baseline_period);
    for period in sim.data.periods().iter().step_by(4) {
        if let Some(row) = fit.row(&event_column_name(*period), 0.95) {
            println!("  {period} {:>9.5} [{:.5}, {:.5}]", row.estimate, row.conf_low, row.conf_high);
        }
    }
    Ok(())
}
