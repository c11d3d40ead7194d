//! Goodman-Bacon decomposition of the staggered TWFE coefficient when the
//! early cohort's effect grows over time.
//!
//! Run with `cargo run --release --example bacon_decomposition`.

use paneldid::bacon::{bacon_decompose, reconstruct, summarize};
use paneldid::did_spec::{build_staggered_twfe, DidSpec, SpecKind};
use paneldid::engine::wls_fit;
use paneldid::simulate::{generate, DgpConfig, Preset};

fn main() -> paneldid::Result<()> {
    let mut config = DgpConfig::preset(Preset::Heterogeneous).with_seed(8);
    config.noise_sd = 0.0;
    let sim = generate(&config)?;

    let comps = bacon_decompose(&sim.data, &sim.cohorts())?;
    for c in &comps {
        let control = c.cohort_pair.1.map_or("never".to_string(), |p| p.to_string());
        println!("{:<18} {} vs {control:<7} estimate {:>9.5} weight {:.4}", c.comparison, c.cohort_pair.0, c.estimate, c.weight);
    }
    for (kind, (weight, estimate)) in summarize(&comps) {
        println!("{kind:<18} total weight {weight:.4}, weighted estimate {estimate:.5}");
    }

    let twfe = wls_fit(&build_staggered_twfe(&sim.data, &sim.design, &DidSpec::new(SpecKind::StaggeredTwfe))?)?;
    println!(
        "TWFE {:.6} = sum of weighted 2x2s {:.6}; true ATT {:.6}",
        twfe.coefficients[0],
        reconstruct(&comps),
        sim.truth.overall
    );
    Ok(())
}
