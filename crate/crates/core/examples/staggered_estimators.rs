//! Group-time ATTs, the interaction-weighted event study and the imputation
//! estimator on one heterogeneous-effects panel, with bootstrap standard
//! errors.
//!
//! Run with `cargo run --release --example staggered_estimators`.

use paneldid::staggered::{
    cs_aggregate, cs_att, impute_att, sa_event_study, AggregationKind, Bootstrap, ControlRule, CsOptions, ImputeOptions,
    SaOptions,
};
use paneldid::simulate::{generate, DgpConfig, Preset};

fn main() -> paneldid::Result<()> {
    let sim = generate(&DgpConfig::preset(Preset::Heterogeneous).with_seed(21))?;
    let cohorts = sim.cohorts();
    let bootstrap = Bootstrap::new(99).with_draws(199);
    println!("true overall ATT {:.5}", sim.truth.overall);

    for rule in [ControlRule::NeverTreated, ControlRule::NotYetTreated] {
        let att = cs_att(&sim.data, &cohorts, &CsOptions::new(rule).with_bootstrap(bootstrap))?;
        let overall = att.overall()?;
        println!("cs {:<16} {:>9.5} ({:.5})", rule.as_str(), overall.estimate, overall.se);
        if rule == ControlRule::NeverTreated {
            for v in cs_aggregate(&att, AggregationKind::ByCohort)?.values {
                println!("  cohort {} {:>9.5}", v.key, v.estimate);
            }
        }
    }

    let sa = sa_event_study(&sim.data, &cohorts, &SaOptions::default())?;
    println!("sa overall          {:>9.5} ({:.5})", sa.overall.estimate, sa.overall.se);
    for e in sa.by_event_time.iter().filter(|e| e.event_time >= 0).step_by(6) {
        println!("  e = {:>2} {:>9.5}", e.event_time, e.estimate);
    }

    let imp = impute_att(&sim.data, &cohorts, &ImputeOptions { covariates: vec![], bootstrap: Some(bootstrap) })?;
    println!("imputation          {:>9.5} ({:.5}) over {} treated cells", imp.att, imp.se, imp.effects.len());
    Ok(())
}
