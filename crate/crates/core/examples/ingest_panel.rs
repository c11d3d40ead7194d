//! Read a long-format panel, check balance, and take logs.
//!
//! Run with `cargo run --example ingest_panel`.

use paneldid::panel::{balance_report, ingest_panel, log_outcome, PanelSchema};

const PANEL: &str = "\
unit,year,quarter,outcome,weight,cluster,east
r01,2014,1,1200,1200,north,0
r01,2014,2,1210,1210,north,0
r01,2014,3,1190,1190,north,0
r02,2014,1,860,860,north,1
r02,2014,2,870,870,north,1
r03,2014,1,530,530,south,1
r03,2014,3,525,525,south,1
";

fn main() -> paneldid::Result<()> {
    let header: Vec<&str> = PANEL.lines().next().unwrap().split(',').collect();
    let schema = PanelSchema::default().detect_cluster(&header);
    let data = ingest_panel(PANEL.as_bytes(), &schema)?;
    println!(
        "{} observations, {} units, {} periods, covariates {:?}",
        data.len(),
        data.units().len(),
        data.periods().len(),
        data.covariate_names()
    );

    let report = balance_report(&data);
    for (unit, period) in &report.missing {
        println!("missing: {unit} {period}");
    }

    let logged = log_outcome(&data)?;
    for o in logged.observations().iter().take(3) {
        println!("{} {} log outcome {:.4}", o.unit, o.period, o.outcome);
    }

    let duplicate = format!("{PANEL}r01,2014,1,1200,1200,north,0\n");
    match ingest_panel(duplicate.as_bytes(), &schema) {
        Ok(_) => println!("duplicate accepted?"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
