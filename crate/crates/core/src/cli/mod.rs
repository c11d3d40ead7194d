//! Command-line front end: `bite`, `estimate`, `decompose`, `race` and
//! `simulate`. Human-readable summaries go to stdout, machine outputs and a
//! `manifest.json` to `--out`, and failures to stderr as
//! `{"error": ..., "kind": ...}` with a nonzero exit code.

mod manifest;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

pub use manifest::{sha256_hex, InputDigest, RunManifest};
use manifest::Run;

use crate::bacon::{bacon_decompose, reconstruct, summarize};
use crate::bite::{
    correlations, low_growth_flag, read_region_values, weighted_median, weighted_median_split, CohortDates, SplitRule,
    TreatmentDesign, WageMicrodata,
};
use crate::did_spec::{build, build_staggered_twfe, event_column_name, DidSpec, SpecKind};
use crate::engine::{wls_fit, CoefficientRow};
use crate::error::{Error, Result};
use crate::panel::{ingest_panel, log_outcome, write_panel_csv, OutcomeScale, PanelDataset, PanelSchema};
use crate::simulate::{estimator_race, generate, DgpConfig, Estimator, Preset, RaceOptions};
use crate::staggered::{cs_att, impute_att, sa_event_study, Bootstrap, ControlRule, CsOptions, ImputeOptions, SaOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    /// Outcome column holds positive levels; logs are taken before fitting.
    Level,
    /// Outcome column is already in logs.
    Log,
}

#[derive(Debug, Parser)]
#[command(name = "paneldid", version, about = "Panel difference-in-differences toolkit")]
pub struct Cli {
    /// Directory for machine-readable outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every random draw; required by stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regional wage gaps, median split and treatment design.
    Bite(BiteArgs),
    /// Fit one regression design.
    Estimate(EstimateArgs),
    /// Goodman-Bacon decomposition of the staggered TWFE coefficient.
    Decompose(DecomposeArgs),
    /// Monte Carlo comparison of TWFE and robust estimators.
    Race(RaceArgs),
    /// Draw one synthetic panel.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct BiteArgs {
    /// Wage microdata CSV (region,hourly_wage); once per survey wave.
    #[arg(long, required = true)]
    pub micro: Vec<PathBuf>,
    /// Minimum wage for the matching wave.
    #[arg(long, required = true)]
    pub mw: Vec<f64>,
    #[arg(long = "survey-year", required = true)]
    pub survey_year: Vec<i32>,
    /// Population weights CSV (region,weight).
    #[arg(long)]
    pub population: PathBuf,
    /// Optional regional growth CSV (region,growth) for the low-growth flag.
    #[arg(long)]
    pub growth: Option<PathBuf>,
    /// Treat only gaps strictly above the weighted median as high.
    #[arg(long)]
    pub strict_above: bool,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// Long-format panel CSV (unit,year,quarter,outcome,weight[,cluster],covariates...).
    #[arg(long)]
    pub panel: PathBuf,
    /// Treatment design CSV written by `bite` or `simulate`.
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long = "outcome-scale", value_enum, default_value_t = ScaleArg::Log)]
    pub outcome_scale: ScaleArg,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: PanelArgs,
    /// Design spec file (key = value lines).
    #[arg(long)]
    pub spec: PathBuf,
    /// Also decompose the coefficient (staggered_twfe only).
    #[arg(long)]
    pub bacon: bool,
    /// Also run the heterogeneity-robust estimators (needs --seed).
    #[arg(long)]
    pub robust: bool,
    /// Bootstrap draws for the robust estimators.
    #[arg(long, default_value_t = Bootstrap::DEFAULT_DRAWS)]
    pub draws: usize,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub input: PanelArgs,
}

#[derive(Debug, Args)]
pub struct DgpArgs {
    /// DGP config file (key = value lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting preset when no config is given: homogeneous, heterogeneous or null.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct RaceArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    /// Comma-separated estimator names.
    #[arg(long, default_value = "twfe,cs_never,cs_notyet,sa,imputation")]
    pub estimators: String,
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    /// Bootstrap draws per replication (0 skips bootstrap standard errors).
    #[arg(long, default_value_t = 199)]
    pub draws: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
}

/// Parses the process arguments, runs, and maps errors to exit code 1.
pub fn main() -> i32 {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", json!({"error": e.to_string(), "kind": "threads"}));
            return 1;
        }
    }
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({"error": e.to_string(), "kind": e.kind()}));
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Bite(a) => cmd_bite(cli, a),
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::Decompose(a) => cmd_decompose(cli, a),
        Command::Race(a) => cmd_race(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
    }
}

fn require_seed(cli: &Cli, what: &str) -> Result<u64> {
    cli.seed.ok_or_else(|| Error::MissingSeed(what.to_string()))
}

#[derive(Serialize)]
struct GapOut<'a> {
    region: &'a str,
    gap: f64,
    worker_count: usize,
    high: bool,
}

fn cmd_bite(cli: &Cli, a: &BiteArgs) -> Result<()> {
    let n = a.micro.len();
    if a.mw.len() != n || a.survey_year.len() != n {
        return Err(Error::Invalid("--micro, --mw and --survey-year must be given the same number of times".into()));
    }
    if n > 2 {
        return Err(Error::Invalid("at most two survey waves are supported".into()));
    }
    let rule = if a.strict_above { SplitRule::Above } else { SplitRule::AtOrAbove };
    let mut run = Run::new("bite", &cli.out, cli.format, None)?;
    run.param("minimum_wages", &a.mw);
    run.param("survey_years", &a.survey_year);
    run.param("split_rule", if a.strict_above { "above" } else { "at_or_above" });

    let population = read_region_values(run.read_input(&a.population)?.as_slice())?;
    let mut waves: Vec<(i32, f64, &PathBuf)> = (0..n).map(|i| (a.survey_year[i], a.mw[i], &a.micro[i])).collect();
    waves.sort_by_key(|w| w.0);
    let mut tables = Vec::new();
    for (year, mw, path) in waves {
        let micro = WageMicrodata::from_csv(run.read_input(path)?.as_slice(), mw, year)?;
        let table = crate::bite::wage_gap(&micro)?;
        let gaps = table.gaps();
        let median = weighted_median(&gaps, &population)?;
        let high = weighted_median_split(&gaps, &population, rule)?;
        let rows: Vec<GapOut> = table
            .rows
            .iter()
            .map(|(r, g)| GapOut {
                region: r.as_str(),
                gap: g.gap,
                worker_count: g.worker_count,
                high: high[r],
            })
            .collect();
        run.write_table(&format!("gaps_{year}"), &rows)?;
        println!(
            "wave {year}: minimum wage {mw:.2}, {} regions, weighted median gap {median:.4}, {} high",
            rows.len(),
            rows.iter().filter(|r| r.high).count()
        );
        tables.push(table);
    }

    if let [first, second] = tables.as_slice() {
        let mut design = TreatmentDesign::from_gaps(first, second, &population, rule, CohortDates::default())?;
        if let Some(path) = &a.growth {
            let growth = read_region_values(run.read_input(path)?.as_slice())?;
            design = design.with_low_growth(&low_growth_flag(&growth)?)?;
        }
        let mut buf = Vec::new();
        design.write_csv(&mut buf)?;
        run.write("design.csv", &buf)?;
        let corr = correlations(&first.gaps(), &second.gaps())?;
        let counts: BTreeMap<String, usize> = design.group_counts().into_iter().map(|(g, c)| (g.to_string(), c)).collect();
        run.write_json(
            "bite_summary.json",
            &json!({"pearson": corr.pearson, "spearman": corr.spearman, "group_counts": counts}),
        )?;
        println!("gap correlation: pearson {:.4}, spearman {:.4}", corr.pearson, corr.spearman);
        for (g, c) in &counts {
            println!("  {g:<10} {c}");
        }
    }
    run.finish()?;
    Ok(())
}

fn load_panel(run: &mut Run, input: &PanelArgs, covariates: Option<Vec<String>>) -> Result<(PanelDataset, TreatmentDesign)> {
    let bytes = run.read_input(&input.panel)?;
    let header: Vec<String> = csv::Reader::from_reader(bytes.as_slice())
        .headers()?
        .iter()
        .map(str::to_string)
        .collect();
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let schema = PanelSchema {
        covariates,
        scale: match input.outcome_scale {
            ScaleArg::Level => OutcomeScale::Level,
            ScaleArg::Log => OutcomeScale::Log,
        },
        ..PanelSchema::default()
    }
    .detect_cluster(&refs);
    let mut data = ingest_panel(bytes.as_slice(), &schema)?;
    if input.outcome_scale == ScaleArg::Level {
        data = log_outcome(&data)?;
    }
    let design = TreatmentDesign::read_csv(run.read_input(&input.design)?.as_slice())?;
    run.param(
        "outcome_scale",
        match input.outcome_scale {
            ScaleArg::Level => "level",
            ScaleArg::Log => "log",
        },
    );
    Ok((data, design))
}

#[derive(Serialize)]
struct EventRow {
    period: String,
    estimate: f64,
    se: f64,
    conf_low: f64,
    conf_high: f64,
}

fn print_table(rows: &[CoefficientRow]) {
    println!("{:<28} {:>12} {:>12} {:>8}", "term", "estimate", "se", "p");
    for r in rows {
        println!("{:<28} {:>12.6} {:>12.6} {:>8.4} {}", r.name, r.estimate, r.se, r.p, r.stars);
    }
}

fn cmd_estimate(cli: &Cli, a: &EstimateArgs) -> Result<()> {
    let seed = if a.robust { Some(require_seed(cli, "estimate --robust")?) } else { cli.seed };
    let mut run = Run::new("estimate", &cli.out, cli.format, seed)?;
    let spec_text = String::from_utf8_lossy(&run.read_input(&a.spec)?).into_owned();
    let spec = DidSpec::parse(&spec_text)?;
    if a.bacon && spec.kind != SpecKind::StaggeredTwfe {
        return Err(Error::Invalid("--bacon requires kind = staggered_twfe".into()));
    }
    let (data, design) = load_panel(&mut run, &a.input, None)?;
    run.param("spec", spec.to_text());

    let dm = build(&data, &design, &spec)?;
    let fit = wls_fit(&dm)?;
    let table = fit.table(0.95);
    let mut fit_json = fit.to_json(0.95);
    fit_json["kind"] = json!(spec.kind.as_str());
    run.write_json("fit.json", &fit_json)?;
    run.write_table("coefficients", &table)?;
    println!("{} on {} observations, {} clusters", spec.kind, fit.n_obs, fit.n_clusters);
    print_table(&table);
    if !fit.dropped_collinear.is_empty() {
        println!("dropped as collinear: {}", fit.dropped_collinear.join(", "));
    }

    if spec.kind == SpecKind::EventStudy {
        let rows: Vec<EventRow> = data
            .periods()
            .iter()
            .map(|&p| {
                if p == spec.baseline_period {
                    return EventRow {
                        period: p.to_string(),
                        estimate: 0.0,
                        se: 0.0,
                        conf_low: 0.0,
                        conf_high: 0.0,
                    };
                }
                let row = fit.row(&event_column_name(p), 0.95);
                EventRow {
                    period: p.to_string(),
                    estimate: row.as_ref().map_or(f64::NAN, |r| r.estimate),
                    se: row.as_ref().map_or(f64::NAN, |r| r.se),
                    conf_low: row.as_ref().map_or(f64::NAN, |r| r.conf_low),
                    conf_high: row.as_ref().map_or(f64::NAN, |r| r.conf_high),
                }
            })
            .collect();
        run.write_table("event_study", &rows)?;
    }

    if a.bacon {
        write_decomposition(&mut run, &data, &design)?;
    }

    if a.robust {
        let cohorts = design.cohorts();
        let bs = Bootstrap::new(seed.expect("seed checked")).with_draws(a.draws);
        run.param("bootstrap_draws", a.draws);
        let never = cs_att(&data, &cohorts, &CsOptions::new(ControlRule::NeverTreated).with_bootstrap(bs))?;
        let notyet = cs_att(&data, &cohorts, &CsOptions::new(ControlRule::NotYetTreated).with_bootstrap(bs))?;
        let sa = sa_event_study(
            &data,
            &cohorts,
            &SaOptions {
                covariates: spec.covariates.clone(),
            },
        )?;
        let imp = impute_att(
            &data,
            &cohorts,
            &ImputeOptions {
                covariates: spec.covariates.clone(),
                bootstrap: Some(bs),
            },
        )?;
        run.write_json(
            "robust.json",
            &json!({
                "cs_never": never.to_json(),
                "cs_notyet": notyet.to_json(),
                "sa": sa.to_json(),
                "imputation": imp.to_json(),
            }),
        )?;
        println!("robust overall ATT:");
        for (name, v) in [
            ("cs_never", never.overall().map(|v| (v.estimate, v.se))),
            ("cs_notyet", notyet.overall().map(|v| (v.estimate, v.se))),
            ("sa", Ok((sa.overall.estimate, sa.overall.se))),
            ("imputation", Ok((imp.att, imp.se))),
        ] {
            match v {
                Ok((e, se)) => println!("  {name:<12} {e:>12.6} ({se:.6})"),
                Err(err) => println!("  {name:<12} unavailable: {err}"),
            }
        }
    }
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct BaconRow {
    comparison: String,
    treated_cohort: String,
    control_cohort: String,
    estimate: f64,
    weight: f64,
}

fn write_decomposition(run: &mut Run, data: &PanelDataset, design: &TreatmentDesign) -> Result<()> {
    if !data.has_uniform_weights() {
        println!("note: the decomposition ignores observation weights; compare it with the unweighted TWFE coefficient below");
    }
    let plain = data.without_covariates().with_uniform_weights();
    let comps = bacon_decompose(&plain, &design.cohorts())?;
    let twfe = wls_fit(&build_staggered_twfe(&plain, design, &DidSpec::new(SpecKind::StaggeredTwfe))?)?;
    let beta = twfe.coef("treat_staggered").ok_or(Error::AllCollinear)?;
    let rows: Vec<BaconRow> = comps
        .iter()
        .map(|c| BaconRow {
            comparison: c.comparison.to_string(),
            treated_cohort: c.cohort_pair.0.to_string(),
            control_cohort: c.cohort_pair.1.map_or_else(|| "never".to_string(), |p| p.to_string()),
            estimate: c.estimate,
            weight: c.weight,
        })
        .collect();
    run.write_table("bacon", &rows)?;
    let summary: BTreeMap<String, serde_json::Value> = summarize(&comps)
        .into_iter()
        .map(|(k, (w, e))| (k.to_string(), json!({"weight": w, "estimate": e})))
        .collect();
    let rebuilt = reconstruct(&comps);
    run.write_json(
        "bacon_summary.json",
        &json!({"twfe_unweighted": beta, "reconstructed": rebuilt, "by_comparison": summary}),
    )?;
    println!("unweighted TWFE {beta:.6}, reconstructed {rebuilt:.6}");
    for (k, v) in &summary {
        println!("  {k:<18} weight {:.4}  estimate {:.6}", v["weight"].as_f64().unwrap_or(f64::NAN), v["estimate"].as_f64().unwrap_or(f64::NAN));
    }
    Ok(())
}

fn cmd_decompose(cli: &Cli, a: &DecomposeArgs) -> Result<()> {
    let mut run = Run::new("decompose", &cli.out, cli.format, None)?;
    let (data, design) = load_panel(&mut run, &a.input, Some(Vec::new()))?;
    write_decomposition(&mut run, &data, &design)?;
    run.finish()?;
    Ok(())
}

fn load_config(run: &mut Run, dgp: &DgpArgs, seed: u64) -> Result<DgpConfig> {
    let config = match (&dgp.config, &dgp.preset) {
        (Some(path), _) => {
            let text = String::from_utf8_lossy(&run.read_input(path)?).into_owned();
            DgpConfig::parse(&text)?
        }
        (None, Some(p)) => DgpConfig::preset(p.parse::<Preset>()?),
        (None, None) => DgpConfig::default(),
    };
    if let Some(p) = &dgp.preset {
        run.param("preset", p);
    }
    let config = config.with_seed(seed);
    run.param("config", config.to_text());
    run.write("config.txt", config.to_text().as_bytes())?;
    Ok(config)
}

fn cmd_race(cli: &Cli, a: &RaceArgs) -> Result<()> {
    let seed = require_seed(cli, "race")?;
    let estimators: Vec<Estimator> = a
        .estimators
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    let mut run = Run::new("race", &cli.out, cli.format, Some(seed))?;
    let config = load_config(&mut run, &a.dgp, seed)?;
    run.param("replications", a.replications);
    run.param("bootstrap_draws", a.draws);
    let result = estimator_race(
        &config,
        &estimators,
        RaceOptions {
            replications: a.replications,
            bootstrap_draws: a.draws,
        },
    )?;
    run.param("estimators", result.estimators.iter().map(|e| e.as_str()).collect::<Vec<_>>());
    run.write_table("race", &result.rows)?;
    let mut buf = Vec::new();
    result.write_replications_csv(&mut buf)?;
    run.write("replications.csv", &buf)?;
    println!("true ATT {:.6} over {} replications", result.truth, a.replications);
    println!(
        "{:<12} {:>10} {:>10} {:>10} {:>9} {:>9} {:>6}",
        "estimator", "mean", "bias", "sd", "coverage", "reject", "failed"
    );
    for r in &result.rows {
        println!(
            "{:<12} {:>10.5} {:>+10.5} {:>10.5} {:>9.3} {:>9.3} {:>6}",
            r.estimator.as_str(),
            r.mean,
            r.bias,
            r.sd,
            r.coverage,
            r.rejection_rate,
            r.n_failed
        );
    }
    run.finish()?;
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let seed = require_seed(cli, "simulate")?;
    let mut run = Run::new("simulate", &cli.out, cli.format, Some(seed))?;
    let config = load_config(&mut run, &a.dgp, seed)?;
    let sim = generate(&config)?;
    let schema = PanelSchema {
        cluster: Some("cluster".into()),
        ..PanelSchema::default()
    };
    let mut buf = Vec::new();
    write_panel_csv(&sim.data, &mut buf, &schema)?;
    run.write("panel.csv", &buf)?;
    let mut buf = Vec::new();
    sim.design.write_csv(&mut buf)?;
    run.write("design.csv", &buf)?;
    run.write_json("truth.json", &sim.truth)?;
    println!(
        "{} units x {} periods, true overall ATT {:.6}",
        sim.data.units().len(),
        sim.data.periods().len(),
        sim.truth.overall
    );
    run.finish()?;
    Ok(())
}
