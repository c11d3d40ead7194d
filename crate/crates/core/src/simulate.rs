//! Synthetic staggered-adoption panels with known treatment effects, and a
//! Monte Carlo race of TWFE against the heterogeneity-robust estimators.
//!
//! Outcomes follow `y_it = α_i + λ_t + τ_g(t − g)·1[t ≥ g] + ε_it` with
//! `α_i ~ N(μ, σ_α)`, `λ_t = slope·t` and `ε_it ~ N(0, σ)`. Units come in
//! three blocks: early cohort, late cohort, never treated.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bite::{RegionMap, RegionTreatment, TreatmentDesign};
use crate::did_spec::{build_staggered_twfe, DidSpec, SpecKind};
use crate::engine::wls_fit;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::panel::{Observation, OutcomeScale, PanelDataset, PeriodId, UnitId};
use crate::rng::child_seed;
use crate::staggered::{cs_att, impute_att, sa_event_study, Bootstrap, ControlRule, CsOptions, ImputeOptions, SaOptions};

/// Treatment effect as a function of event time `e = t − g ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectSchedule {
    Constant(f64),
    /// `intercept + slope·e`
    Linear { intercept: f64, slope: f64 },
}

impl EffectSchedule {
    pub fn at(self, e: i64) -> f64 {
        match self {
            EffectSchedule::Constant(v) => v,
            EffectSchedule::Linear { intercept, slope } => intercept + slope * e as f64,
        }
    }
}

impl fmt::Display for EffectSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectSchedule::Constant(v) => write!(f, "constant:{v}"),
            EffectSchedule::Linear { intercept, slope } => write!(f, "linear:{intercept},{slope}"),
        }
    }
}

impl FromStr for EffectSchedule {
    type Err = Error;

    /// `constant:v` (or a bare number) and `linear:intercept,slope`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad effect schedule `{s}`, expected constant:v or linear:a,b"));
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        match s.trim().split_once(':') {
            None => num(s).map(EffectSchedule::Constant),
            Some(("constant", v)) => num(v).map(EffectSchedule::Constant),
            Some(("linear", v)) => {
                let (a, b) = v.split_once(',').ok_or_else(bad)?;
                Ok(EffectSchedule::Linear {
                    intercept: num(a)?,
                    slope: num(b)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// τ = −0.05 for both cohorts.
    Homogeneous,
    /// Early cohort effect grows in magnitude with event time, late cohort
    /// static.
    Heterogeneous,
    /// τ ≡ 0 on 40 units.
    Null,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(Preset::Homogeneous),
            "heterogeneous" => Ok(Preset::Heterogeneous),
            "null" => Ok(Preset::Null),
            _ => Err(Error::Invalid(format!("unknown preset `{s}` (homogeneous, heterogeneous, null)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub n_early: usize,
    pub n_late: usize,
    pub n_never: usize,
    pub first_period: PeriodId,
    pub n_periods: usize,
    pub early_start: PeriodId,
    pub late_start: PeriodId,
    pub unit_fe_mean: f64,
    pub unit_fe_sd: f64,
    /// Common trend per quarter.
    pub trend_slope: f64,
    pub effect_early: EffectSchedule,
    pub effect_late: EffectSchedule,
    pub noise_sd: f64,
    /// Units are assigned round-robin to this many clusters; `None` makes
    /// every unit its own cluster.
    pub clusters: Option<usize>,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig::preset(Preset::Homogeneous)
    }
}

const CONFIG_KEYS: [&str; 16] = [
    "preset",
    "n_early",
    "n_late",
    "n_never",
    "first_period",
    "n_periods",
    "early_start",
    "late_start",
    "unit_fe_mean",
    "unit_fe_sd",
    "trend_slope",
    "effect_early",
    "effect_late",
    "noise_sd",
    "clusters",
    "seed",
];

impl DgpConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = DgpConfig {
            n_early: 60,
            n_late: 45,
            n_never: 50,
            first_period: PeriodId::q(2013, 1),
            n_periods: 37,
            early_start: PeriodId::q(2014, 3),
            late_start: PeriodId::q(2019, 1),
            unit_fe_mean: 8.0,
            unit_fe_sd: 1.0,
            trend_slope: 0.003,
            effect_early: EffectSchedule::Constant(-0.05),
            effect_late: EffectSchedule::Constant(-0.05),
            noise_sd: 0.02,
            clusters: None,
            seed: 0,
        };
        match preset {
            Preset::Homogeneous => base,
            Preset::Heterogeneous => DgpConfig {
                effect_early: EffectSchedule::Linear {
                    intercept: -0.02,
                    slope: -0.002,
                },
                effect_late: EffectSchedule::Constant(-0.03),
                ..base
            },
            Preset::Null => DgpConfig {
                n_early: 15,
                n_late: 12,
                n_never: 13,
                effect_early: EffectSchedule::Constant(0.0),
                effect_late: EffectSchedule::Constant(0.0),
                ..base
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_units(&self) -> usize {
        self.n_early + self.n_late + self.n_never
    }

    pub fn last_period(&self) -> PeriodId {
        self.first_period.offset(self.n_periods as i64 - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invalid(m));
        if self.unit_fe_sd < 0.0 || self.noise_sd < 0.0 || !self.unit_fe_sd.is_finite() || !self.noise_sd.is_finite() {
            return fail("standard deviations must be finite and non-negative".into());
        }
        if self.n_periods < 2 {
            return fail("need at least two periods".into());
        }
        for (name, start) in [("early_start", self.early_start), ("late_start", self.late_start)] {
            if start <= self.first_period || start > self.last_period() {
                return fail(format!(
                    "{name} {start} must fall after {} and no later than {}",
                    self.first_period,
                    self.last_period()
                ));
            }
        }
        if self.early_start >= self.late_start {
            return fail("early_start must precede late_start".into());
        }
        if self.n_units() < 2 {
            return fail("need at least two units".into());
        }
        if matches!(self.clusters, Some(g) if g < 2 || g > self.n_units()) {
            return fail("clusters must lie between 2 and the number of units".into());
        }
        Ok(())
    }

    /// Reads `key = value` lines; `preset` (if given) supplies the starting
    /// values for every other key.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.expect_keys(&CONFIG_KEYS)?;
        let mut c = match kv.get("preset") {
            Some(p) => DgpConfig::preset(p.parse()?),
            None => DgpConfig::default(),
        };
        c.n_early = kv.parse_or("n_early", c.n_early)?;
        c.n_late = kv.parse_or("n_late", c.n_late)?;
        c.n_never = kv.parse_or("n_never", c.n_never)?;
        c.first_period = kv.parse_or("first_period", c.first_period)?;
        c.n_periods = kv.parse_or("n_periods", c.n_periods)?;
        c.early_start = kv.parse_or("early_start", c.early_start)?;
        c.late_start = kv.parse_or("late_start", c.late_start)?;
        c.unit_fe_mean = kv.parse_or("unit_fe_mean", c.unit_fe_mean)?;
        c.unit_fe_sd = kv.parse_or("unit_fe_sd", c.unit_fe_sd)?;
        c.trend_slope = kv.parse_or("trend_slope", c.trend_slope)?;
        c.effect_early = kv.parse_or("effect_early", c.effect_early)?;
        c.effect_late = kv.parse_or("effect_late", c.effect_late)?;
        c.noise_sd = kv.parse_or("noise_sd", c.noise_sd)?;
        c.seed = kv.parse_or("seed", c.seed)?;
        c.clusters = match kv.get("clusters") {
            None | Some("units") => None,
            Some(_) => Some(kv.parse_or("clusters", 0usize)?),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let clusters = self.clusters.map_or("units".to_string(), |g| g.to_string());
        format!(
            "n_early = {}\nn_late = {}\nn_never = {}\nfirst_period = {}\nn_periods = {}\nearly_start = {}\nlate_start = {}\n\
             unit_fe_mean = {}\nunit_fe_sd = {}\ntrend_slope = {}\neffect_early = {}\neffect_late = {}\nnoise_sd = {}\n\
             clusters = {}\nseed = {}\n",
            self.n_early,
            self.n_late,
            self.n_never,
            self.first_period,
            self.n_periods,
            self.early_start,
            self.late_start,
            self.unit_fe_mean,
            self.unit_fe_sd,
            self.trend_slope,
            self.effect_early,
            self.effect_late,
            self.noise_sd,
            clusters,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthCell {
    pub cohort: PeriodId,
    pub event_time: i64,
    pub tau: f64,
    pub n_units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    /// Mean injected effect over all treated unit-period cells.
    pub overall: f64,
    pub cells: Vec<TruthCell>,
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: PanelDataset,
    pub design: TreatmentDesign,
    pub truth: GroundTruth,
}

impl Simulated {
    pub fn cohorts(&self) -> RegionMap<Option<PeriodId>> {
        self.design.cohorts()
    }
}

/// Draws one panel. The same config (seed included) always yields the same
/// panel.
pub fn generate(config: &DgpConfig) -> Result<Simulated> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let fe = Normal::new(config.unit_fe_mean, config.unit_fe_sd).map_err(|e| Error::Invalid(e.to_string()))?;
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| Error::Invalid(e.to_string()))?;
    let width = config.n_units().to_string().len().max(3);

    let blocks = [
        (config.n_early, Some((config.early_start, config.effect_early)), true),
        (config.n_late, Some((config.late_start, config.effect_late)), false),
        (config.n_never, None, false),
    ];
    let mut obs = Vec::with_capacity(config.n_units() * config.n_periods);
    let mut design = TreatmentDesign::default();
    let mut clusters = BTreeMap::new();
    let mut truth_cells: BTreeMap<(PeriodId, i64), (f64, usize)> = BTreeMap::new();
    let mut index = 0usize;
    for (count, treatment, early) in blocks {
        for _ in 0..count {
            let unit = UnitId::new(format!("sim{index:0width$}"))?;
            let alpha = fe.sample(&mut rng);
            for t in 0..config.n_periods {
                let period = config.first_period.offset(t as i64);
                let mut y = alpha + config.trend_slope * t as f64 + noise.sample(&mut rng);
                if let Some((g, schedule)) = treatment {
                    if period >= g {
                        let e = g.quarters_until(period);
                        let tau = schedule.at(e);
                        y += tau;
                        let cell = truth_cells.entry((g, e)).or_insert((tau, 0));
                        cell.1 += 1;
                    }
                }
                obs.push(Observation {
                    unit: unit.clone(),
                    period,
                    outcome: y,
                    weight: 1.0,
                    covariates: vec![],
                });
            }
            let treated = treatment.is_some();
            design.regions.insert(
                unit.clone(),
                RegionTreatment {
                    gap_2014: 0.0,
                    gap_2018: 0.0,
                    high_2014: early,
                    high_2018: treated,
                    cohort: treatment.map(|(g, _)| g),
                    population_weight: 1.0,
                    low_growth: None,
                },
            );
            let cluster = match config.clusters {
                Some(g) => format!("c{:0width$}", index % g),
                None => unit.as_str().to_string(),
            };
            clusters.insert(unit, cluster);
            index += 1;
        }
    }
    let data = PanelDataset::new(obs, vec![], Some(clusters), OutcomeScale::Log)?;
    let cells: Vec<TruthCell> = truth_cells
        .into_iter()
        .map(|((cohort, event_time), (tau, n_units))| TruthCell {
            cohort,
            event_time,
            tau,
            n_units,
        })
        .collect();
    let n_treated: usize = cells.iter().map(|c| c.n_units).sum();
    let overall = if n_treated == 0 {
        0.0
    } else {
        cells.iter().map(|c| c.tau * c.n_units as f64).sum::<f64>() / n_treated as f64
    };
    Ok(Simulated {
        data,
        design,
        truth: GroundTruth { overall, cells },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Twfe,
    CsNever,
    CsNotyet,
    Sa,
    Imputation,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [Estimator::Twfe, Estimator::CsNever, Estimator::CsNotyet, Estimator::Sa, Estimator::Imputation];

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Twfe => "twfe",
            Estimator::CsNever => "cs_never",
            Estimator::CsNotyet => "cs_notyet",
            Estimator::Sa => "sa",
            Estimator::Imputation => "imputation",
        }
    }

    /// Whether the estimator's standard error comes from the bootstrap.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Estimator::CsNever | Estimator::CsNotyet | Estimator::Imputation)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = Estimator::ALL.iter().map(|e| e.as_str()).collect();
            Error::Invalid(format!("unknown estimator `{s}`; valid names: {}", valid.join(", ")))
        })
    }
}

/// One estimate with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEstimate {
    pub estimate: f64,
    pub se: f64,
    pub conf_low: f64,
    pub conf_high: f64,
}

impl PointEstimate {
    fn rejects_zero(&self) -> bool {
        self.conf_low > 0.0 || self.conf_high < 0.0
    }

    fn covers(&self, truth: f64) -> bool {
        self.conf_low <= truth && truth <= self.conf_high
    }
}

/// Overall ATT from one estimator on one simulated panel. Bootstrap-based
/// estimators skip the standard error when `draws == 0`.
pub fn run_estimator(estimator: Estimator, sim: &Simulated, draws: usize, seed: u64) -> Result<PointEstimate> {
    let cohorts = sim.cohorts();
    let bootstrap = (draws > 0).then(|| Bootstrap::new(seed).with_draws(draws));
    let t_interval = |estimate: f64, se: f64, df: f64| {
        let q = StudentsT::new(0.0, 1.0, df).map_or(f64::NAN, |d| d.inverse_cdf(0.975));
        PointEstimate {
            estimate,
            se,
            conf_low: estimate - q * se,
            conf_high: estimate + q * se,
        }
    };
    match estimator {
        Estimator::Twfe => {
            let dm = build_staggered_twfe(&sim.data, &sim.design, &DidSpec::new(SpecKind::StaggeredTwfe))?;
            let fit = wls_fit(&dm)?;
            let b = fit.coef("treat_staggered").ok_or(Error::AllCollinear)?;
            let se = fit.se("treat_staggered").unwrap_or(f64::NAN);
            Ok(t_interval(b, se, fit.df()))
        }
        Estimator::CsNever | Estimator::CsNotyet => {
            let rule = if estimator == Estimator::CsNever {
                ControlRule::NeverTreated
            } else {
                ControlRule::NotYetTreated
            };
            let mut opts = CsOptions::new(rule);
            opts.bootstrap = bootstrap;
            let v = cs_att(&sim.data, &cohorts, &opts)?.overall()?;
            Ok(PointEstimate {
                estimate: v.estimate,
                se: v.se,
                conf_low: v.conf_low,
                conf_high: v.conf_high,
            })
        }
        Estimator::Sa => {
            let r = sa_event_study(&sim.data, &cohorts, &SaOptions::default())?;
            Ok(PointEstimate {
                estimate: r.overall.estimate,
                se: r.overall.se,
                conf_low: r.overall.conf_low,
                conf_high: r.overall.conf_high,
            })
        }
        Estimator::Imputation => {
            let r = impute_att(&sim.data, &cohorts, &ImputeOptions { covariates: vec![], bootstrap })?;
            let z = crate::staggered::z95();
            Ok(PointEstimate {
                estimate: r.att,
                se: r.se,
                conf_low: r.att - z * r.se,
                conf_high: r.att + z * r.se,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceOptions {
    pub replications: usize,
    /// Bootstrap draws per replication for the bootstrap-based estimators;
    /// 0 skips their standard errors.
    pub bootstrap_draws: usize,
}

impl Default for RaceOptions {
    fn default() -> Self {
        RaceOptions {
            replications: 100,
            bootstrap_draws: 199,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub truth: f64,
    /// Aligned with the race's estimator list; `Err` holds the message.
    pub results: Vec<std::result::Result<PointEstimate, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceRow {
    pub estimator: Estimator,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    /// Monte Carlo standard error of the mean.
    pub mc_se: f64,
    pub coverage: f64,
    pub rejection_rate: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceResult {
    pub estimators: Vec<Estimator>,
    pub truth: f64,
    pub rows: Vec<RaceRow>,
    pub replications: Vec<Replication>,
}

impl RaceResult {
    pub fn row(&self, estimator: Estimator) -> Option<&RaceRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }

    /// Per-replication estimates of one estimator (`None` on failure).
    pub fn estimates(&self, estimator: Estimator) -> Vec<Option<f64>> {
        let j = self.estimators.iter().position(|e| *e == estimator);
        self.replications
            .iter()
            .map(|r| j.and_then(|j| r.results[j].as_ref().ok().map(|p| p.estimate)))
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_replications_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["replication", "seed", "truth", "estimator", "estimate", "se", "conf_low", "conf_high", "error"])?;
        for rep in &self.replications {
            for (e, res) in self.estimators.iter().zip(&rep.results) {
                let mut rec = vec![rep.index.to_string(), rep.seed.to_string(), rep.truth.to_string(), e.to_string()];
                match res {
                    Ok(p) => rec.extend([p.estimate, p.se, p.conf_low, p.conf_high].map(|v| v.to_string()).into_iter().chain([String::new()])),
                    Err(msg) => rec.extend([String::new(), String::new(), String::new(), String::new(), msg.clone()]),
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Replication `r` simulates with seed `child_seed(config.seed, r)`; the
/// estimators run in canonical order so results do not depend on the order
/// of `estimators`.
pub fn estimator_race(config: &DgpConfig, estimators: &[Estimator], options: RaceOptions) -> Result<RaceResult> {
    if options.replications == 0 {
        return Err(Error::Invalid("replications must be at least 1".into()));
    }
    if estimators.is_empty() {
        return Err(Error::Invalid("no estimators selected".into()));
    }
    config.validate()?;
    let mut list = estimators.to_vec();
    list.sort_unstable();
    list.dedup();

    let replications: Vec<Replication> = (0..options.replications)
        .into_par_iter()
        .map(|r| {
            let seed = child_seed(config.seed, r as u64);
            let sim = generate(&config.clone().with_seed(seed))?;
            let boot_seed = child_seed(seed, u64::MAX);
            let results = list
                .iter()
                .map(|&e| run_estimator(e, &sim, options.bootstrap_draws, boot_seed).map_err(|err| err.to_string()))
                .collect();
            Ok(Replication {
                index: r,
                seed,
                truth: sim.truth.overall,
                results,
            })
        })
        .collect::<Result<_>>()?;

    let truth = replications.iter().map(|r| r.truth).sum::<f64>() / replications.len() as f64;
    let rows = list
        .iter()
        .enumerate()
        .map(|(j, &estimator)| {
            let ok: Vec<(&PointEstimate, f64)> = replications
                .iter()
                .filter_map(|r| r.results[j].as_ref().ok().map(|p| (p, r.truth)))
                .collect();
            let n = ok.len() as f64;
            let mean = ok.iter().map(|(p, _)| p.estimate).sum::<f64>() / n;
            let bias = ok.iter().map(|(p, t)| p.estimate - t).sum::<f64>() / n;
            let sd = if ok.len() > 1 {
                (ok.iter().map(|(p, _)| (p.estimate - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let with_se: Vec<&(&PointEstimate, f64)> = ok.iter().filter(|(p, _)| p.se.is_finite()).collect();
            let rate = |f: &dyn Fn(&PointEstimate, f64) -> bool| {
                if with_se.is_empty() {
                    f64::NAN
                } else {
                    with_se.iter().filter(|(p, t)| f(p, *t)).count() as f64 / with_se.len() as f64
                }
            };
            RaceRow {
                estimator,
                mean,
                bias,
                sd,
                mc_se: sd / n.sqrt(),
                coverage: rate(&|p, t| p.covers(t)),
                rejection_rate: rate(&|p, _| p.rejects_zero()),
                n_ok: ok.len(),
                n_failed: replications.len() - ok.len(),
            }
        })
        .collect();
    Ok(RaceResult {
        estimators: list,
        truth,
        rows,
        replications,
    })
}
