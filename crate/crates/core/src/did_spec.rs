//! Regression designs: each builder turns a panel and its treatment
//! metadata into a [`DesignMatrix`] with the treatment indicators of one
//! estimating equation plus the planned covariate block.
//!
//! Timing conventions:
//! - post indicators use `t > cutoff` and placebo indicators `t < cutoff`,
//!   so rows at the cutoff quarter load on neither;
//! - raise indicators switch on after the fourth quarter of the listed year;
//! - staggered adoption is absorbing, `t ≥ first treated period`.

use std::fmt;
use std::str::FromStr;

use crate::bite::{RegionMap, SwitcherGroup, TreatmentDesign};
use crate::engine::DesignMatrix;
use crate::error::{Error, Result};
use crate::kv::{parse_bool, KeyValues};
use crate::panel::{Observation, PanelDataset, PeriodId, UnitId};

/// Raise thresholds (Q4 of each year) for the January raises of 2017 and 2019–2022.
pub const FULL_INCREASE_YEARS: [i32; 5] = [2016, 2018, 2019, 2020, 2021];
/// Only the first two raises (2017 and 2019).
pub const SHORT_INCREASE_YEARS: [i32; 2] = [2016, 2018];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecKind {
    Baseline,
    EventStudy,
    GrowthInteraction,
    Increases,
    MultiGroup,
    StaggeredTwfe,
}

impl SpecKind {
    pub const ALL: [SpecKind; 6] = [
        SpecKind::Baseline,
        SpecKind::EventStudy,
        SpecKind::GrowthInteraction,
        SpecKind::Increases,
        SpecKind::MultiGroup,
        SpecKind::StaggeredTwfe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpecKind::Baseline => "baseline",
            SpecKind::EventStudy => "event_study",
            SpecKind::GrowthInteraction => "growth_interaction",
            SpecKind::Increases => "increases",
            SpecKind::MultiGroup => "multi_group",
            SpecKind::StaggeredTwfe => "staggered_twfe",
        }
    }
}

impl fmt::Display for SpecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpecKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown design kind `{s}`")))
    }
}

/// One planned control: a characteristic, optionally interacted with period
/// dummies and/or a 0/1 region flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateTerm {
    pub characteristic: String,
    pub interact_with_time: bool,
    pub flag: Option<String>,
}

impl CovariateTerm {
    pub fn time(characteristic: &str) -> Self {
        CovariateTerm {
            characteristic: characteristic.into(),
            interact_with_time: true,
            flag: None,
        }
    }

    pub fn time_by_flag(characteristic: &str, flag: &str) -> Self {
        CovariateTerm {
            flag: Some(flag.into()),
            ..CovariateTerm::time(characteristic)
        }
    }
}

impl fmt::Display for CovariateTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.characteristic)?;
        if self.interact_with_time {
            f.write_str("*time")?;
        }
        if let Some(flag) = &self.flag {
            write!(f, "*{flag}")?;
        }
        Ok(())
    }
}

impl FromStr for CovariateTerm {
    type Err = Error;

    /// `name`, `name*time`, `name*time*flag` or `name*flag`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('*').map(str::trim);
        let characteristic = parts.next().filter(|p| !p.is_empty()).ok_or_else(|| Error::Invalid(format!("empty covariate term `{s}`")))?;
        let mut term = CovariateTerm {
            characteristic: characteristic.into(),
            interact_with_time: false,
            flag: None,
        };
        for p in parts {
            if p == "time" {
                term.interact_with_time = true;
            } else if term.flag.is_none() && !p.is_empty() {
                term.flag = Some(p.into());
            } else {
                return Err(Error::Invalid(format!("malformed covariate term `{s}`")));
            }
        }
        Ok(term)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DidSpec {
    pub kind: SpecKind,
    pub anticipation_cutoff: PeriodId,
    /// Omitted quarter of the event study.
    pub baseline_period: PeriodId,
    pub increase_years: Vec<i32>,
    pub placebo: bool,
    pub covariates: Vec<CovariateTerm>,
}

impl DidSpec {
    pub fn new(kind: SpecKind) -> Self {
        DidSpec {
            kind,
            anticipation_cutoff: PeriodId::q(2014, 2),
            baseline_period: PeriodId::q(2014, 2),
            increase_years: FULL_INCREASE_YEARS.to_vec(),
            placebo: false,
            covariates: Vec::new(),
        }
    }

    pub fn with_placebo(mut self, placebo: bool) -> Self {
        self.placebo = placebo;
        self
    }

    pub fn with_covariates(mut self, covariates: Vec<CovariateTerm>) -> Self {
        self.covariates = covariates;
        self
    }

    pub fn with_increase_years(mut self, years: &[i32]) -> Self {
        self.increase_years = years.to_vec();
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.expect_keys(&["kind", "cutoff", "baseline", "increase_years", "placebo", "covariates"])?;
        let kind: SpecKind = kv
            .get("kind")
            .ok_or_else(|| Error::Config {
                line: 0,
                message: "missing `kind`".into(),
            })?
            .parse()?;
        let mut spec = DidSpec::new(kind);
        if let Some(v) = kv.get("cutoff") {
            spec.anticipation_cutoff = v.parse()?;
        }
        if let Some(v) = kv.get("baseline") {
            spec.baseline_period = v.parse()?;
        }
        if let Some(v) = kv.get("increase_years") {
            spec.increase_years = match v {
                "full" => FULL_INCREASE_YEARS.to_vec(),
                "short" => SHORT_INCREASE_YEARS.to_vec(),
                list => list
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim().parse::<i32>().map_err(|_| Error::Config {
                            line: kv.line_of("increase_years"),
                            message: format!("bad year `{s}`"),
                        })
                    })
                    .collect::<Result<_>>()?,
            };
        }
        if let Some(v) = kv.get("placebo") {
            spec.placebo = parse_bool(v).ok_or_else(|| Error::Config {
                line: kv.line_of("placebo"),
                message: format!("expected boolean, got `{v}`"),
            })?;
        }
        if let Some(v) = kv.get("covariates") {
            spec.covariates = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<_>>()?;
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let years: Vec<String> = self.increase_years.iter().map(i32::to_string).collect();
        let covs: Vec<String> = self.covariates.iter().map(CovariateTerm::to_string).collect();
        format!(
            "kind = {}\ncutoff = {}\nbaseline = {}\nincrease_years = {}\nplacebo = {}\ncovariates = {}\n",
            self.kind,
            self.anticipation_cutoff,
            self.baseline_period,
            years.join(","),
            self.placebo,
            covs.join(", ")
        )
    }
}

fn indicator(data: &PanelDataset, mut f: impl FnMut(&Observation) -> Result<bool>) -> Result<Vec<f64>> {
    data.observations()
        .iter()
        .map(|o| f(o).map(|b| if b { 1.0 } else { 0.0 }))
        .collect()
}

fn high_2014(design: &TreatmentDesign, unit: &UnitId) -> Result<bool> {
    Ok(design.get(unit)?.high_2014)
}

fn finish(data: &PanelDataset, mut dm: DesignMatrix, spec: &DidSpec) -> Result<DesignMatrix> {
    for (name, values) in expand_covariates(data, &spec.covariates)? {
        dm.push_column(name, values)?;
    }
    Ok(dm)
}

/// `high_2014 × 1[t > cutoff]`, plus `high_2014 × 1[t < cutoff]` with placebo.
pub fn build_baseline(data: &PanelDataset, design: &TreatmentDesign, spec: &DidSpec) -> Result<DesignMatrix> {
    let mut dm = DesignMatrix::from_panel(data);
    push_baseline_block(data, design, spec, &mut dm)?;
    finish(data, dm, spec)
}

fn push_baseline_block(data: &PanelDataset, design: &TreatmentDesign, spec: &DidSpec, dm: &mut DesignMatrix) -> Result<()> {
    let cutoff = spec.anticipation_cutoff;
    dm.push_column(
        "treat_post",
        indicator(data, |o| Ok(high_2014(design, &o.unit)? && o.period > cutoff))?,
    )?;
    if spec.placebo {
        dm.push_column(
            "placebo_pre",
            indicator(data, |o| Ok(high_2014(design, &o.unit)? && o.period < cutoff))?,
        )?;
    }
    Ok(())
}

pub fn event_column_name(period: PeriodId) -> String {
    format!("event_{period}")
}

/// One `high_2014 × 1[t = τ]` regressor per observed quarter except the
/// baseline quarter.
pub fn build_event_study(data: &PanelDataset, design: &TreatmentDesign, spec: &DidSpec) -> Result<DesignMatrix> {
    let baseline = spec.baseline_period;
    if data.period_index(baseline).is_none() {
        return Err(Error::MissingPeriod(baseline));
    }
    if data.periods().len() < 3 {
        return Err(Error::Invalid("event study needs at least two periods besides the baseline".into()));
    }
    let treated: Vec<bool> = data
        .observations()
        .iter()
        .map(|o| high_2014(design, &o.unit))
        .collect::<Result<_>>()?;
    let mut dm = DesignMatrix::from_panel(data);
    for &tau in data.periods().iter().filter(|p| **p != baseline) {
        let col = data
            .observations()
            .iter()
            .zip(&treated)
            .map(|(o, &t)| if t && o.period == tau { 1.0 } else { 0.0 })
            .collect();
        dm.push_column(event_column_name(tau), col)?;
    }
    finish(data, dm, spec)
}

/// Baseline block plus its interaction with a low-growth flag, and a
/// period × low-growth control block.
pub fn build_growth_interaction(
    data: &PanelDataset,
    design: &TreatmentDesign,
    low_growth: &RegionMap<bool>,
    spec: &DidSpec,
) -> Result<DesignMatrix> {
    let cutoff = spec.anticipation_cutoff;
    let flag = |u: &UnitId| low_growth.get(u).copied().ok_or_else(|| Error::MissingTreatment(u.clone()));
    let mut dm = DesignMatrix::from_panel(data);
    push_baseline_block(data, design, spec, &mut dm)?;
    dm.push_column(
        "treat_post_low_growth",
        indicator(data, |o| Ok(high_2014(design, &o.unit)? && flag(&o.unit)? && o.period > cutoff))?,
    )?;
    if spec.placebo {
        dm.push_column(
            "placebo_pre_low_growth",
            indicator(data, |o| Ok(high_2014(design, &o.unit)? && flag(&o.unit)? && o.period < cutoff))?,
        )?;
    }
    for &tau in data.periods().iter().skip(1) {
        dm.push_column(
            format!("low_growth_x_{tau}"),
            indicator(data, |o| Ok(flag(&o.unit)? && o.period == tau))?,
        )?;
    }
    finish(data, dm, spec)
}

/// Growth flags stored on the treatment design.
pub fn growth_flags(design: &TreatmentDesign) -> Result<RegionMap<bool>> {
    design
        .regions
        .iter()
        .map(|(r, t)| {
            t.low_growth
                .map(|f| (r.clone(), f))
                .ok_or_else(|| Error::Invalid(format!("region `{r}` has no low_growth flag")))
        })
        .collect()
}

/// Baseline block plus `high_2014 × 1[t > Q4/τ]` per listed year.
pub fn build_increases(data: &PanelDataset, design: &TreatmentDesign, spec: &DidSpec) -> Result<DesignMatrix> {
    if spec.increase_years.is_empty() {
        return Err(Error::Invalid("increase design needs at least one raise year".into()));
    }
    if let Some(y) = spec.increase_years.iter().find(|y| !(2016..=2021).contains(*y)) {
        return Err(Error::Invalid(format!("raise year {y} outside 2016..=2021")));
    }
    let mut dm = DesignMatrix::from_panel(data);
    push_baseline_block(data, design, spec, &mut dm)?;
    for &year in &spec.increase_years {
        let threshold = PeriodId::q(year, 4);
        dm.push_column(
            format!("raise_after_{threshold}"),
            indicator(data, |o| Ok(high_2014(design, &o.unit)? && o.period > threshold))?,
        )?;
    }
    finish(data, dm, spec)
}

const TREATED_GROUPS: [(SwitcherGroup, &str); 3] = [
    (SwitcherGroup::LowHigh, "low_high"),
    (SwitcherGroup::HighLow, "high_low"),
    (SwitcherGroup::HighHigh, "high_high"),
];

/// Three group indicators × post; low/low is the omitted control group.
pub fn build_multi_group(data: &PanelDataset, design: &TreatmentDesign, spec: &DidSpec) -> Result<DesignMatrix> {
    let cutoff = spec.anticipation_cutoff;
    let mut dm = DesignMatrix::from_panel(data);
    for (group, name) in TREATED_GROUPS {
        dm.push_column(
            format!("{name}_post"),
            indicator(data, |o| Ok(design.get(&o.unit)?.group() == group && o.period > cutoff))?,
        )?;
    }
    if spec.placebo {
        for (group, name) in TREATED_GROUPS {
            dm.push_column(
                format!("{name}_pre"),
                indicator(data, |o| Ok(design.get(&o.unit)?.group() == group && o.period < cutoff))?,
            )?;
        }
    }
    finish(data, dm, spec)
}

/// `1[t ≥ F_i]` with `F_i` the region's first treated quarter.
pub fn build_staggered_twfe(data: &PanelDataset, design: &TreatmentDesign, spec: &DidSpec) -> Result<DesignMatrix> {
    let mut dm = DesignMatrix::from_panel(data);
    dm.push_column(
        "treat_staggered",
        indicator(data, |o| Ok(design.get(&o.unit)?.cohort.is_some_and(|f| o.period >= f)))?,
    )?;
    finish(data, dm, spec)
}

/// Dispatches on `spec.kind`; the growth design reads its flags from the
/// treatment design.
pub fn build(data: &PanelDataset, design: &TreatmentDesign, spec: &DidSpec) -> Result<DesignMatrix> {
    match spec.kind {
        SpecKind::Baseline => build_baseline(data, design, spec),
        SpecKind::EventStudy => build_event_study(data, design, spec),
        SpecKind::GrowthInteraction => build_growth_interaction(data, design, &growth_flags(design)?, spec),
        SpecKind::Increases => build_increases(data, design, spec),
        SpecKind::MultiGroup => build_multi_group(data, design, spec),
        SpecKind::StaggeredTwfe => build_staggered_twfe(data, design, spec),
    }
}

/// Expands the covariate plan into named columns aligned with the panel's
/// rows. Time interactions emit one column per period after the first.
pub fn expand_covariates(data: &PanelDataset, plan: &[CovariateTerm]) -> Result<Vec<(String, Vec<f64>)>> {
    let lookup = |name: &str| data.covariate_index(name).ok_or_else(|| Error::UnknownCharacteristic(name.to_string()));
    let mut out = Vec::new();
    for term in plan {
        let c = lookup(&term.characteristic)?;
        let f = term.flag.as_deref().map(lookup).transpose()?;
        let base: Vec<f64> = data
            .observations()
            .iter()
            .map(|o| o.covariates[c] * f.map_or(1.0, |fi| o.covariates[fi]))
            .collect();
        let stem = match &term.flag {
            Some(flag) => format!("{}_x_{}", term.characteristic, flag),
            None => term.characteristic.clone(),
        };
        if term.interact_with_time {
            for &tau in data.periods().iter().skip(1) {
                let col = data
                    .observations()
                    .iter()
                    .zip(&base)
                    .map(|(o, v)| if o.period == tau { *v } else { 0.0 })
                    .collect();
                out.push((format!("{stem}_x_{tau}"), col));
            }
        } else {
            out.push((stem, base));
        }
    }
    Ok(out)
}
