//! Regional minimum-wage exposure.
//!
//! The wage gap of a region is the average per-worker shortfall of hourly
//! wages below the minimum wage. Treatment flags come from a
//! population-weighted median split of those gaps, and two survey waves
//! combine into switcher groups and staggered adoption cohorts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{PeriodId, UnitId};

pub type RegionMap<T> = BTreeMap<UnitId, T>;

#[derive(Debug, Clone, PartialEq)]
pub struct WageRecord {
    pub region: UnitId,
    pub hourly_wage: f64,
}

/// One survey wave of worker-level hourly wages.
#[derive(Debug, Clone)]
pub struct WageMicrodata {
    records: Vec<WageRecord>,
    minimum_wage: f64,
    survey_year: i32,
}

impl WageMicrodata {
    pub fn new(records: Vec<WageRecord>, minimum_wage: f64, survey_year: i32) -> Result<Self> {
        if !(minimum_wage.is_finite() && minimum_wage > 0.0) {
            return Err(Error::Invalid(format!("minimum wage must be positive, got {minimum_wage}")));
        }
        for (i, r) in records.iter().enumerate() {
            if !(r.hourly_wage.is_finite() && r.hourly_wage > 0.0) {
                return Err(Error::NonPositive {
                    row: i + 1,
                    column: "hourly_wage".into(),
                    value: r.hourly_wage,
                });
            }
        }
        Ok(WageMicrodata {
            records,
            minimum_wage,
            survey_year,
        })
    }

    /// Reads `region,hourly_wage` rows.
    pub fn from_csv<R: Read>(source: R, minimum_wage: f64, survey_year: i32) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            region: String,
            hourly_wage: f64,
        }
        let mut reader = csv::Reader::from_reader(source);
        let mut records = Vec::new();
        for row in reader.deserialize::<Row>() {
            let row = row?;
            records.push(WageRecord {
                region: UnitId::new(row.region)?,
                hourly_wage: row.hourly_wage,
            });
        }
        WageMicrodata::new(records, minimum_wage, survey_year)
    }

    pub fn records(&self) -> &[WageRecord] {
        &self.records
    }

    pub fn minimum_wage(&self) -> f64 {
        self.minimum_wage
    }

    pub fn survey_year(&self) -> i32 {
        self.survey_year
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub gap: f64,
    pub worker_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WageGapTable {
    pub survey_year: i32,
    pub minimum_wage: f64,
    pub rows: RegionMap<GapRow>,
}

impl WageGapTable {
    pub fn gaps(&self) -> RegionMap<f64> {
        self.rows.iter().map(|(r, g)| (r.clone(), g.gap)).collect()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["region", "gap", "worker_count"])?;
        for (region, row) in &self.rows {
            w.write_record([region.to_string(), row.gap.to_string(), row.worker_count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gap per region over the regions present in the records.
pub fn wage_gap(micro: &WageMicrodata) -> Result<WageGapTable> {
    let regions: BTreeSet<UnitId> = micro.records.iter().map(|r| r.region.clone()).collect();
    wage_gap_for(micro, regions.iter())
}

/// Gap per region for an explicit region list; a listed region without
/// records is an error.
pub fn wage_gap_for<'a>(
    micro: &WageMicrodata,
    regions: impl IntoIterator<Item = &'a UnitId>,
) -> Result<WageGapTable> {
    let mut acc: RegionMap<(f64, usize)> = regions.into_iter().map(|r| (r.clone(), (0.0, 0))).collect();
    for rec in &micro.records {
        if let Some((sum, n)) = acc.get_mut(&rec.region) {
            *sum += (micro.minimum_wage - rec.hourly_wage).max(0.0);
            *n += 1;
        }
    }
    let mut rows = RegionMap::new();
    for (region, (sum, n)) in acc {
        if n == 0 {
            return Err(Error::EmptyRegion(region));
        }
        rows.insert(
            region,
            GapRow {
                gap: sum / n as f64,
                worker_count: n,
            },
        );
    }
    Ok(WageGapTable {
        survey_year: micro.survey_year,
        minimum_wage: micro.minimum_wage,
        rows,
    })
}

/// Which side of the weighted median counts as treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitRule {
    /// gap ≥ median
    #[default]
    AtOrAbove,
    /// gap > median
    Above,
}

/// Smallest gap `g` whose cumulative weight (over gaps ≤ g) reaches half the
/// total weight.
pub fn weighted_median(gaps: &RegionMap<f64>, weights: &RegionMap<f64>) -> Result<f64> {
    let mut pairs = Vec::with_capacity(gaps.len());
    for (region, gap) in gaps {
        let w = *weights.get(region).ok_or_else(|| Error::MissingWeight(region.clone()))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Invalid(format!("weight for `{region}` must be positive, got {w}")));
        }
        pairs.push((*gap, w));
    }
    if pairs.is_empty() {
        return Err(Error::Invalid("no regions to split".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut cumulative = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        // advance over ties so cumulative covers every gap ≤ this value
        let value = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == value {
            cumulative += pairs[i].1;
            i += 1;
        }
        if 2.0 * cumulative >= total {
            return Ok(value);
        }
    }
    Ok(pairs.last().unwrap().0)
}

/// Flags regions on the treated side of the population-weighted median.
pub fn weighted_median_split(
    gaps: &RegionMap<f64>,
    weights: &RegionMap<f64>,
    rule: SplitRule,
) -> Result<RegionMap<bool>> {
    let median = weighted_median(gaps, weights)?;
    Ok(gaps
        .iter()
        .map(|(r, g)| {
            let treated = match rule {
                SplitRule::AtOrAbove => *g >= median,
                SplitRule::Above => *g > median,
            };
            (r.clone(), treated)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SwitcherGroup {
    LowLow,
    LowHigh,
    HighLow,
    HighHigh,
}

impl SwitcherGroup {
    pub fn from_flags(high_first: bool, high_second: bool) -> Self {
        match (high_first, high_second) {
            (false, false) => SwitcherGroup::LowLow,
            (false, true) => SwitcherGroup::LowHigh,
            (true, false) => SwitcherGroup::HighLow,
            (true, true) => SwitcherGroup::HighHigh,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SwitcherGroup::LowLow => "low/low",
            SwitcherGroup::LowHigh => "low/high",
            SwitcherGroup::HighLow => "high/low",
            SwitcherGroup::HighHigh => "high/high",
        }
    }
}

impl fmt::Display for SwitcherGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SwitcherGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low/low" => Ok(SwitcherGroup::LowLow),
            "low/high" => Ok(SwitcherGroup::LowHigh),
            "high/low" => Ok(SwitcherGroup::HighLow),
            "high/high" => Ok(SwitcherGroup::HighHigh),
            other => Err(Error::Invalid(format!("unknown switcher group `{other}`"))),
        }
    }
}

fn symmetric_difference<A, B>(a: &RegionMap<A>, b: &RegionMap<B>) -> Vec<UnitId> {
    let ka: BTreeSet<&UnitId> = a.keys().collect();
    let kb: BTreeSet<&UnitId> = b.keys().collect();
    ka.symmetric_difference(&kb).map(|u| (*u).clone()).collect()
}

pub fn classify_switchers(
    high_2014: &RegionMap<bool>,
    high_2018: &RegionMap<bool>,
) -> Result<RegionMap<SwitcherGroup>> {
    let diff = symmetric_difference(high_2014, high_2018);
    if !diff.is_empty() {
        return Err(Error::RegionMismatch(diff));
    }
    Ok(high_2014
        .iter()
        .map(|(r, h14)| (r.clone(), SwitcherGroup::from_flags(*h14, high_2018[r])))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapCorrelations {
    pub pearson: f64,
    pub spearman: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// 1-based ranks, ties share their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Unweighted Pearson and Spearman correlation of two gap tables.
pub fn gap_correlations(gaps_a: &WageGapTable, gaps_b: &WageGapTable) -> Result<GapCorrelations> {
    correlations(&gaps_a.gaps(), &gaps_b.gaps())
}

pub fn correlations(a: &RegionMap<f64>, b: &RegionMap<f64>) -> Result<GapCorrelations> {
    let diff = symmetric_difference(a, b);
    if !diff.is_empty() {
        return Err(Error::RegionMismatch(diff));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two regions".into()));
    }
    let xa: Vec<f64> = a.values().copied().collect();
    let xb: Vec<f64> = a.keys().map(|k| b[k]).collect();
    let pearson_r = pearson(&xa, &xb)?;
    let spearman = pearson(&average_ranks(&xa), &average_ranks(&xb))?;
    Ok(GapCorrelations {
        pearson: pearson_r,
        spearman,
    })
}

/// Smallest value whose empirical CDF reaches `q`.
pub fn ecdf_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // smallest k with k/n >= q, evaluated in integers to avoid rounding
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Flags regions in the bottom quartile of growth (value ≤ 25th percentile).
pub fn low_growth_flag(growth: &RegionMap<f64>) -> Result<RegionMap<bool>> {
    if growth.len() < 4 {
        return Err(Error::Invalid(format!(
            "low-growth quartile needs at least 4 regions, got {}",
            growth.len()
        )));
    }
    let values: Vec<f64> = growth.values().copied().collect();
    let p25 = ecdf_quantile(&values, 0.25);
    Ok(growth.iter().map(|(r, g)| (r.clone(), *g <= p25)).collect())
}

/// Start periods assigned to the two adoption waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortDates {
    pub early: PeriodId,
    pub late: PeriodId,
}

impl Default for CohortDates {
    fn default() -> Self {
        CohortDates {
            early: PeriodId::q(2014, 3),
            late: PeriodId::q(2019, 1),
        }
    }
}

impl CohortDates {
    pub fn cohort(&self, high_2014: bool, high_2018: bool) -> Option<PeriodId> {
        if high_2014 {
            Some(self.early)
        } else if high_2018 {
            Some(self.late)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionTreatment {
    pub gap_2014: f64,
    pub gap_2018: f64,
    pub high_2014: bool,
    pub high_2018: bool,
    pub cohort: Option<PeriodId>,
    pub population_weight: f64,
    pub low_growth: Option<bool>,
}

impl RegionTreatment {
    pub fn group(&self) -> SwitcherGroup {
        SwitcherGroup::from_flags(self.high_2014, self.high_2018)
    }
}

/// Per-region treatment metadata for every estimation design.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreatmentDesign {
    pub regions: RegionMap<RegionTreatment>,
}

impl TreatmentDesign {
    /// Builds the design from two waves of gaps and population weights.
    pub fn from_gaps(
        gaps_2014: &WageGapTable,
        gaps_2018: &WageGapTable,
        population: &RegionMap<f64>,
        rule: SplitRule,
        dates: CohortDates,
    ) -> Result<Self> {
        let g14 = gaps_2014.gaps();
        let g18 = gaps_2018.gaps();
        let high14 = weighted_median_split(&g14, population, rule)?;
        let high18 = weighted_median_split(&g18, population, rule)?;
        let groups = classify_switchers(&high14, &high18)?;
        let regions = groups
            .into_iter()
            .map(|(r, _group)| {
                let t = RegionTreatment {
                    gap_2014: g14[&r],
                    gap_2018: g18[&r],
                    high_2014: high14[&r],
                    high_2018: high18[&r],
                    cohort: dates.cohort(high14[&r], high18[&r]),
                    population_weight: population[&r],
                    low_growth: None,
                };
                (r, t)
            })
            .collect();
        Ok(TreatmentDesign { regions })
    }

    pub fn with_low_growth(mut self, flags: &RegionMap<bool>) -> Result<Self> {
        for (r, t) in &mut self.regions {
            t.low_growth = Some(*flags.get(r).ok_or_else(|| Error::MissingTreatment(r.clone()))?);
        }
        Ok(self)
    }

    pub fn get(&self, unit: &UnitId) -> Result<&RegionTreatment> {
        self.regions.get(unit).ok_or_else(|| Error::MissingTreatment(unit.clone()))
    }

    pub fn cohorts(&self) -> RegionMap<Option<PeriodId>> {
        self.regions.iter().map(|(r, t)| (r.clone(), t.cohort)).collect()
    }

    pub fn group_counts(&self) -> BTreeMap<SwitcherGroup, usize> {
        let mut counts = BTreeMap::new();
        for t in self.regions.values() {
            *counts.entry(t.group()).or_insert(0) += 1;
        }
        counts
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "region",
            "gap_2014",
            "gap_2018",
            "high_2014",
            "high_2018",
            "group",
            "cohort",
            "population_weight",
            "low_growth",
        ])?;
        for (r, t) in &self.regions {
            w.write_record([
                r.to_string(),
                t.gap_2014.to_string(),
                t.gap_2018.to_string(),
                t.high_2014.to_string(),
                t.high_2018.to_string(),
                t.group().to_string(),
                t.cohort.map(|c| c.to_string()).unwrap_or_default(),
                t.population_weight.to_string(),
                t.low_growth.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(source);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let c_region = col("region")?;
        let c_g14 = col("gap_2014")?;
        let c_g18 = col("gap_2018")?;
        let c_h14 = col("high_2014")?;
        let c_h18 = col("high_2018")?;
        let c_cohort = col("cohort")?;
        let c_pop = col("population_weight")?;
        let c_growth = col("low_growth").ok();
        let mut regions = RegionMap::new();
        for rec in reader.records() {
            let rec = rec?;
            let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let get = |c: usize| rec.get(c).unwrap_or("").trim();
            let num = |c: usize| -> Result<f64> {
                get(c).parse().map_err(|_| Error::Parse {
                    row,
                    column: header[c].clone(),
                    value: get(c).to_string(),
                })
            };
            let flag = |c: usize| -> Result<bool> {
                match get(c) {
                    "true" | "1" => Ok(true),
                    "false" | "0" => Ok(false),
                    v => Err(Error::Parse {
                        row,
                        column: header[c].clone(),
                        value: v.to_string(),
                    }),
                }
            };
            let cohort = match get(c_cohort) {
                "" => None,
                s => Some(s.parse()?),
            };
            let low_growth = match c_growth.map(get) {
                None | Some("") => None,
                Some(_) => Some(flag(c_growth.unwrap())?),
            };
            let region = UnitId::new(get(c_region))?;
            let t = RegionTreatment {
                gap_2014: num(c_g14)?,
                gap_2018: num(c_g18)?,
                high_2014: flag(c_h14)?,
                high_2018: flag(c_h18)?,
                cohort,
                population_weight: num(c_pop)?,
                low_growth,
            };
            if regions.insert(region.clone(), t).is_some() {
                return Err(Error::Invalid(format!("duplicate region `{region}` in design")));
            }
        }
        Ok(TreatmentDesign { regions })
    }
}

/// Reads a two-column `region,<value>` CSV into a map.
pub fn read_region_values<R: Read>(source: R) -> Result<RegionMap<f64>> {
    let mut reader = csv::Reader::from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(Error::MissingColumn("value".into()));
    }
    let mut out = RegionMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let region = UnitId::new(rec.get(0).unwrap_or("").trim())?;
        let raw = rec.get(1).unwrap_or("").trim();
        let v: f64 = raw.parse().map_err(|_| Error::Parse {
            row,
            column: header[1].clone(),
            value: raw.to_string(),
        })?;
        out.insert(region, v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro(region_wages: &[(&str, f64)], mw: f64) -> WageMicrodata {
        let records = region_wages
            .iter()
            .map(|(r, w)| WageRecord {
                region: UnitId::from(*r),
                hourly_wage: *w,
            })
            .collect();
        WageMicrodata::new(records, mw, 2014).unwrap()
    }

    fn map<T: Clone>(pairs: &[(&str, T)]) -> RegionMap<T> {
        pairs.iter().map(|(k, v)| (UnitId::from(*k), v.clone())).collect()
    }

    #[test]
    fn gap_examples() {
        let t = wage_gap(&micro(&[("a", 8.5), ("a", 9.0)], 8.5)).unwrap();
        assert_eq!(t.rows[&UnitId::from("a")].gap, 0.0);

        let t = wage_gap(&micro(&[("a", 8.0), ("a", 9.0)], 8.5)).unwrap();
        assert_eq!(t.rows[&UnitId::from("a")].gap, 0.25);

        let t = wage_gap(&micro(&[("a", 7.0), ("a", 7.5), ("a", 10.0)], 8.5)).unwrap();
        // (1.5 + 1.0 + 0) / 3
        let row = t.rows[&UnitId::from("a")];
        assert!((row.gap - 2.5 / 3.0).abs() < 1e-15);
        assert_eq!(row.worker_count, 3);
    }

    #[test]
    fn empty_listed_region_is_an_error() {
        let m = micro(&[("a", 8.0)], 8.5);
        let regions = [UnitId::from("a"), UnitId::from("b")];
        match wage_gap_for(&m, regions.iter()) {
            Err(Error::EmptyRegion(r)) => assert_eq!(r.as_str(), "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_microdata_rejected() {
        assert!(WageMicrodata::new(vec![], 0.0, 2014).is_err());
        let bad = vec![WageRecord {
            region: UnitId::from("a"),
            hourly_wage: 0.0,
        }];
        assert!(WageMicrodata::new(bad, 8.5, 2014).is_err());
    }

    #[test]
    fn median_split_examples() {
        let gaps = map(&[("a", 1.0), ("b", 2.0), ("c", 3.0)]);
        let w = map(&[("a", 1.0), ("b", 1.0), ("c", 1.0)]);
        let s = weighted_median_split(&gaps, &w, SplitRule::AtOrAbove).unwrap();
        assert_eq!(s, map(&[("a", false), ("b", true), ("c", true)]));

        let gaps = map(&[("a", 1.0), ("b", 2.0)]);
        let w = map(&[("a", 0.99), ("b", 0.01)]);
        assert_eq!(weighted_median(&gaps, &w).unwrap(), 1.0);
        let s = weighted_median_split(&gaps, &w, SplitRule::AtOrAbove).unwrap();
        assert_eq!(s, map(&[("a", true), ("b", true)]));
        let strict = weighted_median_split(&gaps, &w, SplitRule::Above).unwrap();
        assert_eq!(strict, map(&[("a", false), ("b", true)]));

        let gaps = map(&[("a", 0.4), ("b", 0.4), ("c", 0.4)]);
        let s = weighted_median_split(&gaps, &map(&[("a", 1.0), ("b", 5.0), ("c", 2.0)]), SplitRule::AtOrAbove).unwrap();
        assert!(s.values().all(|t| *t));
    }

    #[test]
    fn median_split_missing_weight_names_region() {
        let gaps = map(&[("a", 1.0), ("b", 2.0)]);
        let w = map(&[("a", 1.0)]);
        match weighted_median_split(&gaps, &w, SplitRule::AtOrAbove) {
            Err(Error::MissingWeight(r)) => assert_eq!(r.as_str(), "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn switcher_classification() {
        let h14 = map(&[("a", false), ("b", true), ("c", false), ("d", true)]);
        let h18 = map(&[("a", false), ("b", false), ("c", true), ("d", true)]);
        let g = classify_switchers(&h14, &h18).unwrap();
        assert_eq!(g[&UnitId::from("a")], SwitcherGroup::LowLow);
        assert_eq!(g[&UnitId::from("b")], SwitcherGroup::HighLow);
        assert_eq!(g[&UnitId::from("c")], SwitcherGroup::LowHigh);
        assert_eq!(g[&UnitId::from("d")], SwitcherGroup::HighHigh);

        let h18_short = map(&[("a", false), ("e", true)]);
        match classify_switchers(&map(&[("a", true), ("b", true)]), &h18_short) {
            Err(Error::RegionMismatch(d)) => assert_eq!(d, vec![UnitId::from("b"), UnitId::from("e")]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn correlation_examples() {
        let a = map(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0), ("e", 5.0)]);
        let c = correlations(&a, &a).unwrap();
        assert!((c.pearson - 1.0).abs() < 1e-15 && (c.spearman - 1.0).abs() < 1e-15);

        let rev = map(&[("a", 50.0), ("b", 40.0), ("c", 30.0), ("d", 20.0), ("e", 10.0)]);
        assert!((correlations(&a, &rev).unwrap().spearman + 1.0).abs() < 1e-15);

        // ranks (1,2),(2,1),(3,5),(4,3),(5,4): sum d^2 = 8, rho = 1 - 48/120
        let b = map(&[("a", 2.0), ("b", 1.0), ("c", 5.0), ("d", 3.0), ("e", 4.0)]);
        let c = correlations(&a, &b).unwrap();
        assert!((c.spearman - 0.6).abs() < 1e-12, "{}", c.spearman);

        let flat = map(&[("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 1.0), ("e", 1.0)]);
        assert!(matches!(correlations(&a, &flat), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn ties_get_mean_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn low_growth_examples() {
        let g = map(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)]);
        let f = low_growth_flag(&g).unwrap();
        assert_eq!(f.values().filter(|x| **x).count(), 1);
        assert!(f[&UnitId::from("a")]);

        let same = map(&[("a", 2.0), ("b", 2.0), ("c", 2.0), ("d", 2.0)]);
        assert!(low_growth_flag(&same).unwrap().values().all(|x| *x));

        let names = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let eight: RegionMap<f64> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (UnitId::from(*n), 10.0 * (i + 1) as f64))
            .collect();
        let f = low_growth_flag(&eight).unwrap();
        let flagged: Vec<&str> = f.iter().filter(|(_, v)| **v).map(|(k, _)| k.as_str()).collect();
        assert_eq!(flagged, ["a", "b"]);

        assert!(low_growth_flag(&map(&[("a", 1.0)])).is_err());
    }

    #[test]
    fn cohorts_follow_flags() {
        let d = CohortDates::default();
        assert_eq!(d.cohort(true, false), Some(PeriodId::q(2014, 3)));
        assert_eq!(d.cohort(true, true), Some(PeriodId::q(2014, 3)));
        assert_eq!(d.cohort(false, true), Some(PeriodId::q(2019, 1)));
        assert_eq!(d.cohort(false, false), None);
    }
}
