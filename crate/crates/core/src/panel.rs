//! Long-format panel data model and CSV ingestion.
//!
//! A [`PanelDataset`] holds one observation per (unit, period) cell. The
//! observation list is kept in canonical (unit, period) order so every
//! downstream estimate is independent of the row order of the source file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Opaque region identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitId(String);

impl UnitId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::EmptyUnit);
        }
        Ok(UnitId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UnitId {
    /// Panics on an empty string; use [`UnitId::new`] for untrusted input.
    fn from(s: &str) -> Self {
        UnitId::new(s).expect("unit id must be non-empty")
    }
}

/// Calendar quarter, ordered by (year, quarter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeriodId {
    year: i32,
    quarter: u8,
}

impl PeriodId {
    pub fn new(year: i32, quarter: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::InvalidQuarter(quarter as i64));
        }
        Ok(PeriodId { year, quarter })
    }

    /// Const constructor for literals known to be valid.
    pub const fn q(year: i32, quarter: u8) -> Self {
        assert!(quarter >= 1 && quarter <= 4);
        PeriodId { year, quarter }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn quarter(self) -> u8 {
        self.quarter
    }

    /// Absolute quarter count; consecutive quarters differ by one.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(4) as i32;
        let quarter = (ordinal.rem_euclid(4) + 1) as u8;
        PeriodId { year, quarter }
    }

    pub fn succ(self) -> Self {
        self.offset(1)
    }

    pub fn pred(self) -> Self {
        self.offset(-1)
    }

    pub fn offset(self, quarters: i64) -> Self {
        Self::from_ordinal(self.ordinal() + quarters)
    }

    /// Signed number of quarters from `self` to `later`.
    pub fn quarters_until(self, later: PeriodId) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for PeriodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl FromStr for PeriodId {
    type Err = Error;

    /// Accepts `2014Q2`, `2014q2` and `Q2/2014`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidPeriod(s.to_string());
        let (year, quarter) = if let Some(rest) = s.strip_prefix(['Q', 'q']) {
            let (q, y) = rest.split_once('/').ok_or_else(bad)?;
            (y, q)
        } else {
            let idx = s.find(['Q', 'q']).ok_or_else(bad)?;
            (&s[..idx], &s[idx + 1..])
        };
        let year: i32 = year.trim().parse().map_err(|_| bad())?;
        let quarter: u8 = quarter.trim().parse().map_err(|_| bad())?;
        PeriodId::new(year, quarter)
    }
}

impl Serialize for PeriodId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PeriodId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Whether outcomes are raw counts or already log-transformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeScale {
    /// Strictly positive levels.
    Level,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub unit: UnitId,
    pub period: PeriodId,
    pub outcome: f64,
    pub weight: f64,
    pub covariates: Vec<f64>,
}

/// Column-name mapping for [`ingest_panel`].
#[derive(Debug, Clone)]
pub struct PanelSchema {
    pub unit: String,
    pub year: String,
    pub quarter: String,
    pub outcome: String,
    pub weight: String,
    /// Optional cluster column; when absent every unit is its own cluster.
    pub cluster: Option<String>,
    /// Covariate columns. `None` takes every remaining column.
    pub covariates: Option<Vec<String>>,
    pub scale: OutcomeScale,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            unit: "unit".into(),
            year: "year".into(),
            quarter: "quarter".into(),
            outcome: "outcome".into(),
            weight: "weight".into(),
            cluster: None,
            covariates: None,
            scale: OutcomeScale::Level,
        }
    }
}

impl PanelSchema {
    /// Default names, with a `cluster` column picked up if present.
    pub fn detect_cluster(mut self, header: &[&str]) -> Self {
        if self.cluster.is_none() && header.contains(&"cluster") {
            self.cluster = Some("cluster".into());
        }
        self
    }
}

/// Immutable, validated long-format panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    observations: Vec<Observation>,
    units: Vec<UnitId>,
    periods: Vec<PeriodId>,
    covariate_names: Vec<String>,
    clusters: BTreeMap<UnitId, String>,
    scale: OutcomeScale,
}

impl PanelDataset {
    /// Validates and canonicalises a set of observations.
    ///
    /// With `clusters = None` each unit forms its own cluster.
    pub fn new(
        mut observations: Vec<Observation>,
        covariate_names: Vec<String>,
        clusters: Option<BTreeMap<UnitId, String>>,
        scale: OutcomeScale,
    ) -> Result<Self> {
        let arity = covariate_names.len();
        let names: BTreeSet<&String> = covariate_names.iter().collect();
        if names.len() != arity {
            return Err(Error::Invalid("duplicate covariate names".into()));
        }
        for (row, obs) in observations.iter().enumerate() {
            if obs.covariates.len() != arity {
                return Err(Error::CovariateArity {
                    expected: arity,
                    got: obs.covariates.len(),
                });
            }
            check_value(row + 1, "weight", obs.weight, true)?;
            check_value(row + 1, "outcome", obs.outcome, scale == OutcomeScale::Level)?;
            for (name, v) in covariate_names.iter().zip(&obs.covariates) {
                check_value(row + 1, name, *v, false)?;
            }
        }
        observations.sort_by(|a, b| (&a.unit, a.period).cmp(&(&b.unit, b.period)));
        for pair in observations.windows(2) {
            if pair[0].unit == pair[1].unit && pair[0].period == pair[1].period {
                return Err(Error::DuplicateKey {
                    unit: pair[0].unit.clone(),
                    period: pair[0].period,
                });
            }
        }
        let units: Vec<UnitId> = observations
            .iter()
            .map(|o| &o.unit)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .cloned()
            .collect();
        let periods: Vec<PeriodId> = observations
            .iter()
            .map(|o| o.period)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let clusters = match clusters {
            Some(map) => {
                let mut out = BTreeMap::new();
                for u in &units {
                    let key = map.get(u).ok_or_else(|| Error::MissingCluster(u.clone()))?;
                    out.insert(u.clone(), key.clone());
                }
                out
            }
            None => units.iter().map(|u| (u.clone(), u.0.clone())).collect(),
        };
        Ok(PanelDataset {
            observations,
            units,
            periods,
            covariate_names,
            clusters,
            scale,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn units(&self) -> &[UnitId] {
        &self.units
    }

    pub fn periods(&self) -> &[PeriodId] {
        &self.periods
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn clusters(&self) -> &BTreeMap<UnitId, String> {
        &self.clusters
    }

    pub fn scale(&self) -> OutcomeScale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn unit_index(&self, unit: &UnitId) -> Option<usize> {
        self.units.binary_search(unit).ok()
    }

    pub fn period_index(&self, period: PeriodId) -> Option<usize> {
        self.periods.binary_search(&period).ok()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    /// Cluster index per unit (dense, in sorted cluster-key order).
    pub fn cluster_of_units(&self) -> (Vec<usize>, usize) {
        let keys: BTreeSet<&String> = self.clusters.values().collect();
        let lookup: HashMap<&String, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let per_unit = self.units.iter().map(|u| lookup[&self.clusters[u]]).collect();
        (per_unit, keys.len())
    }

    /// Replaces observations, keeping names, clusters and scale.
    pub fn with_observations(&self, observations: Vec<Observation>) -> Result<Self> {
        let present: BTreeSet<&UnitId> = observations.iter().map(|o| &o.unit).collect();
        let clusters = self
            .clusters
            .iter()
            .filter(|(u, _)| present.contains(u))
            .map(|(u, c)| (u.clone(), c.clone()))
            .collect();
        PanelDataset::new(observations, self.covariate_names.clone(), Some(clusters), self.scale)
    }

    /// Same panel with every weight set to one.
    pub fn with_uniform_weights(&self) -> Self {
        let mut out = self.clone();
        for o in &mut out.observations {
            o.weight = 1.0;
        }
        out
    }

    /// Same panel with all covariate columns removed.
    pub fn without_covariates(&self) -> Self {
        let mut out = self.clone();
        out.covariate_names.clear();
        for o in &mut out.observations {
            o.covariates.clear();
        }
        out
    }

    /// Restricts the panel to the given units.
    pub fn filter_units(&self, keep: impl Fn(&UnitId) -> bool) -> Result<Self> {
        let obs = self.observations.iter().filter(|o| keep(&o.unit)).cloned().collect();
        self.with_observations(obs)
    }

    /// `true` when every weight equals the first one.
    pub fn has_uniform_weights(&self) -> bool {
        match self.observations.first() {
            Some(first) => self.observations.iter().all(|o| o.weight == first.weight),
            None => true,
        }
    }
}

fn check_value(row: usize, column: &str, value: f64, positive: bool) -> Result<()> {
    if !value.is_finite() || (positive && value <= 0.0) {
        return Err(Error::NonPositive {
            row,
            column: column.to_string(),
            value,
        });
    }
    Ok(())
}

/// Reads a comma-delimited panel with a header row.
pub fn ingest_panel<R: Read>(source: R, schema: &PanelSchema) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let unit_col = find(&schema.unit)?;
    let year_col = find(&schema.year)?;
    let quarter_col = find(&schema.quarter)?;
    let outcome_col = find(&schema.outcome)?;
    let weight_col = find(&schema.weight)?;
    let cluster_col = schema.cluster.as_deref().map(find).transpose()?;

    let reserved = [
        Some(unit_col),
        Some(year_col),
        Some(quarter_col),
        Some(outcome_col),
        Some(weight_col),
        cluster_col,
    ];
    // covariates always come out in header order
    let covariate_cols: Vec<usize> = match &schema.covariates {
        Some(names) => {
            let mut cols = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
            cols.sort_unstable();
            cols.dedup();
            cols
        }
        None => (0..header.len()).filter(|i| !reserved.contains(&Some(*i))).collect(),
    };
    let covariate_names: Vec<String> = covariate_cols.iter().map(|&i| header[i].clone()).collect();

    let mut observations = Vec::new();
    let mut clusters = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |col: usize| -> Result<&str> {
            let v = record.get(col).unwrap_or("").trim();
            if v.is_empty() {
                return Err(Error::MissingValue {
                    row,
                    column: header[col].clone(),
                });
            }
            Ok(v)
        };
        let parse_f64 = |col: usize| -> Result<f64> {
            let v = field(col)?;
            v.parse::<f64>().map_err(|_| Error::Parse {
                row,
                column: header[col].clone(),
                value: v.to_string(),
            })
        };
        let unit = UnitId::new(field(unit_col)?)?;
        let year_raw = field(year_col)?;
        let year: i32 = year_raw.parse().map_err(|_| Error::Parse {
            row,
            column: header[year_col].clone(),
            value: year_raw.to_string(),
        })?;
        let quarter_raw = field(quarter_col)?;
        let quarter: i64 = quarter_raw.parse().map_err(|_| Error::Parse {
            row,
            column: header[quarter_col].clone(),
            value: quarter_raw.to_string(),
        })?;
        if !(1..=4).contains(&quarter) {
            return Err(Error::InvalidQuarter(quarter));
        }
        let period = PeriodId::new(year, quarter as u8)?;
        let outcome = parse_f64(outcome_col)?;
        let weight = parse_f64(weight_col)?;
        check_value(row, &header[weight_col], weight, true)?;
        check_value(row, &header[outcome_col], outcome, schema.scale == OutcomeScale::Level)?;
        let covariates = covariate_cols
            .iter()
            .map(|&c| parse_f64(c))
            .collect::<Result<Vec<_>>>()?;
        if let Some(c) = cluster_col {
            let key = field(c)?.to_string();
            match clusters.get(&unit) {
                Some(existing) if existing != &key => {
                    return Err(Error::Invalid(format!(
                        "unit `{unit}` assigned to clusters `{existing}` and `{key}`"
                    )))
                }
                _ => {
                    clusters.insert(unit.clone(), key);
                }
            }
        }
        observations.push(Observation {
            unit,
            period,
            outcome,
            weight,
            covariates,
        });
    }
    PanelDataset::new(
        observations,
        covariate_names,
        cluster_col.map(|_| clusters),
        schema.scale,
    )
}

/// Writes the panel in canonical order with the schema's column names.
///
/// Floats use the shortest representation that parses back to the same
/// value, so ingest/write cycles are byte-stable.
pub fn write_panel_csv<W: Write>(data: &PanelDataset, sink: W, schema: &PanelSchema) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec![
        schema.unit.clone(),
        schema.year.clone(),
        schema.quarter.clone(),
        schema.outcome.clone(),
        schema.weight.clone(),
    ];
    if let Some(c) = &schema.cluster {
        header.push(c.clone());
    }
    header.extend(data.covariate_names.iter().cloned());
    writer.write_record(&header)?;
    for o in &data.observations {
        let mut rec = vec![
            o.unit.to_string(),
            o.period.year.to_string(),
            o.period.quarter.to_string(),
            o.outcome.to_string(),
            o.weight.to_string(),
        ];
        if schema.cluster.is_some() {
            rec.push(data.clusters[&o.unit].clone());
        }
        rec.extend(o.covariates.iter().map(f64::to_string));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Natural log of every outcome.
pub fn log_outcome(data: &PanelDataset) -> Result<PanelDataset> {
    if data.scale == OutcomeScale::Log {
        return Err(Error::AlreadyLogged);
    }
    let mut out = data.clone();
    for o in &mut out.observations {
        o.outcome = o.outcome.ln();
    }
    out.scale = OutcomeScale::Log;
    Ok(out)
}

/// Inverse of [`log_outcome`].
pub fn exp_outcome(data: &PanelDataset) -> PanelDataset {
    let mut out = data.clone();
    for o in &mut out.observations {
        o.outcome = o.outcome.exp();
    }
    out.scale = OutcomeScale::Level;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub n_units: usize,
    pub n_periods: usize,
    pub n_observations: usize,
    /// Every (unit, period) cell absent from the panel.
    pub missing: Vec<(UnitId, PeriodId)>,
}

impl BalanceReport {
    pub fn is_balanced(&self) -> bool {
        self.missing.is_empty()
    }
}

/// Reports cells missing relative to the full unit × period grid.
pub fn balance_report(data: &PanelDataset) -> BalanceReport {
    let mut present = vec![vec![false; data.periods.len()]; data.units.len()];
    let mut ui = 0;
    for o in &data.observations {
        while data.units[ui] != o.unit {
            ui += 1;
        }
        let pi = data.period_index(o.period).expect("period indexed");
        present[ui][pi] = true;
    }
    let mut missing = Vec::new();
    for (u, row) in data.units.iter().zip(&present) {
        for (p, seen) in data.periods.iter().zip(row) {
            if !seen {
                missing.push((u.clone(), *p));
            }
        }
    }
    BalanceReport {
        n_units: data.units.len(),
        n_periods: data.periods.len(),
        n_observations: data.observations.len(),
        missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "unit,year,quarter,outcome,weight\n\
                           a,2014,1,100,10\n\
                           a,2014,2,110,10\n\
                           b,2014,1,200,20\n\
                           b,2014,2,190,20\n";

    fn ingest(text: &str) -> Result<PanelDataset> {
        ingest_panel(text.as_bytes(), &PanelSchema::default())
    }

    #[test]
    fn minimal_well_formed_input() {
        let data = ingest(MINIMAL).unwrap();
        assert_eq!(data.len(), 4);
        assert_eq!(data.units().len(), 2);
        assert_eq!(data.periods().len(), 2);
        assert!(data.covariate_names().is_empty());
    }

    #[test]
    fn repeated_row_names_the_pair() {
        let text = format!("{MINIMAL}b,2014,2,190,20\n");
        let err = ingest(&text).unwrap_err();
        match &err {
            Error::DuplicateKey { unit, period } => {
                assert_eq!(unit.as_str(), "b");
                assert_eq!(*period, PeriodId::q(2014, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("`b`") && err.to_string().contains("2014Q2"));
    }

    #[test]
    fn zero_outcome_is_rejected_with_row() {
        let text = MINIMAL.replace("a,2014,2,110,10", "a,2014,2,0,10");
        match ingest(&text).unwrap_err() {
            Error::NonPositive { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "outcome");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_weight_is_rejected() {
        let text = MINIMAL.replace("b,2014,1,200,20", "b,2014,1,200,-1");
        assert!(matches!(ingest(&text), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn unparseable_numeric_names_column() {
        let text = MINIMAL.replace("a,2014,1,100,10", "a,2014,1,abc,10");
        match ingest(&text).unwrap_err() {
            Error::Parse { column, value, .. } => {
                assert_eq!(column, "outcome");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_covariate_cell_rejected() {
        let text = "unit,year,quarter,outcome,weight,east\na,2014,1,1,1,1\na,2014,2,1,1,\n";
        assert!(matches!(ingest(text), Err(Error::MissingValue { .. })));
    }

    #[test]
    fn bad_quarter_rejected() {
        let text = MINIMAL.replace("a,2014,1,100,10", "a,2014,5,100,10");
        assert!(matches!(ingest(&text), Err(Error::InvalidQuarter(5))));
    }

    #[test]
    fn covariates_follow_header_order_and_remap() {
        let text = "region,yr,q,emp,w,gdp,east\nr1,2013,1,5,1,2.5,1\n";
        let schema = PanelSchema {
            unit: "region".into(),
            year: "yr".into(),
            quarter: "q".into(),
            outcome: "emp".into(),
            weight: "w".into(),
            covariates: Some(vec!["east".into(), "gdp".into()]),
            ..PanelSchema::default()
        };
        let data = ingest_panel(text.as_bytes(), &schema).unwrap();
        assert_eq!(data.covariate_names(), ["gdp", "east"]);
        assert_eq!(data.observations()[0].covariates, vec![2.5, 1.0]);
    }

    #[test]
    fn cluster_column_is_used() {
        let text = "unit,year,quarter,outcome,weight,cluster\na,2014,1,1,1,s\nb,2014,1,1,1,s\n";
        let schema = PanelSchema::default().detect_cluster(&["cluster"]);
        let data = ingest_panel(text.as_bytes(), &schema).unwrap();
        assert_eq!(data.cluster_of_units(), (vec![0, 0], 1));
    }

    #[test]
    fn log_identities() {
        let text = format!(
            "unit,year,quarter,outcome,weight\na,2014,1,1,1\na,2014,2,{},1\nb,2014,1,100,1\nb,2014,2,200,1\n",
            std::f64::consts::E
        );
        let data = log_outcome(&ingest(&text).unwrap()).unwrap();
        let y: Vec<f64> = data.observations().iter().map(|o| o.outcome).collect();
        assert_eq!(y[0], 0.0);
        assert!((y[1] - 1.0).abs() < 1e-15);
        // ln 100, ln 200 evaluated independently
        assert!((y[2] - 4.605170185988092).abs() < 1e-12);
        assert!((y[3] - 5.298317366548036).abs() < 1e-12);
        assert!(matches!(log_outcome(&data), Err(Error::AlreadyLogged)));
    }

    #[test]
    fn balance_reports() {
        let data = ingest(MINIMAL).unwrap();
        assert!(balance_report(&data).is_balanced());

        let text = "unit,year,quarter,outcome,weight\n\
                    a,2014,1,1,1\na,2014,2,1,1\na,2014,3,1,1\n\
                    b,2014,1,1,1\nb,2014,3,1,1\n";
        let report = balance_report(&ingest(text).unwrap());
        assert_eq!(report.missing, vec![(UnitId::from("b"), PeriodId::q(2014, 2))]);
        assert_eq!((report.n_units, report.n_periods), (2, 3));
    }

    #[test]
    fn full_size_balanced_fixture() {
        let mut obs = Vec::new();
        let start = PeriodId::q(2013, 1);
        for u in 0..257 {
            for t in 0..37 {
                obs.push(Observation {
                    unit: UnitId::new(format!("r{u:03}")).unwrap(),
                    period: start.offset(t),
                    outcome: 1.0 + t as f64,
                    weight: 1.0,
                    covariates: vec![],
                });
            }
        }
        let data = PanelDataset::new(obs, vec![], None, OutcomeScale::Level).unwrap();
        assert_eq!(*data.periods().last().unwrap(), PeriodId::q(2022, 1));
        let report = balance_report(&data);
        assert!(report.is_balanced());
        assert_eq!((report.n_units, report.n_periods), (257, 37));
    }

    #[test]
    fn period_parsing_and_arithmetic() {
        assert_eq!("Q2/2014".parse::<PeriodId>().unwrap(), PeriodId::q(2014, 2));
        assert_eq!("2014q2".parse::<PeriodId>().unwrap(), PeriodId::q(2014, 2));
        assert!("2014Q5".parse::<PeriodId>().is_err());
        assert_eq!(PeriodId::q(2014, 4).succ(), PeriodId::q(2015, 1));
        assert_eq!(PeriodId::q(2015, 1).pred(), PeriodId::q(2014, 4));
        assert_eq!(PeriodId::q(2014, 3).quarters_until(PeriodId::q(2019, 1)), 18);
        assert!(PeriodId::q(2013, 4) < PeriodId::q(2014, 1));
    }
}
