use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use super::{bootstrap_se, z95, Bootstrap, Grid, Timing};
use crate::bite::RegionMap;
use crate::error::{Error, Result};
use crate::panel::{PanelDataset, PeriodId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlRule {
    NeverTreated,
    NotYetTreated,
}

impl ControlRule {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlRule::NeverTreated => "never_treated",
            ControlRule::NotYetTreated => "not_yet_treated",
        }
    }
}

impl fmt::Display for ControlRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "never_treated" | "never" => Ok(ControlRule::NeverTreated),
            "not_yet_treated" | "notyet" => Ok(ControlRule::NotYetTreated),
            _ => Err(Error::Invalid(format!("unknown control rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsOptions {
    pub control_rule: ControlRule,
    /// Region-constant characteristics entering an outcome-regression
    /// adjustment of the control change.
    pub covariates: Vec<String>,
    /// Also estimate pre-treatment cells `t < g − 1`.
    pub placebo: bool,
    pub bootstrap: Option<Bootstrap>,
}

impl CsOptions {
    pub fn new(control_rule: ControlRule) -> Self {
        CsOptions {
            control_rule,
            covariates: Vec::new(),
            placebo: false,
            bootstrap: None,
        }
    }

    pub fn with_covariates(mut self, names: &[&str]) -> Self {
        self.covariates = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_placebo(mut self, placebo: bool) -> Self {
        self.placebo = placebo;
        self
    }

    pub fn with_bootstrap(mut self, bootstrap: Bootstrap) -> Self {
        self.bootstrap = Some(bootstrap);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTimeEntry {
    pub cohort: PeriodId,
    pub period: PeriodId,
    /// `t − g` in quarters.
    pub event_time: i64,
    pub att: f64,
    pub se: f64,
    /// Treated weight mass at the base period; drives aggregation.
    pub treated_weight: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTimeAtt {
    pub control_rule: ControlRule,
    pub entries: Vec<GroupTimeEntry>,
    pub warnings: Vec<String>,
    pub bootstrap: Option<Bootstrap>,
    /// `draws[b][j]` is entry `j` in bootstrap draw `b`.
    pub draws: Vec<Vec<f64>>,
}

struct Cell {
    base: usize,
    period: usize,
    treated: Vec<usize>,
    control: Vec<usize>,
}

struct Inputs<'a> {
    grid: &'a Grid,
    /// Region-constant covariates per unit (empty without adjustment).
    x: Vec<Vec<f64>>,
}

impl Inputs<'_> {
    fn change(&self, unit: usize, cell: &Cell, mult: &[f64]) -> (f64, f64) {
        let (yb, wb) = self.grid.get(unit, cell.base).expect("cell observed");
        let (yt, _) = self.grid.get(unit, cell.period).expect("cell observed");
        (yt - yb, wb * mult[unit])
    }

    fn att(&self, cell: &Cell, mult: &[f64]) -> f64 {
        let mut treated_mass = 0.0;
        let mut treated_sum = 0.0;
        for &i in &cell.treated {
            let (dy, w) = self.change(i, cell, mult);
            treated_mass += w;
            treated_sum += w * dy;
        }
        if treated_mass <= 0.0 {
            return f64::NAN;
        }
        let k = self.x.first().map_or(0, Vec::len) + 1;
        // weighted regression of the control change on [1, x]
        let mut xtx = DMatrix::<f64>::zeros(k, k);
        let mut xty = DVector::<f64>::zeros(k);
        let row = |i: usize| {
            let mut r = Vec::with_capacity(k);
            r.push(1.0);
            if k > 1 {
                r.extend_from_slice(&self.x[i]);
            }
            r
        };
        let mut control_mass = 0.0;
        for &i in &cell.control {
            let (dy, w) = self.change(i, cell, mult);
            if w == 0.0 {
                continue;
            }
            control_mass += w;
            let r = row(i);
            for a in 0..k {
                xty[a] += w * r[a] * dy;
                for b in 0..k {
                    xtx[(a, b)] += w * r[a] * r[b];
                }
            }
        }
        if control_mass <= 0.0 {
            return f64::NAN;
        }
        let beta = if k == 1 {
            DVector::from_element(1, xty[0] / xtx[(0, 0)])
        } else {
            match xtx.svd(true, true).solve(&xty, 1e-12 * control_mass) {
                Ok(b) => b,
                Err(_) => return f64::NAN,
            }
        };
        let mut predicted = 0.0;
        for &i in &cell.treated {
            let (_, w) = self.change(i, cell, mult);
            let r = row(i);
            predicted += w * r.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        (treated_sum - predicted) / treated_mass
    }
}

fn constant_covariates(data: &PanelDataset, names: &[String]) -> Result<Vec<Vec<f64>>> {
    if names.is_empty() {
        return Ok(Vec::new());
    }
    let idx: Vec<usize> = names
        .iter()
        .map(|n| data.covariate_index(n).ok_or_else(|| Error::UnknownCharacteristic(n.clone())))
        .collect::<Result<_>>()?;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; data.units().len()];
    let mut u = 0;
    for o in data.observations() {
        while data.units()[u] != o.unit {
            u += 1;
        }
        let vals: Vec<f64> = idx.iter().map(|&j| o.covariates[j]).collect();
        match &out[u] {
            None => out[u] = Some(vals),
            Some(first) => {
                if let Some(j) = (0..idx.len()).find(|&j| first[j] != vals[j]) {
                    return Err(Error::Invalid(format!(
                        "covariate `{}` varies over time within region `{}`; group-time ATTs accept region-constant covariates only",
                        names[j], o.unit
                    )));
                }
            }
        }
    }
    Ok(out.into_iter().map(|v| v.expect("unit has observations")).collect())
}

/// Group-time average treatment effects with base period `g − 1`.
///
/// Cohorts without a pre-period and cells without controls are skipped
/// with a warning.
pub fn cs_att(data: &PanelDataset, cohorts: &RegionMap<Option<PeriodId>>, options: &CsOptions) -> Result<GroupTimeAtt> {
    let timing = Timing::new(data, cohorts)?;
    let grid = Grid::new(data);
    let inputs = Inputs {
        grid: &grid,
        x: constant_covariates(data, &options.covariates)?,
    };
    let periods = data.periods();
    let n_units = data.units().len();
    let mut warnings = Vec::new();
    let mut cells = Vec::new();
    let mut meta = Vec::new();

    let starts = timing.cohort_starts();
    if starts.is_empty() {
        warnings.push("no treated cohort within the observed periods; nothing to estimate".to_string());
    }
    for &s in &starts {
        if s == 0 {
            warnings.push(format!("cohort {} has no pre-period and is skipped", periods[0]));
            continue;
        }
        let base = s - 1;
        let targets = (0..timing.n_periods).filter(|&t| t >= s || (options.placebo && t + 1 < s));
        for t in targets {
            let observed = |i: usize| grid.get(i, base).is_some() && grid.get(i, t).is_some();
            let treated: Vec<usize> = (0..n_units).filter(|&i| timing.start[i] == s && observed(i)).collect();
            let control: Vec<usize> = (0..n_units)
                .filter(|&i| {
                    let si = timing.start[i];
                    let admissible = match options.control_rule {
                        ControlRule::NeverTreated => timing.is_never(i),
                        ControlRule::NotYetTreated => si != s && si > t.max(base),
                    };
                    admissible && observed(i)
                })
                .collect();
            let label = (periods[s], periods[t]);
            if treated.is_empty() {
                warnings.push(format!("ATT({}, {}): no treated units observed in both periods", label.0, label.1));
                continue;
            }
            if control.is_empty() {
                warnings.push(format!("ATT({}, {}): empty control set, entry omitted", label.0, label.1));
                continue;
            }
            let cell = Cell {
                base,
                period: t,
                treated,
                control,
            };
            let ones = vec![1.0; n_units];
            let att = inputs.att(&cell, &ones);
            let treated_weight = cell.treated.iter().map(|&i| grid.get(i, base).expect("observed").1).sum();
            meta.push(GroupTimeEntry {
                cohort: label.0,
                period: label.1,
                event_time: label.0.quarters_until(label.1),
                att,
                se: f64::NAN,
                treated_weight,
                n_treated: cell.treated.len(),
                n_control: cell.control.len(),
            });
            cells.push(cell);
        }
    }

    let mut draws = Vec::new();
    if let Some(bs) = options.bootstrap {
        if !cells.is_empty() {
            let (unit_cluster, n_clusters) = data.cluster_of_units();
            draws = bs.replicate(&unit_cluster, n_clusters, |mult| cells.iter().map(|c| inputs.att(c, mult)).collect());
            for (j, e) in meta.iter_mut().enumerate() {
                e.se = bootstrap_se(&draws, |d| d[j]);
            }
        }
    }
    Ok(GroupTimeAtt {
        control_rule: options.control_rule,
        entries: meta,
        warnings,
        bootstrap: options.bootstrap,
        draws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationKind {
    Overall,
    ByCohort,
    ByEventTime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateValue {
    pub key: String,
    pub estimate: f64,
    pub se: f64,
    pub conf_low: f64,
    pub conf_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregation {
    pub kind: AggregationKind,
    pub values: Vec<AggregateValue>,
}

impl Aggregation {
    pub fn get(&self, key: &str) -> Option<&AggregateValue> {
        self.values.iter().find(|v| v.key == key)
    }
}

/// Treated-weight-weighted averages of group-time ATTs. `overall` and
/// `by_cohort` use post-treatment cells only; `by_event_time` keeps every
/// cell, placebo cells included.
pub fn cs_aggregate(atts: &GroupTimeAtt, kind: AggregationKind) -> Result<Aggregation> {
    if atts.entries.is_empty() {
        return Err(Error::Invalid("no group-time ATTs to aggregate".into()));
    }
    let mut groups: BTreeMap<(i64, PeriodId), Vec<usize>> = BTreeMap::new();
    for (j, e) in atts.entries.iter().enumerate() {
        let key = match kind {
            AggregationKind::Overall if e.event_time >= 0 => (0, PeriodId::q(0, 1)),
            AggregationKind::ByCohort if e.event_time >= 0 => (0, e.cohort),
            AggregationKind::ByEventTime => (e.event_time, PeriodId::q(0, 1)),
            _ => continue,
        };
        groups.entry(key).or_default().push(j);
    }
    let z = z95();
    let values = groups
        .into_iter()
        .map(|((e, g), members)| {
            let mass: f64 = members.iter().map(|&j| atts.entries[j].treated_weight).sum();
            let weights: Vec<(usize, f64)> = members.iter().map(|&j| (j, atts.entries[j].treated_weight / mass)).collect();
            let combine = |v: &dyn Fn(usize) -> f64| weights.iter().map(|&(j, a)| a * v(j)).sum::<f64>();
            let estimate = combine(&|j| atts.entries[j].att);
            let se = if atts.draws.is_empty() {
                f64::NAN
            } else {
                bootstrap_se(&atts.draws, |d| combine(&|j| d[j]))
            };
            let key = match kind {
                AggregationKind::Overall => "overall".to_string(),
                AggregationKind::ByCohort => g.to_string(),
                AggregationKind::ByEventTime => e.to_string(),
            };
            AggregateValue {
                key,
                estimate,
                se,
                conf_low: estimate - z * se,
                conf_high: estimate + z * se,
            }
        })
        .collect();
    Ok(Aggregation { kind, values })
}

impl GroupTimeAtt {
    pub fn overall(&self) -> Result<AggregateValue> {
        cs_aggregate(self, AggregationKind::Overall)?
            .values
            .pop()
            .ok_or_else(|| Error::Identification("no post-treatment group-time ATTs".into()))
    }

    pub fn to_json(&self) -> Value {
        let z = z95();
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|e| {
                json!({
                    "cohort": e.cohort,
                    "period": e.period,
                    "event_time": e.event_time,
                    "att": e.att,
                    "se": e.se,
                    "conf_low": e.att - z * e.se,
                    "conf_high": e.att + z * e.se,
                    "treated_weight": e.treated_weight,
                    "n_treated": e.n_treated,
                    "n_control": e.n_control,
                })
            })
            .collect();
        let aggs: serde_json::Map<String, Value> = [AggregationKind::Overall, AggregationKind::ByCohort, AggregationKind::ByEventTime]
            .into_iter()
            .filter_map(|k| {
                let a = cs_aggregate(self, k).ok()?;
                let name = serde_json::to_value(k).ok()?.as_str()?.to_string();
                Some((name, serde_json::to_value(a.values).ok()?))
            })
            .collect();
        json!({
            "estimator": "cs_att",
            "control_rule": self.control_rule,
            "seed": self.bootstrap.map(|b| b.seed),
            "bootstrap_draws": self.bootstrap.map_or(0, |b| b.draws),
            "entries": entries,
            "aggregations": aggs,
            "warnings": self.warnings,
        })
    }
}
