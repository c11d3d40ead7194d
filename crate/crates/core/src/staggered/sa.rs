use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use super::Timing;
use crate::bite::RegionMap;
use crate::did_spec::{expand_covariates, CovariateTerm};
use crate::engine::{t_inference, wls_fit, DesignMatrix, RegressionFit};
use crate::error::{Error, Result};
use crate::panel::{PanelDataset, PeriodId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SaControl {
    NeverTreated,
    LastTreated,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaOptions {
    pub covariates: Vec<CovariateTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaCell {
    pub cohort: PeriodId,
    pub event_time: i64,
    /// NaN when the interaction was dropped as collinear.
    pub coefficient: f64,
    pub treated_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventTimeEstimate {
    pub event_time: i64,
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
    pub conf_low: f64,
    pub conf_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaResult {
    pub control: SaControl,
    pub cells: Vec<SaCell>,
    /// Relative period −1 is the reference and is not listed.
    pub by_event_time: Vec<EventTimeEstimate>,
    /// Post-period cells averaged with treated-weight shares.
    pub overall: EventTimeEstimate,
    pub fit: RegressionFit,
    pub warnings: Vec<String>,
}

impl SaResult {
    pub fn at(&self, event_time: i64) -> Option<&EventTimeEstimate> {
        self.by_event_time.iter().find(|e| e.event_time == event_time)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "estimator": "sa_event_study",
            "control": self.control,
            "overall": self.overall,
            "by_event_time": self.by_event_time,
            "cells": self.cells,
            "n_obs": self.fit.n_obs,
            "n_clusters": self.fit.n_clusters,
            "dropped": self.fit.dropped_collinear,
            "warnings": self.warnings,
        })
    }
}

fn cell_name(cohort: PeriodId, e: i64) -> String {
    format!("sa_{cohort}_e{e}")
}

/// Interaction-weighted event study: one indicator per treated cohort and
/// relative period (−1 omitted), fitted jointly with unit and period
/// effects, then averaged across cohorts with treated-weight shares.
///
/// Controls are the never-treated units; without any, the last-treated
/// cohort serves as control and periods from its start onward are dropped.
/// Always-treated units are dropped.
pub fn sa_event_study(data: &PanelDataset, cohorts: &RegionMap<Option<PeriodId>>, options: &SaOptions) -> Result<SaResult> {
    let timing = Timing::new(data, cohorts)?;
    let mut warnings = Vec::new();
    let always: Vec<usize> = (0..timing.start.len()).filter(|&i| timing.start[i] == 0).collect();
    if !always.is_empty() {
        warnings.push(format!("{} always-treated units dropped", always.len()));
    }
    let starts: Vec<usize> = timing.cohort_starts().into_iter().filter(|&s| s > 0).collect();
    let has_never = (0..timing.start.len()).any(|i| timing.is_never(i));

    let (control, cutoff) = if has_never {
        (SaControl::NeverTreated, timing.n_periods)
    } else {
        match starts.last() {
            Some(&last) if starts.len() >= 2 => {
                warnings.push(format!(
                    "no never-treated units; cohort {} serves as control and periods from {} on are dropped",
                    data.periods()[last],
                    data.periods()[last]
                ));
                (SaControl::LastTreated, last)
            }
            _ => return Err(Error::Identification("no never-treated units and no later cohort to serve as control".into())),
        }
    };
    if starts.iter().all(|&s| s >= cutoff) {
        return Err(Error::Identification("no treated cohort besides the control group".into()));
    }

    let periods = data.periods().to_vec();
    let keep_obs: Vec<_> = data
        .observations()
        .iter()
        .filter(|o| {
            let u = data.unit_index(&o.unit).expect("unit indexed");
            timing.start[u] > 0 && periods.binary_search(&o.period).expect("period indexed") < cutoff
        })
        .cloned()
        .collect();
    let sub = data.with_observations(keep_obs)?;

    // cohort label and relative period per retained row
    let mut dm = DesignMatrix::from_panel(&sub);
    let mut cells: BTreeMap<(PeriodId, i64), (Vec<usize>, f64)> = BTreeMap::new();
    for (row, o) in sub.observations().iter().enumerate() {
        let s = timing.start[data.unit_index(&o.unit).expect("unit indexed")];
        if s >= cutoff {
            continue;
        }
        let g = periods[s];
        let e = g.quarters_until(o.period);
        if e == -1 {
            continue;
        }
        let cell = cells.entry((g, e)).or_default();
        cell.0.push(row);
        cell.1 += o.weight;
    }
    for ((g, e), (rows, _)) in &cells {
        let mut col = vec![0.0; sub.len()];
        for &r in rows {
            col[r] = 1.0;
        }
        dm.push_column(cell_name(*g, *e), col)?;
    }
    for (name, col) in expand_covariates(&sub, &options.covariates)? {
        dm.push_column(name, col)?;
    }
    let fit = wls_fit(&dm)?;

    let cell_list: Vec<SaCell> = cells
        .iter()
        .map(|((g, e), (_, mass))| SaCell {
            cohort: *g,
            event_time: *e,
            coefficient: fit.coef(&cell_name(*g, *e)).unwrap_or(f64::NAN),
            treated_weight: *mass,
        })
        .collect();
    let dropped: Vec<&SaCell> = cell_list.iter().filter(|c| c.coefficient.is_nan()).collect();
    if !dropped.is_empty() {
        warnings.push(format!("{} cohort × relative-period cells dropped as collinear", dropped.len()));
    }

    let combine = |event_time: i64, selected: Vec<&SaCell>| -> EventTimeEstimate {
        let mass: f64 = selected.iter().map(|c| c.treated_weight).sum();
        let weights: Vec<(String, f64)> = selected
            .iter()
            .map(|c| (cell_name(c.cohort, c.event_time), c.treated_weight / mass))
            .collect();
        let (estimate, se) = fit.linear_combination(&weights);
        let row = t_inference("", estimate, se, fit.df(), 0.95);
        EventTimeEstimate {
            event_time,
            estimate,
            se,
            p: row.p,
            conf_low: row.conf_low,
            conf_high: row.conf_high,
        }
    };
    let mut by_e: BTreeMap<i64, Vec<&SaCell>> = BTreeMap::new();
    for c in cell_list.iter().filter(|c| !c.coefficient.is_nan()) {
        by_e.entry(c.event_time).or_default().push(c);
    }
    let post: Vec<&SaCell> = cell_list.iter().filter(|c| !c.coefficient.is_nan() && c.event_time >= 0).collect();
    if post.is_empty() {
        return Err(Error::Identification("no post-treatment cohort cells survived estimation".into()));
    }
    let overall = combine(0, post);
    let by_event_time = by_e.into_iter().map(|(e, cs)| combine(e, cs)).collect();
    Ok(SaResult {
        control,
        cells: cell_list,
        by_event_time,
        overall,
        fit,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{first, noise, panel};
    use super::*;
    use crate::bite::{RegionTreatment, TreatmentDesign};
    use crate::did_spec::{build_event_study, event_column_name, DidSpec, SpecKind};

    #[test]
    fn canonical_two_by_two() {
        let starts = [Some(1), None, Some(1), None];
        let (data, map) = panel(&starts, 2, |i, t, _| [[1.0, 1.2], [2.0, 2.1], [1.5, 1.7], [0.0, 0.1]][i][t]);
        let r = sa_event_study(&data, &map, &SaOptions::default()).unwrap();
        assert!((r.at(0).unwrap().estimate - 0.1).abs() < 1e-10);
        assert_eq!(r.control, SaControl::NeverTreated);
    }

    #[test]
    fn single_cohort_matches_event_study() {
        let starts: Vec<_> = (0..10).map(|i| (i % 2 == 0).then_some(4)).collect();
        let (data, map) = panel(&starts, 9, |i, t, d| noise(i, t) + if d { 0.2 } else { 0.0 });
        let r = sa_event_study(&data, &map, &SaOptions::default()).unwrap();

        let mut design = TreatmentDesign::default();
        for (u, g) in &map {
            design.regions.insert(
                u.clone(),
                RegionTreatment {
                    gap_2014: 0.0,
                    gap_2018: 0.0,
                    high_2014: g.is_some(),
                    high_2018: false,
                    cohort: *g,
                    population_weight: 1.0,
                    low_growth: None,
                },
            );
        }
        let mut spec = DidSpec::new(SpecKind::EventStudy);
        spec.baseline_period = first().offset(3);
        let es = wls_fit(&build_event_study(&data, &design, &spec).unwrap()).unwrap();
        for t in (0..9).filter(|&t| t != 3) {
            let p = first().offset(t);
            let name = event_column_name(p);
            let e = r.at(t - 4).unwrap();
            assert!((e.estimate - es.coef(&name).unwrap()).abs() < 1e-8);
            assert!((e.se - es.se(&name).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn homogeneous_static_effect() {
        let starts: Vec<_> = (0..12).map(|i| [Some(3), Some(5), None][i % 3]).collect();
        let (data, map) = panel(&starts, 8, |i, t, d| i as f64 * 0.1 + 0.03 * t as f64 + if d { -0.05 } else { 0.0 });
        let r = sa_event_study(&data, &map, &SaOptions::default()).unwrap();
        for e in &r.by_event_time {
            let truth = if e.event_time >= 0 { -0.05 } else { 0.0 };
            assert!((e.estimate - truth).abs() < 1e-10, "{e:?}");
        }
        assert!((r.overall.estimate + 0.05).abs() < 1e-10);
    }

    #[test]
    fn cohort_share_weighting() {
        // shares 0.25 / 0.75 at e = 0 with effects 4 and 0
        let starts = [Some(2), Some(3), Some(3), Some(3), None, None, None, None];
        let (data, map) = panel(&starts, 5, |i, t, d| {
            noise(i, 0) + 0.1 * t as f64 + if d && i == 0 && t == 2 { 4.0 } else { 0.0 }
        });
        let r = sa_event_study(&data.with_uniform_weights(), &map, &SaOptions::default()).unwrap();
        assert!((r.at(0).unwrap().estimate - 1.0).abs() < 1e-10);
    }

    #[test]
    fn last_treated_fallback() {
        let starts: Vec<_> = (0..8).map(|i| Some(if i % 2 == 0 { 2 } else { 5 })).collect();
        let (data, map) = panel(&starts, 7, |i, t, d| noise(i, t) * 0.0 + i as f64 + if d { 0.3 } else { 0.0 });
        let r = sa_event_study(&data, &map, &SaOptions::default()).unwrap();
        assert_eq!(r.control, SaControl::LastTreated);
        assert!(r.cells.iter().all(|c| c.cohort == first().offset(2)));
        assert_eq!(r.by_event_time.last().unwrap().event_time, 2);
        assert!((r.overall.estimate - 0.3).abs() < 1e-10);
    }

    #[test]
    fn no_control_is_error() {
        let starts: Vec<_> = (0..4).map(|_| Some(2)).collect();
        let (data, map) = panel(&starts, 5, |i, t, _| noise(i, t));
        assert!(matches!(sa_event_study(&data, &map, &SaOptions::default()), Err(Error::Identification(_))));
    }

    #[test]
    fn always_treated_dropped() {
        let starts: Vec<_> = (0..9).map(|i| [Some(0), Some(3), None][i % 3]).collect();
        let (data, map) = panel(&starts, 6, |i, t, d| noise(i, t) + if d { 1.0 } else { 0.0 });
        let r = sa_event_study(&data, &map, &SaOptions::default()).unwrap();
        assert!(r.warnings[0].contains("always-treated"));
        assert_eq!(r.fit.n_obs, 6 * 6);
    }
}
