//! Goodman-Bacon decomposition of the unweighted, covariate-free staggered
//! TWFE coefficient into 2×2 comparisons between timing groups.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::bite::RegionMap;
use crate::error::{Error, Result};
use crate::panel::{balance_report, PanelDataset, PeriodId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    TreatedVsNever,
    EarlyVsLate,
    LateVsEarly,
}

impl Comparison {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparison::TreatedVsNever => "treated_vs_never",
            Comparison::EarlyVsLate => "early_vs_late",
            Comparison::LateVsEarly => "late_vs_early",
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaconComponent {
    pub comparison: Comparison,
    /// Cohort acting as the treated group, then the control cohort (`None`
    /// for never-treated).
    pub cohort_pair: (PeriodId, Option<PeriodId>),
    pub estimate: f64,
    pub weight: f64,
}

/// Units sharing a first-treated index; `start == n_periods` is never-treated.
struct TimingGroup {
    start: usize,
    units: Vec<usize>,
    share: f64,
    d_bar: f64,
}

/// Decomposes the TWFE coefficient on `1[t ≥ cohort]`. Observation weights
/// are ignored.
pub fn bacon_decompose(data: &PanelDataset, cohorts: &RegionMap<Option<PeriodId>>) -> Result<Vec<BaconComponent>> {
    if !data.covariate_names().is_empty() {
        return Err(Error::CovariatesPresent(data.covariate_names().to_vec()));
    }
    let balance = balance_report(data);
    if !balance.is_balanced() {
        return Err(Error::Unbalanced(balance.missing.len()));
    }
    let periods = data.periods();
    let (n_units, n_periods) = (data.units().len(), periods.len());

    // y[i][t], balanced and sorted by (unit, period)
    let y: Vec<&[_]> = data.observations().chunks(n_periods).collect();
    let mut by_start: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, unit) in data.units().iter().enumerate() {
        let cohort = cohorts.get(unit).ok_or_else(|| Error::MissingTreatment(unit.clone()))?;
        let start = match cohort {
            Some(g) => periods.partition_point(|p| p < g),
            None => n_periods,
        };
        by_start.entry(start).or_default().push(i);
    }
    let groups: Vec<TimingGroup> = by_start
        .into_iter()
        .map(|(start, units)| TimingGroup {
            start,
            share: units.len() as f64 / n_units as f64,
            d_bar: (n_periods - start) as f64 / n_periods as f64,
            units,
        })
        .collect();

    let v_d = treatment_variance(&groups, n_units, n_periods);
    if v_d <= 0.0 {
        return Err(Error::Identification("treatment has no variation after removing unit and period effects".into()));
    }

    let mean = |g: &TimingGroup, lo: usize, hi: usize| -> f64 {
        let mut s = 0.0;
        for &i in &g.units {
            s += y[i][lo..hi].iter().map(|o| o.outcome).sum::<f64>();
        }
        s / (g.units.len() * (hi - lo)) as f64
    };
    // 2×2 DiD on periods [lo, hi) with the treated group switching on at `switch`
    let did = |treated: &TimingGroup, control: &TimingGroup, lo: usize, switch: usize, hi: usize| {
        (mean(treated, switch, hi) - mean(treated, lo, switch)) - (mean(control, switch, hi) - mean(control, lo, switch))
    };
    let label = |g: &TimingGroup| (g.start < n_periods).then(|| periods[g.start]);

    let mut out = Vec::new();
    // groups are ordered by start: earlier starts have larger d_bar
    for (a, k) in groups.iter().enumerate() {
        for l in &groups[a + 1..] {
            let n_kl = k.share / (k.share + l.share);
            let base = n_kl * (1.0 - n_kl);
            let (dk, dl) = (k.d_bar, l.d_bar);

            let s_k = if dl == 0.0 {
                (k.share + l.share).powi(2) * base * dk * (1.0 - dk) / v_d
            } else {
                ((k.share + l.share) * (1.0 - dl)).powi(2) * base * (dk - dl) / (1.0 - dl) * (1.0 - dk) / (1.0 - dl) / v_d
            };
            if s_k > 0.0 {
                let comparison = if l.start == n_periods {
                    Comparison::TreatedVsNever
                } else {
                    Comparison::EarlyVsLate
                };
                out.push(BaconComponent {
                    comparison,
                    cohort_pair: (periods[k.start], label(l)),
                    estimate: did(k, l, 0, k.start, l.start),
                    weight: s_k,
                });
            }

            let s_l = ((k.share + l.share) * dk).powi(2) * base * (dl / dk) * (dk - dl) / dk / v_d;
            if s_l > 0.0 {
                out.push(BaconComponent {
                    comparison: Comparison::LateVsEarly,
                    cohort_pair: (periods[l.start], Some(periods[k.start])),
                    estimate: did(l, k, k.start, l.start, n_periods),
                    weight: s_l,
                });
            }
        }
    }
    Ok(out)
}

/// Mean squared two-way-demeaned treatment; D depends on the unit only
/// through its group.
fn treatment_variance(groups: &[TimingGroup], n_units: usize, n_periods: usize) -> f64 {
    let d_bar: f64 = groups.iter().map(|g| g.share * g.d_bar).sum();
    let period_mean: Vec<f64> = (0..n_periods)
        .map(|t| groups.iter().filter(|g| t >= g.start).map(|g| g.share).sum())
        .collect();
    let mut total = 0.0;
    for g in groups {
        for (t, pm) in period_mean.iter().enumerate() {
            let d = if t >= g.start { 1.0 } else { 0.0 };
            total += g.units.len() as f64 * (d - g.d_bar - pm + d_bar).powi(2);
        }
    }
    total / (n_units * n_periods) as f64
}

pub fn reconstruct(components: &[BaconComponent]) -> f64 {
    components.iter().map(|c| c.weight * c.estimate).sum()
}

/// Total weight and weighted average estimate per comparison type.
pub fn summarize(components: &[BaconComponent]) -> BTreeMap<Comparison, (f64, f64)> {
    let mut acc: BTreeMap<Comparison, (f64, f64)> = BTreeMap::new();
    for c in components {
        let e = acc.entry(c.comparison).or_default();
        e.0 += c.weight;
        e.1 += c.weight * c.estimate;
    }
    acc.into_iter().map(|(k, (w, s))| (k, (w, s / w))).collect()
}

pub fn write_csv<W: Write>(components: &[BaconComponent], sink: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        comparison: Comparison,
        treated_cohort: PeriodId,
        control_cohort: String,
        estimate: f64,
        weight: f64,
    }
    let mut w = csv::Writer::from_writer(sink);
    for c in components {
        w.serialize(Row {
            comparison: c.comparison,
            treated_cohort: c.cohort_pair.0,
            control_cohort: c.cohort_pair.1.map_or_else(|| "never".to_string(), |p| p.to_string()),
            estimate: c.estimate,
            weight: c.weight,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{wls_fit, DesignMatrix};
    use crate::panel::{Observation, OutcomeScale, UnitId};

    fn panel(cohorts: &[Option<usize>], n_periods: usize, y: impl Fn(usize, usize, bool) -> f64) -> (PanelDataset, RegionMap<Option<PeriodId>>) {
        let first = PeriodId::q(2013, 1);
        let mut obs = Vec::new();
        let mut map = RegionMap::new();
        for (i, c) in cohorts.iter().enumerate() {
            let unit = UnitId::from(format!("u{i:03}").as_str());
            map.insert(unit.clone(), c.map(|s| first.offset(s as i64)));
            for t in 0..n_periods {
                let treated = c.is_some_and(|s| t >= s);
                obs.push(Observation {
                    unit: unit.clone(),
                    period: first.offset(t as i64),
                    outcome: y(i, t, treated),
                    weight: 1.0,
                    covariates: vec![],
                });
            }
        }
        (PanelDataset::new(obs, vec![], None, OutcomeScale::Log).unwrap(), map)
    }

    fn twfe(data: &PanelDataset, cohorts: &RegionMap<Option<PeriodId>>) -> f64 {
        let mut dm = DesignMatrix::from_panel(data);
        let d = data
            .observations()
            .iter()
            .map(|o| if cohorts[&o.unit].is_some_and(|g| o.period >= g) { 1.0 } else { 0.0 })
            .collect();
        dm.push_column("d", d).unwrap();
        wls_fit(&dm).unwrap().coefficients[0]
    }

    fn noise(i: usize, t: usize) -> f64 {
        ((i * 31 + t * 17) % 13) as f64 * 0.01 + (i as f64).sin() * 0.3
    }

    #[test]
    fn single_cohort_collapses() {
        let cohorts: Vec<_> = (0..6).map(|i| (i < 3).then_some(3)).collect();
        let (data, map) = panel(&cohorts, 6, |i, t, d| noise(i, t) + if d { 0.5 } else { 0.0 });
        let comps = bacon_decompose(&data, &map).unwrap();
        assert_eq!(comps.len(), 1);
        assert!((comps[0].weight - 1.0).abs() < 1e-12);
        assert!((comps[0].estimate - twfe(&data, &map)).abs() < 1e-10);
    }

    #[test]
    fn two_cohorts_and_never() {
        let cohorts: Vec<_> = (0..12).map(|i| [Some(2), Some(5), None][i % 3]).collect();
        let (data, map) = panel(&cohorts, 8, |i, t, d| noise(i, t) + if d { 0.2 + 0.1 * t as f64 } else { 0.0 });
        let comps = bacon_decompose(&data, &map).unwrap();
        assert_eq!(comps.len(), 4);
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((reconstruct(&comps) - twfe(&data, &map)).abs() < 1e-10);
        assert!(comps.iter().all(|c| c.weight >= 0.0));
        let kinds: Vec<_> = comps.iter().map(|c| c.comparison).collect();
        assert_eq!(kinds.iter().filter(|k| **k == Comparison::TreatedVsNever).count(), 2);
    }

    #[test]
    fn without_never_treated_two_components() {
        let cohorts: Vec<_> = (0..8).map(|i| Some(if i % 2 == 0 { 2 } else { 5 })).collect();
        let (data, map) = panel(&cohorts, 8, |i, t, d| noise(i, t) + if d { 1.0 } else { 0.0 });
        let comps = bacon_decompose(&data, &map).unwrap();
        let kinds: Vec<_> = comps.iter().map(|c| c.comparison).collect();
        assert_eq!(kinds, vec![Comparison::EarlyVsLate, Comparison::LateVsEarly]);
        assert!((reconstruct(&comps) - twfe(&data, &map)).abs() < 1e-10);
    }

    #[test]
    fn homogeneous_effect_everywhere() {
        let cohorts: Vec<_> = (0..9).map(|i| [Some(2), Some(4), None][i % 3]).collect();
        let (data, map) = panel(&cohorts, 7, |i, t, d| i as f64 + 0.3 * t as f64 + if d { -0.05 } else { 0.0 });
        for c in bacon_decompose(&data, &map).unwrap() {
            assert!((c.estimate + 0.05).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn always_treated_and_late_starts() {
        // cohort before the span is always treated; after the span is never treated
        let first = PeriodId::q(2013, 1);
        let cohorts: Vec<_> = (0..8).map(|i| [Some(0), Some(3), Some(20), None][i % 4]).collect();
        let (data, mut map) = panel(&cohorts, 6, |i, t, d| noise(i, t) + if d { 0.3 + 0.05 * i as f64 } else { 0.0 });
        for (i, c) in cohorts.iter().enumerate() {
            if *c == Some(0) {
                map.insert(UnitId::from(format!("u{i:03}").as_str()), Some(first.offset(-2)));
            }
        }
        let comps = bacon_decompose(&data, &map).unwrap();
        assert!((comps.iter().map(|c| c.weight).sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((reconstruct(&comps) - twfe(&data, &map)).abs() < 1e-10);
    }

    #[test]
    fn preconditions() {
        let cohorts: Vec<_> = (0..4).map(|i| (i < 2).then_some(2)).collect();
        let (data, map) = panel(&cohorts, 4, |i, t, _| noise(i, t));
        let unbalanced = data.with_observations(data.observations()[1..].to_vec()).unwrap();
        assert!(matches!(bacon_decompose(&unbalanced, &map), Err(Error::Unbalanced(1))));

        let all_same: RegionMap<_> = map.keys().map(|k| (k.clone(), None)).collect();
        assert!(matches!(bacon_decompose(&data, &all_same), Err(Error::Identification(_))));
    }

    #[test]
    fn csv_output() {
        let cohorts: Vec<_> = (0..6).map(|i| [Some(2), Some(4), None][i % 3]).collect();
        let (data, map) = panel(&cohorts, 6, |i, t, _| noise(i, t));
        let mut buf = Vec::new();
        write_csv(&bacon_decompose(&data, &map).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("comparison,treated_cohort,control_cohort,estimate,weight\n"));
        assert!(text.contains("treated_vs_never,2013Q3,never,"));
    }
}
