//! Heterogeneity-robust estimators for staggered adoption: group-time ATTs
//! with never- or not-yet-treated controls, the interaction-weighted event
//! study, and the imputation estimator.
//!
//! All three read treatment timing from a region → first-treated-period map.
//! A cohort dated after the last observed period counts as never treated,
//! and one dated at or before the first period as always treated.

mod cs;
mod imputation;
mod sa;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

pub use cs::{cs_aggregate, cs_att, AggregateValue, Aggregation, AggregationKind, ControlRule, CsOptions, GroupTimeAtt, GroupTimeEntry};
pub use imputation::{impute_att, FirstStage, ImputationResult, ImputeOptions, ImputedEffect};
pub use sa::{sa_event_study, EventTimeEstimate, SaCell, SaControl, SaOptions, SaResult};

use crate::bite::RegionMap;
use crate::error::{Error, Result};
use crate::panel::{PanelDataset, PeriodId};
use crate::rng::substream;

/// Cluster bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bootstrap {
    pub draws: usize,
    pub seed: u64,
}

impl Bootstrap {
    pub const DEFAULT_DRAWS: usize = 999;

    pub fn new(seed: u64) -> Self {
        Bootstrap {
            draws: Self::DEFAULT_DRAWS,
            seed,
        }
    }

    pub fn with_draws(mut self, draws: usize) -> Self {
        self.draws = draws;
        self
    }

    /// Runs `statistic` once per draw with per-unit multiplicities from
    /// resampling clusters with replacement. Draw `b` uses stream `b` of the
    /// seed, and results come back in draw order.
    pub(crate) fn replicate<F>(&self, unit_cluster: &[usize], n_clusters: usize, statistic: F) -> Vec<Vec<f64>>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        (0..self.draws)
            .into_par_iter()
            .map(|b| {
                let mut rng = substream(self.seed, b as u64);
                let mut count = vec![0.0; n_clusters];
                for _ in 0..n_clusters {
                    count[rng.random_range(0..n_clusters)] += 1.0;
                }
                let unit_mult: Vec<f64> = unit_cluster.iter().map(|&c| count[c]).collect();
                statistic(&unit_mult)
            })
            .collect()
    }
}

/// Sample standard deviation of `f(draw)` over draws where it is finite.
pub(crate) fn bootstrap_se(draws: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> f64 {
    let vals: Vec<f64> = draws.iter().map(|d| f(d)).filter(|v| v.is_finite()).collect();
    if vals.len() < 2 {
        return f64::NAN;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
}

/// Two-sided normal critical value at 95%.
pub fn z95() -> f64 {
    Normal::standard().inverse_cdf(0.975)
}

/// Unit-level timing: index of the first treated period per unit, with
/// `n_periods` meaning never treated within the span.
pub(crate) struct Timing {
    pub start: Vec<usize>,
    pub n_periods: usize,
}

impl Timing {
    pub fn new(data: &PanelDataset, cohorts: &RegionMap<Option<PeriodId>>) -> Result<Self> {
        let periods = data.periods();
        let start = data
            .units()
            .iter()
            .map(|u| match cohorts.get(u) {
                None => Err(Error::MissingTreatment(u.clone())),
                Some(None) => Ok(periods.len()),
                Some(Some(g)) => Ok(periods.partition_point(|p| p < g)),
            })
            .collect::<Result<_>>()?;
        Ok(Timing {
            start,
            n_periods: periods.len(),
        })
    }

    pub fn is_never(&self, unit: usize) -> bool {
        self.start[unit] == self.n_periods
    }

    /// Distinct treated starts (excluding never), ascending.
    pub fn cohort_starts(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.start.iter().copied().filter(|&s| s < self.n_periods).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Unit × period grid of `(outcome, weight)`, `None` where unobserved.
pub(crate) struct Grid {
    cells: Vec<Option<(f64, f64)>>,
    n_periods: usize,
}

impl Grid {
    pub fn new(data: &PanelDataset) -> Self {
        let n_periods = data.periods().len();
        let mut cells = vec![None; data.units().len() * n_periods];
        let mut u = 0;
        for o in data.observations() {
            while data.units()[u] != o.unit {
                u += 1;
            }
            let t = data.period_index(o.period).expect("period indexed");
            cells[u * n_periods + t] = Some((o.outcome, o.weight));
        }
        Grid { cells, n_periods }
    }

    pub fn get(&self, unit: usize, period: usize) -> Option<(f64, f64)> {
        self.cells[unit * self.n_periods + period]
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::bite::RegionMap;
    use crate::panel::{Observation, OutcomeScale, PanelDataset, PeriodId, UnitId};

    pub fn first() -> PeriodId {
        PeriodId::q(2013, 1)
    }

    /// Balanced panel with `starts[i]` the first treated period index of
    /// unit `i` (`None` never) and outcome `y(i, t, treated)`.
    pub fn panel(
        starts: &[Option<usize>],
        n_periods: usize,
        y: impl Fn(usize, usize, bool) -> f64,
    ) -> (PanelDataset, RegionMap<Option<PeriodId>>) {
        let mut obs = Vec::new();
        let mut map = RegionMap::new();
        for (i, s) in starts.iter().enumerate() {
            let unit = UnitId::from(format!("r{i:03}").as_str());
            map.insert(unit.clone(), s.map(|s| first().offset(s as i64)));
            for t in 0..n_periods {
                obs.push(Observation {
                    unit: unit.clone(),
                    period: first().offset(t as i64),
                    outcome: y(i, t, s.is_some_and(|s| t >= s)),
                    weight: 1.0 + (i % 3) as f64 * 0.5,
                    covariates: vec![],
                });
            }
        }
        (PanelDataset::new(obs, vec![], None, OutcomeScale::Log).unwrap(), map)
    }

    pub fn noise(i: usize, t: usize) -> f64 {
        ((i * 37 + t * 11) % 17) as f64 * 0.013 - 0.1 + (i as f64 * 0.7).sin() * 0.5
    }
}
