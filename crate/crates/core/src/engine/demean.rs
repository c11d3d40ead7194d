//! Two-way weighted demeaning by alternating projections.

use rayon::prelude::*;

use super::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct DemeanOptions {
    /// Stop once the largest per-cell change in a sweep is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for DemeanOptions {
    fn default() -> Self {
        DemeanOptions {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

struct Groups<'a> {
    unit: &'a [usize],
    period: &'a [usize],
    weights: &'a [f64],
    unit_weight: Vec<f64>,
    period_weight: Vec<f64>,
}

impl Groups<'_> {
    fn sweep_column(&self, x: &mut [f64], opts: DemeanOptions) -> Result<()> {
        let mut unit_mean = vec![0.0; self.unit_weight.len()];
        let mut period_mean = vec![0.0; self.period_weight.len()];
        let mut last_delta = f64::INFINITY;
        for _ in 0..opts.max_iterations {
            unit_mean.iter_mut().for_each(|m| *m = 0.0);
            for ((xi, &u), &w) in x.iter().zip(self.unit).zip(self.weights) {
                unit_mean[u] += w * xi;
            }
            for (m, &wu) in unit_mean.iter_mut().zip(&self.unit_weight) {
                *m /= wu;
            }
            for (xi, &u) in x.iter_mut().zip(self.unit) {
                *xi -= unit_mean[u];
            }

            period_mean.iter_mut().for_each(|m| *m = 0.0);
            for ((xi, &p), &w) in x.iter().zip(self.period).zip(self.weights) {
                period_mean[p] += w * xi;
            }
            for (m, &wp) in period_mean.iter_mut().zip(&self.period_weight) {
                *m /= wp;
            }
            let mut delta: f64 = 0.0;
            for ((xi, &p), &u) in x.iter_mut().zip(self.period).zip(self.unit) {
                *xi -= period_mean[p];
                delta = delta.max((unit_mean[u] + period_mean[p]).abs());
            }
            last_delta = delta;
            if delta <= opts.tolerance {
                return Ok(());
            }
        }
        Err(Error::NoConvergence {
            iterations: opts.max_iterations,
            last_delta,
        })
    }
}

/// Sweeps out unit and period fixed effects from the outcome and every
/// regressor, iterating weighted within-unit and within-period demeaning
/// until a full sweep moves no cell by more than the tolerance.
pub fn demean_two_way(design: &DesignMatrix) -> Result<DesignMatrix> {
    demean_two_way_with(design, DemeanOptions::default())
}

pub fn demean_two_way_with(design: &DesignMatrix, opts: DemeanOptions) -> Result<DesignMatrix> {
    let mut unit_weight = vec![0.0; design.n_units];
    let mut period_weight = vec![0.0; design.n_periods];
    for ((&u, &p), &w) in design.unit.iter().zip(&design.period).zip(&design.weights) {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Invalid(format!("weights must be positive, got {w}")));
        }
        unit_weight[u] += w;
        period_weight[p] += w;
    }
    // unused indices would divide by zero; they carry no rows either way
    for w in unit_weight.iter_mut().chain(period_weight.iter_mut()) {
        if *w == 0.0 {
            *w = 1.0;
        }
    }
    let groups = Groups {
        unit: &design.unit,
        period: &design.period,
        weights: &design.weights,
        unit_weight,
        period_weight,
    };

    let mut out = design.clone();
    let mut all: Vec<&mut Vec<f64>> = Vec::with_capacity(out.columns.len() + 1);
    all.push(&mut out.outcome);
    all.extend(out.columns.iter_mut());
    all.into_par_iter()
        .map(|col| groups.sweep_column(col, opts))
        .collect::<Result<Vec<()>>>()?;
    out.demeaned = true;
    Ok(out)
}
