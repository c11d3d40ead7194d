use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use super::{bootstrap_se, z95, Bootstrap, Timing};
use crate::bite::RegionMap;
use crate::did_spec::{expand_covariates, CovariateTerm};
use crate::engine::{wls_fit, DesignMatrix};
use crate::error::{Error, Result};
use crate::panel::{PanelDataset, PeriodId, UnitId};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImputeOptions {
    /// Controls for the untreated-only first stage.
    pub covariates: Vec<CovariateTerm>,
    pub bootstrap: Option<Bootstrap>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputedEffect {
    pub unit: UnitId,
    pub period: PeriodId,
    pub event_time: i64,
    pub effect: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstStage {
    pub n_obs: usize,
    pub n_units: usize,
    pub n_periods: usize,
    pub coefficients: BTreeMap<String, f64>,
    pub dropped: Vec<String>,
    pub rmse: f64,
    /// Largest |Σ w·residual| over units and over periods; zero up to
    /// rounding when the fixed effects are fitted exactly.
    pub max_unit_score: f64,
    pub max_period_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationResult {
    pub effects: Vec<ImputedEffect>,
    pub att: f64,
    pub se: f64,
    pub first_stage: FirstStage,
    pub warnings: Vec<String>,
    pub bootstrap: Option<Bootstrap>,
    pub draws: Vec<f64>,
}

impl ImputationResult {
    /// Weighted mean effect per event time.
    pub fn by_event_time(&self) -> BTreeMap<i64, f64> {
        let mut acc: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        for e in &self.effects {
            let a = acc.entry(e.event_time).or_default();
            a.0 += e.weight * e.effect;
            a.1 += e.weight;
        }
        acc.into_iter().map(|(k, (s, w))| (k, s / w)).collect()
    }

    pub fn to_json(&self) -> Value {
        let z = z95();
        let by_e: Vec<Value> = self
            .by_event_time()
            .into_iter()
            .map(|(e, v)| json!({"event_time": e, "estimate": v}))
            .collect();
        json!({
            "estimator": "impute_att",
            "att": self.att,
            "se": self.se,
            "conf_low": self.att - z * self.se,
            "conf_high": self.att + z * self.se,
            "n_treated_obs": self.effects.len(),
            "seed": self.bootstrap.map(|b| b.seed),
            "bootstrap_draws": self.bootstrap.map_or(0, |b| b.draws),
            "by_event_time": by_e,
            "first_stage": self.first_stage,
            "warnings": self.warnings,
        })
    }
}

struct Rows {
    unit: Vec<usize>,
    period: Vec<usize>,
    y: Vec<f64>,
    w: Vec<f64>,
    treated: Vec<bool>,
    names: Vec<String>,
    x: Vec<Vec<f64>>,
    n_units: usize,
    n_periods: usize,
}

struct Stage1 {
    alpha: Vec<f64>,
    lambda: Vec<f64>,
    beta: Vec<f64>,
    dropped: Vec<String>,
    residuals: Vec<(usize, f64)>,
}

impl Rows {
    fn xb(&self, row: usize, beta: &[f64]) -> f64 {
        self.x.iter().zip(beta).map(|(c, b)| c[row] * b).sum()
    }

    /// Fits unit and period effects (plus covariates) on untreated rows,
    /// with row weights scaled by `mult[unit]`.
    fn stage1(&self, mult: &[f64]) -> Result<Stage1> {
        let rows: Vec<usize> = (0..self.y.len())
            .filter(|&r| !self.treated[r] && self.w[r] * mult[self.unit[r]] > 0.0)
            .collect();
        let w = |r: usize| self.w[r] * mult[self.unit[r]];
        let mut unit_w = vec![0.0; self.n_units];
        let mut period_w = vec![0.0; self.n_periods];
        for &r in &rows {
            unit_w[self.unit[r]] += w(r);
            period_w[self.period[r]] += w(r);
        }
        let units = unit_w.iter().filter(|v| **v > 0.0).count();
        let periods = period_w.iter().filter(|v| **v > 0.0).count();
        if units < 2 {
            return Err(Error::Identification(format!("untreated observations cover {units} unit(s); at least 2 needed")));
        }
        if periods < 2 {
            return Err(Error::Identification(format!("untreated observations cover {periods} period(s); at least 2 needed")));
        }

        let mut beta = vec![0.0; self.x.len()];
        let mut dropped = Vec::new();
        if !self.x.is_empty() {
            let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<f64>>();
            let mut dm = DesignMatrix::new(
                pick(&self.y),
                rows.iter().map(|&r| w(r)).collect(),
                rows.iter().map(|&r| self.unit[r]).collect(),
                rows.iter().map(|&r| self.period[r]).collect(),
                rows.iter().map(|&r| self.unit[r]).collect(),
            )?;
            for (name, col) in self.names.iter().zip(&self.x) {
                dm.push_column(name.clone(), pick(col))?;
            }
            let fit = wls_fit(&dm)?;
            for (j, name) in self.names.iter().enumerate() {
                match fit.coef(name) {
                    Some(b) => beta[j] = b,
                    None => dropped.push(name.clone()),
                }
            }
        }

        // λ solves M λ = c with M_ts = W_t δ_ts − Σ_i w_it w_is / W_i, then
        // α_i = Σ_t w_it (r_it − λ_t) / W_i
        let resid: Vec<f64> = rows.iter().map(|&r| self.y[r] - self.xb(r, &beta)).collect();
        let mut by_unit: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); self.n_units];
        for (k, &r) in rows.iter().enumerate() {
            by_unit[self.unit[r]].push((self.period[r], w(r), resid[k]));
        }
        let t = self.n_periods;
        let mut m = DMatrix::<f64>::zeros(t, t);
        let mut c = DVector::<f64>::zeros(t);
        for (p, pw) in period_w.iter().enumerate() {
            m[(p, p)] += pw;
        }
        for (cells, &wu) in by_unit.iter().zip(&unit_w) {
            if wu == 0.0 {
                continue;
            }
            let unit_sum: f64 = cells.iter().map(|(_, wi, ri)| wi * ri).sum();
            for &(p, wp, rp) in cells {
                c[p] += wp * rp - wp * unit_sum / wu;
                for &(s, ws, _) in cells {
                    m[(p, s)] -= wp * ws / wu;
                }
            }
        }
        // pin the first covered period to zero; the reduced system is
        // positive definite whenever the untreated cells are connected
        let active: Vec<usize> = (0..t).filter(|&p| period_w[p] > 0.0).collect();
        let free = &active[1..];
        let reduced = DMatrix::from_fn(free.len(), free.len(), |i, j| m[(free[i], free[j])]);
        let lambda = match reduced.cholesky() {
            Some(ch) => {
                let sol = ch.solve(&DVector::from_fn(free.len(), |i, _| c[free[i]]));
                let mut full = DVector::<f64>::zeros(t);
                for (i, &p) in free.iter().enumerate() {
                    full[p] = sol[i];
                }
                full
            }
            None => {
                let scale = period_w.iter().cloned().fold(0.0, f64::max);
                m.svd(true, true)
                    .solve(&c, 1e-10 * scale)
                    .map_err(|e| Error::Identification(format!("period effects not solvable: {e}")))?
            }
        };
        let lambda: Vec<f64> = (0..t).map(|p| if period_w[p] > 0.0 { lambda[p] } else { f64::NAN }).collect();
        let alpha: Vec<f64> = by_unit
            .iter()
            .zip(&unit_w)
            .map(|(cells, &wu)| {
                if wu == 0.0 {
                    f64::NAN
                } else {
                    cells.iter().map(|&(p, wi, ri)| wi * (ri - lambda[p])).sum::<f64>() / wu
                }
            })
            .collect();
        let residuals = rows
            .iter()
            .zip(&resid)
            .map(|(&r, &ri)| (r, ri - alpha[self.unit[r]] - lambda[self.period[r]]))
            .collect();
        Ok(Stage1 {
            alpha,
            lambda,
            beta,
            dropped,
            residuals,
        })
    }

    fn effect(&self, row: usize, s1: &Stage1) -> f64 {
        self.y[row] - s1.alpha[self.unit[row]] - s1.lambda[self.period[row]] - self.xb(row, &s1.beta)
    }

    fn aggregate(&self, treated_rows: &[usize], s1: &Stage1, mult: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for &r in treated_rows {
            let w = self.w[r] * mult[self.unit[r]];
            if w > 0.0 {
                num += w * self.effect(r, s1);
                den += w;
            }
        }
        num / den
    }
}

/// Imputation estimator: fixed effects (and covariates) fitted on untreated
/// observations only, counterfactuals predicted for treated ones, effects
/// averaged with observation weights.
pub fn impute_att(data: &PanelDataset, cohorts: &RegionMap<Option<PeriodId>>, options: &ImputeOptions) -> Result<ImputationResult> {
    let timing = Timing::new(data, cohorts)?;
    let periods = data.periods();
    let expanded = expand_covariates(data, &options.covariates)?;
    let mut rows = Rows {
        unit: Vec::with_capacity(data.len()),
        period: Vec::with_capacity(data.len()),
        y: Vec::with_capacity(data.len()),
        w: Vec::with_capacity(data.len()),
        treated: Vec::with_capacity(data.len()),
        names: expanded.iter().map(|(n, _)| n.clone()).collect(),
        x: expanded.into_iter().map(|(_, c)| c).collect(),
        n_units: data.units().len(),
        n_periods: periods.len(),
    };
    for o in data.observations() {
        let u = data.unit_index(&o.unit).expect("unit indexed");
        let t = data.period_index(o.period).expect("period indexed");
        rows.unit.push(u);
        rows.period.push(t);
        rows.y.push(o.outcome);
        rows.w.push(o.weight);
        rows.treated.push(t >= timing.start[u]);
    }

    let ones = vec![1.0; rows.n_units];
    let s1 = rows.stage1(&ones)?;
    let mut warnings = Vec::new();
    let (imputable, skipped): (Vec<usize>, Vec<usize>) = (0..rows.y.len())
        .filter(|&r| rows.treated[r])
        .partition(|&r| s1.alpha[rows.unit[r]].is_finite() && s1.lambda[rows.period[r]].is_finite());
    if !skipped.is_empty() {
        warnings.push(format!(
            "{} treated observations have no untreated counterpart for their unit or period and are not imputed",
            skipped.len()
        ));
    }
    if imputable.is_empty() {
        return Err(Error::Identification("no treated observation can be imputed".into()));
    }

    let effects: Vec<ImputedEffect> = imputable
        .iter()
        .map(|&r| {
            let o = &data.observations()[r];
            ImputedEffect {
                unit: o.unit.clone(),
                period: o.period,
                event_time: periods[timing.start[rows.unit[r]]].quarters_until(o.period),
                effect: rows.effect(r, &s1),
                weight: o.weight,
            }
        })
        .collect();
    let att = rows.aggregate(&imputable, &s1, &ones);

    let mut unit_score = vec![0.0; rows.n_units];
    let mut period_score = vec![0.0; rows.n_periods];
    let mut sse = 0.0;
    for &(r, e) in &s1.residuals {
        unit_score[rows.unit[r]] += rows.w[r] * e;
        period_score[rows.period[r]] += rows.w[r] * e;
        sse += e * e;
    }
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let first_stage = FirstStage {
        n_obs: s1.residuals.len(),
        n_units: s1.alpha.iter().filter(|a| a.is_finite()).count(),
        n_periods: s1.lambda.iter().filter(|l| l.is_finite()).count(),
        coefficients: rows.names.iter().cloned().zip(s1.beta.iter().copied()).filter(|(n, _)| !s1.dropped.contains(n)).collect(),
        dropped: s1.dropped.clone(),
        rmse: (sse / s1.residuals.len() as f64).sqrt(),
        max_unit_score: max_abs(&unit_score),
        max_period_score: max_abs(&period_score),
    };

    let mut draws = Vec::new();
    let mut se = f64::NAN;
    if let Some(bs) = options.bootstrap {
        let (unit_cluster, n_clusters) = data.cluster_of_units();
        let replicated = bs.replicate(&unit_cluster, n_clusters, |mult| {
            let value = rows.stage1(mult).map_or(f64::NAN, |s| {
                let ok: Vec<usize> = imputable
                    .iter()
                    .copied()
                    .filter(|&r| s.alpha[rows.unit[r]].is_finite() && s.lambda[rows.period[r]].is_finite())
                    .collect();
                rows.aggregate(&ok, &s, mult)
            });
            vec![value]
        });
        se = bootstrap_se(&replicated, |d| d[0]);
        draws = replicated.into_iter().map(|d| d[0]).collect();
    }

    Ok(ImputationResult {
        effects,
        att,
        se,
        first_stage,
        warnings,
        bootstrap: options.bootstrap,
        draws,
    })
}
