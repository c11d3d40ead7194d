//! Independent oracles and fixture generators shared by the integration
//! tests. Nothing here calls the library's estimation code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use paneldid::bite::{RegionMap, RegionTreatment, TreatmentDesign};
use paneldid::engine::DesignMatrix;
use paneldid::panel::{Observation, OutcomeScale, PanelDataset, PeriodId, UnitId};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random weighted panel design with `k` continuous regressors and a
/// treatment dummy. Rows are dropped at random when `unbalanced`, keeping
/// unit 0 and period 0 complete so the fixed-effect graph stays connected.
/// Clusters are groups of units when `nested`, otherwise cut across units.
pub fn random_design(seed: u64, units: usize, periods: usize, k: usize, unbalanced: bool, nested: bool) -> DesignMatrix {
    let mut r = rng(seed);
    let alpha: Vec<f64> = (0..units).map(|_| normal(&mut r)).collect();
    let lambda: Vec<f64> = (0..periods).map(|_| normal(&mut r)).collect();
    let n_clusters = (units / 2).max(2);
    let mut rows = Vec::new();
    for u in 0..units {
        for t in 0..periods {
            if unbalanced && u > 0 && t > 0 && r.random::<f64>() < 0.2 {
                continue;
            }
            rows.push((u, t));
        }
    }
    let n = rows.len();
    let mut columns = vec![Vec::with_capacity(n); k + 1];
    let mut outcome = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut cluster = Vec::with_capacity(n);
    for &(u, t) in &rows {
        let treat = if u < units / 2 && t >= periods / 2 { 1.0 } else { 0.0 };
        let mut y = alpha[u] + lambda[t] + 0.3 * treat;
        columns[0].push(treat);
        for (j, col) in columns.iter_mut().enumerate().skip(1) {
            let x = normal(&mut r) + 0.5 * alpha[u];
            y += 0.1 * j as f64 * x;
            col.push(x);
        }
        outcome.push(y + 0.5 * normal(&mut r));
        weights.push(r.random_range(0.5..2.0));
        cluster.push(if nested { u % n_clusters } else { (u + t) % n_clusters });
    }
    let unit = rows.iter().map(|r| r.0).collect();
    let period = rows.iter().map(|r| r.1).collect();
    let mut d = DesignMatrix::new(outcome, weights, unit, period, cluster).unwrap();
    d.push_column("treat", columns.remove(0)).unwrap();
    for (j, col) in columns.into_iter().enumerate() {
        d.push_column(format!("x{}", j + 1), col).unwrap();
    }
    d
}

/// Regressors followed by a dummy for every unit and every period after the
/// first.
fn dummy_matrix(d: &DesignMatrix) -> DMatrix<f64> {
    let k = d.columns.len();
    let p = k + d.n_units + d.n_periods - 1;
    DMatrix::from_fn(d.n_rows(), p, |i, j| {
        if j < k {
            d.columns[j][i]
        } else if j < k + d.n_units {
            f64::from(d.unit[i] == j - k)
        } else {
            f64::from(d.period[i] == j - k - d.n_units + 1)
        }
    })
}

pub struct DummyFit {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub vcov: DMatrix<f64>,
}

/// Weighted least squares with explicit fixed-effect dummies, solved by QR,
/// and the CR1 sandwich computed on the full dummy design.
pub fn dummy_wls(d: &DesignMatrix) -> DummyFit {
    let x = dummy_matrix(d);
    let n = d.n_rows();
    let k = d.columns.len();
    let sw: Vec<f64> = d.weights.iter().map(|w| w.sqrt()).collect();
    let xw = DMatrix::from_fn(n, x.ncols(), |i, j| x[(i, j)] * sw[i]);
    let yw = DVector::from_fn(n, |i, _| d.outcome[i] * sw[i]);
    let qr = xw.clone().qr();
    let coef = qr.r().solve_upper_triangular(&(qr.q().transpose() * &yw)).expect("full-rank dummy design");
    let residuals: Vec<f64> = (0..n).map(|i| d.outcome[i] - (x.row(i) * &coef)[0]).collect();

    let xtwx = xw.transpose() * &xw;
    let bread = xtwx.try_inverse().expect("full-rank dummy design");
    let groups = d.cluster.iter().max().unwrap() + 1;
    let mut meat = DMatrix::<f64>::zeros(x.ncols(), x.ncols());
    for g in 0..groups {
        let mut s = DVector::<f64>::zeros(x.ncols());
        for i in (0..n).filter(|&i| d.cluster[i] == g) {
            s += x.row(i).transpose() * (d.weights[i] * residuals[i]);
        }
        meat += &s * s.transpose();
    }
    let full = &bread * meat * &bread;

    // Unit dummies are not counted when every unit sits inside one cluster.
    let nested = (0..d.n_units).all(|u| {
        let mut cs = (0..n).filter(|&i| d.unit[i] == u).map(|i| d.cluster[i]);
        let first = cs.next();
        cs.all(|c| Some(c) == first)
    });
    let k_total = x.ncols() - if nested { d.n_units - 1 } else { 0 };
    let g = d.n_clusters as f64;
    let scale = g / (g - 1.0) * (n as f64 - 1.0) / (n - k_total) as f64;
    DummyFit {
        beta: coef.iter().take(k).copied().collect(),
        residuals,
        vcov: full.view((0, 0), (k, k)).into_owned() * scale,
    }
}

pub fn first_period() -> PeriodId {
    PeriodId::new(2013, 1).unwrap()
}

pub fn unit_name(i: usize) -> UnitId {
    UnitId::new(format!("u{i:03}")).unwrap()
}

/// Balanced panel from a per-unit start index (`None` = never treated) and
/// an outcome function of (unit, period, treated).
pub fn staggered_panel(
    starts: &[Option<usize>],
    n_periods: usize,
    weight: impl Fn(usize) -> f64,
    y: impl Fn(usize, usize, bool) -> f64,
) -> (PanelDataset, TreatmentDesign) {
    staggered_panel_from(first_period(), starts, n_periods, weight, y)
}

pub fn staggered_panel_from(
    first: PeriodId,
    starts: &[Option<usize>],
    n_periods: usize,
    weight: impl Fn(usize) -> f64,
    y: impl Fn(usize, usize, bool) -> f64,
) -> (PanelDataset, TreatmentDesign) {
    let mut obs = Vec::new();
    let mut regions = RegionMap::new();
    for (i, s) in starts.iter().enumerate() {
        let unit = unit_name(i);
        let cohort = s.map(|s| first.offset(s as i64));
        regions.insert(
            unit.clone(),
            RegionTreatment {
                gap_2014: 0.0,
                gap_2018: 0.0,
                high_2014: cohort.is_some(),
                high_2018: cohort.is_some(),
                cohort,
                population_weight: 1.0,
                low_growth: None,
            },
        );
        for t in 0..n_periods {
            obs.push(Observation {
                unit: unit.clone(),
                period: first.offset(t as i64),
                outcome: y(i, t, s.is_some_and(|s| t >= s)),
                weight: weight(i),
                covariates: vec![],
            });
        }
    }
    (PanelDataset::new(obs, vec![], None, OutcomeScale::Log).unwrap(), TreatmentDesign { regions })
}

/// Explicit-dummy TWFE coefficient on `1[t ≥ start]` for a balanced,
/// unweighted staggered panel.
pub fn twfe_oracle(starts: &[Option<usize>], n_periods: usize, y: &[Vec<f64>]) -> f64 {
    let mut outcome = Vec::new();
    let mut unit = Vec::new();
    let mut period = Vec::new();
    let mut treat = Vec::new();
    for (i, s) in starts.iter().enumerate() {
        for t in 0..n_periods {
            outcome.push(y[i][t]);
            unit.push(i);
            period.push(t);
            treat.push(f64::from(s.is_some_and(|s| t >= s)));
        }
    }
    let n = outcome.len();
    let cluster = unit.clone();
    let mut d = DesignMatrix::new(outcome, vec![1.0; n], unit, period, cluster).unwrap();
    d.push_column("treat", treat).unwrap();
    dummy_wls(&d).beta[0]
}

/// Canonical 2×2 fixture over 2014Q2 and 2014Q3: unit 0 treated from
/// 2014Q3, unit 1 never; treated change 0.2, control change 0.1.
pub const CANONICAL_Y: [[f64; 2]; 2] = [[1.0, 1.2], [2.0, 2.1]];

pub fn canonical_2x2() -> (PanelDataset, TreatmentDesign) {
    staggered_panel_from(PeriodId::new(2014, 2).unwrap(), &[Some(1), None], 2, |_| 1.0, |i, t, _| CANONICAL_Y[i][t])
}

pub fn canonical_difference() -> f64 {
    (CANONICAL_Y[0][1] - CANONICAL_Y[0][0]) - (CANONICAL_Y[1][1] - CANONICAL_Y[1][0])
}

/// Treatment survives two-way demeaning only if some cohort switches inside
/// the window and at least two timing groups exist.
pub fn identified(starts: &[Option<usize>]) -> bool {
    let groups: std::collections::BTreeSet<_> = starts.iter().collect();
    groups.len() >= 2 && starts.iter().any(|s| matches!(s, Some(s) if *s > 0))
}
