//! Weighted least squares with absorbed unit and period fixed effects and
//! cluster-robust (CR1) inference.

mod demean;
mod qr;
mod vcov;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Map, Value};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use demean::{demean_two_way, demean_two_way_with, DemeanOptions};
pub use vcov::cluster_vcov;

use crate::error::{Error, Result};
use crate::panel::PanelDataset;

/// Relative pivot threshold below which a regressor counts as collinear.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-9;

/// Regression input: named regressors plus outcome, weights and the
/// unit/period/cluster label of every row. Fixed effects are never
/// materialised as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub outcome: Vec<f64>,
    pub weights: Vec<f64>,
    pub unit: Vec<usize>,
    pub period: Vec<usize>,
    pub cluster: Vec<usize>,
    pub n_units: usize,
    pub n_periods: usize,
    pub n_clusters: usize,
    /// Set once fixed effects have been swept out.
    pub demeaned: bool,
}

impl DesignMatrix {
    /// Raw constructor; group counts are inferred from the largest index.
    pub fn new(
        outcome: Vec<f64>,
        weights: Vec<f64>,
        unit: Vec<usize>,
        period: Vec<usize>,
        cluster: Vec<usize>,
    ) -> Result<Self> {
        let n = outcome.len();
        if weights.len() != n || unit.len() != n || period.len() != n || cluster.len() != n {
            return Err(Error::Invalid("design vectors differ in length".into()));
        }
        let count = |v: &[usize]| v.iter().max().map_or(0, |m| m + 1);
        let n_clusters = {
            let mut c = cluster.clone();
            c.sort_unstable();
            c.dedup();
            c.len()
        };
        Ok(DesignMatrix {
            names: Vec::new(),
            columns: Vec::new(),
            n_units: count(&unit),
            n_periods: count(&period),
            n_clusters,
            outcome,
            weights,
            unit,
            period,
            cluster,
            demeaned: false,
        })
    }

    /// Rows aligned with the panel's canonical observation order.
    pub fn from_panel(data: &PanelDataset) -> Self {
        let (cluster_of_unit, n_clusters) = data.cluster_of_units();
        let mut unit = Vec::with_capacity(data.len());
        let mut period = Vec::with_capacity(data.len());
        let mut cluster = Vec::with_capacity(data.len());
        for o in data.observations() {
            let u = data.unit_index(&o.unit).expect("unit indexed");
            unit.push(u);
            period.push(data.period_index(o.period).expect("period indexed"));
            cluster.push(cluster_of_unit[u]);
        }
        DesignMatrix {
            names: Vec::new(),
            columns: Vec::new(),
            outcome: data.observations().iter().map(|o| o.outcome).collect(),
            weights: data.observations().iter().map(|o| o.weight).collect(),
            unit,
            period,
            cluster,
            n_units: data.units().len(),
            n_periods: data.periods().len(),
            n_clusters,
            demeaned: false,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.outcome.len()
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.n_rows() {
            return Err(Error::Invalid(format!(
                "column `{name}` has {} rows, expected {}",
                values.len(),
                self.n_rows()
            )));
        }
        if self.names.contains(&name) {
            return Err(Error::Invalid(format!("duplicate column name `{name}`")));
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    /// `true` when every unit's rows share one cluster.
    pub fn units_nested_in_clusters(&self) -> bool {
        let mut seen = vec![usize::MAX; self.n_units];
        for (&u, &c) in self.unit.iter().zip(&self.cluster) {
            if seen[u] == usize::MAX {
                seen[u] = c;
            } else if seen[u] != c {
                return false;
            }
        }
        true
    }

    /// Degrees of freedom used by the absorbed fixed effects in the CR1
    /// correction: the intercept plus period effects, plus unit effects
    /// unless they are nested within clusters.
    pub fn absorbed_df(&self) -> usize {
        let units = if self.units_nested_in_clusters() {
            0
        } else {
            self.n_units.saturating_sub(1)
        };
        self.n_periods + units
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub vcov: DMatrix<f64>,
    /// Residuals per input row.
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub dropped_collinear: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub conf_low: f64,
    pub conf_high: f64,
    pub stars: &'static str,
}

/// Significance stars at the 10/5/1 percent levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// t-based inference for a single estimate.
pub fn t_inference(name: &str, estimate: f64, se: f64, df: f64, level: f64) -> CoefficientRow {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let t = estimate / se;
    let p = if t.is_finite() {
        2.0 * (1.0 - dist.cdf(t.abs()))
    } else {
        f64::NAN
    };
    let q = dist.inverse_cdf(0.5 + level / 2.0);
    CoefficientRow {
        name: name.to_string(),
        estimate,
        se,
        t,
        p,
        conf_low: estimate - q * se,
        conf_high: estimate + q * se,
        stars: if p.is_finite() { stars(p) } else { "" },
    }
}

impl RegressionFit {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.vcov[(i, i)].sqrt())
    }

    /// Inference uses a t distribution with G − 1 degrees of freedom.
    pub fn df(&self) -> f64 {
        (self.n_clusters - 1) as f64
    }

    pub fn row(&self, name: &str, level: f64) -> Option<CoefficientRow> {
        let i = self.index(name)?;
        Some(t_inference(name, self.coefficients[i], self.vcov[(i, i)].sqrt(), self.df(), level))
    }

    /// Rows for every retained coefficient at the given confidence level.
    pub fn table(&self, level: f64) -> Vec<CoefficientRow> {
        self.names.iter().filter_map(|n| self.row(n, level)).collect()
    }

    /// Estimate and standard error of Σ a_j β_j; names not retained are
    /// skipped.
    pub fn linear_combination(&self, weights: &[(String, f64)]) -> (f64, f64) {
        let mut a = vec![0.0; self.names.len()];
        for (name, w) in weights {
            if let Some(i) = self.index(name) {
                a[i] += w;
            }
        }
        let est = a.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum();
        let mut var = 0.0;
        for i in 0..a.len() {
            for j in 0..a.len() {
                var += a[i] * self.vcov[(i, j)] * a[j];
            }
        }
        (est, var.max(0.0).sqrt())
    }

    pub fn to_json(&self, level: f64) -> Value {
        let table = self.table(level);
        let field = |f: fn(&CoefficientRow) -> f64| {
            let mut m = Map::new();
            for r in &table {
                m.insert(r.name.clone(), finite_or_null(f(r)));
            }
            Value::Object(m)
        };
        json!({
            "coefficients": field(|r| r.estimate),
            "se": field(|r| r.se),
            "t": field(|r| r.t),
            "p": field(|r| r.p),
            "conf_low": field(|r| r.conf_low),
            "conf_high": field(|r| r.conf_high),
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
            "dropped": self.dropped_collinear,
        })
    }
}

pub(crate) fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Fits the design by weighted least squares on two-way demeaned data.
///
/// Collinear regressors are dropped in column order (the later column goes)
/// and reported; the covariance is CR1 over the design's clusters.
pub fn wls_fit(design: &DesignMatrix) -> Result<RegressionFit> {
    if design.n_clusters < 2 {
        return Err(Error::TooFewClusters(design.n_clusters));
    }
    let demeaned;
    let d = if design.demeaned {
        design
    } else {
        demeaned = demean_two_way(design)?;
        &demeaned
    };
    let sqrt_w: Vec<f64> = d.weights.iter().map(|w| w.sqrt()).collect();
    let scaled: Vec<Vec<f64>> = d
        .columns
        .iter()
        .map(|c| c.iter().zip(&sqrt_w).map(|(x, s)| x * s).collect())
        .collect();
    let rhs: Vec<f64> = d.outcome.iter().zip(&sqrt_w).map(|(y, s)| y * s).collect();
    let qr = qr::ordered_qr(&scaled, &rhs, COLLINEARITY_TOLERANCE);
    if qr.kept.is_empty() {
        return Err(Error::AllCollinear);
    }
    let n = d.n_rows();
    if n < qr.kept.len() + 2 {
        return Err(Error::TooFewObservations {
            rows: n,
            columns: qr.kept.len(),
        });
    }
    let coefficients = qr.solve();
    let kept_cols: Vec<Vec<f64>> = qr.kept.iter().map(|&j| d.columns[j].clone()).collect();
    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let fitted: f64 = kept_cols.iter().zip(&coefficients).map(|(c, b)| c[i] * b).sum();
            d.outcome[i] - fitted
        })
        .collect();
    let vcov = cluster_vcov(
        &kept_cols,
        &d.weights,
        &residuals,
        &d.cluster,
        d.n_clusters,
        d.absorbed_df(),
    )?;
    Ok(RegressionFit {
        names: qr.kept.iter().map(|&j| d.names[j].clone()).collect(),
        coefficients,
        vcov,
        residuals,
        n_obs: n,
        n_clusters: d.n_clusters,
        dropped_collinear: qr.dropped.iter().map(|&j| d.names[j].clone()).collect(),
    })
}
