use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// CR1 cluster-robust covariance.
///
/// `columns` are the (demeaned) regressors, `residuals` the fit residuals on
/// the same scale. The sandwich `B (Σ_g s_g s_gᵀ) B` with `B = (X̃ᵀWX̃)⁻¹` and
/// `s_g = Σ_{i∈g} w_i x̃_i e_i` is scaled by `G/(G−1) · (N−1)/(N−K)` where
/// `K = columns + absorbed_df`.
pub fn cluster_vcov(
    columns: &[Vec<f64>],
    weights: &[f64],
    residuals: &[f64],
    cluster: &[usize],
    n_clusters: usize,
    absorbed_df: usize,
) -> Result<DMatrix<f64>> {
    let k = columns.len();
    let n = weights.len();
    if n_clusters < 2 {
        return Err(Error::TooFewClusters(n_clusters));
    }
    let dof_k = k + absorbed_df;
    if n <= dof_k {
        return Err(Error::TooFewObservations { rows: n, columns: dof_k });
    }
    let mut xtwx = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let s: f64 = (0..n).map(|i| weights[i] * columns[a][i] * columns[b][i]).sum();
            xtwx[(a, b)] = s;
            xtwx[(b, a)] = s;
        }
    }
    let bread = xtwx.cholesky().ok_or(Error::SingularBread)?.inverse();

    let mut scores = vec![DVector::<f64>::zeros(k); n_clusters];
    for i in 0..n {
        let we = weights[i] * residuals[i];
        let s = &mut scores[cluster[i]];
        for a in 0..k {
            s[a] += we * columns[a][i];
        }
    }
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for s in &scores {
        meat += s * s.transpose();
    }
    let g = n_clusters as f64;
    let factor = g / (g - 1.0) * (n as f64 - 1.0) / (n - dof_k) as f64;
    let v = &bread * meat * &bread * factor;
    Ok((&v + v.transpose()) * 0.5)
}
