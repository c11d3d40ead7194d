//! Householder QR that processes columns in their given order and skips
//! columns that are numerically dependent on the ones already kept.

pub(crate) struct OrderedQr {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// Upper-triangular factor over kept columns, stored by column.
    pub r: Vec<Vec<f64>>,
    /// Leading `kept.len()` entries of Qᵀb.
    pub qtb: Vec<f64>,
}

impl OrderedQr {
    /// Solves R x = Qᵀb.
    pub fn solve(&self) -> Vec<f64> {
        let k = self.kept.len();
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = self.qtb[i];
            for j in i + 1..k {
                s -= self.r[j][i] * x[j];
            }
            x[i] = s / self.r[i][i];
        }
        x
    }
}

fn norm(v: &[f64]) -> f64 {
    // scaled to avoid overflow on large columns
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt()
}

/// A column is dropped when its remaining norm after projecting out the
/// kept columns is below `rel_tol` times its own norm, or when its own norm
/// is below `rel_tol` times the largest column norm.
pub(crate) fn ordered_qr(columns: &[Vec<f64>], rhs: &[f64], rel_tol: f64) -> OrderedQr {
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut b = rhs.to_vec();
    let own: Vec<f64> = columns.iter().map(|c| norm(c)).collect();
    let largest = own.iter().fold(0.0_f64, |m, x| m.max(*x));

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut rank = 0;
    for j in 0..a.len() {
        let tail = norm(&a[j][rank..]);
        if rank >= n || own[j] <= rel_tol * largest || tail <= rel_tol * own[j] {
            dropped.push(j);
            continue;
        }
        let alpha = if a[j][rank] >= 0.0 { -tail } else { tail };
        let mut u: Vec<f64> = a[j][rank..].to_vec();
        u[0] -= alpha;
        let beta: f64 = u.iter().map(|x| x * x).sum();
        let reflect = |v: &mut [f64]| {
            let s: f64 = u.iter().zip(v.iter()).map(|(p, q)| p * q).sum();
            let f = 2.0 * s / beta;
            for (vi, ui) in v.iter_mut().zip(&u) {
                *vi -= f * ui;
            }
        };
        for col in a.iter_mut().skip(j + 1) {
            reflect(&mut col[rank..]);
        }
        reflect(&mut b[rank..]);
        let mut rc = a[j][..rank].to_vec();
        rc.push(alpha);
        r_cols.push(rc);
        kept.push(j);
        rank += 1;
    }
    OrderedQr {
        kept,
        dropped,
        r: r_cols,
        qtb: b[..rank].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_duplicate_is_dropped() {
        let c0 = vec![1.0, 2.0, 3.0, 4.0];
        let c1 = vec![0.5, -1.0, 2.0, 0.0];
        let c2: Vec<f64> = c0.iter().zip(&c1).map(|(a, b)| 2.0 * a - b).collect();
        let y = vec![1.0, 0.0, 2.0, 1.0];
        let qr = ordered_qr(&[c0.clone(), c1.clone(), c2.clone()], &y, 1e-9);
        assert_eq!(qr.kept, vec![0, 1]);
        assert_eq!(qr.dropped, vec![2]);

        // reordering changes which column goes
        let qr = ordered_qr(&[c2, c0, c1], &y, 1e-9);
        assert_eq!(qr.dropped, vec![2]);
    }

    #[test]
    fn exact_solution() {
        let c0 = vec![1.0, 0.0, 1.0];
        let c1 = vec![0.0, 1.0, 1.0];
        let y: Vec<f64> = (0..3).map(|i| 3.0 * c0[i] - 2.0 * c1[i]).collect();
        let x = ordered_qr(&[c0, c1], &y, 1e-9).solve();
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_column_dropped() {
        let qr = ordered_qr(&[vec![1.0, 2.0], vec![0.0, 1e-14]], &[1.0, 1.0], 1e-9);
        assert_eq!(qr.kept, vec![0]);
    }
}
