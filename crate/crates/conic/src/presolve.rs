#[cfg(test)]
use nalgebra::DMatrix;

use crate::problem::SparseRow;

/// Outcome of the row-rank reduction.
#[derive(Debug, Clone)]
pub struct RowReduction {
    /// Rows kept, in original order.
    pub kept: Vec<usize>,
    /// Rows that are linear combinations of kept rows with a consistent rhs.
    pub dropped: Vec<usize>,
    /// First row found to be dependent with an inconsistent rhs.
    pub inconsistent: Option<usize>,
}

fn sparse_dot(a: &SparseRow, b: &SparseRow) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Greedy in-order selection of a maximal independent row set.
///
/// Works on the Gram matrix with an incrementally grown Cholesky factor. A row
/// is dependent when its squared residual after projection onto the kept rows
/// falls below `rel_tol` times its squared norm.
pub fn reduce_rows(rows: &[SparseRow], rhs: &[f64], rel_tol: f64, cons_tol: f64) -> RowReduction {
    let m = rows.len();
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    let mut inconsistent = None;
    // lower-triangular factor of the kept Gram matrix, row-major growth
    let mut l: Vec<Vec<f64>> = Vec::new();
    for r in 0..m {
        let grr = sparse_dot(&rows[r], &rows[r]);
        if grr == 0.0 {
            if rhs[r].abs() > cons_tol && inconsistent.is_none() {
                inconsistent = Some(r);
            }
            dropped.push(r);
            continue;
        }
        let g: Vec<f64> = kept.iter().map(|&k| sparse_dot(&rows[k], &rows[r])).collect();
        // forward solve L w = g
        let mut w = vec![0.0; kept.len()];
        for i in 0..kept.len() {
            let mut s = g[i];
            for (j, wj) in w.iter().enumerate().take(i) {
                s -= l[i][j] * wj;
            }
            w[i] = s / l[i][i];
        }
        let d = grr - w.iter().map(|x| x * x).sum::<f64>();
        if d > rel_tol * grr {
            let mut row = w.clone();
            row.push(d.sqrt());
            l.push(row);
            kept.push(r);
        } else {
            // back solve L^T c = w for the combination coefficients
            let n = kept.len();
            let mut c = vec![0.0; n];
            for i in (0..n).rev() {
                let mut s = w[i];
                for j in i + 1..n {
                    s -= l[j][i] * c[j];
                }
                c[i] = s / l[i][i];
            }
            let predicted: f64 = c.iter().zip(&kept).map(|(ci, &k)| ci * rhs[k]).sum();
            let scale = 1.0 + rhs[r].abs() + predicted.abs();
            if (rhs[r] - predicted).abs() > cons_tol * scale && inconsistent.is_none() {
                inconsistent = Some(r);
            }
            dropped.push(r);
        }
    }
    RowReduction { kept, dropped, inconsistent }
}

/// Dense copy of the kept rows.
#[cfg(test)]
pub fn dense_rows(rows: &[SparseRow], n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(rows.len(), n);
    for (r, row) in rows.iter().enumerate() {
        for &(k, v) in row {
            a[(r, k)] += v;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_dependent_and_inconsistent_rows() {
        let rows = vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(1, 1.0), (2, 1.0)],
            vec![(0, 1.0), (1, 2.0), (2, 1.0)], // row0 + row1
            vec![(0, 2.0), (1, 2.0)],           // 2 row0, inconsistent rhs
        ];
        let rhs = vec![1.0, 2.0, 3.0, 5.0];
        let red = reduce_rows(&rows, &rhs, 1e-14, 1e-9);
        assert_eq!(red.kept, vec![0, 1]);
        assert_eq!(red.dropped, vec![2, 3]);
        assert_eq!(red.inconsistent, Some(3));
    }

    #[test]
    fn kept_rows_have_full_rank() {
        let rows = vec![
            vec![(0, 1.0)],
            vec![(0, 1.0)],
            vec![(1, 3.0)],
            vec![(0, 1.0), (1, 1.0)],
            vec![(2, 1.0)],
        ];
        let rhs = vec![1.0, 1.0, 3.0, 2.0, 0.0];
        let red = reduce_rows(&rows, &rhs, 1e-14, 1e-9);
        assert_eq!(red.kept, vec![0, 2, 4]);
        assert!(red.inconsistent.is_none());
        let kept: Vec<SparseRow> = red.kept.iter().map(|&k| rows[k].clone()).collect();
        let a = dense_rows(&kept, 3);
        assert_eq!(a.rank(1e-12), 3);
    }
}
