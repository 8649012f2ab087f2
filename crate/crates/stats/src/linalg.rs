//! Minimal dense linear algebra for least squares: a row-major matrix and
//! a Householder QR solver sized for cohort-scale designs.

use crate::error::StatError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map(|c| c.len()).unwrap_or(0);
        let mut m = Mat::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged column set");
            for (i, &v) in col.iter().enumerate() {
                *m.at_mut(i, j) = v;
            }
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * v[j]).sum())
            .collect()
    }
}

/// Least-squares solution of `X b = y` via Householder QR, plus
/// `(X'X)^{-1}` reconstructed from `R`. Fails when a diagonal of `R`
/// collapses relative to the norm of its column, naming the offending
/// columns.
#[derive(Debug)]
pub(crate) struct QrSolution {
    pub beta: Vec<f64>,
    pub xtx_inv: Vec<Vec<f64>>,
}

pub(crate) fn qr_least_squares(
    x: &Mat,
    y: &[f64],
    labels: &[String],
) -> Result<QrSolution, StatError> {
    let n = x.rows;
    let p = x.cols;
    assert_eq!(n, y.len());
    assert!(n >= p, "need at least as many rows as columns");

    let mut a = x.clone();
    let mut qty = y.to_vec();
    let col_norms: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| a.at(i, j) * a.at(i, j)).sum::<f64>().sqrt())
        .collect();

    // Householder triangularization, applying each reflector to y as well.
    for j in 0..p {
        let mut norm = 0.0;
        for i in j..n {
            norm += a.at(i, j) * a.at(i, j);
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue; // flagged by the rank check below
        }
        let alpha = if a.at(j, j) >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| a.at(i, j)).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|w| w * w).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in j..p {
            let dot: f64 = (j..n).map(|i| v[i - j] * a.at(i, col)).sum();
            let scale = 2.0 * dot / vnorm2;
            for i in j..n {
                *a.at_mut(i, col) -= scale * v[i - j];
            }
        }
        let dot: f64 = (j..n).map(|i| v[i - j] * qty[i]).sum();
        let scale = 2.0 * dot / vnorm2;
        for i in j..n {
            qty[i] -= scale * v[i - j];
        }
    }

    // rank check on the diagonal of R, relative to each column's scale
    let mut dependent = Vec::new();
    for j in 0..p {
        let tol = 1e-10 * col_norms[j].max(1e-300);
        if a.at(j, j).abs() <= tol {
            dependent.push(labels.get(j).cloned().unwrap_or_else(|| format!("column {j}")));
        }
    }
    if !dependent.is_empty() {
        return Err(StatError::RankDeficient(dependent.join(", ")));
    }

    // back-substitute R b = Q'y
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let mut acc = qty[j];
        for k in j + 1..p {
            acc -= a.at(j, k) * beta[k];
        }
        beta[j] = acc / a.at(j, j);
    }

    // R^{-1} by back substitution on the identity, then
    // (X'X)^{-1} = R^{-1} R^{-T}
    let mut rinv = vec![vec![0.0; p]; p];
    for col in 0..p {
        for j in (0..=col).rev() {
            let mut acc = if j == col { 1.0 } else { 0.0 };
            for k in j + 1..=col {
                acc -= a.at(j, k) * rinv[k][col];
            }
            rinv[j][col] = acc / a.at(j, j);
        }
    }
    let mut xtx_inv = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in i.max(j)..p {
                acc += rinv[i][k] * rinv[j][k];
            }
            xtx_inv[i][j] = acc;
        }
    }

    Ok(QrSolution { beta, xtx_inv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("c{j}")).collect()
    }

    #[test]
    fn solves_exact_line() {
        let x = Mat::from_columns(&[vec![1.0; 5], vec![0.0, 1.0, 2.0, 3.0, 4.0]]);
        let y: Vec<f64> = (0..5).map(|i| 1.0 + 2.0 * i as f64).collect();
        let sol = qr_least_squares(&x, &y, &labels(2)).unwrap();
        assert!((sol.beta[0] - 1.0).abs() < 1e-12);
        assert!((sol.beta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_dependent_column() {
        let base = vec![1.0, 2.0, 3.0, 4.0];
        let x = Mat::from_columns(&[vec![1.0; 4], base.clone(), base.iter().map(|v| 2.0 * v).collect()]);
        let err = qr_least_squares(&x, &[0.0; 4], &labels(3)).unwrap_err();
        match err {
            StatError::RankDeficient(cols) => assert!(cols.contains("c2")),
            other => panic!("expected rank error, got {other}"),
        }
    }

    #[test]
    fn xtx_inverse_matches_direct_product() {
        let x = Mat::from_columns(&[
            vec![1.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.1, 0.9, 0.4, 0.7, 0.2],
            vec![3.0, -1.0, 2.0, 0.5, 1.5],
        ]);
        let sol = qr_least_squares(&x, &[1.0, 2.0, 3.0, 4.0, 5.0], &labels(3)).unwrap();
        // multiply (X'X) * claimed inverse and compare with identity
        let p = 3;
        let mut xtx = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in 0..p {
                for r in 0..x.rows {
                    xtx[i][j] += x.at(r, i) * x.at(r, j);
                }
            }
        }
        for i in 0..p {
            for j in 0..p {
                let mut prod = 0.0;
                for k in 0..p {
                    prod += xtx[i][k] * sol.xtx_inv[k][j];
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((prod - expected).abs() < 1e-9, "({i},{j}) -> {prod}");
            }
        }
    }
}
