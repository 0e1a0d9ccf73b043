use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Linear model minimizing `‖y − Xβ − b‖² + alpha‖β‖²`; the intercept is
/// not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub alpha: f64,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.coefficients.len() {
            return Err(Error::WidthMismatch { expected: self.coefficients.len(), got: row.len() });
        }
        Ok(self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>())
    }
}

/// Solves the centered normal equations `(XcᵀXc + αI) β = Xcᵀyc` by
/// Cholesky factorization, then recovers `b = ȳ − x̄ᵀβ`.
pub fn ridge_fit(x: &Matrix, target: &[f64], alpha: f64) -> Result<RidgeModel> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidSpec { name: "alpha", value: alpha });
    }
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if target.len() != n {
        return Err(Error::LengthMismatch(n, target.len()));
    }
    let mut x_mean = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n as f64);
    let y_mean = target.iter().sum::<f64>() / n as f64;

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for (row, y) in x.iter_rows().zip(target) {
        for j in 0..d {
            centered[j] = row[j] - x_mean[j];
        }
        let yc = y - y_mean;
        for j in 0..d {
            let cj = centered[j];
            if cj == 0.0 {
                continue;
            }
            rhs[j] += cj * yc;
            for k in j..d {
                gram[j * d + k] += cj * centered[k];
            }
        }
    }
    for j in 0..d {
        gram[j * d + j] += alpha;
        for k in 0..j {
            gram[j * d + k] = gram[k * d + j];
        }
    }
    let coefficients = cholesky_solve(&mut gram, d, rhs)?;
    let intercept = y_mean - x_mean.iter().zip(&coefficients).map(|(m, b)| m * b).sum::<f64>();
    Ok(RidgeModel { alpha, coefficients, intercept })
}

/// In-place Cholesky of a symmetric positive definite `d × d` matrix
/// followed by forward and back substitution.
fn cholesky_solve(a: &mut [f64], d: usize, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let scale = (0..d).map(|i| a[i * d + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > 1e-12 * scale) {
            return Err(Error::SingularSystem);
        }
        let l_jj = diag.sqrt();
        a[j * d + j] = l_jj;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / l_jj;
        }
    }
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * d + k] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in i + 1..d {
            s -= a[k * d + i] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    Ok(b)
}
