//! Two-component PCA by power iteration with deflation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_ITERATIONS: usize = 200_000;
const TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaOptions {
    /// Divide centered columns by their standard deviation (constant
    /// columns are only centered).
    pub standardize: bool,
}

impl Default for PcaOptions {
    fn default() -> Self {
        PcaOptions { standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Two orthonormal directions; the largest-magnitude entry of each is positive.
    pub components: [Vec<f64>; 2],
    /// Descending, non-negative.
    pub eigenvalues: [f64; 2],
    pub coords: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl PcaProjection {
    /// Maps projected coordinates back to the input space.
    pub fn reconstruct(&self, coord: [f64; 2]) -> Vec<f64> {
        (0..self.mean.len())
            .map(|j| {
                let z = coord[0] * self.components[0][j] + coord[1] * self.components[1][j];
                self.mean[j] + self.scale[j] * z
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for u in against {
        let p = dot(v, u);
        v.iter_mut().zip(u).for_each(|(x, ui)| *x -= p * ui);
    }
}

fn mat_vec(c: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    (0..d).map(|i| dot(&c[i * d..(i + 1) * d], v)).collect()
}

/// Covariance (n − 1 denominator) of the centered, optionally scaled columns.
fn covariance(z: &Matrix) -> Vec<f64> {
    let (n, d) = (z.rows(), z.cols());
    let mut c = vec![0.0; d * d];
    for row in z.iter_rows() {
        for i in 0..d {
            if row[i] == 0.0 {
                continue;
            }
            for j in i..d {
                c[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            c[i * d + j] /= (n - 1) as f64;
            c[j * d + i] = c[i * d + j];
        }
    }
    c
}

/// Dominant eigenpair of a symmetric positive semidefinite matrix,
/// restricted to the complement of `found`. `trace` is that of the
/// undeflated covariance and sets the scale below which the remainder is
/// treated as zero.
fn dominant_eigenpair(c: &[f64], d: usize, found: &[Vec<f64>], trace: f64) -> (f64, Vec<f64>) {
    let mut v: Vec<f64> = (0..d).map(|j| 1.0 + 0.1 * j as f64 / d as f64).collect();
    orthogonalize(&mut v, found);
    if normalize(&mut v) < 1e-8 {
        // Start vector lies in the span already found; take the basis
        // vector with the largest remaining component.
        let best = (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                orthogonalize(&mut e, found);
                (dot(&e, &e), e)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("d >= 1");
        v = best.1;
        normalize(&mut v);
    }
    for _ in 0..MAX_ITERATIONS {
        let mut w = mat_vec(c, d, &v);
        orthogonalize(&mut w, found);
        if dot(&w, &w).sqrt() <= 1e-13 * trace {
            return (0.0, v);
        }
        orthogonalize(&mut w, found);
        let norm = normalize(&mut w);
        if norm <= 1e-13 * trace {
            return (0.0, v);
        }
        let diff = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = w;
        if diff < TOLERANCE {
            break;
        }
    }
    let lambda = dot(&v, &mat_vec(c, d, &v)).max(0.0);
    (lambda, v)
}

fn fix_sign(v: &mut [f64]) {
    let lead = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .map(|(_, x)| *x)
        .unwrap_or(0.0);
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn pca_top2(x: &Matrix) -> Result<PcaProjection> {
    pca_top2_with(x, PcaOptions::default())
}

pub fn pca_top2_with(x: &Matrix, options: PcaOptions) -> Result<PcaProjection> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::TooFewRecords(n));
    }
    if d < 2 {
        return Err(Error::WidthMismatch { expected: 2, got: d });
    }
    let mean: Vec<f64> = (0..d).map(|j| x.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let std: Vec<f64> = (0..d)
        .map(|j| (x.iter_rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
        .collect();
    if std.iter().all(|s| *s == 0.0) {
        return Err(Error::DegenerateMatrix);
    }
    let scale: Vec<f64> = std.iter().map(|&s| if options.standardize && s > 0.0 { s } else { 1.0 }).collect();
    let mut z = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            z.set(i, j, (x.get(i, j) - mean[j]) / scale[j]);
        }
    }
    let mut c = covariance(&z);
    let trace: f64 = (0..d).map(|i| c[i * d + i]).sum();
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut eigenvalues = [0.0; 2];
    for slot in &mut eigenvalues {
        let (lambda, mut v) = dominant_eigenpair(&c, d, &found, trace);
        fix_sign(&mut v);
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] -= lambda * v[i] * v[j];
            }
        }
        *slot = lambda;
        found.push(v);
    }
    let coords = z.iter_rows().map(|r| [dot(r, &found[0]), dot(r, &found[1])]).collect();
    let second = found.pop().expect("two components");
    let first = found.pop().expect("two components");
    Ok(PcaProjection { components: [first, second], eigenvalues, coords, mean, scale })
}
