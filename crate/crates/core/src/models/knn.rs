use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Mean target of the `k` nearest training rows by Euclidean distance.
/// Equal distances are ordered by row index.
pub fn knn_predict(train: &Matrix, target: &[f64], row: &[f64], k: usize) -> Result<f64> {
    let n = train.rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if target.len() != n {
        return Err(Error::LengthMismatch(n, target.len()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidSpec { name: "k", value: k as f64 });
    }
    if row.len() != train.cols() {
        return Err(Error::WidthMismatch { expected: train.cols(), got: row.len() });
    }
    let mut dist: Vec<(f64, usize)> = train
        .iter_rows()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < n {
        dist.select_nth_unstable_by(k - 1, order);
    }
    let mut nearest = dist[..k].to_vec();
    // Fixed summation order keeps results independent of selection internals.
    nearest.sort_by(order);
    Ok(nearest.iter().map(|&(_, i)| target[i]).sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train: Matrix,
    pub target: Vec<f64>,
}

impl KnnModel {
    pub fn fit(train: &Matrix, target: &[f64], k: usize) -> Result<Self> {
        if train.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if target.len() != train.rows() {
            return Err(Error::LengthMismatch(train.rows(), target.len()));
        }
        if k == 0 || k > train.rows() {
            return Err(Error::InvalidSpec { name: "k", value: k as f64 });
        }
        Ok(KnnModel { k, train: train.clone(), target: target.to_vec() })
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        knn_predict(&self.train, &self.target, row, self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [5.0, 5.0]]).unwrap();
        (x, vec![1.0, 2.0, 3.0, 4.0, 10.0])
    }

    #[test]
    fn k1_on_training_row() {
        let (x, y) = fixture();
        assert_eq!(knn_predict(&x, &y, &[5.0, 5.0], 1).unwrap(), 10.0);
    }

    #[test]
    fn k_equals_n_is_global_mean() {
        let (x, y) = fixture();
        assert_eq!(knn_predict(&x, &y, &[100.0, -3.0], 5).unwrap(), 4.0);
    }

    #[test]
    fn equidistant_ties_use_lowest_rows() {
        // Rows 1, 2, 3 are all at distance 1 from the origin query offset.
        let (x, y) = fixture();
        let x = x.select_rows(&[1, 2, 3]);
        let y = vec![y[1], y[2], y[3]];
        assert_eq!(knn_predict(&x, &y, &[0.0, 0.0], 2).unwrap(), 2.5);
    }

    #[test]
    fn errors() {
        let (x, y) = fixture();
        assert!(matches!(knn_predict(&Matrix::zeros(0, 2), &[], &[0.0, 0.0], 1), Err(Error::EmptyDataset)));
        assert!(knn_predict(&x, &y, &[0.0, 0.0], 0).is_err());
        assert!(knn_predict(&x, &y, &[0.0, 0.0], 6).is_err());
        assert!(matches!(knn_predict(&x, &y, &[0.0], 1), Err(Error::WidthMismatch { .. })));
    }
}
