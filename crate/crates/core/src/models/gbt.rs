//! Gradient-boosted regression trees with second-order split gains, L2 leaf
//! regularization (`lambda`), a minimum split gain (`gamma`), shrinkage and
//! row subsampling.
//!
//! With squared error each row contributes gradient `pred - y` and hessian 1,
//! so for a node with gradient sum `G` and row count `H`:
//!
//! ```text
//! gain   = ½ [G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ
//! weight = −G / (H+λ)
//! ```
//!
//! and every round adds `learning_rate × weight` to the rows' predictions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedData, GrowParams, Tree};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub subsample: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 4,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            subsample: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, value| Err(Error::InvalidSpec { name, value });
        if self.rounds < 1 {
            return bad("rounds", self.rounds as f64);
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate", self.learning_rate);
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda", self.lambda);
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma", self.gamma);
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight", self.min_child_weight);
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample", self.subsample);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    /// Mean of the training target.
    pub base_score: f64,
    pub params: GbtParams,
    pub width: usize,
    /// Leaf weights are stored unscaled; prediction multiplies by the
    /// learning rate.
    pub trees: Vec<Tree>,
}

impl GbtModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        self.check_width(row)?;
        Ok(self.predict_unchecked(row, self.trees.len()))
    }

    /// Prediction using only the first `n_trees` trees.
    pub fn predict_staged(&self, row: &[f64], n_trees: usize) -> Result<f64> {
        self.check_width(row)?;
        Ok(self.predict_unchecked(row, n_trees.min(self.trees.len())))
    }

    pub(crate) fn predict_unchecked(&self, row: &[f64], n_trees: usize) -> f64 {
        let sum: f64 = self.trees[..n_trees].iter().map(|t| t.predict(row)).sum();
        self.base_score + self.params.learning_rate * sum
    }

    pub(crate) fn check_width(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.width {
            return Err(Error::WidthMismatch { expected: self.width, got: row.len() });
        }
        Ok(())
    }
}

/// True when every target value is identical; a model fitted on such data
/// can only reproduce its base score.
pub fn is_degenerate_target(target: &[f64]) -> bool {
    target.windows(2).all(|w| w[0] == w[1])
}

/// Fits the ensemble. `seed` drives row subsampling only, so with
/// `subsample = 1` the result does not depend on it.
pub fn gbt_fit(x: &Matrix, target: &[f64], params: GbtParams, seed: u64) -> Result<GbtModel> {
    params.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if target.len() != n {
        return Err(Error::LengthMismatch(n, target.len()));
    }
    let base_score = target.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let data = BinnedData::new(x);
    let grow = GrowParams {
        lambda: params.lambda,
        gamma: params.gamma,
        min_child_weight: params.min_child_weight,
        max_depth: params.max_depth,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        for ((g, p), y) in grad.iter_mut().zip(&pred).zip(target) {
            *g = p - y;
        }
        let rows: Vec<u32> = if params.subsample < 1.0 {
            (0..n as u32).filter(|_| rng.random::<f64>() < params.subsample).collect()
        } else {
            (0..n as u32).collect()
        };
        if rows.is_empty() {
            continue;
        }
        let tree = grow_tree(&data, x, &grad, rows, grow);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    Ok(GbtModel { base_score, params, width: x.cols(), trees })
}
