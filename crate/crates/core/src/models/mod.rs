//! Regressors behind one contract: fit on a matrix and log-price target,
//! predict a log price per row.

pub mod gbt;
pub mod knn;
pub mod ridge;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use gbt::{gbt_fit, is_degenerate_target, GbtModel, GbtParams};
pub use knn::{knn_predict, KnnModel};
pub use ridge::{ridge_fit, RidgeModel};
pub use tree::{tree_fit, Node, Tree, TreeModel, TreeParams};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbt,
    DecisionTree,
    Ridge,
    Knn,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Gbt => "GBT",
            ModelKind::DecisionTree => "DecisionTree",
            ModelKind::Ridge => "Ridge",
            ModelKind::Knn => "KNN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorSpec {
    Gbt(GbtParams),
    DecisionTree(TreeParams),
    Ridge { alpha: f64 },
    Knn { k: usize },
}

impl RegressorSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            RegressorSpec::Gbt(_) => ModelKind::Gbt,
            RegressorSpec::DecisionTree(_) => ModelKind::DecisionTree,
            RegressorSpec::Ridge { .. } => ModelKind::Ridge,
            RegressorSpec::Knn { .. } => ModelKind::Knn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegressorSpec::Gbt(p) => p.validate(),
            RegressorSpec::DecisionTree(p) if p.min_samples_leaf == 0 => {
                Err(Error::InvalidSpec { name: "min_samples_leaf", value: 0.0 })
            }
            RegressorSpec::DecisionTree(_) => Ok(()),
            RegressorSpec::Ridge { alpha } if !(*alpha >= 0.0) => Err(Error::InvalidSpec { name: "alpha", value: *alpha }),
            RegressorSpec::Ridge { .. } => Ok(()),
            RegressorSpec::Knn { k: 0 } => Err(Error::InvalidSpec { name: "k", value: 0.0 }),
            RegressorSpec::Knn { .. } => Ok(()),
        }
    }

    /// Flat name → value view for reports.
    pub fn hyperparameters(&self) -> BTreeMap<&'static str, f64> {
        match self {
            RegressorSpec::Gbt(p) => BTreeMap::from([
                ("rounds", p.rounds as f64),
                ("learning_rate", p.learning_rate),
                ("max_depth", p.max_depth as f64),
                ("lambda", p.lambda),
                ("gamma", p.gamma),
                ("min_child_weight", p.min_child_weight),
                ("subsample", p.subsample),
            ]),
            RegressorSpec::DecisionTree(p) => BTreeMap::from([
                ("max_depth", p.max_depth as f64),
                ("min_samples_leaf", p.min_samples_leaf as f64),
            ]),
            RegressorSpec::Ridge { alpha } => BTreeMap::from([("alpha", *alpha)]),
            RegressorSpec::Knn { k } => BTreeMap::from([("k", *k as f64)]),
        }
    }

    pub fn describe(&self) -> String {
        let params: Vec<String> = self.hyperparameters().iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.kind().label(), params.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Gbt(GbtModel),
    DecisionTree(TreeModel),
    Ridge(RidgeModel),
    Knn(KnnModel),
}

impl FittedModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Gbt(m) => m.predict(row),
            FittedModel::DecisionTree(m) => m.predict(row),
            FittedModel::Ridge(m) => m.predict(row),
            FittedModel::Knn(m) => m.predict(row),
        }
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Gbt(_) => ModelKind::Gbt,
            FittedModel::DecisionTree(_) => ModelKind::DecisionTree,
            FittedModel::Ridge(_) => ModelKind::Ridge,
            FittedModel::Knn(_) => ModelKind::Knn,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FittedModel::Gbt(m) => m.width,
            FittedModel::DecisionTree(m) => m.width,
            FittedModel::Ridge(m) => m.coefficients.len(),
            FittedModel::Knn(m) => m.train.cols(),
        }
    }

    pub fn as_gbt(&self) -> Option<&GbtModel> {
        match self {
            FittedModel::Gbt(m) => Some(m),
            _ => None,
        }
    }
}

/// Fits any regressor. `seed` only matters for subsampled boosting.
pub fn fit(spec: &RegressorSpec, x: &Matrix, target: &[f64], seed: u64) -> Result<FittedModel> {
    spec.validate()?;
    Ok(match spec {
        RegressorSpec::Gbt(p) => FittedModel::Gbt(gbt_fit(x, target, *p, seed)?),
        RegressorSpec::DecisionTree(p) => FittedModel::DecisionTree(tree_fit(x, target, *p)?),
        RegressorSpec::Ridge { alpha } => FittedModel::Ridge(ridge_fit(x, target, *alpha)?),
        RegressorSpec::Knn { k } => FittedModel::Knn(KnnModel::fit(x, target, *k)?),
    })
}
