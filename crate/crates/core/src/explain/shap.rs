//! Path-dependent tree SHAP.
//!
//! Exact Shapley values for tree ensembles where a coalition's value is the
//! tree output with absent features integrated out along the tree's own
//! cover-weighted branches. The recursion carries, for every unique feature
//! on the current path, the fraction of "zero" (feature absent) and "one"
//! (feature present) paths flowing through it, together with permutation
//! weights that are extended at each split and unwound at the leaves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{GbtModel, Node, Tree};

const NO_FEATURE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElement { feature, zero_fraction, one_fraction, pweight: if depth == 0 { 1.0 } else { 0.0 } });
    let denom = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / denom;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / denom;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let PathElement { zero_fraction, one_fraction, .. } = path[index];
    let denom = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * denom / ((i + 1) as f64 * one_fraction);
            next_one = tmp - path[i].pweight * zero_fraction * (depth - i) as f64 / denom;
        } else {
            path[i].pweight = path[i].pweight * denom / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElement { zero_fraction, one_fraction, .. } = path[index];
    let denom = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next_one * denom / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one = path[i].pweight - tmp * zero_fraction * (depth - i) as f64 / denom;
        } else if zero_fraction != 0.0 {
            total += path[i].pweight / zero_fraction * denom / (depth - i) as f64;
        }
    }
    total
}

fn recurse(
    tree: &Tree,
    row: &[f64],
    phi: &mut [f64],
    node: usize,
    parent: &[PathElement],
    zero_fraction: f64,
    one_fraction: f64,
    feature: usize,
) {
    let mut path = parent.to_vec();
    extend_path(&mut path, zero_fraction, one_fraction, feature);
    match &tree.nodes[node] {
        Node::Leaf { weight, .. } => {
            for i in 1..path.len() {
                let w = unwound_path_sum(&path, i);
                let el = path[i];
                phi[el.feature] += w * (el.one_fraction - el.zero_fraction) * weight;
            }
        }
        Node::Split { feature: split, threshold, left, right, cover } => {
            let (hot, cold) = if row[*split] < *threshold { (*left, *right) } else { (*right, *left) };
            let hot_zero = tree.nodes[hot].cover() / cover;
            let cold_zero = tree.nodes[cold].cover() / cover;
            let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
            if let Some(k) = path.iter().position(|e| e.feature == *split) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, k);
            }
            recurse(tree, row, phi, hot, &path, hot_zero * incoming_zero, incoming_one, *split);
            recurse(tree, row, phi, cold, &path, cold_zero * incoming_zero, 0.0, *split);
        }
    }
}

/// Adds `scale ×` the SHAP values of one tree for `row` into `phi`.
pub fn tree_shap(tree: &Tree, row: &[f64], scale: f64, phi: &mut [f64]) {
    let mut local = vec![0.0; phi.len()];
    recurse(tree, row, &mut local, 0, &[], 1.0, 1.0, NO_FEATURE);
    for (p, l) in phi.iter_mut().zip(local) {
        *p += scale * l;
    }
}

/// Additive explanation of one prediction in log-price units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Expected model output over the training cover.
    pub base: f64,
    pub values: Vec<f64>,
}

impl Attribution {
    pub fn total(&self) -> f64 {
        self.base + self.values.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub listing_id: u64,
    pub base: f64,
    pub values: Vec<f64>,
}

/// Expected output of the ensemble: base score plus each tree's
/// cover-weighted mean leaf.
pub fn expected_value(model: &GbtModel) -> f64 {
    model.base_score + model.params.learning_rate * model.trees.iter().map(Tree::expected_value).sum::<f64>()
}

/// SHAP values of a boosted model for one row; `base + Σ values` equals the
/// model's prediction.
pub fn shap_values(model: &GbtModel, row: &[f64]) -> Result<Attribution> {
    if row.len() != model.width {
        return Err(Error::WidthMismatch { expected: model.width, got: row.len() });
    }
    let mut values = vec![0.0; model.width];
    for tree in &model.trees {
        tree_shap(tree, row, model.params.learning_rate, &mut values);
    }
    Ok(Attribution { base: expected_value(model), values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSample {
    pub listing_id: u64,
    pub feature_value: f64,
    pub shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    pub index: usize,
    pub name: String,
    pub mean_abs: f64,
    pub mean_signed: f64,
    /// Per-row pairs for beeswarm plots; filled for the top-ranked features only.
    pub samples: Vec<ShapSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub base: f64,
    pub rows: usize,
    /// Ranked by mean absolute attribution, descending.
    pub features: Vec<FeatureAttribution>,
}

/// Ranks features by mean |SHAP| over the rows of `x`.
pub fn shap_summary(model: &GbtModel, x: &Matrix, ids: &[u64], names: &[String], top_k: usize) -> Result<ShapSummary> {
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if ids.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), ids.len()));
    }
    if names.len() != model.width {
        return Err(Error::LengthMismatch(model.width, names.len()));
    }
    let rows: Vec<Attribution> = (0..x.rows()).into_par_iter().map(|i| shap_values(model, x.row(i))).collect::<Result<_>>()?;
    let n = rows.len() as f64;
    let mut features: Vec<FeatureAttribution> = (0..model.width)
        .map(|j| FeatureAttribution {
            index: j,
            name: names[j].clone(),
            mean_abs: rows.iter().map(|a| a.values[j].abs()).sum::<f64>() / n,
            mean_signed: rows.iter().map(|a| a.values[j]).sum::<f64>() / n,
            samples: Vec::new(),
        })
        .collect();
    features.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs).then(a.index.cmp(&b.index)));
    for f in features.iter_mut().take(top_k) {
        f.samples = rows
            .iter()
            .enumerate()
            .map(|(i, a)| ShapSample { listing_id: ids[i], feature_value: x.get(i, f.index), shap: a.values[f.index] })
            .collect();
    }
    Ok(ShapSummary { base: expected_value(model), rows: x.rows(), features })
}
