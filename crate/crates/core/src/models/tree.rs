//! Regression trees and the exact greedy split search shared by the boosted
//! ensemble and the single CART tree.
//!
//! Every column is indexed by its sorted distinct values. A node's histogram
//! over those values is lossless, so scanning the non-empty bins in order
//! visits exactly the candidate thresholds an exhaustive sort of the node's
//! rows would: midpoints between consecutive distinct values present in the
//! node. Only non-zero entries are stored per row; the zero bin of each
//! column is recovered from the node totals. One-hot rows carry just a
//! handful of non-zeros, which keeps a level at O(rows × non-zeros).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A tree node. Rows go left iff `value < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Training rows routed through this node.
        cover: f64,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// Nodes in pre-order; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64, cover: f64) -> Self {
        Tree { nodes: vec![Node::Leaf { weight, cover }] }
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if row[*feature] < *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return at,
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { weight, .. } => weight,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(self, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Cover-weighted mean leaf value, i.e. the expected output over the
    /// training distribution.
    pub fn expected_value(&self) -> f64 {
        let root = self.nodes[0].cover();
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { weight, cover } => Some(weight * cover / root),
                Node::Split { .. } => None,
            })
            .sum()
    }
}

/// Column-indexed view of a training matrix.
pub(crate) struct BinnedData {
    n_cols: usize,
    /// Sorted distinct values per column.
    values: Vec<Vec<f64>>,
    /// First flat bin of each column; `offsets[n_cols]` is the bin count.
    offsets: Vec<usize>,
    zero_bin: Vec<Option<usize>>,
    row_ptr: Vec<usize>,
    /// (column, flat bin) for every non-zero cell.
    entries: Vec<(u32, u32)>,
}

impl BinnedData {
    pub(crate) fn new(x: &Matrix) -> Self {
        let n_cols = x.cols();
        let mut values = Vec::with_capacity(n_cols);
        let mut offsets = Vec::with_capacity(n_cols + 1);
        let mut zero_bin = Vec::with_capacity(n_cols);
        let mut total = 0;
        for j in 0..n_cols {
            let mut col = x.column(j);
            col.sort_by(f64::total_cmp);
            col.dedup_by(|a, b| a == b);
            offsets.push(total);
            zero_bin.push(col.iter().position(|v| *v == 0.0).map(|p| total + p));
            total += col.len();
            values.push(col);
        }
        offsets.push(total);
        let mut row_ptr = Vec::with_capacity(x.rows() + 1);
        let mut entries = Vec::new();
        row_ptr.push(0);
        for row in x.iter_rows() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    let pos = values[j]
                        .binary_search_by(|probe| probe.total_cmp(v))
                        .unwrap_or_else(|_| values[j].iter().position(|p| p == v).expect("value indexed"));
                    entries.push((j as u32, (offsets[j] + pos) as u32));
                }
            }
            row_ptr.push(entries.len());
        }
        BinnedData { n_cols, values, offsets, zero_bin, row_ptr, entries }
    }

    fn n_bins(&self) -> usize {
        self.offsets[self.n_cols]
    }

    fn value(&self, col: usize, flat_bin: usize) -> f64 {
        self.values[col][flat_bin - self.offsets[col]]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub max_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Scratch {
    grad: Vec<f64>,
    count: Vec<u32>,
}

/// Second-order split gain for squared error, where each row's hessian is 1.
pub(crate) fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let g = gl + gr;
    let h = hl + hr;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

pub(crate) fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

struct Grower<'a> {
    data: &'a BinnedData,
    x: &'a Matrix,
    grad: &'a [f64],
    params: GrowParams,
    scratch: Scratch,
    nodes: Vec<Node>,
}

/// Gains equal up to rounding count as ties and keep the earlier candidate,
/// so row order cannot change which split wins.
fn beats(gain: f64, best: f64) -> bool {
    gain - best > 1e-10 * best.abs().max(f64::MIN_POSITIVE)
}

impl Grower<'_> {
    fn best_split(&mut self, rows: &[u32], g_total: f64) -> Option<Candidate> {
        let n_total = rows.len() as u32;
        let Scratch { grad: hg, count: hn } = &mut self.scratch;
        for &r in rows {
            let r = r as usize;
            let g = self.grad[r];
            for &(_, bin) in &self.data.entries[self.data.row_ptr[r]..self.data.row_ptr[r + 1]] {
                hg[bin as usize] += g;
                hn[bin as usize] += 1;
            }
        }
        let p = self.params;
        let mut best: Option<Candidate> = None;
        for col in 0..self.data.n_cols {
            let (lo, hi) = (self.data.offsets[col], self.data.offsets[col + 1]);
            if let Some(zb) = self.data.zero_bin[col] {
                let (mut sg, mut sn) = (0.0, 0u32);
                for b in lo..hi {
                    sg += hg[b];
                    sn += hn[b];
                }
                hg[zb] = g_total - sg;
                hn[zb] = n_total - sn;
            }
            let (mut gl, mut nl) = (0.0, 0u32);
            let mut prev: Option<usize> = None;
            for b in lo..hi {
                if hn[b] == 0 {
                    continue;
                }
                if let Some(pb) = prev {
                    let hl = nl as f64;
                    let hr = (n_total - nl) as f64;
                    if hl >= p.min_child_weight && hr >= p.min_child_weight {
                        let gain = split_gain(gl, hl, g_total - gl, hr, p.lambda, p.gamma);
                        if best.is_none_or(|c| beats(gain, c.gain)) {
                            let a = self.data.value(col, pb);
                            let c = self.data.value(col, b);
                            let mut threshold = a + (c - a) / 2.0;
                            if threshold <= a {
                                threshold = c;
                            }
                            best = Some(Candidate { feature: col, threshold, gain });
                        }
                    }
                }
                gl += hg[b];
                nl += hn[b];
                prev = Some(b);
            }
            for b in lo..hi {
                hg[b] = 0.0;
                hn[b] = 0;
            }
        }
        best.filter(|c| c.gain > 0.0)
    }

    fn grow(&mut self, rows: Vec<u32>, depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.grad[r as usize]).sum();
        let h = rows.len() as f64;
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { weight: leaf_weight(g, h, self.params.lambda), cover: h });
        if depth >= self.params.max_depth || rows.len() < 2 {
            return at;
        }
        let Some(split) = self.best_split(&rows, g) else {
            return at;
        };
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&r| self.x.get(r as usize, split.feature) < split.threshold);
        drop(rows);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[at] = Node::Split { feature: split.feature, threshold: split.threshold, left, right, cover: h };
        at
    }
}

/// Grows one tree on `rows` against per-row gradients (hessians are 1).
pub(crate) fn grow_tree(data: &BinnedData, x: &Matrix, grad: &[f64], rows: Vec<u32>, params: GrowParams) -> Tree {
    let n_bins = data.n_bins();
    let mut grower = Grower {
        data,
        x,
        grad,
        params,
        scratch: Scratch { grad: vec![0.0; n_bins], count: vec![0; n_bins] },
        nodes: Vec::new(),
    };
    grower.grow(rows, 0);
    Tree { nodes: grower.nodes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 8, min_samples_leaf: 5 }
    }
}

/// Single CART regression tree with mean-valued leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub width: usize,
    pub params: TreeParams,
    pub tree: Tree,
}

impl TreeModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.width {
            return Err(Error::WidthMismatch { expected: self.width, got: row.len() });
        }
        Ok(self.tree.predict(row))
    }
}

/// Fits a squared-error CART tree.
///
/// Uses the boosting split search with no regularization and gradients
/// `-y`, which makes every leaf weight the mean target of its rows and every
/// gain half the reduction in squared error.
pub fn tree_fit(x: &Matrix, target: &[f64], params: TreeParams) -> Result<TreeModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if target.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), target.len()));
    }
    if params.min_samples_leaf == 0 {
        return Err(Error::InvalidSpec { name: "min_samples_leaf", value: 0.0 });
    }
    let grad: Vec<f64> = target.iter().map(|y| -y).collect();
    let data = BinnedData::new(x);
    let grow = GrowParams {
        lambda: 0.0,
        gamma: 0.0,
        min_child_weight: params.min_samples_leaf as f64,
        max_depth: params.max_depth,
    };
    let tree = grow_tree(&data, x, &grad, (0..x.rows() as u32).collect(), grow);
    Ok(TreeModel { width: x.cols(), params, tree })
}
