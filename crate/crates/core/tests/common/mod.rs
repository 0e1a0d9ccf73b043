//! Independent reference implementations used as test oracles. Nothing here
//! calls into the code under test except for data types.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pas_core::models::{GbtModel, Node, Tree};
use pas_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recursive tree walk.
pub fn walk(tree: &Tree, node: usize, row: &[f64]) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { weight, .. } => *weight,
        Node::Split { feature, threshold, left, right, .. } => {
            if row[*feature] < *threshold {
                walk(tree, *left, row)
            } else {
                walk(tree, *right, row)
            }
        }
    }
}

pub fn gbt_oracle(model: &GbtModel, row: &[f64]) -> f64 {
    let sum: f64 = model.trees.iter().map(|t| walk(t, 0, row)).sum();
    model.base_score + model.params.learning_rate * sum
}

/// Tree output with features outside `known` integrated out by cover.
fn coalition_value(tree: &Tree, node: usize, row: &[f64], known: &[bool]) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { weight, .. } => *weight,
        Node::Split { feature, threshold, left, right, cover } => {
            if known[*feature] {
                let next = if row[*feature] < *threshold { *left } else { *right };
                coalition_value(tree, next, row, known)
            } else {
                let l = tree.nodes[*left].cover();
                let r = tree.nodes[*right].cover();
                (l * coalition_value(tree, *left, row, known) + r * coalition_value(tree, *right, row, known)) / cover
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Shapley values by enumerating every coalition of the features the tree
/// uses.
pub fn brute_shapley(tree: &Tree, row: &[f64], width: usize) -> Vec<f64> {
    let mut used: Vec<usize> = tree
        .nodes
        .iter()
        .filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
        .collect();
    used.sort_unstable();
    used.dedup();
    let m = used.len();
    let mut phi = vec![0.0; width];
    for (pos, &f) in used.iter().enumerate() {
        let others: Vec<usize> = used.iter().enumerate().filter(|(p, _)| *p != pos).map(|(_, &g)| g).collect();
        for mask in 0u32..(1 << others.len()) {
            let mut known = vec![false; width];
            let mut size = 0;
            for (b, &g) in others.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    known[g] = true;
                    size += 1;
                }
            }
            let without = coalition_value(tree, 0, row, &known);
            known[f] = true;
            let with = coalition_value(tree, 0, row, &known);
            let w = factorial(size) * factorial(m - size - 1) / factorial(m);
            phi[f] += w * (with - without);
        }
    }
    phi
}

/// Random tree over `features` with consistent covers.
pub fn random_tree(rng: &mut ChaCha8Rng, features: usize, max_depth: usize) -> Tree {
    fn build(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, features: usize, depth: usize) -> usize {
        let at = nodes.len();
        if depth == 0 || rng.random_bool(0.25) {
            nodes.push(Node::Leaf { weight: rng.random_range(-3.0..3.0), cover: rng.random_range(1..20) as f64 });
            return at;
        }
        nodes.push(Node::Leaf { weight: 0.0, cover: 0.0 });
        let feature = rng.random_range(0..features);
        let threshold = rng.random_range(0..4) as f64 + 0.5;
        let left = build(rng, nodes, features, depth - 1);
        let right = build(rng, nodes, features, depth - 1);
        let cover = nodes[left].cover() + nodes[right].cover();
        nodes[at] = Node::Split { feature, threshold, left, right, cover };
        at
    }
    let mut nodes = Vec::new();
    build(rng, &mut nodes, features, max_depth);
    Tree { nodes }
}

/// Small regression dataset on a coarse grid so that ties are common.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Matrix, Vec<f64>) {
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = 0.0;
        for j in 0..d {
            let v = rng.random_range(0..6) as f64;
            x.set(i, j, v);
            t += (j as f64 + 1.0) * v.sqrt();
        }
        y.push(t + rng.random_range(-0.5..0.5));
    }
    (x, y)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Ridge with an unpenalized intercept, solved directly from the augmented
/// normal equations `[X 1]ᵀ[X 1] + αD` with `D = diag(1, …, 1, 0)`.
pub fn ridge_normal_equation(x: &Matrix, y: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let (n, d) = (x.rows(), x.cols());
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x.get(i, j) } else { 1.0 });
    let mut gram = a.transpose() * &a;
    for j in 0..d {
        gram[(j, j)] += alpha;
    }
    let rhs = a.transpose() * DVector::from_column_slice(y);
    let sol = gram.lu().solve(&rhs).expect("non-singular");
    (sol.as_slice()[..d].to_vec(), sol[d])
}

/// Ridge objective `‖y − Xβ − b‖² + α‖β‖²`.
pub fn ridge_objective(x: &Matrix, y: &[f64], alpha: f64, beta: &[f64], b: f64) -> f64 {
    let sse: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, yi)| {
            let p: f64 = r.iter().zip(beta).map(|(a, c)| a * c).sum::<f64>() + b;
            (yi - p).powi(2)
        })
        .sum();
    sse + alpha * beta.iter().map(|c| c * c).sum::<f64>()
}

/// Analytic gradient of [`ridge_objective`] with respect to `(β, b)`.
pub fn ridge_gradient(x: &Matrix, y: &[f64], alpha: f64, beta: &[f64], b: f64) -> Vec<f64> {
    let d = x.cols();
    let mut g = vec![0.0; d + 1];
    for (r, yi) in x.iter_rows().zip(y) {
        let p: f64 = r.iter().zip(beta).map(|(a, c)| a * c).sum::<f64>() + b;
        let e = p - yi;
        for j in 0..d {
            g[j] += 2.0 * e * r[j];
        }
        g[d] += 2.0 * e;
    }
    for j in 0..d {
        g[j] += 2.0 * alpha * beta[j];
    }
    g
}

/// Eigenpairs of the symmetric matrix `[[a, b], [b, d]]`, largest first,
/// with unit eigenvectors whose largest-magnitude entry is positive.
pub fn eig2(a: f64, b: f64, d: f64) -> [(f64, [f64; 2]); 2] {
    let mid = (a + d) / 2.0;
    let rad = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    let vec_for = |l: f64| {
        let v = if b.abs() > 1e-300 {
            [b, l - a]
        } else if (l - a).abs() <= (l - d).abs() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let mut u = [v[0] / n, v[1] / n];
        let lead = if u[0].abs() >= u[1].abs() { u[0] } else { u[1] };
        if lead < 0.0 {
            u = [-u[0], -u[1]];
        }
        u
    };
    [(mid + rad, vec_for(mid + rad)), (mid - rad, vec_for(mid - rad))]
}

/// Sample covariance entries `(s_xx, s_xy, s_yy)` of two columns.
pub fn cov2(points: &[[f64; 2]]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p[0] - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let syy = points.iter().map(|p| (p[1] - my).powi(2)).sum::<f64>() / (n - 1.0);
    let sxy = points.iter().map(|p| (p[0] - mx) * (p[1] - my)).sum::<f64>() / (n - 1.0);
    (sxx, sxy, syy)
}
