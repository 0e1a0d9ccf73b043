//! Metrics, holdout splits, k-fold cross-validation, grid search and the
//! model comparison table. All metrics are computed in log-price space.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{self, is_degenerate_target, GbtParams, RegressorSpec, TreeParams};

pub const METRIC_SPACE: &str = "log-price";
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// `None` when the truth has zero variance.
    pub r2: Option<f64>,
}

fn check_lengths(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// MAE, MSE, RMSE and R², leaving R² empty instead of failing when the truth
/// is constant.
pub fn metrics_lenient(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    check_lengths(y_true, y_pred)?;
    let n = y_true.len();
    let nf = n as f64;
    let mean = y_true.iter().sum::<f64>() / nf;
    let (mut abs, mut ss_res, mut ss_tot) = (0.0, 0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = t - p;
        abs += e.abs();
        ss_res += e * e;
        ss_tot += (t - mean) * (t - mean);
    }
    let mse = ss_res / nf;
    Ok(Metrics {
        n,
        mae: abs / nf,
        mse,
        rmse: mse.sqrt(),
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
    })
}

/// Like [`metrics_lenient`] but fails with `ZeroVarianceTruth` when R² is
/// undefined.
pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    let m = metrics_lenient(y_true, y_pred)?;
    if m.r2.is_none() {
        return Err(Error::ZeroVarianceTruth);
    }
    Ok(m)
}

/// Evaluation of one model, either on a holdout or averaged over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: RegressorSpec,
    pub space: String,
    /// Rows evaluated (summed over folds for cross-validation).
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub folds: Vec<Metrics>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    fn from_holdout(model: RegressorSpec, m: Metrics, warnings: Vec<String>) -> Self {
        MetricsReport {
            model,
            space: METRIC_SPACE.to_string(),
            n: m.n,
            mae: m.mae,
            mse: m.mse,
            rmse: m.rmse,
            r2: m.r2,
            folds: Vec::new(),
            warnings,
        }
    }

    fn from_folds(model: RegressorSpec, folds: Vec<Metrics>, warnings: Vec<String>) -> Self {
        let k = folds.len() as f64;
        let mse = folds.iter().map(|f| f.mse).sum::<f64>() / k;
        let r2 = folds.iter().map(|f| f.r2).sum::<Option<f64>>().map(|s| s / k);
        MetricsReport {
            model,
            space: METRIC_SPACE.to_string(),
            n: folds.iter().map(|f| f.n).sum(),
            mae: folds.iter().map(|f| f.mae).sum::<f64>() / k,
            mse,
            rmse: mse.sqrt(),
            r2,
            folds,
            warnings,
        }
    }
}

/// Seeded 80/20 holdout partition over row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub fraction: f64,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids
}

/// Shuffles rows and holds out `round(0.2 n)` of them.
pub fn train_test_split(n: usize, seed: u64) -> SplitPlan {
    let ids = shuffled(n, seed);
    let n_test = ((1.0 - TRAIN_FRACTION) * n as f64).round() as usize;
    let mut test_ids = ids[..n_test].to_vec();
    let mut train_ids = ids[n_test..].to_vec();
    test_ids.sort_unstable();
    train_ids.sort_unstable();
    SplitPlan { seed, fraction: TRAIN_FRACTION, train_ids, test_ids }
}

/// Seeded shuffle, then contiguous chunks; the first `n % k` folds get one
/// extra row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::BadK { k, n });
    }
    let ids = shuffled(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(ids[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

fn fit_and_score(spec: &RegressorSpec, x: &Matrix, target: &[f64], train: &[usize], test: &[usize], seed: u64) -> Result<Metrics> {
    let train_x = x.select_rows(train);
    let train_y: Vec<f64> = train.iter().map(|&i| target[i]).collect();
    let model = models::fit(spec, &train_x, &train_y, seed)?;
    let test_y: Vec<f64> = test.iter().map(|&i| target[i]).collect();
    let pred: Vec<f64> = test.iter().map(|&i| model.predict(x.row(i))).collect::<Result<_>>()?;
    metrics_lenient(&test_y, &pred)
}

fn degenerate_warning(target: &[f64]) -> Vec<String> {
    if is_degenerate_target(target) {
        vec!["DegenerateTarget: target has zero variance; models reduce to a constant".to_string()]
    } else {
        Vec::new()
    }
}

fn cv_with_folds(spec: &RegressorSpec, x: &Matrix, target: &[f64], folds: &[Vec<usize>], seed: u64) -> Result<MetricsReport> {
    spec.validate()?;
    let fold_metrics: Vec<Metrics> = (0..folds.len())
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, ids)| ids.iter().copied())
                .collect();
            fit_and_score(spec, x, target, &train, &folds[f], seed)
        })
        .collect::<Result<_>>()?;
    let mut warnings = degenerate_warning(target);
    for (f, m) in fold_metrics.iter().enumerate() {
        if m.r2.is_none() {
            warnings.push(format!("ZeroVarianceTruth: R² undefined on fold {f}"));
        }
    }
    Ok(MetricsReport::from_folds(*spec, fold_metrics, warnings))
}

/// k-fold cross-validation: each fold is scored by a model fitted on the
/// other `k − 1` folds. Folds run in parallel; results are in fold order.
pub fn cross_validate(spec: &RegressorSpec, x: &Matrix, target: &[f64], k: usize, seed: u64) -> Result<MetricsReport> {
    if target.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), target.len()));
    }
    let folds = kfold_split(x.rows(), k, seed)?;
    cv_with_folds(spec, x, target, &folds, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// Position in the submitted grid.
    pub index: usize,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub best: RegressorSpec,
    /// Entries in grid order.
    pub leaderboard: Vec<LeaderboardEntry>,
}

impl GridSearchResult {
    /// Leaderboard sorted best first.
    pub fn ranked(&self) -> Vec<&LeaderboardEntry> {
        let mut v: Vec<&LeaderboardEntry> = self.leaderboard.iter().collect();
        v.sort_by(|a, b| better(&a.report, a.index, &b.report, b.index));
        v
    }
}

/// Ordering where `Less` means `a` ranks ahead of `b`: higher mean R², then
/// lower RMSE, then earlier grid position.
fn better(a: &MetricsReport, ai: usize, b: &MetricsReport, bi: usize) -> std::cmp::Ordering {
    let ra = a.r2.unwrap_or(f64::NEG_INFINITY);
    let rb = b.r2.unwrap_or(f64::NEG_INFINITY);
    rb.total_cmp(&ra).then(a.rmse.total_cmp(&b.rmse)).then(ai.cmp(&bi))
}

/// Cross-validates every grid cell on the same folds and picks the best.
pub fn grid_search(grid: &[RegressorSpec], x: &Matrix, target: &[f64], k: usize, seed: u64) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if target.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), target.len()));
    }
    let folds = kfold_split(x.rows(), k, seed)?;
    let reports: Vec<MetricsReport> = grid
        .par_iter()
        .map(|spec| cv_with_folds(spec, x, target, &folds, seed))
        .collect::<Result<_>>()?;
    let leaderboard: Vec<LeaderboardEntry> =
        reports.into_iter().enumerate().map(|(index, report)| LeaderboardEntry { index, report }).collect();
    let best_index = leaderboard
        .iter()
        .min_by(|a, b| better(&a.report, a.index, &b.report, b.index))
        .map(|e| e.index)
        .expect("non-empty grid");
    Ok(GridSearchResult { best_index, best: grid[best_index], leaderboard })
}

/// Fits every spec on the training rows, scores on the test rows, and sorts
/// by descending R².
pub fn compare_models(x: &Matrix, target: &[f64], split: &SplitPlan, specs: &[RegressorSpec]) -> Result<Vec<MetricsReport>> {
    if target.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), target.len()));
    }
    let train_y: Vec<f64> = split.train_ids.iter().map(|&i| target[i]).collect();
    let mut reports: Vec<MetricsReport> = specs
        .par_iter()
        .map(|spec| {
            spec.validate()?;
            let m = fit_and_score(spec, x, target, &split.train_ids, &split.test_ids, split.seed)?;
            Ok(MetricsReport::from_holdout(*spec, m, degenerate_warning(&train_y)))
        })
        .collect::<Result<_>>()?;
    reports.sort_by(|a, b| {
        let ra = a.r2.unwrap_or(f64::NEG_INFINITY);
        let rb = b.r2.unwrap_or(f64::NEG_INFINITY);
        rb.total_cmp(&ra)
    });
    Ok(reports)
}

/// Boosting grid: rounds {200, 400} × η {0.05, 0.1} × depth {4, 6} ×
/// λ {1, 5} × subsample {0.8, 1.0}, with γ = 0 and min child weight 1.
pub fn default_grid() -> Vec<RegressorSpec> {
    let mut grid = Vec::with_capacity(32);
    for rounds in [200, 400] {
        for learning_rate in [0.05, 0.1] {
            for max_depth in [4, 6] {
                for lambda in [1.0, 5.0] {
                    for subsample in [0.8, 1.0] {
                        grid.push(RegressorSpec::Gbt(GbtParams {
                            rounds,
                            learning_rate,
                            max_depth,
                            lambda,
                            gamma: 0.0,
                            min_child_weight: 1.0,
                            subsample,
                        }));
                    }
                }
            }
        }
    }
    grid
}

/// The tuned booster alongside the three baselines of the comparison table.
pub fn comparison_specs(best: RegressorSpec) -> Vec<RegressorSpec> {
    vec![
        best,
        RegressorSpec::DecisionTree(TreeParams { max_depth: 8, min_samples_leaf: 5 }),
        RegressorSpec::Ridge { alpha: 1.0 },
        RegressorSpec::Knn { k: 10 },
    ]
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |v| format!("{v:.6}"))
}

/// Aligned text table: Model, MAE, MSE, R², RMSE.
pub fn format_comparison(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>10} {:>10} {:>10} {:>10}", "Model", "MAE", "MSE", "R²", "RMSE");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14} {:>10.6} {:>10.6} {:>10} {:>10.6}",
            r.model.kind().label(),
            r.mae,
            r.mse,
            fmt_opt(r.r2),
            r.rmse
        );
    }
    let _ = writeln!(out, "(metrics in {METRIC_SPACE} space)");
    out
}

pub fn format_leaderboard(result: &GridSearchResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>4} {:>5} {:>10} {:>10}  {}", "rank", "cell", "mean R²", "mean RMSE", "spec");
    for (rank, e) in result.ranked().into_iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>4} {:>5} {:>10} {:>10.6}  {}",
            rank + 1,
            e.index,
            fmt_opt(e.report.r2),
            e.report.rmse,
            e.report.model.describe()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_mean_predictions() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let m = metrics(&y, &y).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse, m.r2), (0.0, 0.0, 0.0, Some(1.0)));
        let m = metrics(&y, &[2.5; 4]).unwrap();
        assert_eq!(m.r2, Some(0.0));
    }

    #[test]
    fn hand_computed_metrics() {
        // SStot = 2, SSres = 1.
        let m = metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((m.mae - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.mse - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.r2.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(metrics(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(metrics(&[3.0, 3.0], &[1.0, 2.0]), Err(Error::ZeroVarianceTruth)));
        let lenient = metrics_lenient(&[3.0, 3.0], &[1.0, 2.0]).unwrap();
        assert_eq!(lenient.r2, None);
        assert_eq!(lenient.mae, 1.5);
    }

    #[test]
    fn fold_sizes() {
        let folds = kfold_split(10, 10, 0).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
        let folds = kfold_split(6618, 10, 42).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().filter(|&&s| s == 662).count(), 8);
        assert_eq!(sizes.iter().filter(|&&s| s == 661).count(), 2);
        assert_eq!(kfold_split(6618, 10, 42).unwrap(), folds);
        assert!(matches!(kfold_split(5, 1, 0), Err(Error::BadK { .. })));
        assert!(matches!(kfold_split(5, 6, 0), Err(Error::BadK { .. })));
    }

    #[test]
    fn holdout_sizes() {
        let s = train_test_split(8273, 1);
        assert_eq!(s.test_ids.len(), 1655);
        assert_eq!(s.train_ids.len(), 6618);
        let mut all: Vec<usize> = s.train_ids.iter().chain(&s.test_ids).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..8273).collect::<Vec<_>>());
    }

    #[test]
    fn constant_target_cv_warns() {
        let x = Matrix::from_vec(10, 1, (0..10).map(f64::from).collect()).unwrap();
        let r = cross_validate(&RegressorSpec::Gbt(GbtParams { rounds: 3, ..Default::default() }), &x, &[2.0; 10], 5, 0)
            .unwrap();
        assert_eq!(r.r2, None);
        assert!(r.warnings.iter().any(|w| w.starts_with("DegenerateTarget")));
        assert_eq!(r.folds.len(), 5);
        assert!(r.folds.iter().all(|f| f.r2.is_none()));
    }

    #[test]
    fn grid_ties_keep_first() {
        let x = Matrix::from_vec(20, 1, (0..20).map(f64::from).collect()).unwrap();
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin()).collect();
        let spec = RegressorSpec::Ridge { alpha: 0.5 };
        let r = grid_search(&[spec, spec], &x, &y, 4, 1).unwrap();
        assert_eq!(r.best_index, 0);
        let r = grid_search(&[spec], &x, &y, 4, 1).unwrap();
        assert_eq!(r.best, spec);
        assert!(matches!(grid_search(&[], &x, &y, 4, 1), Err(Error::EmptyGrid)));
    }

    #[test]
    fn default_grid_has_32_cells() {
        let g = default_grid();
        assert_eq!(g.len(), 32);
        assert!(g.iter().all(|s| s.validate().is_ok()));
    }

    #[test]
    fn comparison_table_has_header_and_rows() {
        let x = Matrix::from_vec(30, 1, (0..30).map(f64::from).collect()).unwrap();
        let y: Vec<f64> = (0..30).map(|i| 2.0 * i as f64 + 1.0).collect();
        let split = train_test_split(30, 3);
        let reports = compare_models(&x, &y, &split, &comparison_specs(RegressorSpec::Gbt(GbtParams::default()))).unwrap();
        assert_eq!(reports.len(), 4);
        // Exactly linear data: ridge with a tiny penalty is essentially perfect.
        let ridge = compare_models(&x, &y, &split, &[RegressorSpec::Ridge { alpha: 0.0 }]).unwrap();
        assert!((ridge[0].r2.unwrap() - 1.0).abs() < 1e-12);
        let table = format_comparison(&reports);
        assert!(table.lines().next().unwrap().contains("RMSE"));
        assert_eq!(table.lines().count(), 6);
    }
}
