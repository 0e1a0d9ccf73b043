//! Acceptance gate: one test per criterion, each writing a single
//! `criterion N: PASS|FAIL|SKIP` line to stderr (uncaptured, so it shows in
//! plain `cargo test` output). Criteria 1 to 4 need the Manhattan listings CSV
//! at `$PAS_ZENODO_CSV` and report SKIP without it.

#[path = "../../core/tests/common/mod.rs"]
mod oracle;

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use oracle::*;
use pas_core::evaluation::MetricsReport;
use pas_core::explain::{pca_top2_with, tree_shap, PcaOptions};
use pas_core::ingest::{detect_mode, ingest_csv, summarize_by_bedrooms};
use pas_core::models::{gbt_fit, ridge_fit, GbtParams, ModelKind, RegressorSpec};
use pas_core::pas::{
    calibrate_q, category_of, check_preconditions, classify, histogram, score_population, Category, Metric,
    PasRecord,
};
use pas_core::synth::synthesize_fixture;
use pas_core::{train, Listing, Matrix, Snapshot, TrainOptions};
use rand::Rng;

fn status(criterion: u32, verdict: &str, detail: &str) {
    let _ = writeln!(std::io::stderr(), "criterion {criterion}: {verdict} {detail}");
}

/// Runs `check`, then prints PASS or FAIL before re-raising any panic.
fn gate(criterion: u32, check: impl FnOnce() -> String + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(check) {
        Ok(detail) => status(criterion, "PASS", &detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            status(criterion, "FAIL", &msg);
            std::panic::resume_unwind(e);
        }
    }
}

// ---- dataset-backed criteria ----

struct Zenodo {
    listings: Vec<Listing>,
    snapshot: Snapshot,
    elapsed: Duration,
}

fn zenodo_path() -> Option<PathBuf> {
    std::env::var_os("PAS_ZENODO_CSV").map(PathBuf::from).filter(|p| p.exists())
}

fn read_any(path: &PathBuf) -> Vec<Listing> {
    let header = std::fs::read_to_string(path).unwrap();
    let first = header.lines().next().unwrap_or_default();
    ingest_csv(path, detect_mode(first)).unwrap().0
}

fn zenodo() -> Option<&'static Zenodo> {
    static CELL: OnceLock<Option<Zenodo>> = OnceLock::new();
    CELL.get_or_init(|| {
        let path = zenodo_path()?;
        let start = Instant::now();
        let listings = read_any(&path);
        // Trained with the override so the precondition report is inspectable
        // even if it fails.
        let options = TrainOptions { allow_override: true, ..Default::default() };
        let snapshot = train(&listings, &options).unwrap().snapshot;
        Some(Zenodo { listings, snapshot, elapsed: start.elapsed() })
    })
    .as_ref()
}

fn holdout(snapshot: &Snapshot, kind: ModelKind) -> &MetricsReport {
    snapshot.comparison.iter().find(|r| r.model.kind() == kind).expect("model in comparison")
}

#[test]
fn c01_zenodo_train_time_and_gbt_r2() {
    let Some(z) = zenodo() else {
        return status(1, "SKIP", "PAS_ZENODO_CSV not set");
    };
    gate(1, || {
        assert!(z.elapsed < Duration::from_secs(600), "train took {:?}", z.elapsed);
        let gbt = holdout(&z.snapshot, ModelKind::Gbt).r2.unwrap();
        assert!(gbt >= 0.75, "GBT holdout R² {gbt}");
        format!("({:.1}s, GBT R² {gbt:.4})", z.elapsed.as_secs_f64())
    });
}

#[test]
fn c02_zenodo_ridge_r2_and_ordering() {
    let Some(z) = zenodo() else {
        return status(2, "SKIP", "PAS_ZENODO_CSV not set");
    };
    gate(2, || {
        let ridge = holdout(&z.snapshot, ModelKind::Ridge).r2.unwrap();
        let gbt = holdout(&z.snapshot, ModelKind::Gbt).r2.unwrap();
        assert!((ridge - 0.758719).abs() <= 0.05, "Ridge holdout R² {ridge}");
        assert!(gbt >= ridge, "GBT {gbt} < Ridge {ridge}");
        format!("(Ridge R² {ridge:.4}, GBT R² {gbt:.4})")
    });
}

#[test]
fn c03_zenodo_bedroom_table() {
    let Some(path) = zenodo_path() else {
        return status(3, "SKIP", "PAS_ZENODO_CSV not set");
    };
    gate(3, move || {
        let listings = match zenodo() {
            Some(z) => z.listings.clone(),
            None => read_any(&path),
        };
        let rows = summarize_by_bedrooms(&listings).unwrap();
        // (beds, count, min, max, median)
        for (beds, count, min, max, median) in [(0, 1360, 1650.0, 19500.0, 3495.0), (1, 2804, 1700.0, 38000.0, 4250.0)] {
            let row = rows.iter().find(|r| r.bedrooms == beds).expect("bedroom row");
            assert_eq!(
                (row.count, row.min, row.max, row.median),
                (count, min, max, median),
                "{beds}-bedroom summary"
            );
        }
        String::new()
    });
}

#[test]
fn c04_zenodo_test_size() {
    let Some(z) = zenodo() else {
        return status(4, "SKIP", "PAS_ZENODO_CSV not set");
    };
    gate(4, || {
        let p = &z.snapshot.preconditions;
        assert!(p.test_n >= 1000, "holdout has {} rows", p.test_n);
        assert!(!p.failures.iter().any(|f| f == pas_core::pas::CHECK_TEST_SIZE));
        format!("(test_n {}, preconditions passed: {})", p.test_n, p.passed)
    });
}

// ---- property criteria ----

#[test]
fn c05_pas_identity_suite() {
    gate(5, || {
        let mut total = 0;
        for seed in 0..20 {
            let mut r = rng(50_000 + seed);
            let n = 500;
            let prices: Vec<f64> = (0..n).map(|_| r.random_range(500.0..60_000.0f64).round()).collect();
            let log_pred: Vec<f64> = prices.iter().map(|p| p.ln() - r.random_range(-0.9..0.9)).collect();
            let ids: Vec<u64> = (0..n as u64).collect();
            let q = r.random_range(0.05..3.0);
            let (stats, records) = score_population(&ids, &prices, &log_pred, q).unwrap();
            total += records.len();

            let residuals: Vec<f64> = prices.iter().zip(&log_pred).map(|(p, l)| p.ln() - l).collect();
            let mu = residuals.iter().sum::<f64>() / n as f64;
            let sigma = (residuals.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!((stats.mu - mu).abs() < 1e-12 && (stats.sigma - sigma).abs() < 1e-12);

            let zs: Vec<f64> = records.iter().map(|r| r.z).collect();
            let z_mean = zs.iter().sum::<f64>() / n as f64;
            let z_sd = (zs.iter().map(|z| (z - z_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!(z_mean.abs() < 1e-9 && (z_sd - 1.0).abs() < 1e-9);

            for (rec, (&res, &lp)) in records.iter().zip(residuals.iter().zip(&log_pred)) {
                assert!((rec.p_hat - lp.exp()).abs() <= 1e-9 * rec.p_hat);
                assert!((rec.residual - res).abs() < 1e-12);
                let z = (res - mu) / sigma;
                assert!((rec.z - z).abs() < 1e-9, "z {} vs {z}", rec.z);
                let pas = rec.p / rec.p_hat * rec.z;
                assert!((rec.pas - pas).abs() <= 1e-12 * pas.abs().max(1e-300));
                assert_eq!(rec.pas.signum(), rec.z.signum());
                if rec.z > 0.0 && rec.p > rec.p_hat {
                    assert!(rec.pas > rec.z);
                }
                if rec.z < 0.0 && rec.p < rec.p_hat {
                    assert!(rec.z < rec.pas && rec.pas < 0.0);
                }
                assert_eq!(rec.category, category_of(rec.pas, q));
            }

            // Monotone in q, and a partition at every q.
            let pas: Vec<f64> = records.iter().map(|r| r.pas).collect();
            let mut flagged_prev = usize::MAX;
            for q in [0.01, 0.1, 0.4, 1.0, 2.0, 5.0, 1e9] {
                let cats = classify(&pas, q).unwrap();
                for (c, p) in cats.iter().zip(&pas) {
                    let want = if *p >= q {
                        Category::Overpriced
                    } else if *p <= -q {
                        Category::Underpriced
                    } else {
                        Category::FairPriced
                    };
                    assert_eq!(*c, want);
                }
                let flagged = cats.iter().filter(|c| **c != Category::FairPriced).count();
                assert!(flagged <= flagged_prev);
                flagged_prev = flagged;
                let h = histogram(&records, Metric::Pas, q, 40).unwrap();
                assert_eq!(h.bins.iter().map(|b| b.categories.total()).sum::<usize>(), n);
                assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), n);
            }
            assert_eq!(flagged_prev, 0);

            let ex = &records[r.random_range(0..n)];
            let cfg = calibrate_q(&records, ex.listing_id).unwrap();
            assert_eq!(cfg.q, ex.pas.abs());
            assert_ne!(category_of(ex.pas, cfg.q), Category::FairPriced);
        }
        assert_eq!(total, 10_000);
        format!("({total} records)")
    });
}

#[test]
fn c06_oracle_equivalence() {
    gate(6, || {
        // Boosted ensembles vs an independent recursive walker.
        for seed in 0..100 {
            let mut r = rng(seed);
            let n = r.random_range(10..80);
            let d = r.random_range(1..6);
            let (x, y) = random_dataset(&mut r, n, d);
            let params = GbtParams {
                rounds: r.random_range(1..30),
                learning_rate: [0.05, 0.1, 0.3, 1.0][r.random_range(0..4)],
                max_depth: r.random_range(1..6),
                lambda: [0.0, 1.0, 5.0][r.random_range(0..3)],
                subsample: [0.7, 1.0][r.random_range(0..2)],
                ..Default::default()
            };
            let model = gbt_fit(&x, &y, params, seed).unwrap();
            for row in x.iter_rows() {
                let (got, want) = (model.predict(row).unwrap(), gbt_oracle(&model, row));
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "gbt fixture {seed}");
            }
        }
        // Tree SHAP vs brute-force Shapley over every coalition.
        for seed in 0..300 {
            let mut r = rng(10_000 + seed);
            let features = r.random_range(1..=4);
            let depth = r.random_range(1..=5);
            let tree = random_tree(&mut r, features, depth);
            for _ in 0..5 {
                let row: Vec<f64> = (0..features).map(|_| r.random_range(0..5) as f64).collect();
                let mut phi = vec![0.0; features];
                tree_shap(&tree, &row, 1.0, &mut phi);
                for (a, b) in phi.iter().zip(brute_shapley(&tree, &row, features)) {
                    assert!((a - b).abs() < 1e-9, "shap tree {seed}");
                }
            }
        }
        // Ridge vs the normal equations.
        for seed in 0..30 {
            let mut r = rng(20_000 + seed);
            let n = r.random_range(10..60);
            let d = r.random_range(1..8);
            let (x, y) = random_dataset(&mut r, n, d);
            let alpha = [0.01, 0.1, 1.0, 10.0][r.random_range(0..4)];
            let model = ridge_fit(&x, &y, alpha).unwrap();
            let (beta, b) = ridge_normal_equation(&x, &y, alpha);
            assert!((model.intercept - b).abs() < 1e-8, "ridge intercept {seed}");
            for (a, w) in model.coefficients.iter().zip(&beta) {
                assert!((a - w).abs() < 1e-8, "ridge coefficient {seed}");
            }
        }
        // PCA vs the closed-form 2x2 eigensolver.
        let mut checked = 0;
        for seed in 0..50 {
            let mut r = rng(30_000 + seed);
            let n = r.random_range(3..40);
            let slope = r.random_range(-2.0..2.0);
            let points: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    let a: f64 = r.random_range(-3.0..3.0);
                    [a, slope * a + r.random_range(-1.0..1.0)]
                })
                .collect();
            let (sxx, sxy, syy) = cov2(&points);
            let [(l1, v1), (l2, v2)] = eig2(sxx, sxy, syy);
            if (l1 - l2).abs() < 1e-3 {
                continue;
            }
            checked += 1;
            let p = pca_top2_with(&Matrix::from_rows(&points).unwrap(), PcaOptions { standardize: false }).unwrap();
            assert!((p.eigenvalues[0] - l1).abs() < 1e-8 && (p.eigenvalues[1] - l2).abs() < 1e-8);
            for j in 0..2 {
                assert!((p.components[0][j] - v1[j]).abs() < 1e-8 && (p.components[1][j] - v2[j]).abs() < 1e-8);
            }
        }
        assert!(checked >= 40);
        "(100 GBT fixtures, 1500 SHAP rows, 30 ridge fits, PCA)".to_string()
    });
}

#[test]
fn c07_gbt_loss_non_increasing() {
    gate(7, || {
        for seed in 0..50 {
            let mut r = rng(40_000 + seed);
            let n = r.random_range(10..60);
            let d = r.random_range(1..5);
            let (x, y) = random_dataset(&mut r, n, d);
            let params = GbtParams {
                rounds: 40,
                learning_rate: [0.1, 0.5, 1.0][r.random_range(0..3)],
                max_depth: r.random_range(1..5),
                lambda: [0.0, 1.0, 10.0][r.random_range(0..3)],
                subsample: 1.0,
                ..Default::default()
            };
            let model = gbt_fit(&x, &y, params, seed).unwrap();
            let mse = |k: usize| {
                x.iter_rows().zip(&y).map(|(row, t)| (model.predict_staged(row, k).unwrap() - t).powi(2)).sum::<f64>()
                    / n as f64
            };
            let losses: Vec<f64> = (0..=model.trees.len()).map(mse).collect();
            for w in losses.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "dataset {seed}: {} then {}", w[0], w[1]);
            }
        }
        "(50 datasets)".to_string()
    });
}

/// Share of planted anomalies landing in the category matching their
/// multiplier.
fn recall(records: &[PasRecord], planted: &[pas_core::synth::PlantedAnomaly], q: f64) -> f64 {
    let hits = planted
        .iter()
        .filter(|a| {
            let want = if a.multiplier > 1.0 { Category::Overpriced } else { Category::Underpriced };
            category_of(records[a.listing_id as usize].pas, q) == want
        })
        .count();
    hits as f64 / planted.len() as f64
}

#[test]
fn c08_synthetic_anomaly_recall() {
    gate(8, || {
        let data = synthesize_fixture(7, 5000);
        let snap = train(&data.listings, &TrainOptions::default()).unwrap().snapshot;
        assert!(snap.preconditions.passed, "{:?}", snap.preconditions.failures);
        // The user-facing workflow: pick one listing known to be overpriced
        // and take its score as the threshold.
        let exemplar = data.anomalies.iter().find(|a| a.multiplier > 1.0).unwrap();
        let cfg = calibrate_q(&snap.records, exemplar.listing_id).unwrap();
        let got = recall(&snap.records, &data.anomalies, cfg.q);

        let all: Vec<f64> = data
            .anomalies
            .iter()
            .map(|a| recall(&snap.records, &data.anomalies, snap.records[a.listing_id as usize].pas.abs()))
            .collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let best = all.iter().cloned().fold(0.0, f64::max);
        let detail = format!(
            "recall {got:.3} at q {:.3} from exemplar #{}; over all {} exemplars mean {mean:.3}, max {best:.3}",
            cfg.q,
            exemplar.listing_id,
            all.len()
        );
        assert!(got >= 0.80, "{detail}");
        detail
    });
}

// ---- snapshot, CLI and precondition contract ----

fn small_snapshot() -> &'static Snapshot {
    static CELL: OnceLock<Snapshot> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = synthesize_fixture(5, 800);
        let options = TrainOptions {
            grid: vec![RegressorSpec::Gbt(GbtParams { rounds: 60, max_depth: 3, ..Default::default() })],
            folds: 3,
            allow_override: true,
            shap_rows: 100,
            created_unix: Some(1_700_000_000),
            ..Default::default()
        };
        train(&data.listings, &options).unwrap().snapshot
    })
}

fn pas(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pas")).args(args).env_remove("PAS_PORT").output().unwrap()
}

fn error_name(out: &std::process::Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    let v: serde_json::Value = serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {stderr}"));
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn c09_snapshot_cli_and_preconditions() {
    gate(9, || {
        let dir = tempfile::tempdir().unwrap();
        let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

        // Round trip: save, load, save again, identical bytes and scored CSV.
        let snap = small_snapshot();
        snap.save(path("a.json")).unwrap();
        let loaded = Snapshot::load(path("a.json")).unwrap();
        loaded.save(path("b.json")).unwrap();
        assert_eq!(std::fs::read(path("a.json")).unwrap(), std::fs::read(path("b.json")).unwrap());
        assert_eq!(loaded.scored_csv().unwrap(), snap.scored_csv().unwrap());

        // Exit codes: 0 on success.
        let out = pas(&["synth", "--seed", "3", "--n", "300", "--out", &path("l.csv")]);
        assert_eq!(out.status.code(), Some(0));
        let out = pas(&["report", &path("a.json"), "--q", "1e9", "--json"]);
        assert_eq!(out.status.code(), Some(0));
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["totals"]["Fair-priced"], snap.records.len());
        let out = pas(&["score", &path("a.json"), &path("l.csv"), "--out", &path("scored.csv")]);
        assert_eq!(out.status.code(), Some(0));

        // 2 with a JSON error body on validation failures.
        let out = pas(&["report", &path("missing.json")]);
        assert_eq!((out.status.code(), error_name(&out).as_str()), (Some(2), "FileUnreadable"));
        std::fs::write(path("bad.csv"), "id,price\n1,2\n").unwrap();
        let out = pas(&["ingest", &path("bad.csv"), "--processed"]);
        assert_eq!((out.status.code(), error_name(&out).as_str()), (Some(2), "MissingColumns"));
        let out = pas(&["train", &path("l.csv"), "--folds", "3", "--grid", "default", "--out", &path("t.json")]);
        assert_eq!((out.status.code(), error_name(&out).as_str()), (Some(2), "PreconditionsFailed"));
        let out = pas(&["report", &path("a.json"), "--q=-1"]);
        assert_eq!((out.status.code(), error_name(&out).as_str()), (Some(2), "NonPositiveQ"));
        let out = pas(&["frobnicate"]);
        assert_eq!((out.status.code(), error_name(&out).as_str()), (Some(2), "UsageError"));

        // 1 when the runtime fails: the port is already taken.
        let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = taken.local_addr().unwrap().port().to_string();
        let out = pas(&["serve", &path("a.json"), "--port", &port]);
        assert_eq!((out.status.code(), error_name(&out).as_str()), (Some(1), "RuntimeError"));

        // Precondition boundaries.
        assert!(!check_preconditions(Some(0.74), true, 1000).passed);
        assert!(check_preconditions(Some(0.75), true, 1000).passed);
        assert!(!check_preconditions(Some(0.75), true, 999).passed);
        assert!(!check_preconditions(Some(0.9), false, 5000).passed);
        assert!(!check_preconditions(None, true, 5000).passed);
        let failing = check_preconditions(Some(0.74), true, 999);
        assert_eq!(failing.failures.len(), 2);
        assert_eq!(failing.clone().enforce(false).unwrap_err().name(), "PreconditionsFailed");
        assert!(failing.enforce(true).unwrap().overridden);
        String::new()
    });
}
