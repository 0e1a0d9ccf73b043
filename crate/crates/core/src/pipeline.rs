//! End-to-end training and reporting over an in-memory listing set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    compare_models, comparison_specs, default_grid, format_comparison, format_leaderboard, grid_search,
    train_test_split, GridSearchResult,
};
use crate::explain::{pca_top2_with, shap_summary, PcaOptions};
use crate::features::{fit_schema, transform};
use crate::ingest::{summarize_by_bedrooms, BedroomSummary, Listing};
use crate::models::RegressorSpec;
use crate::pas::{self, Category, CategoryCounts, PasRecord, QConfig};
use crate::snapshot::{dataset_fingerprint, schema_fingerprint, PcaExport, Snapshot, SNAPSHOT_VERSION};

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub grid: Vec<RegressorSpec>,
    pub seed: u64,
    pub folds: usize,
    pub q: f64,
    /// Score even if the preconditions fail; the override is recorded.
    pub allow_override: bool,
    /// At most this many rows are explained (evenly spaced).
    pub shap_rows: usize,
    pub shap_top_k: usize,
    pub pca: PcaOptions,
    /// Fixed timestamp for reproducible snapshots; `None` uses the clock.
    pub created_unix: Option<u64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            grid: default_grid(),
            seed: 42,
            folds: 10,
            q: pas::DEFAULT_Q,
            allow_override: false,
            shap_rows: 2000,
            shap_top_k: 10,
            pca: PcaOptions::default(),
            created_unix: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub snapshot: Snapshot,
    pub grid: GridSearchResult,
}

fn evenly_spaced(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|i| i * n / cap).collect()
}

/// Split 80/20, grid-search on the training part with k-fold CV, evaluate
/// the winner and the baselines on the holdout, check the preconditions,
/// refit on all rows and score every listing.
pub fn train(listings: &[Listing], options: &TrainOptions) -> Result<TrainOutcome> {
    if listings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    pas::QConfig::manual(options.q)?;
    let schema = fit_schema(listings)?;
    let (design, _) = transform(&schema, listings);
    let split = train_test_split(design.rows(), options.seed);
    let train_part = design.select_rows(&split.train_ids);
    let grid = grid_search(&options.grid, &train_part.x, &train_part.target, options.folds, options.seed)?;
    let comparison = compare_models(&design.x, &design.target, &split, &comparison_specs(grid.best))?;
    let holdout = comparison.iter().find(|r| r.model == grid.best).expect("best spec is compared");
    let preconditions = pas::validate_preconditions(holdout, true).enforce(options.allow_override)?;

    let model = pas::refit_full(&grid.best, &design, options.seed)?;
    let prices: Vec<f64> = listings.iter().map(|l| l.price).collect();
    let (stats, records) = pas::score_design(&model, &design, &prices, options.q)?;

    let mut warnings = Vec::new();
    let attribution = match model.as_gbt() {
        Some(gbt) => {
            let rows = evenly_spaced(design.rows(), options.shap_rows);
            let sample = design.select_rows(&rows);
            Some(shap_summary(gbt, &sample.x, &sample.listing_ids, &schema.feature_names(), options.shap_top_k)?)
        }
        None => {
            warnings.push(format!("no attributions for {}", grid.best.kind().label()));
            None
        }
    };
    let pca = match pca_top2_with(&design.x, options.pca) {
        Ok(p) => Some(PcaExport::new(&p, &design.listing_ids, options.pca.standardize)),
        Err(e) => {
            warnings.push(format!("PCA skipped: {e}"));
            None
        }
    };
    if preconditions.overridden {
        warnings.push(format!("preconditions overridden: {}", preconditions.failures.join("; ")));
    }
    let cv = grid.leaderboard[grid.best_index].report.clone();
    let created_unix = options
        .created_unix
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let snapshot = Snapshot {
        version: SNAPSHOT_VERSION.to_string(),
        created_unix,
        dataset_fingerprint: dataset_fingerprint(listings)?,
        schema_fingerprint: schema_fingerprint(&schema)?,
        seed: options.seed,
        schema,
        spec: grid.best,
        model,
        listings: listings.to_vec(),
        records,
        stats,
        q_config: QConfig::manual(options.q)?,
        preconditions,
        cv,
        comparison,
        leaderboard: grid.leaderboard.clone(),
        attribution,
        pca,
        warnings,
    };
    Ok(TrainOutcome { snapshot, grid })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub q: f64,
    pub preconditions_passed: bool,
    pub comparison: Vec<crate::evaluation::MetricsReport>,
    pub bedrooms: Vec<BedroomSummary>,
    pub totals: CategoryCounts,
    /// Highest and lowest PAS per category.
    pub extremes: BTreeMap<Category, Vec<PasRecord>>,
}

/// Summary of a snapshot, optionally at a different threshold.
pub fn build_report(snapshot: &Snapshot, q: Option<f64>, top_k: usize) -> Result<Report> {
    let snap = match q {
        Some(q) => snapshot.with_q(QConfig::manual(q)?)?,
        None => snapshot.clone(),
    };
    Ok(Report {
        q: snap.q_config.q,
        preconditions_passed: snap.preconditions.passed,
        comparison: snap.comparison.clone(),
        bedrooms: summarize_by_bedrooms(&snap.listings)?,
        totals: snap.totals(),
        extremes: pas::extremes(&snap.records, top_k),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.0}"))
}

pub fn format_report(report: &Report, leaderboard: Option<&GridSearchResult>) -> String {
    let mut out = String::new();
    out.push_str(&format_comparison(&report.comparison));
    if let Some(grid) = leaderboard {
        out.push('\n');
        out.push_str(&format_leaderboard(grid));
    }
    let _ = writeln!(out, "\n{:<8} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}", "Beds", "Count", "Mean", "Std", "Min", "Median", "Max");
    for b in &report.bedrooms {
        let label = if b.bedrooms == 0 { "Studio".to_string() } else { format!("{} Bed", b.bedrooms) };
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>8.0} {:>8} {:>8.0} {:>8.0} {:>8.0}",
            label,
            b.count,
            b.mean,
            fmt_opt(b.std_dev),
            b.min,
            b.median,
            b.max
        );
    }
    let t = &report.totals;
    let _ = writeln!(
        out,
        "\nq = {}: {} Overpriced, {} Underpriced, {} Fair-priced",
        report.q, t.overpriced, t.underpriced, t.fair_priced
    );
    if !report.preconditions_passed {
        out.push_str("warning: PAS preconditions did not pass\n");
    }
    for (category, records) in &report.extremes {
        if records.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\n{category}:");
        for r in records {
            let _ = writeln!(out, "  #{:<8} price {:>8.0} predicted {:>8.0} pas {:>9.4}", r.listing_id, r.p, r.p_hat, r.pas);
        }
    }
    out
}
