//! Price Anomaly Score.
//!
//! Residuals live in log-price space: `residual = ln p − ln p̂`, which makes
//! the price ratio `p / p̂ = exp(residual)`. Residuals are standardized over
//! the scored population,
//!
//! ```text
//! z_i   = (residual_i − μ) / σ        (σ uses the n denominator)
//! PAS_i = (p_i / p̂_i) × z_i
//! ```
//!
//! and a listing is Overpriced when `PAS ≥ q`, Underpriced when `PAS ≤ −q`,
//! Fair-priced otherwise. The ratio is strictly positive, so PAS always has
//! the sign of z and amplifies it whenever the listing is priced above its
//! prediction.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::MetricsReport;
use crate::features::{inverse_target, DesignMatrix};
use crate::matrix::Matrix;
use crate::models::{self, FittedModel, RegressorSpec};

/// Threshold used when the user has not calibrated one.
pub const DEFAULT_Q: f64 = 0.4;
pub const MIN_R2: f64 = 0.75;
pub const MIN_TEST_ROWS: usize = 1000;

pub const CHECK_R2: &str = "R² ≥ 0.75";
pub const CHECK_CV: &str = "cross-validation performed";
pub const CHECK_TEST_SIZE: &str = "test set has no fewer than 1,000 samples";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "Overpriced")]
    Overpriced,
    #[serde(rename = "Underpriced")]
    Underpriced,
    #[serde(rename = "Fair-priced")]
    FairPriced,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Overpriced, Category::Underpriced, Category::FairPriced];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Overpriced => "Overpriced",
            Category::Underpriced => "Underpriced",
            Category::FairPriced => "Fair-priced",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mu: f64,
    /// Population standard deviation.
    pub sigma: f64,
    pub n: usize,
}

impl ResidualStats {
    pub fn z(&self, residual: f64) -> f64 {
        (residual - self.mu) / self.sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasRecord {
    pub listing_id: u64,
    /// Actual price, dollars.
    pub p: f64,
    /// Predicted price, dollars.
    pub p_hat: f64,
    /// `ln p − ln p̂`.
    pub residual: f64,
    pub z: f64,
    pub pas: f64,
    pub category: Category,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum QProvenance {
    Manual,
    Exemplar { listing_id: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QConfig {
    pub q: f64,
    pub provenance: QProvenance,
}

impl QConfig {
    pub fn manual(q: f64) -> Result<Self> {
        check_q(q)?;
        Ok(QConfig { q, provenance: QProvenance::Manual })
    }
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig { q: DEFAULT_Q, provenance: QProvenance::Manual }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasPreconditionReport {
    pub r2_holdout: Option<f64>,
    pub cv_performed: bool,
    pub test_n: usize,
    pub passed: bool,
    /// Names of the failed checks.
    pub failures: Vec<String>,
    /// Scoring proceeded despite failures.
    #[serde(default)]
    pub overridden: bool,
}

/// Checks the conditions under which PAS is meaningful: holdout R² of at
/// least 0.75, hyperparameters chosen by cross-validation, and a holdout of
/// at least 1,000 rows.
pub fn validate_preconditions(holdout: &MetricsReport, cv_done: bool) -> PasPreconditionReport {
    check_preconditions(holdout.r2, cv_done, holdout.n)
}

pub fn check_preconditions(r2_holdout: Option<f64>, cv_performed: bool, test_n: usize) -> PasPreconditionReport {
    let mut failures = Vec::new();
    if !r2_holdout.is_some_and(|r2| r2 >= MIN_R2) {
        failures.push(CHECK_R2.to_string());
    }
    if !cv_performed {
        failures.push(CHECK_CV.to_string());
    }
    if test_n < MIN_TEST_ROWS {
        failures.push(CHECK_TEST_SIZE.to_string());
    }
    PasPreconditionReport {
        r2_holdout,
        cv_performed,
        test_n,
        passed: failures.is_empty(),
        failures,
        overridden: false,
    }
}

impl PasPreconditionReport {
    /// Fails unless the checks passed or `allow_override` is set, in which
    /// case the override is recorded.
    pub fn enforce(mut self, allow_override: bool) -> Result<Self> {
        if self.passed {
            return Ok(self);
        }
        if allow_override {
            self.overridden = true;
            return Ok(self);
        }
        Err(Error::PreconditionsFailed(self.failures))
    }
}

/// Refits the selected spec on every row so each listing gets a residual.
pub fn refit_full(spec: &RegressorSpec, data: &DesignMatrix, seed: u64) -> Result<FittedModel> {
    models::fit(spec, &data.x, &data.target, seed)
}

/// Standardizes residuals with their mean and population standard deviation.
pub fn zscores(residuals: &[f64]) -> Result<(ResidualStats, Vec<f64>)> {
    let n = residuals.len();
    if n < 2 {
        return Err(Error::TooFewRecords(n));
    }
    let mu = residuals.iter().sum::<f64>() / n as f64;
    let var = residuals.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / n as f64;
    let sigma = var.sqrt();
    if !(sigma > 0.0) || residuals.iter().all(|r| *r == residuals[0]) {
        return Err(Error::ZeroSigma);
    }
    let stats = ResidualStats { mu, sigma, n };
    let z = residuals.iter().map(|r| stats.z(*r)).collect();
    Ok((stats, z))
}

fn check_price(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::NonPositivePrice(p));
    }
    Ok(())
}

/// Elementwise `(p / p̂) × z`.
pub fn compute_pas(p: &[f64], p_hat: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if p.len() != p_hat.len() {
        return Err(Error::LengthMismatch(p.len(), p_hat.len()));
    }
    if p.len() != z.len() {
        return Err(Error::LengthMismatch(p.len(), z.len()));
    }
    p.iter()
        .zip(p_hat)
        .zip(z)
        .map(|((&p, &ph), &z)| {
            check_price(p)?;
            check_price(ph)?;
            Ok(p / ph * z)
        })
        .collect()
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0) {
        return Err(Error::NonPositiveQ(q));
    }
    Ok(())
}

/// Category of a single score; `q` must already be validated.
pub fn category_of(pas: f64, q: f64) -> Category {
    if pas >= q {
        Category::Overpriced
    } else if pas <= -q {
        Category::Underpriced
    } else {
        Category::FairPriced
    }
}

pub fn classify(pas: &[f64], q: f64) -> Result<Vec<Category>> {
    check_q(q)?;
    Ok(pas.iter().map(|&v| category_of(v, q)).collect())
}

/// Sets `q = |PAS|` of a listing the user considers mispriced, which puts
/// it exactly on its category boundary.
pub fn calibrate_q(records: &[PasRecord], exemplar_id: u64) -> Result<QConfig> {
    let rec = records
        .iter()
        .find(|r| r.listing_id == exemplar_id)
        .ok_or(Error::UnknownListing(exemplar_id))?;
    if rec.pas == 0.0 {
        return Err(Error::ZeroPasExemplar(exemplar_id));
    }
    Ok(QConfig { q: rec.pas.abs(), provenance: QProvenance::Exemplar { listing_id: exemplar_id } })
}

/// Re-labels records at a new threshold; scores are untouched.
pub fn reclassify(records: &mut [PasRecord], q: f64) -> Result<()> {
    check_q(q)?;
    for r in records {
        r.category = category_of(r.pas, q);
    }
    Ok(())
}

/// Scores listings against given residual statistics.
///
/// `log_pred` holds the model's log-price predictions in the same order as
/// `prices` and `ids`.
pub fn score_with_stats(
    ids: &[u64],
    prices: &[f64],
    log_pred: &[f64],
    stats: &ResidualStats,
    q: f64,
) -> Result<Vec<PasRecord>> {
    check_q(q)?;
    if ids.len() != prices.len() || prices.len() != log_pred.len() {
        return Err(Error::LengthMismatch(prices.len(), log_pred.len()));
    }
    ids.iter()
        .zip(prices)
        .zip(log_pred)
        .map(|((&listing_id, &p), &lp)| {
            check_price(p)?;
            let p_hat = inverse_target(lp);
            check_price(p_hat)?;
            let residual = p.ln() - lp;
            let z = stats.z(residual);
            let pas = p / p_hat * z;
            Ok(PasRecord { listing_id, p, p_hat, residual, z, pas, category: category_of(pas, q) })
        })
        .collect()
}

/// Scores a population: residuals, their statistics, z, PAS and categories.
pub fn score_population(ids: &[u64], prices: &[f64], log_pred: &[f64], q: f64) -> Result<(ResidualStats, Vec<PasRecord>)> {
    if prices.len() != log_pred.len() {
        return Err(Error::LengthMismatch(prices.len(), log_pred.len()));
    }
    for &p in prices {
        check_price(p)?;
    }
    let residuals: Vec<f64> = prices.iter().zip(log_pred).map(|(p, lp)| p.ln() - lp).collect();
    let (stats, _) = zscores(&residuals)?;
    let records = score_with_stats(ids, prices, log_pred, &stats, q)?;
    Ok((stats, records))
}

/// Predicts every row of `data` and scores the population.
/// `prices` are the listings' dollar prices in row order.
pub fn score_design(model: &FittedModel, data: &DesignMatrix, prices: &[f64], q: f64) -> Result<(ResidualStats, Vec<PasRecord>)> {
    let log_pred = predict_rows(model, &data.x)?;
    score_population(&data.listing_ids, prices, &log_pred, q)
}

fn predict_rows(model: &FittedModel, x: &Matrix) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..x.rows()).into_par_iter().map(|i| model.predict(x.row(i))).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    #[serde(rename = "Overpriced")]
    pub overpriced: usize,
    #[serde(rename = "Underpriced")]
    pub underpriced: usize,
    #[serde(rename = "Fair-priced")]
    pub fair_priced: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, c: Category) {
        match c {
            Category::Overpriced => self.overpriced += 1,
            Category::Underpriced => self.underpriced += 1,
            Category::FairPriced => self.fair_priced += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.overpriced + self.underpriced + self.fair_priced
    }

    pub fn of(categories: impl IntoIterator<Item = Category>) -> Self {
        let mut c = CategoryCounts::default();
        categories.into_iter().for_each(|cat| c.add(cat));
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Pas,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub categories: CategoryCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub metric: Metric,
    pub min: f64,
    pub max: f64,
    pub bins: Vec<HistogramBin>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasSummary {
    pub q: f64,
    pub n: usize,
    pub totals: CategoryCounts,
    pub pas: Histogram,
    pub z: Histogram,
}

fn moments(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len() as f64;
    if values.len() < 2 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(m2 > 0.0) {
        return (None, None);
    }
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
}

/// Equal-width histogram over `[min, max]` with per-bin category counts.
/// The maximum falls in the last bin.
pub fn histogram(records: &[PasRecord], metric: Metric, q: f64, bins: usize) -> Result<Histogram> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    if bins == 0 {
        return Err(Error::ZeroBins);
    }
    check_q(q)?;
    let value = |r: &PasRecord| match metric {
        Metric::Pas => r.pas,
        Metric::Z => r.z,
    };
    let values: Vec<f64> = records.iter().map(value).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: min + width * b as f64,
            hi: if b + 1 == bins { max } else { min + width * (b + 1) as f64 },
            count: 0,
            categories: CategoryCounts::default(),
        })
        .collect();
    for (r, v) in records.iter().zip(&values) {
        let b = if width > 0.0 { (((v - min) / width) as usize).min(bins - 1) } else { 0 };
        out[b].count += 1;
        out[b].categories.add(category_of(r.pas, q));
    }
    let (skewness, excess_kurtosis) = moments(&values);
    Ok(Histogram { metric, min, max, bins: out, skewness, excess_kurtosis })
}

/// Histograms of PAS and z plus category totals at threshold `q`.
pub fn pas_summary(records: &[PasRecord], q: f64, bins: usize) -> Result<PasSummary> {
    let pas = histogram(records, Metric::Pas, q, bins)?;
    let z = histogram(records, Metric::Z, q, bins)?;
    Ok(PasSummary {
        q,
        n: records.len(),
        totals: CategoryCounts::of(records.iter().map(|r| category_of(r.pas, q))),
        pas,
        z,
    })
}

pub const SCORED_CSV_HEADER: [&str; 7] = ["listing_id", "price", "predicted_price", "residual", "z", "pas", "category"];

/// Writes `listing_id,price,predicted_price,residual,z,pas,category` using
/// shortest round-trip float formatting.
pub fn write_scored_csv<W: Write>(writer: W, records: &[PasRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORED_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.listing_id.to_string(),
            r.p.to_string(),
            r.p_hat.to_string(),
            r.residual.to_string(),
            r.z.to_string(),
            r.pas.to_string(),
            r.category.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Most extreme records: highest PAS first for Overpriced, lowest first for
/// Underpriced.
pub fn extremes(records: &[PasRecord], k: usize) -> BTreeMap<Category, Vec<PasRecord>> {
    let mut sorted: Vec<&PasRecord> = records.iter().collect();
    sorted.sort_by(|a, b| b.pas.total_cmp(&a.pas).then(a.listing_id.cmp(&b.listing_id)));
    let over = sorted.iter().filter(|r| r.category == Category::Overpriced).take(k).map(|r| (*r).clone()).collect();
    let under = sorted
        .iter()
        .rev()
        .filter(|r| r.category == Category::Underpriced)
        .take(k)
        .map(|r| (*r).clone())
        .collect();
    BTreeMap::from([(Category::Overpriced, over), (Category::Underpriced, under)])
}
