//! Trained-and-scored snapshot: the single JSON document the CLI writes and
//! the HTTP service serves.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{LeaderboardEntry, MetricsReport};
use crate::explain::{PcaProjection, ShapSummary};
use crate::features::{transform, FeatureSchema, UnseenCategory};
use crate::ingest::{write_listings, Listing};
use crate::models::{FittedModel, RegressorSpec};
use crate::pas::{self, CategoryCounts, PasPreconditionReport, PasRecord, QConfig, ResidualStats};

pub const SNAPSHOT_VERSION: &str = "pas-snapshot/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaPoint {
    pub listing_id: u64,
    pub pc1: f64,
    pub pc2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaExport {
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
    pub standardized: bool,
    pub points: Vec<PcaPoint>,
}

impl PcaExport {
    pub fn new(projection: &PcaProjection, ids: &[u64], standardized: bool) -> Self {
        PcaExport {
            components: projection.components.clone(),
            eigenvalues: projection.eigenvalues,
            standardized,
            points: ids
                .iter()
                .zip(&projection.coords)
                .map(|(&listing_id, c)| PcaPoint { listing_id, pc1: c[0], pc2: c[1] })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: String,
    pub created_unix: u64,
    /// SHA-256 of the training listings in canonical CSV form.
    pub dataset_fingerprint: String,
    /// SHA-256 of the serialized feature schema.
    pub schema_fingerprint: String,
    pub seed: u64,
    pub schema: FeatureSchema,
    pub spec: RegressorSpec,
    pub model: FittedModel,
    pub listings: Vec<Listing>,
    pub records: Vec<PasRecord>,
    pub stats: ResidualStats,
    pub q_config: QConfig,
    pub preconditions: PasPreconditionReport,
    /// Cross-validated report of the selected spec.
    pub cv: MetricsReport,
    /// Holdout reports, best R² first.
    pub comparison: Vec<MetricsReport>,
    /// Grid cells in submission order.
    pub leaderboard: Vec<LeaderboardEntry>,
    pub attribution: Option<ShapSummary>,
    pub pca: Option<PcaExport>,
    pub warnings: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn dataset_fingerprint(listings: &[Listing]) -> Result<String> {
    let mut buf = Vec::new();
    write_listings(&mut buf, listings)?;
    Ok(sha256_hex(&buf))
}

pub fn schema_fingerprint(schema: &FeatureSchema) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(schema)?))
}

/// Result of scoring new listings against a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBatch {
    pub records: Vec<PasRecord>,
    pub unseen: Vec<UnseenCategory>,
}

impl Snapshot {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Snapshot> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("version").and_then(|v| v.as_str()) {
            Some(SNAPSHOT_VERSION) => {}
            other => return Err(Error::SnapshotMismatch(format!("unsupported version {other:?}"))),
        }
        let snap: Snapshot = serde_json::from_value(value)?;
        snap.validate()?;
        Ok(snap)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Snapshot> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| Error::FileUnreadable { path: path.to_path_buf(), source })?;
        Snapshot::from_json(&text)
    }

    /// Checks internal consistency: one record per listing in the same
    /// order, categories matching the stored q, and a model that fits the
    /// stored schema.
    pub fn validate(&self) -> Result<()> {
        let mismatch = |m: String| Err(Error::SnapshotMismatch(m));
        if self.records.len() != self.listings.len() {
            return mismatch(format!("{} records for {} listings", self.records.len(), self.listings.len()));
        }
        if let Some((r, l)) = self.records.iter().zip(&self.listings).find(|(r, l)| r.listing_id != l.id) {
            return mismatch(format!("record {} does not match listing {}", r.listing_id, l.id));
        }
        if let Some(r) = self.records.iter().find(|r| r.category != pas::category_of(r.pas, self.q_config.q)) {
            return mismatch(format!("listing {} category disagrees with q = {}", r.listing_id, self.q_config.q));
        }
        if self.model.width() != self.schema.total_width {
            return mismatch(format!("model width {} but schema width {}", self.model.width(), self.schema.total_width));
        }
        if schema_fingerprint(&self.schema)? != self.schema_fingerprint {
            return mismatch("schema fingerprint differs".to_string());
        }
        Ok(())
    }

    /// Same snapshot with a new threshold; only categories change.
    pub fn with_q(&self, q_config: QConfig) -> Result<Snapshot> {
        let mut next = self.clone();
        pas::reclassify(&mut next.records, q_config.q)?;
        next.q_config = q_config;
        Ok(next)
    }

    /// Threshold equal to |PAS| of the given listing.
    pub fn calibrated(&self, exemplar_id: u64) -> Result<Snapshot> {
        self.with_q(pas::calibrate_q(&self.records, exemplar_id)?)
    }

    pub fn totals(&self) -> CategoryCounts {
        CategoryCounts::of(self.records.iter().map(|r| r.category))
    }

    pub fn scored_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        pas::write_scored_csv(&mut buf, &self.records)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    /// Scores new listings with the stored schema, model and residual
    /// statistics. Unseen categories are encoded as the baseline and
    /// reported.
    pub fn score(&self, listings: &[Listing]) -> Result<ScoredBatch> {
        if listings.is_empty() {
            return Err(Error::EmptyRecords);
        }
        if self.model.width() != self.schema.total_width {
            return Err(Error::SnapshotMismatch("model does not fit the stored schema".to_string()));
        }
        let (design, unseen) = transform(&self.schema, listings);
        let log_pred = self.model.predict_matrix(&design.x)?;
        let prices: Vec<f64> = listings.iter().map(|l| l.price).collect();
        let records = pas::score_with_stats(&design.listing_ids, &prices, &log_pred, &self.stats, self.q_config.q)?;
        Ok(ScoredBatch { records, unseen })
    }
}
