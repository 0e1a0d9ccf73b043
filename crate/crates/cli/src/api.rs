//! Request handling for the snapshot API, independent of the HTTP server.
//! Every function reads the snapshot it is given and returns a JSON value;
//! only [`update_q`] produces a new snapshot.

use pas_core::pas::{self, Category, Metric, QConfig};
use pas_core::{Error, Snapshot};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DEFAULT_BINS: usize = 40;
pub const DEFAULT_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub name: String,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(name: &str, message: impl Into<String>) -> Self {
        ApiError { status: 400, name: name.to_string(), message: message.into() }
    }

    pub fn body(&self) -> Value {
        json!({ "error": self.name, "message": self.message })
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownListing(_) => 404,
            _ => 400,
        };
        ApiError { status, name: e.name().to_string(), message: e.to_string() }
    }
}

pub type ApiResult = Result<Value, ApiError>;

/// Metadata, precondition report and current totals.
pub fn snapshot_meta(s: &Snapshot) -> ApiResult {
    Ok(json!({
        "version": s.version,
        "created_unix": s.created_unix,
        "dataset_fingerprint": s.dataset_fingerprint,
        "schema_fingerprint": s.schema_fingerprint,
        "seed": s.seed,
        "n": s.records.len(),
        "model": s.spec,
        "model_description": s.spec.describe(),
        "feature_names": s.schema.feature_names(),
        "stats": s.stats,
        "q_config": s.q_config,
        "totals": s.totals(),
        "preconditions": s.preconditions,
        "cv": s.cv,
        "comparison": s.comparison,
        "leaderboard": s.leaderboard,
        "warnings": s.warnings,
    }))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ListingsQuery {
    pub category: Option<String>,
    /// `pas` or `price`; listing id order otherwise.
    pub sort: Option<String>,
    /// `asc` or `desc` (the default for sorted output).
    pub order: Option<String>,
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct ListingRow<'a> {
    #[serde(flatten)]
    record: &'a pas::PasRecord,
    beds: u32,
    baths: f64,
    location: &'a str,
    rental_type: &'a str,
    address: &'a str,
}

/// Scored records joined with their listing attributes.
pub fn listings(s: &Snapshot, query: &ListingsQuery) -> ApiResult {
    let category = match query.category.as_deref() {
        None | Some("") => None,
        Some(c) => Some(
            Category::parse(c).ok_or_else(|| ApiError::bad_request("InvalidQuery", format!("unknown category {c:?}")))?,
        ),
    };
    let mut rows: Vec<ListingRow> = s
        .records
        .iter()
        .zip(&s.listings)
        .filter(|(r, _)| category.is_none_or(|c| r.category == c))
        .map(|(record, l)| ListingRow {
            record,
            beds: l.beds,
            baths: l.baths,
            location: &l.location,
            rental_type: &l.rental_type,
            address: &l.address,
        })
        .collect();
    let descending = match query.order.as_deref() {
        None | Some("desc") => true,
        Some("asc") => false,
        Some(o) => return Err(ApiError::bad_request("InvalidQuery", format!("unknown order {o:?}"))),
    };
    let key: Option<fn(&ListingRow) -> f64> = match query.sort.as_deref() {
        None | Some("") | Some("id") => None,
        Some("pas") => Some(|r| r.record.pas),
        Some("price") => Some(|r| r.record.p),
        Some(o) => return Err(ApiError::bad_request("InvalidQuery", format!("unknown sort key {o:?}"))),
    };
    if let Some(key) = key {
        rows.sort_by(|a, b| {
            let ord = key(a).total_cmp(&key(b));
            let ord = if descending { ord.reverse() } else { ord };
            ord.then(a.record.listing_id.cmp(&b.record.listing_id))
        });
    }
    let total = rows.len();
    let offset = query.offset.unwrap_or(0).min(total);
    let limit = query.limit.unwrap_or(DEFAULT_LIMIT);
    let items: Vec<&ListingRow> = rows[offset..].iter().take(limit).collect();
    Ok(json!({ "q": s.q_config.q, "total": total, "offset": offset, "items": items }))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct HistogramQuery {
    pub metric: Option<String>,
    pub bins: Option<usize>,
    pub q: Option<f64>,
}

/// Histogram re-binned on request; `q` only changes the per-bin category
/// split, never the stored snapshot.
pub fn histogram(s: &Snapshot, query: &HistogramQuery) -> ApiResult {
    let metric = match query.metric.as_deref() {
        None | Some("pas") => Metric::Pas,
        Some("z") => Metric::Z,
        Some(m) => return Err(ApiError::bad_request("InvalidQuery", format!("unknown metric {m:?}"))),
    };
    let q = query.q.unwrap_or(s.q_config.q);
    let h = pas::histogram(&s.records, metric, q, query.bins.unwrap_or(DEFAULT_BINS))?;
    let totals = pas::CategoryCounts::of(s.records.iter().map(|r| pas::category_of(r.pas, q)));
    Ok(json!({ "q": q, "n": s.records.len(), "totals": totals, "histogram": h }))
}

/// PCA coordinates coloured by the current categories.
pub fn pca(s: &Snapshot) -> ApiResult {
    let Some(p) = &s.pca else {
        return Err(ApiError { status: 404, name: "NotAvailable".into(), message: "snapshot has no PCA projection".into() });
    };
    let points: Vec<Value> = p
        .points
        .iter()
        .zip(&s.records)
        .map(|(pt, r)| json!({ "listing_id": pt.listing_id, "pc1": pt.pc1, "pc2": pt.pc2, "category": r.category }))
        .collect();
    Ok(json!({
        "q": s.q_config.q,
        "components": p.components,
        "eigenvalues": p.eigenvalues,
        "standardized": p.standardized,
        "points": points,
    }))
}

pub fn attribution(s: &Snapshot) -> ApiResult {
    match &s.attribution {
        Some(a) => Ok(serde_json::to_value(a).expect("serializable")),
        None => Err(ApiError {
            status: 404,
            name: "NotAvailable".into(),
            message: "attributions are only computed for boosted models".into(),
        }),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum QUpdate {
    Manual { q: f64 },
    Exemplar { exemplar_id: u64 },
}

/// Builds the snapshot for a new threshold and the response describing it.
pub fn update_q(s: &Snapshot, body: &QUpdate) -> Result<(Snapshot, Value), ApiError> {
    let next = match body {
        QUpdate::Manual { q } => s.with_q(QConfig::manual(*q)?)?,
        QUpdate::Exemplar { exemplar_id } => s.calibrated(*exemplar_id)?,
    };
    let response = json!({
        "q": next.q_config.q,
        "q_config": next.q_config,
        "totals": next.totals(),
    });
    Ok((next, response))
}

pub fn parse_q_update(body: &[u8]) -> Result<QUpdate, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::bad_request("InvalidBody", format!("expected {{\"q\": number}} or {{\"exemplar_id\": id}}: {e}"))
    })
}
