use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
///
/// Variant names are part of the external contract: the CLI and HTTP layer
/// surface them verbatim through [`Error::name`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("price text {0:?} contains no number")]
    NonNumericPrice(String),
    #[error("price must be positive, got {0}")]
    NonPositivePrice(f64),
    #[error("could not find a bedroom count or \"studio\" in {0:?}")]
    UnparseableDetails(String),
    #[error("could not split title {0:?} into rental type and location")]
    UnparseableTitle(String),
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("empty location")]
    EmptyLocation,
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidSpec { name: &'static str, value: f64 },
    #[error("row width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("normal equations are singular; use alpha > 0")]
    SingularSystem,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("ground truth has zero variance; R² is undefined")]
    ZeroVarianceTruth,
    #[error("k must satisfy 2 <= k <= n (k = {k}, n = {n})")]
    BadK { k: usize, n: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("residuals have zero standard deviation")]
    ZeroSigma,
    #[error("need at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("q must be positive, got {0}")]
    NonPositiveQ(f64),
    #[error("no scored listing with id {0}")]
    UnknownListing(u64),
    #[error("exemplar {0} has PAS 0 and cannot define a threshold")]
    ZeroPasExemplar(u64),
    #[error("no records to summarize")]
    EmptyRecords,
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("all rows are identical; nothing to project")]
    DegenerateMatrix,
    #[error("PAS preconditions failed: {}", .0.join("; "))]
    PreconditionsFailed(Vec<String>),
    #[error("snapshot is inconsistent: {0}")]
    SnapshotMismatch(String),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonNumericPrice(_) => "NonNumericPrice",
            Error::NonPositivePrice(_) => "NonPositivePrice",
            Error::UnparseableDetails(_) => "UnparseableDetails",
            Error::UnparseableTitle(_) => "UnparseableTitle",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::EmptyLocation => "EmptyLocation",
            Error::FileUnreadable { .. } => "FileUnreadable",
            Error::MissingColumns(_) => "MissingColumns",
            Error::Csv(_) => "MalformedCsv",
            Error::EmptyDataset => "EmptyDataset",
            Error::InvalidSpec { .. } => "InvalidSpec",
            Error::WidthMismatch { .. } => "WidthMismatch",
            Error::SingularSystem => "SingularSystem",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::ZeroVarianceTruth => "ZeroVarianceTruth",
            Error::BadK { .. } => "BadK",
            Error::EmptyGrid => "EmptyGrid",
            Error::ZeroSigma => "ZeroSigma",
            Error::TooFewRecords(_) => "TooFewRecords",
            Error::NonPositiveQ(_) => "NonPositiveQ",
            Error::UnknownListing(_) => "UnknownListing",
            Error::ZeroPasExemplar(_) => "ZeroPasExemplar",
            Error::EmptyRecords => "EmptyRecords",
            Error::ZeroBins => "ZeroBins",
            Error::DegenerateMatrix => "DegenerateMatrix",
            Error::PreconditionsFailed(_) => "PreconditionsFailed",
            Error::SnapshotMismatch(_) => "SnapshotMismatch",
            Error::Json(_) => "Json",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
