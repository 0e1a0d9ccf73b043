//! Rental price anomaly scoring.
//!
//! Listings are cleaned from scraped CSV, encoded into a design matrix, and
//! fitted with gradient-boosted trees on log price. Each listing's residual
//! is standardized and amplified by its price ratio into a Price Anomaly
//! Score; a threshold `q` splits listings into Overpriced, Underpriced and
//! Fair-priced. Tree SHAP and a 2-D PCA projection support inspection.
//!
//! ```
//! use pas_core::pas::{score_population, Category};
//!
//! let ids = [1, 2, 3];
//! let prices = [3000.0, 2000.0, 1500.0];
//! let log_pred = [2000f64.ln(); 3];
//! let (_, records) = score_population(&ids, &prices, &log_pred, 0.4).unwrap();
//! assert_eq!(records[0].category, Category::Overpriced);
//! assert_eq!(records[2].category, Category::Underpriced);
//! ```

pub mod error;
pub mod evaluation;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod matrix;
pub mod models;
pub mod pas;
pub mod pipeline;
pub mod snapshot;
pub mod synth;

pub use error::{Error, Result};
pub use features::{fit_schema, transform, DesignMatrix, FeatureSchema};
pub use ingest::{ingest_csv, Listing, SchemaMode};
pub use matrix::Matrix;
pub use models::{FittedModel, GbtModel, GbtParams, RegressorSpec};
pub use pas::{Category, PasRecord, QConfig, ResidualStats};
pub use pipeline::{train, TrainOptions};
pub use snapshot::Snapshot;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/boosting.md")]
    mod boosting {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pas.md")]
    mod pas {}
    #[doc = include_str!("../../../book/src/explain.md")]
    mod explain {}
    #[doc = include_str!("../../../book/src/snapshots.md")]
    mod snapshots {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
