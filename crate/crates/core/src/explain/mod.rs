//! Model explanation: tree SHAP attributions and a 2-D PCA projection of the
//! design matrix.

pub mod pca;
pub mod shap;

pub use pca::{pca_top2, pca_top2_with, PcaOptions, PcaProjection};
pub use shap::{expected_value, shap_summary, shap_values, tree_shap, Attribution, AttributionRow, FeatureAttribution, ShapSample, ShapSummary};
