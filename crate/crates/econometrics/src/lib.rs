//! Shift-share exposure, the foreign-demand instrument, fixed-effects 2SLS
//! and its variance estimators.
//!
//! Rows are (region, transition) pairs. The endogenous regressor is the
//! change in export exposure (billions of USD) weighted by lagged regional
//! employment shares; the instrument replaces export changes with
//! destination GDP changes weighted by lagged destination export shares.

pub mod bundle;
pub mod error;
pub mod index;
pub mod mc;
pub mod suite;
pub mod tsls;

pub use bundle::{within_transform, BundleSpec, DesignMatrixBundle, FeSpec, Outcome, ShockExposure, WithinReport};
pub use error::{EstimationError, Result};
pub use index::{export_exposure_change, foreign_demand_instrument, PanelIndex, EXPOSURE_UNIT_USD};
pub use mc::{monte_carlo, McConfig, McReport};
pub use suite::{estimate_spec, estimate_suite, results_records, OutcomeSpec, Specification, SuiteRow, RESULTS_HEADER};
pub use tsls::{cluster_robust_vcov, hc1_vcov, shock_level_scores, shock_level_se, tsls, EstimationResult, ShockLevelScores};
