//! FOD estimators (SHridge, BJS, SCSD) and their shared building blocks.
//!
//! Each estimator splits into design-level precomputation, built once per
//! gradient table and kernel, and a per-voxel fit that only reads it. The free
//! functions rebuild the precomputation on every call and exist for one-off use.

mod bjs;
mod coefficients;
mod config;
mod ols;
mod registry;
mod ridge;
mod scsd;
mod superres;

pub use bjs::{
    bjs_estimate, bjs_shrink, bjs_transform, level_threshold_parameter, sharpen_one_step, shrink_factor, BjsModel,
    SpectrumNorms, TransformedObservations,
};
pub use coefficients::{ShCoefficients, FODC_MAGIC, FODC_VERSION};
pub(crate) use coefficients::evaluate_prefix;
pub use config::{default_ridge_grid, log_spaced, FitConfig, ThresholdMode};
pub use ols::{estimate_noise_variance, OlsProjector};
pub use registry::{EstimatorConstructor, EstimatorKind, EstimatorRegistry, FitContext, FitOutcome, FodEstimator};
pub use ridge::{shridge_bic_select, shridge_fit, RidgePath, RidgePenalty, RidgeSelection};
pub use scsd::{super_csd, ScsdModel, ScsdOutcome, FILTER_DEGREE};
pub use superres::SuperResolutionSystem;
