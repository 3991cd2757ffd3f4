//! Explainable gradient-boosted-tree modelling of activated secondary control
//! reserve (aFRR).
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`dataset`]: 15-minute time tables, CSV ingest against a schema manifest,
//!   a deterministic synthetic generator and an optional archive download.
//! * [`features`]: upsampling, ramps, forecast errors, flow balances, IGCC
//!   aggregation, calendar columns and the five model variants.
//! * [`gbt`]: histogram gradient-boosted regression trees under L2 and
//!   quantile (pinball) loss, cross-validated grid search and the daily-profile
//!   baseline.
//! * [`shap`]: exact path-dependent TreeSHAP, a brute-force Shapley oracle and
//!   the importance / dependency aggregations.
//! * [`eval`]: split construction and metrics (R², mean quantile loss, coverage).
//! * [`pipeline`]: the command driver behind the `afrr` binary.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbt;
pub mod pipeline;
pub mod shap;
pub mod stats;

pub use dataset::{Area, ColumnKind, ColumnMeta, Manifest, Series, TimeTable, Timestamp};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{MetricReport, SplitPlan};
pub use features::{FeatureMatrix, ModelVariant, Target, VariantName};
pub use gbt::{Ensemble, FitReport, LossSpec, TrainConfig};
pub use shap::{Explanation, ImportanceTable};
