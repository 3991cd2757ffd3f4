//! Histogram gradient-boosted regression trees.

mod binning;
mod cv;
mod ensemble;
mod grow;
mod loss;
mod profile;
mod train;
mod tree;

pub use binning::{bin_features, BinnedMatrix, Binning, FeatureBins, MISSING_BIN};
pub use cv::{cv_grid_search, default_grid, kfold, CvCell, CvResult};
pub use ensemble::{predict, Ensemble, FORMAT_NAME, FORMAT_VERSION};
pub use grow::{grow_tree, GrownTree};
pub use loss::{grad_hess, pinball, LossSpec};
pub use profile::{daily_profile, DailyProfile, ProfileMode};
pub use train::{fit, fit_final, predict_rows, renew_leaf_quantile, FinalFit, FitReport, StopReason, TrainConfig};
pub use tree::{Node, NodeKind, Tree};
