//! Feature extraction, classifiers, cross-validation and the threshold sweep.

mod cv;
mod features;
mod forest;
mod knn;
mod sweep;

pub use cv::{
    cross_validate, stratified_folds, ClassifierSpec, Confusion, CvGranularity, CvParams,
    CvReport, FoldResult, MetricSummary,
};
pub use features::{build_feature_table, FeatureRow, FeatureTable, Measure};
pub use forest::{rf_predict, rf_train, DecisionTree, ForestParams, RandomForest};
pub use knn::{knn_classify, knn_predict};
pub use sweep::{default_grid, threshold_sweep, SweepPoint, SweepResult};
