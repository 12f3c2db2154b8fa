//! Metrics, fold splitting, grid search and nested cross-validation.

mod metrics;
mod nested;
mod plan;
mod report;
mod search;
mod split;

pub use metrics::{
    compute_metrics, roc_auc, roc_points, ConfusionMatrix, Degenerate, MeanStd, MetricSet,
    MetricSummary, RocPoint,
};
pub use nested::{
    fit_outer_fold, nested_cv, nested_cv_array, outer_test_rows, EvaluationReport, ModelReport,
    NestedResult, OuterFoldResult, INNER_STD_CONVENTION,
};
pub use plan::{CvPlan, ForestGrid, Grids, KnnGrid, SvmGrid, TreeGrid};
pub use report::{format_cell, render_text};
pub use search::{
    inner_grid_search, make_folds, point_seed, prepare_folds, search_prepared, Evaluated,
    PointResult, PreparedSplit, SearchResult,
};
pub use split::{kfold, stratified_kfold, Folds};
