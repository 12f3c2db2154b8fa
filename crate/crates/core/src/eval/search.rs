use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, ConfusionMatrix, MetricSet, MetricSummary};
use super::split::{kfold, stratified_kfold, Folds};
use crate::error::{Error, Result};
use crate::ml::{Classifier, FittedModel, HyperParams, Preprocessor, SelectionConfig};
use crate::seed::derive_path;

/// One train/test split with preprocessing fitted on the training rows only.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub preprocessor: Preprocessor<f64>,
    pub z_train: Array2<f64>,
    pub y_train: Vec<bool>,
    pub z_test: Array2<f64>,
    pub y_test: Vec<bool>,
}

impl PreparedSplit {
    /// `columns` pins the selected columns (scaler is still fit on `train`);
    /// otherwise Lasso selection runs on `train`.
    pub fn new(
        x: ArrayView2<f64>,
        y: &[bool],
        train: &[usize],
        test: &[usize],
        selection: &SelectionConfig,
        columns: Option<&[usize]>,
    ) -> Result<Self> {
        let x_train = x.select(Axis(0), train);
        let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let preprocessor = match columns {
            Some(c) => Preprocessor::with_columns(x_train.view(), c)?,
            None => Preprocessor::fit(x_train.view(), &y_train, selection)?,
        };
        let z_train = preprocessor.transform(x_train.view())?;
        let z_test = preprocessor.transform(x.select(Axis(0), test).view())?;
        Ok(Self {
            preprocessor,
            z_train,
            y_train,
            z_test,
            y_test: test.iter().map(|&i| y[i]).collect(),
        })
    }

    pub fn fit(&self, params: &HyperParams, seed: u64) -> Result<FittedModel<f64>> {
        FittedModel::fit(self.z_train.view(), &self.y_train, params, seed)
    }

    /// Fits and scores the test rows.
    pub fn evaluate(&self, params: &HyperParams, seed: u64) -> Result<Evaluated> {
        let model = self.fit(params, seed)?;
        let scores = model.score_rows(self.z_test.view());
        let predictions = model.predict_rows(self.z_test.view());
        let (metrics, confusion) = compute_metrics(&self.y_test, &predictions, &scores)?;
        Ok(Evaluated {
            model,
            scores,
            predictions,
            metrics,
            confusion,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Evaluated {
    pub model: FittedModel<f64>,
    pub scores: Vec<f64>,
    pub predictions: Vec<bool>,
    pub metrics: MetricSet,
    pub confusion: ConfusionMatrix,
}

pub fn make_folds(y: &[bool], k: usize, stratified: bool, seed: u64) -> Result<Folds> {
    if stratified {
        stratified_kfold(y, k, seed)
    } else {
        kfold(y.len(), k, seed)
    }
}

/// Splits `x` into `k` folds and prepares each.
pub fn prepare_folds(
    x: ArrayView2<f64>,
    y: &[bool],
    folds: &Folds,
    selection: &SelectionConfig,
    columns: Option<&[usize]>,
) -> Result<Vec<PreparedSplit>> {
    (0..folds.k())
        .into_par_iter()
        .map(|i| {
            let (train, test) = folds.split(i);
            PreparedSplit::new(x, y, &train, &test, selection, columns)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub params: HyperParams,
    /// Mean over folds whose AUC was defined.
    pub mean_auc: Option<f64>,
    pub mean_f1: f64,
    pub folds: Vec<MetricSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: HyperParams,
    pub best_index: usize,
    /// Inner-fold mean and std at the chosen point.
    pub inner: MetricSummary,
    pub points: Vec<PointResult>,
}

/// Seed for the model fitted at grid point `point` on inner fold `fold`.
pub fn point_seed(seed: u64, fold: usize, point: usize) -> u64 {
    derive_path(seed, &[fold as u64, point as u64])
}

/// `true` when `a` beats `b`: higher mean AUC, then higher mean F1.
/// Equal on both keeps the earlier grid point.
fn better(a: &PointResult, b: &PointResult) -> bool {
    let auc = |p: &PointResult| p.mean_auc.unwrap_or(f64::NEG_INFINITY);
    match auc(a).partial_cmp(&auc(b)) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Equal) => a.mean_f1 > b.mean_f1,
        _ => false,
    }
}

/// Grid search over already prepared inner folds.
pub fn search_prepared(
    splits: &[PreparedSplit],
    grid: &[HyperParams],
    seed: u64,
) -> Result<SearchResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let k = splits.len();
    let cells: Vec<MetricSet> = (0..grid.len() * k)
        .into_par_iter()
        .map(|c| {
            let (p, f) = (c / k, c % k);
            splits[f]
                .evaluate(&grid[p], point_seed(seed, f, p))
                .map(|e| e.metrics)
        })
        .collect::<Result<_>>()?;
    let points: Vec<PointResult> = grid
        .iter()
        .zip(cells.chunks(k))
        .map(|(params, folds)| {
            let aucs: Vec<f64> = folds.iter().filter_map(|m| m.roc_auc).collect();
            PointResult {
                params: *params,
                mean_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
                mean_f1: folds.iter().map(|m| m.f1).sum::<f64>() / k as f64,
                folds: folds.to_vec(),
            }
        })
        .collect();
    let mut best_index = 0;
    for i in 1..points.len() {
        if better(&points[i], &points[best_index]) {
            best_index = i;
        }
    }
    Ok(SearchResult {
        best: grid[best_index],
        best_index,
        inner: MetricSummary::of(&points[best_index].folds)?,
        points,
    })
}

/// Stratified inner k-fold grid search with preprocessing refit on every
/// inner training split.
pub fn inner_grid_search(
    x: ArrayView2<f64>,
    y: &[bool],
    grid: &[HyperParams],
    inner_folds: usize,
    seed: u64,
    selection: &SelectionConfig,
) -> Result<SearchResult> {
    let folds = stratified_kfold(y, inner_folds, seed)?;
    let splits = prepare_folds(x, y, &folds, selection, None)?;
    search_prepared(&splits, grid, seed)
}
