//! Standardize, select columns with Lasso, fit one classifier.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::forest::{ForestModel, ForestParams};
use super::knn::KnnModel;
use super::lasso::{lambda_max, LassoModel, LassoParams};
use super::params::{Family, HyperParams};
use super::scaler::ScalerState;
use super::svm::{Kernel, SvmModel, SvmParams};
use super::tree::{TreeModel, TreeParams};
use super::Classifier;
use crate::error::{Error, Result};
use crate::scalar::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Lasso refit on every training split.
    #[default]
    InsideFold,
    /// Lasso fit once on the whole labeled matrix before splitting. Leaks
    /// held-out labels into the column choice; reports flag it.
    Global,
    /// Keep every column.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub mode: SelectionMode,
    /// Lasso penalty as a fraction of the training split's `lambda_max`.
    pub lambda_ratio: f64,
    pub min_abs_coef: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            mode: SelectionMode::InsideFold,
            lambda_ratio: 0.2,
            min_abs_coef: 0.0,
        }
    }
}

/// Fitted scaler plus the column subset the classifier sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Preprocessor<F: Float> {
    pub scaler: ScalerState<F>,
    /// Columns fed to the model, ascending.
    pub selected: Vec<usize>,
    /// Lasso coefficients of the selected columns, largest magnitude first.
    pub importance: Vec<(usize, F)>,
    pub lambda: F,
    /// Set when Lasso kept nothing and all columns were used instead.
    pub fallback: bool,
}

impl<F: Float> Preprocessor<F> {
    pub fn fit(x: ArrayView2<F>, y: &[bool], cfg: &SelectionConfig) -> Result<Self> {
        let scaler = ScalerState::fit(x)?;
        let p = x.ncols();
        if cfg.mode == SelectionMode::Disabled {
            return Ok(Self {
                scaler,
                selected: (0..p).collect(),
                importance: Vec::new(),
                lambda: F::zero(),
                fallback: false,
            });
        }
        let z = scaler.transform(x)?;
        let target: Array1<F> = y.iter().map(|&b| if b { F::one() } else { F::zero() }).collect();
        let lmax = lambda_max(z.view(), target.view())?;
        let lambda = lmax * F::cst(cfg.lambda_ratio);
        let lasso = LassoModel::fit(z.view(), target.view(), &LassoParams::new(lambda))?;
        let importance = lasso.select(F::cst(cfg.min_abs_coef));
        let mut selected: Vec<usize> = importance.iter().map(|&(j, _)| j).collect();
        selected.sort_unstable();
        let fallback = selected.is_empty();
        if fallback {
            selected = (0..p).collect();
        }
        Ok(Self {
            scaler,
            selected,
            importance,
            lambda,
            fallback,
        })
    }

    /// Scaler fitted on `x`, columns fixed by the caller.
    pub fn with_columns(x: ArrayView2<F>, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= x.ncols()) {
            return Err(Error::Data(format!("column {c} out of range")));
        }
        let mut selected = columns.to_vec();
        selected.sort_unstable();
        selected.dedup();
        Ok(Self {
            scaler: ScalerState::fit(x)?,
            selected,
            importance: Vec::new(),
            lambda: F::zero(),
            fallback: false,
        })
    }

    pub fn n_features(&self) -> usize {
        self.selected.len()
    }

    pub fn transform(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        let z = self.scaler.transform(x)?;
        Ok(z.select(Axis(1), &self.selected))
    }

    pub fn transform_row(&self, row: ArrayView1<F>) -> Array1<F> {
        let z = self.scaler.transform_row(row);
        self.selected.iter().map(|&j| z[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "type", rename_all = "snake_case")]
pub enum FittedModel<F: Float> {
    Knn(KnnModel<F>),
    Tree(TreeModel<F>),
    Svm(SvmModel<F>),
    Forest(ForestModel<F>),
}

impl<F: Float> FittedModel<F> {
    /// Fits on already-preprocessed features.
    pub fn fit(x: ArrayView2<F>, y: &[bool], params: &HyperParams, seed: u64) -> Result<Self> {
        let d = x.ncols();
        Ok(match *params {
            HyperParams::Knn { k } => FittedModel::Knn(KnnModel::fit(x, y, k)?),
            HyperParams::Tree {
                max_depth,
                min_samples_leaf,
            } => FittedModel::Tree(TreeModel::fit(
                x,
                y,
                TreeParams {
                    max_depth: max_depth.0,
                    min_samples_leaf,
                    max_features: None,
                },
            )?),
            HyperParams::Svm { c, gamma } => FittedModel::Svm(SvmModel::fit(
                x,
                y,
                &SvmParams::new(
                    F::cst(c),
                    Kernel::Rbf {
                        gamma: F::cst(gamma.resolve(d)),
                    },
                ),
            )?),
            HyperParams::Forest {
                n_trees,
                max_features,
                max_depth,
            } => FittedModel::Forest(ForestModel::fit(
                x,
                y,
                ForestParams {
                    n_trees,
                    max_features: max_features.resolve(d),
                    max_depth: max_depth.0,
                    min_samples_leaf: 1,
                    bootstrap: true,
                    seed,
                },
            )?),
        })
    }

    fn inner(&self) -> &dyn Classifier<F> {
        match self {
            FittedModel::Knn(m) => m,
            FittedModel::Tree(m) => m,
            FittedModel::Svm(m) => m,
            FittedModel::Forest(m) => m,
        }
    }
}

impl<F: Float> Classifier<F> for FittedModel<F> {
    fn score(&self, row: ArrayView1<F>) -> F {
        self.inner().score(row)
    }

    fn threshold(&self) -> F {
        self.inner().threshold()
    }

    fn predict(&self, row: ArrayView1<F>) -> bool {
        self.inner().predict(row)
    }
}

/// A fitted classifier with the preprocessing it was trained behind.
/// Scores raw (imputed, unstandardized) feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainedClassifier<F: Float> {
    pub family: Family,
    pub params: HyperParams,
    pub seed: u64,
    pub preprocessor: Preprocessor<F>,
    pub model: FittedModel<F>,
}

impl<F: Float> TrainedClassifier<F> {
    pub fn fit(
        x: ArrayView2<F>,
        y: &[bool],
        params: &HyperParams,
        selection: &SelectionConfig,
        seed: u64,
    ) -> Result<Self> {
        let pre = Preprocessor::fit(x, y, selection)?;
        Self::fit_with(pre, x, y, params, seed)
    }

    /// Fits the model behind an already fitted preprocessor.
    pub fn fit_with(
        preprocessor: Preprocessor<F>,
        x: ArrayView2<F>,
        y: &[bool],
        params: &HyperParams,
        seed: u64,
    ) -> Result<Self> {
        let z = preprocessor.transform(x)?;
        let model = FittedModel::fit(z.view(), y, params, seed)?;
        Ok(Self {
            family: params.family(),
            params: *params,
            seed,
            preprocessor,
            model,
        })
    }

    pub fn score_rows(&self, x: ArrayView2<F>) -> Result<Vec<F>> {
        let z = self.preprocessor.transform(x)?;
        Ok(self.model.score_rows(z.view()))
    }

    pub fn predict_rows(&self, x: ArrayView2<F>) -> Result<Vec<bool>> {
        let z = self.preprocessor.transform(x)?;
        Ok(self.model.predict_rows(z.view()))
    }
}
