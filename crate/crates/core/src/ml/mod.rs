//! Standardization, Lasso feature selection and the four classifiers.
//!
//! All models are generic over [`Float`] and expose a real-valued score and
//! a hard prediction that agrees with thresholding that score.

pub mod forest;
pub mod knn;
pub mod lasso;
mod params;
mod pipeline;
pub mod scaler;
pub mod svm;
pub mod tree;

pub use forest::{ForestModel, ForestParams};
pub use knn::KnnModel;
pub use lasso::{lambda_max, LassoModel, LassoParams};
pub use params::{Depth, Family, Gamma, HyperParams, MaxFeatures};
pub use pipeline::{FittedModel, Preprocessor, SelectionConfig, SelectionMode, TrainedClassifier};
pub use scaler::ScalerState;
pub use svm::{Kernel, SvmModel, SvmParams};
pub use tree::{gini, Node, TreeModel, TreeParams};

use ndarray::{ArrayView1, ArrayView2};

use crate::scalar::Float;

pub trait Classifier<F: Float> {
    /// Real-valued score; larger means more likely positive.
    fn score(&self, row: ArrayView1<F>) -> F;

    /// Score at or above which `predict` returns `true`.
    fn threshold(&self) -> F {
        F::cst(0.5)
    }

    fn predict(&self, row: ArrayView1<F>) -> bool {
        self.score(row) >= self.threshold()
    }

    fn score_rows(&self, x: ArrayView2<F>) -> Vec<F> {
        x.outer_iter().map(|r| self.score(r)).collect()
    }

    fn predict_rows(&self, x: ArrayView2<F>) -> Vec<bool> {
        x.outer_iter().map(|r| self.predict(r)).collect()
    }
}
