use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{TreeModel, TreeParams};
use super::Classifier;
use crate::error::{Error, Result};
use crate::scalar::Float;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

/// Bagged CART trees with per-split column subsampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestModel<F: Float> {
    pub trees: Vec<TreeModel<F>>,
    pub n_trees: usize,
    pub max_features: usize,
    pub bootstrap: bool,
    /// Tree `t` is reproducible from the training data and `tree_seeds[t]`.
    pub tree_seeds: Vec<u64>,
}

impl<F: Float> ForestModel<F> {
    pub fn fit(x: ArrayView2<F>, y: &[bool], params: ForestParams) -> Result<Self> {
        if params.n_trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if x.nrows() == 0 {
            return Err(Error::Data("forest needs at least one row".into()));
        }
        if params.max_features == 0 {
            return Err(Error::Config("max_features must be positive".into()));
        }
        let tree_seeds: Vec<u64> = (0..params.n_trees as u64)
            .map(|t| derive_seed(params.seed, t))
            .collect();
        let trees = tree_seeds
            .par_iter()
            .map(|&s| fit_one(x, y, &params, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trees,
            n_trees: params.n_trees,
            max_features: params.max_features,
            bootstrap: params.bootstrap,
            tree_seeds,
        })
    }
}

fn fit_one<F: Float>(
    x: ArrayView2<F>,
    y: &[bool],
    params: &ForestParams,
    seed: u64,
) -> Result<TreeModel<F>> {
    let n = x.nrows();
    let mut r = rng(seed);
    let idx: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| r.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(params.max_features),
    };
    TreeModel::fit_rows(x, y, &idx, tree_params, Some(&mut r))
}

impl<F: Float> Classifier<F> for ForestModel<F> {
    /// Mean of the trees' leaf positive fractions.
    fn score(&self, row: ArrayView1<F>) -> F {
        let total: F = self.trees.iter().map(|t| t.score(row)).sum();
        total / F::from_count(self.trees.len())
    }
}
