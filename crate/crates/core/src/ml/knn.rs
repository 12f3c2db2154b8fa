use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::scalar::Float;

/// k-nearest-neighbour vote under Euclidean distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KnnModel<F: Float> {
    pub k: usize,
    pub x: Array2<F>,
    pub y: Vec<bool>,
}

pub(crate) fn squared_distance<F: Float>(a: ArrayView1<F>, b: ArrayView1<F>) -> F {
    a.iter()
        .zip(b.iter())
        .map(|(&u, &v)| (u - v) * (u - v))
        .sum()
}

impl<F: Float> KnnModel<F> {
    pub fn fit(x: ArrayView2<F>, y: &[bool], k: usize) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Data(format!("{} labels for {} rows", y.len(), x.nrows())));
        }
        if k == 0 || k > x.nrows() {
            return Err(Error::Config(format!(
                "k = {k} must be in 1..={} (training rows)",
                x.nrows()
            )));
        }
        Ok(Self {
            k,
            x: x.to_owned(),
            y: y.to_vec(),
        })
    }

    /// Indices of the `k` nearest training rows, nearest first. Equal
    /// distances resolve to the lower row index.
    pub fn neighbors(&self, row: ArrayView1<F>) -> Vec<usize> {
        let mut cand: Vec<(F, usize)> = self
            .x
            .outer_iter()
            .enumerate()
            .map(|(i, r)| (squared_distance(r, row), i))
            .collect();
        let order = |a: &(F, usize), b: &(F, usize)| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        };
        if self.k < cand.len() {
            cand.select_nth_unstable_by(self.k - 1, order);
            cand.truncate(self.k);
        }
        cand.sort_unstable_by(order);
        cand.into_iter().map(|(_, i)| i).collect()
    }

    fn vote(&self, row: ArrayView1<F>) -> (usize, bool) {
        let nb = self.neighbors(row);
        let pos = nb.iter().filter(|&&i| self.y[i]).count();
        (pos, self.y[nb[0]])
    }
}

impl<F: Float> Classifier<F> for KnnModel<F> {
    fn score(&self, row: ArrayView1<F>) -> F {
        let (pos, _) = self.vote(row);
        F::from_count(pos) / F::from_count(self.k)
    }

    /// Majority vote; an exact 50/50 split takes the nearest neighbour's label.
    fn predict(&self, row: ArrayView1<F>) -> bool {
        let (pos, nearest) = self.vote(row);
        match (2 * pos).cmp(&self.k) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => nearest,
        }
    }
}
