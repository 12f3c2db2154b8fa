//! CART classification tree with Gini impurity.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::scalar::Float;

/// Gains closer than this are treated as equal, so the earlier candidate
/// (lower column, then lower threshold) wins.
pub const GAIN_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// `None` grows until purity or leaf-size limits stop it.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Columns considered per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum Node<F: Float> {
    Leaf {
        /// `[negatives, positives]` reaching this leaf.
        counts: [usize; 2],
    },
    Split {
        column: usize,
        /// Rows with `x[column] <= threshold` go left.
        threshold: F,
        gain: F,
        left: usize,
        right: usize,
        counts: [usize; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TreeModel<F: Float> {
    pub nodes: Vec<Node<F>>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

/// Gini impurity `1 - p0^2 - p1^2` of a two-class count pair.
pub fn gini<F: Float>(counts: [usize; 2]) -> F {
    let n = counts[0] + counts[1];
    if n == 0 {
        return F::zero();
    }
    let nf = F::from_count(n);
    let p0 = F::from_count(counts[0]) / nf;
    let p1 = F::from_count(counts[1]) / nf;
    F::one() - p0 * p0 - p1 * p1
}

#[derive(Debug, Clone, Copy)]
struct Candidate<F> {
    column: usize,
    threshold: F,
    gain: F,
}

struct Builder<'a, F: Float, R> {
    x: ArrayView2<'a, F>,
    y: &'a [bool],
    params: TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<Node<F>>,
}

fn counts_of(y: &[bool], idx: &[usize]) -> [usize; 2] {
    let pos = idx.iter().filter(|&&i| y[i]).count();
    [idx.len() - pos, pos]
}

impl<F: Float, R: Rng> Builder<'_, F, R> {
    fn candidate_columns(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut cols = sample(rng, p, m.max(1)).into_vec();
                cols.sort_unstable();
                cols
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize], counts: [usize; 2]) -> Option<Candidate<F>> {
        let n = idx.len();
        let nf = F::from_count(n);
        let parent = gini::<F>(counts);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let eps = F::cst(GAIN_TIE_EPS);
        let mut best: Option<Candidate<F>> = None;
        let mut sorted = idx.to_vec();
        for column in self.candidate_columns() {
            let col = self.x.column(column);
            sorted.sort_by(|&a, &b| {
                col[a]
                    .partial_cmp(&col[b])
                    .expect("finite features")
                    .then(a.cmp(&b))
            });
            let mut left = [0usize; 2];
            for k in 0..n - 1 {
                left[usize::from(self.y[sorted[k]])] += 1;
                let (lo, hi) = (col[sorted[k]], col[sorted[k + 1]]);
                if lo == hi {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let weighted = F::from_count(nl) / nf * gini::<F>(left)
                    + F::from_count(nr) / nf * gini::<F>(right);
                let gain = parent - weighted;
                if best.is_none_or(|b| gain > b.gain + eps) {
                    let mut threshold = (lo + hi) / F::cst(2.0);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        column,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let counts = counts_of(self.y, idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_ok || idx.len() < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(idx, counts) else {
            return id;
        };
        let col = self.x.column(split.column);
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| col[i] <= split.threshold);
        let left = self.build(&l, depth + 1);
        let right = self.build(&r, depth + 1);
        self.nodes[id] = Node::Split {
            column: split.column,
            threshold: split.threshold,
            gain: split.gain,
            left,
            right,
            counts,
        };
        id
    }
}

impl<F: Float> TreeModel<F> {
    pub fn fit(x: ArrayView2<F>, y: &[bool], params: TreeParams) -> Result<Self> {
        let idx: Vec<usize> = (0..x.nrows()).collect();
        Self::fit_rows::<rand_chacha::ChaCha8Rng>(x, y, &idx, params, None)
    }

    /// Fits on the multiset of rows `idx` (duplicates allowed, as in a
    /// bootstrap sample). `rng` drives per-split column subsampling.
    pub fn fit_rows<R: Rng>(
        x: ArrayView2<F>,
        y: &[bool],
        idx: &[usize],
        params: TreeParams,
        rng: Option<&mut R>,
    ) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Data(format!("{} labels for {} rows", y.len(), x.nrows())));
        }
        if idx.is_empty() {
            return Err(Error::Data("tree needs at least one row".into()));
        }
        let mut b = Builder {
            x,
            y,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.build(idx, 0);
        Ok(Self {
            nodes: b.nodes,
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
        })
    }

    /// `(column, threshold, gain)` of the root, if the root splits.
    pub fn root_split(&self) -> Option<(usize, F, F)> {
        match self.nodes.first()? {
            Node::Split {
                column,
                threshold,
                gain,
                ..
            } => Some((*column, *threshold, *gain)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn go<F: Float>(nodes: &[Node<F>], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_counts(&self, row: ArrayView1<F>) -> [usize; 2] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if row[*column] <= *threshold { *left } else { *right },
            }
        }
    }
}

impl<F: Float> Classifier<F> for TreeModel<F> {
    /// Positive fraction at the reached leaf.
    fn score(&self, row: ArrayView1<F>) -> F {
        let c = self.leaf_counts(row);
        F::from_count(c[1]) / F::from_count(c[0] + c[1])
    }
}
