//! Soft-margin SVM trained on the dual by SMO with maximal-violating-pair
//! working set selection.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::knn::squared_distance;
use super::Classifier;
use crate::error::{Error, Result};
use crate::scalar::Float;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case", tag = "type")]
pub enum Kernel<F: Float> {
    Linear,
    Rbf { gamma: F },
}

impl<F: Float> Kernel<F> {
    pub fn eval(&self, a: ArrayView1<F>, b: ArrayView1<F>) -> F {
        match *self {
            Kernel::Linear => a.dot(&b),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SvmParams<F: Float> {
    pub c: F,
    pub kernel: Kernel<F>,
    /// Stop when the maximal KKT violation `m(a) - M(a)` drops below this.
    pub tol: F,
    /// Iteration cap, in passes over the training set.
    pub max_passes: usize,
}

impl<F: Float> SvmParams<F> {
    pub fn new(c: F, kernel: Kernel<F>) -> Self {
        Self {
            c,
            kernel,
            tol: F::cst(1e-3),
            max_passes: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SvmModel<F: Float> {
    pub kernel: Kernel<F>,
    pub c: F,
    pub bias: F,
    /// Rows of the training set with nonzero dual coefficient.
    pub support_vectors: Array2<F>,
    /// Dual coefficient of each support vector, in `(0, C]`.
    pub alphas: Vec<F>,
    /// Label of each support vector as `+1` / `-1`.
    pub sv_labels: Vec<F>,
    pub iterations: usize,
}

impl<F: Float> SvmModel<F> {
    pub fn fit(x: ArrayView2<F>, y: &[bool], params: &SvmParams<F>) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::Data(format!("{} labels for {} rows", y.len(), n)));
        }
        if n == 0 {
            return Err(Error::Data("svm needs at least one row".into()));
        }
        if params.c.is_nan() || params.c <= F::zero() {
            return Err(Error::Config("svm C must be positive".into()));
        }
        if let Kernel::Rbf { gamma } = params.kernel {
            if gamma.is_nan() || gamma <= F::zero() {
                return Err(Error::Config("rbf gamma must be positive".into()));
            }
        }
        let c = params.c;
        let ys: Vec<F> = y.iter().map(|&p| if p { F::one() } else { -F::one() }).collect();

        // Q[i][j] = y_i y_j K(x_i, x_j)
        let rows: Vec<_> = x.axis_iter(Axis(0)).collect();
        let mut q = Array2::<F>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = ys[i] * ys[j] * params.kernel.eval(rows[i], rows[j]);
                q[[i, j]] = v;
                q[[j, i]] = v;
            }
        }

        let mut alpha = vec![F::zero(); n];
        let mut grad = vec![-F::one(); n];
        let tau = F::cst(1e-12);
        let max_iter = params.max_passes.saturating_mul(n.max(1));
        let mut iterations = 0;

        let in_up = |a: F, yv: F| (yv > F::zero() && a < c) || (yv < F::zero() && a > F::zero());
        let in_low = |a: F, yv: F| (yv > F::zero() && a > F::zero()) || (yv < F::zero() && a < c);

        loop {
            let mut i = usize::MAX;
            let mut m_up = F::neg_infinity();
            let mut j = usize::MAX;
            let mut m_low = F::infinity();
            for t in 0..n {
                let v = -ys[t] * grad[t];
                if in_up(alpha[t], ys[t]) && v > m_up {
                    m_up = v;
                    i = t;
                }
                if in_low(alpha[t], ys[t]) && v < m_low {
                    m_low = v;
                    j = t;
                }
            }
            if i == usize::MAX || j == usize::MAX || m_up - m_low < params.tol {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::SvmConvergence {
                    iterations,
                    violation: (m_up - m_low).as_f64(),
                });
            }
            iterations += 1;

            let (old_i, old_j) = (alpha[i], alpha[j]);
            if ys[i] != ys[j] {
                let mut quad = q[[i, i]] + q[[j, j]] + F::cst(2.0) * q[[i, j]];
                if quad <= F::zero() {
                    quad = tau;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > F::zero() {
                    if alpha[j] < F::zero() {
                        alpha[j] = F::zero();
                        alpha[i] = diff;
                    }
                } else if alpha[i] < F::zero() {
                    alpha[i] = F::zero();
                    alpha[j] = -diff;
                }
                if diff > F::zero() {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let mut quad = q[[i, i]] + q[[j, j]] - F::cst(2.0) * q[[i, j]];
                if quad <= F::zero() {
                    quad = tau;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < F::zero() {
                    alpha[j] = F::zero();
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < F::zero() {
                    alpha[i] = F::zero();
                    alpha[j] = sum;
                }
            }

            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for k in 0..n {
                grad[k] += q[[i, k]] * di + q[[j, k]] * dj;
            }
        }

        // bias from free vectors, else the midpoint of the feasible interval
        let mut ub = F::infinity();
        let mut lb = F::neg_infinity();
        let mut free_sum = F::zero();
        let mut n_free = 0usize;
        for t in 0..n {
            let yg = ys[t] * grad[t];
            if alpha[t] >= c {
                if ys[t] < F::zero() {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= F::zero() {
                if ys[t] > F::zero() {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                free_sum += yg;
            }
        }
        let rho = if n_free > 0 {
            free_sum / F::from_count(n_free)
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) / F::cst(2.0)
        } else if ub.is_finite() {
            ub
        } else if lb.is_finite() {
            lb
        } else {
            F::zero()
        };

        let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > F::zero()).collect();
        let support_vectors = x.select(Axis(0), &sv);
        Ok(Self {
            kernel: params.kernel,
            c,
            bias: -rho,
            support_vectors,
            alphas: sv.iter().map(|&t| alpha[t]).collect(),
            sv_labels: sv.iter().map(|&t| ys[t]).collect(),
            iterations,
        })
    }

    /// `sum_i alpha_i y_i`, zero at any dual-feasible point.
    pub fn dual_balance(&self) -> F {
        self.alphas
            .iter()
            .zip(&self.sv_labels)
            .map(|(&a, &y)| a * y)
            .sum()
    }
}

impl<F: Float> Classifier<F> for SvmModel<F> {
    /// Decision value `sum_i alpha_i y_i K(x_i, x) + b`.
    fn score(&self, row: ArrayView1<F>) -> F {
        let s: F = self
            .support_vectors
            .outer_iter()
            .zip(self.alphas.iter().zip(&self.sv_labels))
            .map(|(sv, (&a, &y))| a * y * self.kernel.eval(sv, row))
            .sum();
        s + self.bias
    }

    fn predict(&self, row: ArrayView1<F>) -> bool {
        self.score(row) > F::zero()
    }

    fn threshold(&self) -> F {
        F::zero()
    }
}
