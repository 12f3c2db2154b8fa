//! L1-penalized least squares by cyclic coordinate descent.
//!
//! Minimizes `(1/2n) ||y - b0 - X b||^2 + lambda ||b||_1`. The intercept is
//! unpenalized and handled by centering.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Float;

#[derive(Debug, Clone, Copy)]
pub struct LassoParams<F> {
    pub lambda: F,
    /// Stop once the largest coefficient change in a sweep is below this.
    pub tol: F,
    pub max_sweeps: usize,
    /// Subgradient tolerance required before a fit is accepted.
    pub kkt_tol: F,
}

impl<F: Float> LassoParams<F> {
    pub fn new(lambda: F) -> Self {
        Self {
            lambda,
            tol: F::cst(1e-7),
            max_sweeps: 10_000,
            kkt_tol: F::cst(1e-5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LassoModel<F: Float> {
    pub coefficients: Vec<F>,
    pub intercept: F,
    pub lambda: F,
    pub selected: Vec<usize>,
    pub sweeps: usize,
}

fn soft_threshold<F: Float>(z: F, gamma: F) -> F {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        F::zero()
    }
}

fn dot<F: Float>(a: ArrayView1<F>, b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

struct Centered<F> {
    x: Array2<F>,
    y: Vec<F>,
    x_mean: Vec<F>,
    y_mean: F,
}

fn center<F: Float>(x: ArrayView2<F>, y: ArrayView1<F>) -> Result<Centered<F>> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Data("lasso needs at least one row".into()));
    }
    if y.len() != n {
        return Err(Error::Data(format!("{} targets for {} rows", y.len(), n)));
    }
    let nf = F::from_count(n);
    let x_mean: Vec<F> = x
        .axis_iter(Axis(1))
        .map(|c| c.iter().copied().sum::<F>() / nf)
        .collect();
    let y_mean = y.iter().copied().sum::<F>() / nf;
    let mut xc = x.to_owned();
    for (j, mut col) in xc.axis_iter_mut(Axis(1)).enumerate() {
        let m = x_mean[j];
        col.mapv_inplace(|v| v - m);
    }
    Ok(Centered {
        x: xc,
        y: y.iter().map(|&v| v - y_mean).collect(),
        x_mean,
        y_mean,
    })
}

/// Smallest lambda at which every coefficient is zero:
/// `max_j |x_j^T (y - mean(y))| / n` over centered columns.
pub fn lambda_max<F: Float>(x: ArrayView2<F>, y: ArrayView1<F>) -> Result<F> {
    let c = center(x, y)?;
    let nf = F::from_count(x.nrows());
    Ok(c.x
        .axis_iter(Axis(1))
        .map(|col| (dot(col, &c.y) / nf).abs())
        .fold(F::zero(), F::max))
}

const PATH_STEPS: usize = 20;

/// One cyclic pass; returns the largest coefficient change.
fn sweep<F: Float>(c: &Centered<F>, curvature: &[F], beta: &mut [F], resid: &mut [F], lambda: F) -> F {
    let nf = F::from_count(c.x.nrows());
    let mut max_change = F::zero();
    for j in 0..beta.len() {
        let a = curvature[j];
        if a <= F::zero() {
            continue;
        }
        let col = c.x.column(j);
        let rho = dot(col, resid) / nf + a * beta[j];
        let updated = soft_threshold(rho, lambda) / a;
        let delta = updated - beta[j];
        if delta != F::zero() {
            for (r, &xv) in resid.iter_mut().zip(col.iter()) {
                *r -= delta * xv;
            }
            beta[j] = updated;
            max_change = max_change.max(delta.abs());
        }
    }
    max_change
}

impl<F: Float> LassoModel<F> {
    pub fn fit(x: ArrayView2<F>, y: ArrayView1<F>, params: &LassoParams<F>) -> Result<Self> {
        if params.lambda < F::zero() || params.lambda.is_nan() {
            return Err(Error::Config("lasso lambda must be non-negative".into()));
        }
        let c = center(x, y)?;
        let (n, p) = c.x.dim();
        let nf = F::from_count(n);
        let curvature: Vec<F> = c
            .x
            .axis_iter(Axis(1))
            .map(|col| col.iter().map(|&v| v * v).sum::<F>() / nf)
            .collect();

        let mut beta = vec![F::zero(); p];
        let mut resid = c.y.clone();
        let mut sweeps = 0;
        let mut max_change = F::infinity();

        // Warm starts down a geometric path from lambda_max; the sweep cap
        // covers the whole path.
        let lmax = c
            .x
            .axis_iter(Axis(1))
            .map(|col| (dot(col, &c.y) / nf).abs())
            .fold(F::zero(), F::max);
        let mut path = Vec::new();
        if params.lambda < lmax {
            let floor = (params.lambda / lmax).max(F::cst(1e-4));
            for k in 1..PATH_STEPS {
                let l = lmax * floor.powf(F::from_count(k) / F::from_count(PATH_STEPS));
                if l > params.lambda {
                    path.push(l);
                }
            }
        }
        let stage_cap = params.max_sweeps / (4 * PATH_STEPS);
        let stage_tol = params.tol.max(F::cst(1e-5));
        for &l in &path {
            for _ in 0..stage_cap {
                sweeps += 1;
                if sweep(&c, &curvature, &mut beta, &mut resid, l) < stage_tol {
                    break;
                }
            }
        }

        while sweeps < params.max_sweeps {
            sweeps += 1;
            max_change = sweep(&c, &curvature, &mut beta, &mut resid, params.lambda);
            if max_change < params.tol {
                // refresh the residual to shed accumulated rounding, then
                // only accept the iterate if it is optimal
                resid = c.y.clone();
                for (j, &b) in beta.iter().enumerate() {
                    if b != F::zero() {
                        for (r, &xv) in resid.iter_mut().zip(c.x.column(j).iter()) {
                            *r -= b * xv;
                        }
                    }
                }
                if kkt_violation_centered(&c.x, &resid, &beta, params.lambda) <= params.kkt_tol {
                    let intercept = c.y_mean
                        - c.x_mean
                            .iter()
                            .zip(&beta)
                            .map(|(&m, &b)| m * b)
                            .sum::<F>();
                    let selected = (0..p).filter(|&j| beta[j] != F::zero()).collect();
                    return Ok(Self {
                        coefficients: beta,
                        intercept,
                        lambda: params.lambda,
                        selected,
                        sweeps,
                    });
                }
            }
        }
        let intercept = c.y_mean
            - c.x_mean
                .iter()
                .zip(&beta)
                .map(|(&m, &b)| m * b)
                .sum::<F>();
        Err(Error::LassoConvergence {
            sweeps,
            max_change: max_change.as_f64(),
            coefficients: beta.iter().map(|b| b.as_f64()).collect(),
            intercept: intercept.as_f64(),
        })
    }

    pub fn predict_row(&self, row: ArrayView1<F>) -> F {
        self.intercept + dot(row, &self.coefficients)
    }

    /// Largest violation of the subgradient optimality conditions on `(x, y)`.
    pub fn kkt_violation(&self, x: ArrayView2<F>, y: ArrayView1<F>) -> F {
        let resid: Vec<F> = x
            .axis_iter(Axis(0))
            .zip(y.iter())
            .map(|(row, &t)| t - self.predict_row(row))
            .collect();
        kkt_violation_centered(&x.to_owned(), &resid, &self.coefficients, self.lambda)
    }

    /// Columns with `|coef| > min_abs_coef`, largest magnitude first
    /// (ties by column index).
    pub fn select(&self, min_abs_coef: F) -> Vec<(usize, F)> {
        let mut out: Vec<(usize, F)> = self
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, &b)| b.abs() > min_abs_coef)
            .map(|(j, &b)| (j, b))
            .collect();
        out.sort_by(|a, b| {
            b.1.abs()
                .partial_cmp(&a.1.abs())
                .expect("finite coefficients")
                .then(a.0.cmp(&b.0))
        });
        out
    }
}

fn kkt_violation_centered<F: Float>(x: &Array2<F>, resid: &[F], beta: &[F], lambda: F) -> F {
    let nf = F::from_count(x.nrows());
    x.axis_iter(Axis(1))
        .zip(beta)
        .map(|(col, &b)| {
            let g = dot(col, resid) / nf;
            if b == F::zero() {
                (g.abs() - lambda).max(F::zero())
            } else {
                (g - lambda * b.signum()).abs()
            }
        })
        .fold(F::zero(), F::max)
}
