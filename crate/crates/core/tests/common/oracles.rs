//! Brute-force reference implementations, written independently of the
//! library code they check.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random matrix with values on a coarse grid, so ties actually happen.
pub fn random_corpus(r: &mut ChaCha8Rng, n: usize, p: usize, levels: u32) -> (Array2<f64>, Vec<bool>) {
    let x = Array2::from_shape_fn((n, p), |_| r.random_range(0..levels) as f64 * 0.5);
    let y = (0..n).map(|_| r.random_bool(0.4)).collect();
    (x, y)
}

/// Full scan: sort every training row by (distance, index), vote over the
/// first `k`. Returns (positive votes, predicted label).
pub fn knn_brute(x: &Array2<f64>, y: &[bool], q: &[f64], k: usize) -> (usize, bool) {
    let mut d: Vec<(f64, usize)> = (0..x.nrows())
        .map(|i| {
            let s: f64 = (0..x.ncols()).map(|j| (x[[i, j]] - q[j]).powi(2)).sum();
            (s, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let pos = d[..k].iter().filter(|&&(_, i)| y[i]).count();
    let pred = if 2 * pos > k {
        true
    } else if 2 * pos < k {
        false
    } else {
        y[d[0].1]
    };
    (pos, pred)
}

fn gini(neg: usize, pos: usize) -> f64 {
    let n = (neg + pos) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (a, b) = (neg as f64 / n, pos as f64 / n);
    1.0 - a * a - b * b
}

/// Every column, every midpoint between consecutive distinct values; gain
/// recomputed from scratch per candidate. Ties (within 1e-12) keep the
/// lower column, then the lower threshold.
pub fn best_root_split(x: &Array2<f64>, y: &[bool], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let n = x.nrows();
    let npos = y.iter().filter(|&&b| b).count();
    let parent = gini(n - npos, npos);
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..x.ncols() {
        let mut vals: Vec<f64> = x.column(j).to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let mut t = (w[0] + w[1]) / 2.0;
            if t >= w[1] {
                t = w[0];
            }
            let (mut ln, mut lp, mut rn, mut rp) = (0, 0, 0, 0);
            for i in 0..n {
                match (x[[i, j]] <= t, y[i]) {
                    (true, true) => lp += 1,
                    (true, false) => ln += 1,
                    (false, true) => rp += 1,
                    (false, false) => rn += 1,
                }
            }
            if ln + lp < min_leaf || rn + rp < min_leaf {
                continue;
            }
            let gain = parent
                - ((ln + lp) as f64 / n as f64) * gini(ln, lp)
                - ((rn + rp) as f64 / n as f64) * gini(rn, rp);
            if best.is_none_or(|b| gain > b.2 + 1e-12) {
                best = Some((j, t, gain));
            }
        }
    }
    best
}

/// Pairwise Mann–Whitney count.
pub fn auc_brute(labels: &[bool], scores: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Largest subgradient violation of `(1/2n)||y - b0 - Xb||^2 + lambda||b||_1`,
/// including the intercept's stationarity.
pub fn lasso_kkt(x: &Array2<f64>, y: &[f64], beta: &[f64], b0: f64, lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let r: Vec<f64> = (0..x.nrows())
        .map(|i| y[i] - b0 - (0..x.ncols()).map(|j| x[[i, j]] * beta[j]).sum::<f64>())
        .collect();
    let mut worst = (r.iter().sum::<f64>() / n).abs();
    for j in 0..x.ncols() {
        let g: f64 = (0..x.nrows()).map(|i| x[[i, j]] * r[i]).sum::<f64>() / n;
        let v = if beta[j] != 0.0 {
            (g - lambda * beta[j].signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Closed-form simple regression: (slope, intercept).
pub fn ols_single(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Logistic regression by Newton steps with a small ridge term; returns
/// (weights, bias).
pub fn logistic_fit(x: &Array2<f64>, y: &[bool]) -> (Array1<f64>, f64) {
    let (n, p) = x.dim();
    let mut w = Array1::<f64>::zeros(p + 1);
    let design = |i: usize, j: usize| if j == p { 1.0 } else { x[[i, j]] };
    for _ in 0..50 {
        let mut grad = Array1::<f64>::zeros(p + 1);
        let mut hess = Array2::<f64>::eye(p + 1) * 1e-6;
        for i in 0..n {
            let z: f64 = (0..=p).map(|j| design(i, j) * w[j]).sum();
            let mu = 1.0 / (1.0 + (-z).exp());
            let t = if y[i] { 1.0 } else { 0.0 };
            for a in 0..=p {
                grad[a] += (mu - t) * design(i, a);
                for b in 0..=p {
                    hess[[a, b]] += mu * (1.0 - mu) * design(i, a) * design(i, b);
                }
            }
        }
        let step = solve(hess, grad);
        w -= &step;
    }
    (w.slice(ndarray::s![..p]).to_owned(), w[p])
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Array1<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[[i, c]].abs().partial_cmp(&a[[j, c]].abs()).unwrap()).unwrap();
        for k in 0..n {
            a.swap([c, k], [piv, k]);
        }
        b.swap(c, piv);
        for i in c + 1..n {
            let f = a[[i, c]] / a[[c, c]];
            for k in c..n {
                a[[i, k]] -= f * a[[c, k]];
            }
            b[i] -= f * b[c];
        }
    }
    let mut out = Array1::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[[i, k]] * out[k]).sum();
        out[i] = (b[i] - s) / a[[i, i]];
    }
    out
}
