use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Float;

/// Per-column standardization with population standard deviation.
///
/// Columns whose standard deviation is zero (up to rounding) are flagged and
/// only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScalerState<F: Float> {
    pub means: Vec<F>,
    pub stds: Vec<F>,
    pub zero_variance: Vec<bool>,
}

impl<F: Float> ScalerState<F> {
    pub fn fit(x: ArrayView2<F>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Data("cannot standardize an empty matrix".into()));
        }
        let nf = F::from_count(n);
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        let mut zero_variance = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let mean = col.iter().copied().sum::<F>() / nf;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / nf;
            let std = var.sqrt();
            let flat = std <= F::epsilon() * F::cst(4.0) * (F::one() + mean.abs());
            means.push(mean);
            stds.push(if flat { F::one() } else { std });
            zero_variance.push(flat);
        }
        Ok(Self {
            means,
            stds,
            zero_variance,
        })
    }

    pub fn n_flagged(&self) -> usize {
        self.zero_variance.iter().filter(|&&f| f).count()
    }

    pub fn transform(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        if x.ncols() != self.means.len() {
            return Err(Error::Data(format!(
                "scaler fitted on {} columns, got {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn transform_row(&self, row: ArrayView1<F>) -> Vec<F> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn column_stats() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let s = ScalerState::fit(x.view()).unwrap();
        assert_eq!(s.means, vec![2.0, 5.0]);
        assert_abs_diff_eq!(s.stds[0], (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(s.zero_variance, vec![false, true]);
        let t = s.transform(x.view()).unwrap();
        assert_abs_diff_eq!(t.column(0).sum(), 0.0, epsilon = 1e-12);
        let var: f64 = t.column(0).iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
        assert!(t.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn held_out_rows_use_training_statistics() {
        let train = array![[0.0], [2.0]];
        let s = ScalerState::fit(train.view()).unwrap();
        let test = array![[10.0]];
        let t = s.transform(test.view()).unwrap();
        assert_eq!(t[[0, 0]], 9.0);
        assert_eq!(s.transform_row(test.row(0)), vec![9.0]);
    }

    #[test]
    fn empty_matrix_is_error() {
        let x = Array2::<f64>::zeros((0, 3));
        assert!(matches!(ScalerState::fit(x.view()), Err(Error::Data(_))));
    }

    #[test]
    fn works_in_f32() {
        let x = array![[1.0f32], [2.0], [3.0]];
        let s = ScalerState::fit(x.view()).unwrap();
        assert_eq!(s.means[0], 2.0f32);
    }
}
