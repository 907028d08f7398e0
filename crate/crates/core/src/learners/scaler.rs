use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Per-column standardization. Zero-variance columns keep `std = 1` and are
/// flagged in `constant`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Scaler {
        let n = x.nrows() as f64;
        let d = x.ncols();
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        let mut constant = vec![false; d];
        for j in 0..d {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            if var > 0.0 {
                std[j] = var.sqrt();
            } else {
                std[j] = 1.0;
                constant[j] = true;
            }
        }
        Scaler { mean, std, constant }
    }

    pub fn fit_vector(y: &[f64]) -> Scaler {
        Scaler::fit(&Matrix::from_columns(&[y]))
    }

    fn map_value(&self, j: usize, v: f64) -> f64 {
        if self.constant[j] {
            v
        } else {
            (v - self.mean[j]) / self.std[j]
        }
    }

    fn unmap_value(&self, j: usize, v: f64) -> f64 {
        if self.constant[j] {
            v
        } else {
            v * self.std[j] + self.mean[j]
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for k in 0..out.nrows() {
            for (j, v) in out.row_mut(k).iter_mut().enumerate() {
                *v = self.map_value(j, *v);
            }
        }
        out
    }

    pub fn invert(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for k in 0..out.nrows() {
            for (j, v) in out.row_mut(k).iter_mut().enumerate() {
                *v = self.unmap_value(j, *v);
            }
        }
        out
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.map_value(j, v)).collect()
    }

    pub fn apply_vector(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.map_value(0, v)).collect()
    }

    pub fn invert_vector(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.unmap_value(0, v)).collect()
    }

    pub fn invert_value(&self, v: f64) -> f64 {
        self.unmap_value(0, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_example() {
        let x = Matrix::from_rows(&[[0.0], [2.0]]);
        let s = Scaler::fit(&x);
        assert_eq!(s.mean, [1.0]);
        assert_eq!(s.std, [1.0]);
        assert_eq!(s.apply(&x), Matrix::from_rows(&[[-1.0], [1.0]]));
    }

    #[test]
    fn constant_column_passes_through() {
        let x = Matrix::from_rows(&[[3.0, 1.0], [3.0, 2.0]]);
        let s = Scaler::fit(&x);
        assert!(s.constant[0] && !s.constant[1]);
        let a = s.apply(&x);
        assert_eq!(a.column(0), [3.0, 3.0]);
    }

    proptest! {
        #[test]
        fn roundtrip(rows in proptest::collection::vec(proptest::array::uniform3(-1e3f64..1e3), 1..30)) {
            let x = Matrix::from_rows(&rows);
            let s = Scaler::fit(&x);
            let back = s.invert(&s.apply(&x));
            for k in 0..x.nrows() {
                for j in 0..3 {
                    let (a, b) = (back.get(k, j), x.get(k, j));
                    prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }
}
