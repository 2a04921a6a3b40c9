//! Gaussian naive Bayes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{argmax, check_features};
use crate::error::{Error, Result};
use crate::labeling::Label;

/// Relative variance floor, scaled by the largest per-feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    /// Classes seen in training, ascending.
    pub classes: Vec<Label>,
    pub priors: Vec<f64>,
    /// `classes x features`.
    pub means: Array2<f64>,
    /// `classes x features`, floor included.
    pub variances: Array2<f64>,
    pub var_floor: f64,
}

fn variance(col: ArrayView1<f64>) -> f64 {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

impl GnbModel {
    pub fn fit(x: ArrayView2<f64>, y: &[Label]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch(x.nrows(), y.len()));
        }
        let d = x.ncols();
        let max_var = x.axis_iter(Axis(1)).map(variance).fold(0.0, f64::max);
        let var_floor = if max_var > 0.0 { VAR_SMOOTHING * max_var } else { VAR_SMOOTHING };

        let mut classes = Vec::new();
        let mut priors = Vec::new();
        let mut means = Vec::new();
        let mut variances = Vec::new();
        for label in Label::ALL {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
            if rows.is_empty() {
                continue;
            }
            let sub = x.select(Axis(0), &rows);
            classes.push(label);
            priors.push(rows.len() as f64 / y.len() as f64);
            for col in sub.axis_iter(Axis(1)) {
                means.push(col.sum() / col.len() as f64);
                variances.push(variance(col) + var_floor);
            }
        }
        let k = classes.len();
        Ok(GnbModel {
            classes,
            priors,
            means: Array2::from_shape_vec((k, d), means).expect("shape"),
            variances: Array2::from_shape_vec((k, d), variances).expect("shape"),
            var_floor,
        })
    }

    /// Unnormalized log posterior of each class in `classes` order.
    pub fn log_scores(&self, row: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter((0..self.classes.len()).map(|c| {
            let mut s = self.priors[c].ln();
            for ((x, mu), var) in row.iter().zip(self.means.row(c)).zip(self.variances.row(c)) {
                s -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mu).powi(2) / var);
            }
            s
        }))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<Label>> {
        check_features(self.means.ncols(), &x)?;
        Ok(x.axis_iter(Axis(0))
            .map(|row| self.classes[argmax(self.log_scores(row).as_slice().expect("contiguous"))])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    use crate::rng::substream;

    fn blobs(n: usize, sep: f64, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut rng = substream(seed, "blobs");
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let up = rng.random_bool(0.5);
            let c = if up { sep } else { -sep };
            x[[i, 0]] = c + noise.sample(&mut rng);
            x[[i, 1]] = c + noise.sample(&mut rng);
            y.push(if up { Label::Up } else { Label::Down });
        }
        (x, y)
    }

    #[test]
    fn separated_gaussians() {
        let (x, y) = blobs(1000, 4.0, 1);
        let m = GnbModel::fit(x.view(), &y).unwrap();
        let p = m.predict(x.view()).unwrap();
        let correct = p.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(correct >= 990, "{correct}");
        assert!((m.priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_distributions_follow_prior() {
        let x = array![[1.0], [2.0], [1.0], [2.0], [1.0], [2.0]];
        let y = [Label::Flat, Label::Flat, Label::Flat, Label::Flat, Label::Up, Label::Up];
        let m = GnbModel::fit(x.view(), &y).unwrap();
        assert!(m.predict(x.view()).unwrap().iter().all(|&l| l == Label::Flat));
    }

    #[test]
    fn constant_feature_is_floored() {
        let x = array![[5.0, 0.0], [5.0, 1.0], [5.0, 10.0], [5.0, 11.0]];
        let y = [Label::Down, Label::Down, Label::Up, Label::Up];
        let m = GnbModel::fit(x.view(), &y).unwrap();
        assert!(m.variances.iter().all(|&v| v >= m.var_floor && v > 0.0));
        let p = m.predict(x.view()).unwrap();
        assert_eq!(p, y.to_vec());
        assert!(p.iter().all(|l| l.value().abs() == 1));

        let all_const = array![[1.0], [1.0]];
        let m = GnbModel::fit(all_const.view(), &[Label::Up, Label::Down]).unwrap();
        assert_eq!(m.var_floor, VAR_SMOOTHING);
        assert_eq!(m.predict(all_const.view()).unwrap(), vec![Label::Down; 2]);
    }

    #[test]
    fn rejects_wrong_width() {
        let (x, y) = blobs(20, 1.0, 2);
        let m = GnbModel::fit(x.view(), &y).unwrap();
        assert!(m.predict(array![[1.0]].view()).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariant(seed in 0u64..500, shift in -1e3f64..1e3, col in 0usize..2) {
            let (x, y) = blobs(200, 1.0, seed);
            let m = GnbModel::fit(x.view(), &y).unwrap();
            let mut xs = x.clone();
            xs.column_mut(col).mapv_inplace(|v| v + shift);
            let ms = GnbModel::fit(xs.view(), &y).unwrap();
            let a = m.predict(x.view()).unwrap();
            let b = ms.predict(xs.view()).unwrap();
            for i in 0..x.nrows() {
                if a[i] != b[i] {
                    // only rows sitting on the decision boundary may flip
                    let s = m.log_scores(x.row(i));
                    prop_assert!((s[0] - s[1]).abs() < 1e-6, "row {i} flipped with margin {}", s[0] - s[1]);
                }
            }
        }
    }
}
