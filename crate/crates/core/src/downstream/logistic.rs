//! Logistic regression trained by full-batch gradient descent.
//!
//! Two classes use a single sigmoid unit. More classes use one-vs-rest units
//! and predict the arg-max score.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::kernels::sigmoid;
use crate::rng::rng_from;

pub const DEFAULT_LR: f64 = 1e-2;
pub const DEFAULT_EPOCHS: usize = 100;

/// Half-width of the uniform weight initialization.
const INIT_SCALE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// One row per unit: a single row for binary problems, one per class otherwise.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    /// Sorted distinct training labels.
    pub classes: Vec<usize>,
}

impl LogisticModel {
    pub fn num_features(&self) -> usize {
        self.weights.ncols()
    }

    /// Per-unit probabilities, shape `(rows, units)`.
    pub fn unit_probabilities(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.num_features() {
            return Err(Error::shape(format!(
                "model expects {} features, got {}",
                self.num_features(),
                features.ncols()
            )));
        }
        let mut logits = features.dot(&self.weights.t());
        logits += &self.bias;
        Ok(logits.mapv(sigmoid))
    }

    /// Probability of the larger class label (binary models only).
    pub fn positive_probability(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        if self.classes.len() != 2 {
            return Err(Error::invalid("positive_probability needs a binary model"));
        }
        Ok(self.unit_probabilities(features)?.column(0).to_owned())
    }

    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Vec<usize>> {
        let probs = self.unit_probabilities(features)?;
        Ok(probs
            .outer_iter()
            .map(|row| {
                if self.classes.len() == 2 {
                    // ties go to the smaller label
                    if row[0] > 0.5 {
                        self.classes[1]
                    } else {
                        self.classes[0]
                    }
                } else {
                    let mut best = 0;
                    for (k, &v) in row.iter().enumerate() {
                        if v > row[best] {
                            best = k;
                        }
                    }
                    self.classes[best]
                }
            })
            .collect())
    }
}

/// Fits a logistic-regression model on `features` (one row per sample).
pub fn logistic_regression_fit(
    features: ArrayView2<f64>,
    labels: &[usize],
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<LogisticModel> {
    let (rows, cols) = features.dim();
    if rows != labels.len() {
        return Err(Error::shape(format!("{rows} feature rows but {} labels", labels.len())));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("features contain non-finite values"));
    }
    if !(lr > 0.0) {
        return Err(Error::invalid(format!("learning rate must be > 0, got {lr}")));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid("training labels contain a single class"));
    }

    let units = if classes.len() == 2 { 1 } else { classes.len() };
    // targets[r, k] = 1 when row r belongs to the class of unit k
    let mut targets = Array2::<f64>::zeros((rows, units));
    for (r, label) in labels.iter().enumerate() {
        let k = classes.binary_search(label).expect("label is among the classes");
        if units == 1 {
            targets[[r, 0]] = if k == 1 { 1.0 } else { 0.0 };
        } else {
            targets[[r, k]] = 1.0;
        }
    }

    let mut rng = rng_from(seed);
    let mut weights = Array2::from_shape_fn((units, cols), |_| rng.random_range(-INIT_SCALE..INIT_SCALE));
    let mut bias = Array1::<f64>::zeros(units);
    let scale = 1.0 / rows as f64;
    for _ in 0..epochs {
        let mut logits = features.dot(&weights.t());
        logits += &bias;
        // d(mean cross-entropy)/d(logit) = sigmoid(logit) - target
        let residual = logits.mapv(sigmoid) - &targets;
        let grad_w = residual.t().dot(&features) * scale;
        let grad_b = residual.sum_axis(Axis(0)) * scale;
        weights.scaled_add(-lr, &grad_w);
        bias.scaled_add(-lr, &grad_b);
    }
    Ok(LogisticModel {
        weights,
        bias,
        classes,
    })
}

/// Fraction of positions where `predicted` equals `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::shape("accuracy needs two equal, non-empty label vectors"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn separable_pair_is_fit_exactly() {
        let x = array![[-1.0], [1.0]];
        let model = logistic_regression_fit(x.view(), &[0, 1], DEFAULT_LR, DEFAULT_EPOCHS, 0).unwrap();
        assert_eq!(model.predict(x.view()).unwrap(), vec![0, 1]);
    }

    #[test]
    fn identical_features_give_chance_accuracy() {
        let x = Array2::from_elem((10, 3), 0.7);
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let model = logistic_regression_fit(x.view(), &y, DEFAULT_LR, DEFAULT_EPOCHS, 3).unwrap();
        let acc = accuracy(&model.predict(x.view()).unwrap(), &y).unwrap();
        assert_eq!(acc, 0.5);
    }

    fn two_gaussians(count: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = rng_from(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut x = Array2::zeros((count, 2));
        let mut y = Vec::with_capacity(count);
        for r in 0..count {
            let label = r % 2;
            let mean = if label == 1 { 1.0 } else { -1.0 };
            x[[r, 0]] = mean + noise.sample(&mut rng);
            x[[r, 1]] = mean + noise.sample(&mut rng);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn two_gaussian_toy_generalizes() {
        // Bayes error here is Phi(-sqrt(2)/0.3), far below 1e-3
        let (train_x, train_y) = two_gaussians(200, 1);
        let (test_x, test_y) = two_gaussians(200, 2);
        let model = logistic_regression_fit(train_x.view(), &train_y, DEFAULT_LR, DEFAULT_EPOCHS, 0).unwrap();
        let acc = accuracy(&model.predict(test_x.view()).unwrap(), &test_y).unwrap();
        assert!(acc > 0.95, "acc = {acc}");
    }

    #[test]
    fn one_vs_rest_separates_three_clusters() {
        let x = array![[5.0, 0.0], [5.5, 0.2], [0.0, 5.0], [0.3, 5.2], [-5.0, -5.0], [-5.2, -4.8]];
        let y = [0, 0, 1, 1, 2, 2];
        let model = logistic_regression_fit(x.view(), &y, 0.1, 300, 4).unwrap();
        assert_eq!(model.weights.nrows(), 3);
        assert_eq!(model.predict(x.view()).unwrap(), y.to_vec());
    }

    #[test]
    fn fit_is_deterministic_per_seed() {
        let (x, y) = two_gaussians(40, 5);
        let a = logistic_regression_fit(x.view(), &y, DEFAULT_LR, DEFAULT_EPOCHS, 9).unwrap();
        let b = logistic_regression_fit(x.view(), &y, DEFAULT_LR, DEFAULT_EPOCHS, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let x = array![[1.0], [2.0]];
        assert!(logistic_regression_fit(x.view(), &[1, 1], DEFAULT_LR, 10, 0).is_err());
        assert!(logistic_regression_fit(x.view(), &[0], DEFAULT_LR, 10, 0).is_err());
        let bad = array![[f64::NAN], [2.0]];
        assert!(logistic_regression_fit(bad.view(), &[0, 1], DEFAULT_LR, 10, 0).is_err());
        let model = logistic_regression_fit(x.view(), &[0, 1], DEFAULT_LR, 10, 0).unwrap();
        assert!(model.predict(array![[1.0, 2.0]].view()).is_err());
    }
}
