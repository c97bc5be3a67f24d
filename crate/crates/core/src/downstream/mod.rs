//! Frozen-representation evaluation: node classification, link prediction and
//! community detection, plus the centrality baseline attacks.

pub mod centrality;
pub mod kmeans;
pub mod logistic;
pub mod metrics;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::LinkSplit;
use crate::rng::rng_from;

pub use centrality::{centrality_attack, CentralityKind};
pub use kmeans::{kmeans, KMeansResult};
pub use logistic::{accuracy, logistic_regression_fit, LogisticModel};
pub use metrics::{auc, link_features, nmi};

/// Number of evaluation trials; trial `t` uses seed `t`.
pub const NUM_TRIALS: u64 = 10;

/// Disjoint train/test node sets for classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn new(train: Vec<usize>, test: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &train {
            if i >= n {
                return Err(Error::invalid(format!("train index {i} out of range for n={n}")));
            }
            seen[i] = true;
        }
        for &i in &test {
            if i >= n {
                return Err(Error::invalid(format!("test index {i} out of range for n={n}")));
            }
            if seen[i] {
                return Err(Error::invalid(format!("node {i} is in both train and test")));
            }
        }
        if train.is_empty() || test.is_empty() {
            return Err(Error::invalid("train and test sets must be non-empty"));
        }
        Ok(Self { train, test })
    }

    /// Seeded random split with `floor(train_frac n)` training and
    /// `floor(test_frac n)` test nodes.
    pub fn random(n: usize, train_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        if !(train_frac > 0.0 && test_frac > 0.0 && train_frac + test_frac <= 1.0) {
            return Err(Error::invalid(format!(
                "split fractions must be positive and sum to at most 1, got {train_frac} and {test_frac}"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from(seed));
        let n_train = (train_frac * n as f64).floor() as usize;
        let n_test = (test_frac * n as f64).floor() as usize;
        let train = order[..n_train].to_vec();
        let test = order[n_train..n_train + n_test].to_vec();
        Self::new(train, test, n)
    }

    /// Like [`SplitSpec::random`] but applied within every class. Every
    /// class gets at least one training node.
    pub fn stratified(labels: &[usize], train_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        if !(train_frac > 0.0 && test_frac > 0.0 && train_frac + test_frac <= 1.0) {
            return Err(Error::invalid(format!(
                "split fractions must be positive and sum to at most 1, got {train_frac} and {test_frac}"
            )));
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut rng = rng_from(seed);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for class in 0..num_classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            if members.is_empty() {
                continue;
            }
            members.shuffle(&mut rng);
            let k = members.len() as f64;
            let n_train = ((train_frac * k).floor() as usize).max(1);
            let n_test = ((test_frac * k).floor() as usize).min(members.len() - n_train);
            train.extend_from_slice(&members[..n_train]);
            test.extend_from_slice(&members[n_train..n_train + n_test]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Self::new(train, test, labels.len())
    }
}

/// Mean and spread of one metric over seeded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub task: String,
    pub dataset: String,
    pub attack: String,
    pub mean: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std: f64,
    pub per_seed: Vec<f64>,
}

impl Metrics {
    pub fn from_trials(task: &str, dataset: &str, attack: &str, per_seed: Vec<f64>) -> Result<Self> {
        if per_seed.is_empty() {
            return Err(Error::invalid("no trials to summarize"));
        }
        if let Some(v) = per_seed.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::numerical(format!("metric value {v} outside [0, 1]")));
        }
        let k = per_seed.len() as f64;
        let mean = per_seed.iter().sum::<f64>() / k;
        let std = if per_seed.len() > 1 {
            (per_seed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            task: task.to_string(),
            dataset: dataset.to_string(),
            attack: attack.to_string(),
            mean,
            std,
            per_seed,
        })
    }
}

/// Settings of the linear probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub lr: f64,
    pub epochs: usize,
    /// Z-score every embedding column with training-row statistics first.
    pub standardize: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            lr: logistic::DEFAULT_LR,
            epochs: logistic::DEFAULT_EPOCHS,
            standardize: true,
        }
    }
}

/// Column means and standard deviations over `rows` (constant columns get 1).
fn column_stats(features: &Array2<f64>, rows: &[usize]) -> (ndarray::Array1<f64>, ndarray::Array1<f64>) {
    let sub = features.select(Axis(0), rows);
    let mean = sub.mean_axis(Axis(0)).expect("non-empty rows");
    let std = sub.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    (mean, std)
}

fn standardized(features: &Array2<f64>, fit_rows: &[usize], options: &ProbeOptions) -> Array2<f64> {
    if !options.standardize {
        return features.clone();
    }
    let (mean, std) = column_stats(features, fit_rows);
    (features - &mean) / &std
}

/// Accuracy of a logistic-regression probe trained on `split.train` and
/// scored on `split.test`.
pub fn node_classification(
    embeddings: &Array2<f64>,
    labels: &[usize],
    split: &SplitSpec,
    options: &ProbeOptions,
    seed: u64,
) -> Result<f64> {
    if labels.len() != embeddings.nrows() {
        return Err(Error::shape(format!(
            "{} labels for {} embeddings",
            labels.len(),
            embeddings.nrows()
        )));
    }
    let features = standardized(embeddings, &split.train, options);
    let pick = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|&i| labels[i]).collect() };
    let model = logistic_regression_fit(
        features.select(Axis(0), &split.train).view(),
        &pick(&split.train),
        options.lr,
        options.epochs,
        seed,
    )?;
    let predicted = model.predict(features.select(Axis(0), &split.test).view())?;
    accuracy(&predicted, &pick(&split.test))
}

fn pair_features(embeddings: &Array2<f64>, pairs: &[(usize, usize)]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((pairs.len(), embeddings.ncols()));
    for (r, &(u, v)) in pairs.iter().enumerate() {
        out.row_mut(r)
            .assign(&link_features(embeddings.row(u), embeddings.row(v))?);
    }
    Ok(out)
}

/// AUC of a logistic-regression probe on Hadamard pair features. The probe
/// trains on the training-graph edges against the split's training
/// non-edges and is scored on the held-out positives and negatives.
pub fn link_prediction(
    embeddings: &Array2<f64>,
    split: &LinkSplit,
    options: &ProbeOptions,
    seed: u64,
) -> Result<f64> {
    if embeddings.nrows() != split.train_graph.num_nodes() {
        return Err(Error::shape("embeddings do not match the link split"));
    }
    let train_pos = split.train_graph.edges();
    let mut train_pairs = train_pos.clone();
    train_pairs.extend_from_slice(&split.train_negatives);
    let mut train_labels = vec![1usize; train_pos.len()];
    train_labels.extend(std::iter::repeat_n(0, split.train_negatives.len()));

    let mut test_pairs = split.test_positives.clone();
    test_pairs.extend_from_slice(&split.test_negatives);
    let test_labels: Vec<bool> = (0..test_pairs.len())
        .map(|i| i < split.test_positives.len())
        .collect();

    let train_x = pair_features(embeddings, &train_pairs)?;
    let test_x = pair_features(embeddings, &test_pairs)?;
    let all_train: Vec<usize> = (0..train_x.nrows()).collect();
    let (train_x, test_x) = if options.standardize {
        let (mean, std) = column_stats(&train_x, &all_train);
        ((&train_x - &mean) / &std, (&test_x - &mean) / &std)
    } else {
        (train_x, test_x)
    };
    let model = logistic_regression_fit(train_x.view(), &train_labels, options.lr, options.epochs, seed)?;
    let scores = model.positive_probability(test_x.view())?;
    auc(scores.as_slice().expect("contiguous"), &test_labels)
}

/// NMI between k-means clusters of the embeddings and the ground truth.
pub fn community_detection(embeddings: &Array2<f64>, labels: &[usize], k: usize, seed: u64) -> Result<f64> {
    if labels.len() != embeddings.nrows() {
        return Err(Error::shape("labels do not match embeddings"));
    }
    let clusters = kmeans(embeddings.view(), k, seed)?;
    nmi(&clusters.assignment, labels)
}

/// Runs `trial(seed)` for every seed in parallel, results in seed order.
pub fn run_trials<F>(seeds: &[u64], trial: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    seeds.par_iter().map(|&s| trial(s)).collect()
}

/// Seeds `0..NUM_TRIALS`.
pub fn default_seeds() -> Vec<u64> {
    (0..NUM_TRIALS).collect()
}
