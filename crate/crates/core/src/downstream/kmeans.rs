//! Lloyd's k-means with k-means++ seeding.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const KMEANS_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Inertia after every assignment step, first to last.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("at least one assignment step")
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: ArrayView2<f64>, k: usize, seed: u64) -> Array2<f64> {
    let n = points.nrows();
    let mut rng = rng_from(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // all points coincide with a centre: take the first unused index
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    let mut centroids = Array2::zeros((k, points.ncols()));
    for (c, &i) in chosen.iter().enumerate() {
        centroids.row_mut(c).assign(&points.row(i));
    }
    centroids
}

/// Clusters the rows of `points` into `k` groups.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    let (n, d) = points.dim();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k must be in 1..={n}, got {k}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("points contain non-finite values"));
    }
    let mut centroids = plus_plus_init(points, k, seed);
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        // assignment step: move a point only when another centre is strictly closer
        let mut changed = false;
        let mut distances = vec![0.0; n];
        for i in 0..n {
            let row = points.row(i);
            let mut best = assignment[i];
            let mut best_d = if best == usize::MAX {
                f64::INFINITY
            } else {
                sq_dist(row, centroids.row(best))
            };
            for c in 0..k {
                let dist = sq_dist(row, centroids.row(c));
                if dist < best_d {
                    best = c;
                    best_d = dist;
                }
            }
            if best != assignment[i] {
                assignment[i] = best;
                changed = true;
            }
            distances[i] = best_d;
        }
        history.push(distances.iter().sum());
        iterations += 1;
        if !changed || iterations >= KMEANS_MAX_ITERS {
            break;
        }

        // update step
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &points.row(i));
            counts[c] += 1;
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            } else {
                // reseed an empty cluster at the point farthest from its centre
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None::<usize>, |acc, i| match acc {
                        Some(j) if distances[j] >= distances[i] => Some(j),
                        _ => Some(i),
                    })
                    .expect("k <= n leaves a free point");
                taken[far] = true;
                centroids.row_mut(c).assign(&points.row(far));
            }
        }
    }

    Ok(KMeansResult {
        assignment,
        centroids,
        inertia_history: history,
        iterations,
    })
}
