//! Noise-contrastive mutual-information surrogate and its gradients.
//!
//! For node embeddings `z_i` of the real graph and `z~_i` of the corrupted graph
//! (attribute rows shuffled, topology kept), the estimate is
//!
//! ```text
//! l_enc = 1/n sum_i log D(z_i, z_g) + 1/n sum_i log(1 - D(z~_i, z_g))
//! ```
//!
//! where `z_g` is the readout of the real graph and `D` the bilinear critic.
//! The backward pass yields gradients w.r.t. the encoder weights, the critic,
//! the attribute matrix and every entry of the (relaxed) adjacency.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;

use crate::encoder::{readout, EncoderParams};
use crate::error::{Error, Result};
use crate::graph::{upper_pairs, Graph, NormalizedPropagator, RelaxedAdjacency};
use crate::kernels::{grad_check, matmul_backward, normalization_backward, relu_backward, relu_forward, sigmoid};
use crate::rng::rng_from;

/// Critic scores are clamped to `[SCORE_CLAMP, 1 - SCORE_CLAMP]` before the log.
pub const SCORE_CLAMP: f64 = 1e-12;

/// A corruption of the graph: the attribute rows reordered by a permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample {
    /// Row `i` of the shuffled matrix is row `permutation[i]` of the original.
    pub permutation: Vec<usize>,
    pub shuffled_attributes: Array2<f64>,
}

impl NegativeSample {
    pub fn from_permutation(attributes: &Array2<f64>, permutation: Vec<usize>) -> Result<Self> {
        let n = attributes.nrows();
        let mut seen = vec![false; n];
        if permutation.len() != n {
            return Err(Error::shape("permutation length differs from node count"));
        }
        for &p in &permutation {
            if p >= n || seen[p] {
                return Err(Error::invalid("permutation is not a bijection"));
            }
            seen[p] = true;
        }
        let shuffled_attributes = shuffle_rows(attributes, &permutation);
        Ok(Self {
            permutation,
            shuffled_attributes,
        })
    }

    /// Applies the same permutation to another attribute matrix (e.g. an
    /// attacked one).
    pub fn shuffle(&self, attributes: &Array2<f64>) -> Array2<f64> {
        shuffle_rows(attributes, &self.permutation)
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &p) in self.permutation.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }
}

fn shuffle_rows(attributes: &Array2<f64>, permutation: &[usize]) -> Array2<f64> {
    attributes.select(Axis(0), permutation)
}

/// Uniform random row permutation of the attributes, deterministic per seed.
pub fn negative_sample(graph: &Graph, seed: u64) -> Result<NegativeSample> {
    let n = graph.num_nodes();
    if n < 2 {
        return Err(Error::invalid("negative sampling needs at least two nodes"));
    }
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.shuffle(&mut rng_from(seed));
    NegativeSample::from_permutation(graph.attributes(), permutation)
}

/// Forward intermediates needed by [`mi_gradients`].
#[derive(Debug, Clone)]
pub struct Tape {
    params: EncoderParams,
    permutation: Vec<usize>,
    adjacency: Array2<f64>,
    propagator: NormalizedPropagator,
    attributes: Array2<f64>,
    neg_attributes: Array2<f64>,
    pre: Array2<f64>,
    pre_neg: Array2<f64>,
    z: Array2<f64>,
    z_neg: Array2<f64>,
    z_g: Array1<f64>,
    critic_dir: Array1<f64>,
    pos_scores: Array1<f64>,
    neg_scores: Array1<f64>,
}

impl Tape {
    pub fn objective_inputs(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.adjacency, &self.attributes)
    }

    pub fn embeddings(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn summary(&self) -> &Array1<f64> {
        &self.z_g
    }
}

/// Gradients of `l_enc`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub theta: Array2<f64>,
    pub phi: Array2<f64>,
    pub attributes: Array2<f64>,
    /// Entry-wise gradient w.r.t. the adjacency, entries treated as independent.
    pub adjacency: Array2<f64>,
}

impl Gradients {
    /// Gradient w.r.t. the relaxed flip vector `p` for a base adjacency `a`,
    /// through `a' = a + (1 - 2a) * p`.
    pub fn perturbation(&self, base: &Array2<f64>) -> Array1<f64> {
        perturbation_gradient(base, &self.adjacency)
    }
}

pub fn perturbation_gradient(base: &Array2<f64>, d_adjacency: &Array2<f64>) -> Array1<f64> {
    upper_pairs(base.nrows())
        .map(|(i, j)| (1.0 - 2.0 * base[[i, j]]) * (d_adjacency[[i, j]] + d_adjacency[[j, i]]))
        .collect()
}

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

/// Mean log-score of positives plus mean log-complement of negatives.
pub fn contrastive_value(pos_scores: &Array1<f64>, neg_scores: &Array1<f64>) -> f64 {
    let pos = pos_scores.iter().map(|&s| clamp_score(s).ln()).sum::<f64>() / pos_scores.len() as f64;
    let neg = neg_scores
        .iter()
        .map(|&s| (1.0 - clamp_score(s)).ln())
        .sum::<f64>()
        / neg_scores.len() as f64;
    pos + neg
}

/// `l_enc` on an arbitrary (possibly relaxed) symmetric adjacency and attribute matrix.
///
/// The negative branch uses `neg.permutation` applied to `attributes`, so an
/// attacked attribute matrix is corrupted the same way as the benign one.
pub fn mi_forward(
    adjacency: &Array2<f64>,
    attributes: &Array2<f64>,
    params: &EncoderParams,
    neg: &NegativeSample,
) -> Result<(f64, Tape)> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n || attributes.nrows() != n {
        return Err(Error::shape(format!(
            "adjacency {:?} and attributes {:?} disagree",
            adjacency.dim(),
            attributes.dim()
        )));
    }
    if attributes.ncols() != params.input_dim() {
        return Err(Error::shape(format!(
            "attributes have {} columns but theta expects {}",
            attributes.ncols(),
            params.input_dim()
        )));
    }
    if neg.permutation.len() != n {
        return Err(Error::shape("negative sample was drawn for a different node count"));
    }
    let propagator = NormalizedPropagator::from_weighted(adjacency)?;
    let neg_attributes = neg.shuffle(attributes);

    let pre = propagator.matrix.dot(&attributes.dot(&params.theta));
    let pre_neg = propagator.matrix.dot(&neg_attributes.dot(&params.theta));
    let z = relu_forward(&pre);
    let z_neg = relu_forward(&pre_neg);
    let z_g = readout(&z);
    let critic_dir = params.phi.dot(&z_g);

    let pos_scores: Array1<f64> = z.dot(&critic_dir).mapv(sigmoid);
    let neg_scores: Array1<f64> = z_neg.dot(&critic_dir).mapv(sigmoid);
    let value = contrastive_value(&pos_scores, &neg_scores);
    if !value.is_finite() {
        return Err(Error::numerical(format!("objective evaluated to {value}")));
    }

    let tape = Tape {
        params: params.clone(),
        permutation: neg.permutation.clone(),
        adjacency: adjacency.clone(),
        propagator,
        attributes: attributes.clone(),
        neg_attributes,
        pre,
        pre_neg,
        z,
        z_neg,
        z_g,
        critic_dir,
        pos_scores,
        neg_scores,
    };
    Ok((value, tape))
}

/// `l_enc` on a graph.
pub fn mi_estimate(graph: &Graph, params: &EncoderParams, neg: &NegativeSample) -> Result<(f64, Tape)> {
    params.check_input(graph)?;
    mi_forward(graph.adjacency(), graph.attributes(), params, neg)
}

/// `l_enc` on a relaxed adjacency.
pub fn mi_relaxed(
    relaxed: &RelaxedAdjacency,
    attributes: &Array2<f64>,
    params: &EncoderParams,
    neg: &NegativeSample,
) -> Result<(f64, Tape)> {
    mi_forward(&relaxed.dense(), attributes, params, neg)
}

/// Value-only convenience wrapper.
pub fn mi_value(
    adjacency: &Array2<f64>,
    attributes: &Array2<f64>,
    params: &EncoderParams,
    neg: &NegativeSample,
) -> Result<f64> {
    mi_forward(adjacency, attributes, params, neg).map(|(v, _)| v)
}

/// Exact analytic gradients of `l_enc` from a matching forward tape.
pub fn mi_gradients(params: &EncoderParams, neg: &NegativeSample, tape: &Tape) -> Result<Gradients> {
    if tape.params != *params || tape.permutation != neg.permutation {
        return Err(Error::StaleTape);
    }
    let n = tape.z.nrows();
    let nf = n as f64;
    let h = params.hidden_dim();

    // d l / d logits; zero where the clamp is active
    let d_pos: Array1<f64> = tape
        .pos_scores
        .mapv(|s| if s >= 1.0 - SCORE_CLAMP || s <= SCORE_CLAMP { 0.0 } else { (1.0 - s) / nf });
    let d_neg: Array1<f64> = tape
        .neg_scores
        .mapv(|s| if s >= 1.0 - SCORE_CLAMP || s <= SCORE_CLAMP { 0.0 } else { -s / nf });

    // logits = Z w with w = phi z_g
    let d_w = tape.z.t().dot(&d_pos) + tape.z_neg.t().dot(&d_neg);
    let mut d_z = outer(&d_pos, &tape.critic_dir);
    let d_z_neg = outer(&d_neg, &tape.critic_dir);

    let phi_grad = outer(&d_w, &tape.z_g);
    let d_zg = params.phi.t().dot(&d_w);
    let d_mean = &d_zg * &tape.z_g.mapv(|g| g * (1.0 - g));
    for mut row in d_z.rows_mut() {
        row.scaled_add(1.0 / nf, &d_mean);
    }

    let d_pre = relu_backward(&tape.pre, &d_z)?;
    let d_pre_neg = relu_backward(&tape.pre_neg, &d_z_neg)?;

    // pre = P U, U = X theta
    let u = tape.attributes.dot(&params.theta);
    let u_neg = tape.neg_attributes.dot(&params.theta);
    let (d_prop_pos, d_u) = matmul_backward(&tape.propagator.matrix, &u, &d_pre)?;
    let (d_prop_neg, d_u_neg) = matmul_backward(&tape.propagator.matrix, &u_neg, &d_pre_neg)?;
    let d_prop = d_prop_pos + d_prop_neg;

    let (mut d_x, d_theta_pos) = matmul_backward(&tape.attributes, &params.theta, &d_u)?;
    let (d_x_neg, d_theta_neg) = matmul_backward(&tape.neg_attributes, &params.theta, &d_u_neg)?;
    for (i, &src) in tape.permutation.iter().enumerate() {
        let mut row = d_x.row_mut(src);
        row += &d_x_neg.row(i);
    }

    let d_adj = normalization_backward(&tape.adjacency, &tape.propagator, &d_prop)?;
    let grads = Gradients {
        theta: d_theta_pos + d_theta_neg,
        phi: phi_grad,
        attributes: d_x,
        adjacency: d_adj,
    };
    debug_assert_eq!(grads.phi.dim(), (h, h));
    if grads
        .theta
        .iter()
        .chain(grads.phi.iter())
        .chain(grads.attributes.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::numerical("non-finite gradient"));
    }
    Ok(grads)
}

/// Central-difference step for [`gradient_check`]. Smaller steps let
/// roundoff swamp gradient components near 1e-7 under the relative metric.
pub const GRAD_STEP: f64 = 1e-4;

/// Largest relative error between analytic gradients and central differences
/// for each parameter block, measured at a relaxed adjacency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub theta: f64,
    pub phi: f64,
    pub attributes: f64,
    pub perturbation: f64,
}

impl GradientCheck {
    pub fn max(&self) -> f64 {
        self.theta.max(self.phi).max(self.attributes).max(self.perturbation)
    }
}

pub fn gradient_check(
    relaxed: &RelaxedAdjacency,
    attributes: &Array2<f64>,
    params: &EncoderParams,
    neg: &NegativeSample,
    step: f64,
) -> Result<GradientCheck> {
    let (_, tape) = mi_relaxed(relaxed, attributes, params, neg)?;
    let grads = mi_gradients(params, neg, &tape)?;
    let flat = |a: &Array2<f64>| a.iter().copied().collect::<Vec<f64>>();
    let reshape = |like: &Array2<f64>, v: &[f64]| Array2::from_shape_vec(like.raw_dim(), v.to_vec()).expect("same size");
    // evaluation failures surface as NaN, which grad_check rejects
    let value = |adj: &Array2<f64>, x: &Array2<f64>, p: &EncoderParams| mi_value(adj, x, p, neg).unwrap_or(f64::NAN);
    let dense = relaxed.dense();

    let theta = grad_check(
        |t| value(&dense, attributes, &EncoderParams { theta: reshape(&params.theta, t), ..params.clone() }),
        &flat(&grads.theta),
        &flat(&params.theta),
        step,
    )?;
    let phi = grad_check(
        |t| value(&dense, attributes, &EncoderParams { phi: reshape(&params.phi, t), ..params.clone() }),
        &flat(&grads.phi),
        &flat(&params.phi),
        step,
    )?;
    let attrs = grad_check(
        |t| value(&dense, &reshape(attributes, t), params),
        &flat(&grads.attributes),
        &flat(attributes),
        step,
    )?;
    let perturbation = grad_check(
        |t| {
            let moved = RelaxedAdjacency { perturb: Array1::from(t.to_vec()), ..relaxed.clone() };
            value(&moved.dense(), attributes, params)
        },
        grads.perturbation(&relaxed.base).as_slice().expect("contiguous"),
        relaxed.perturb.as_slice().expect("contiguous"),
        step,
    )?;
    Ok(GradientCheck { theta, phi, attributes: attrs, perturbation })
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_params;
    use crate::graph::slot_count;
    use ndarray::Array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, c: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::zeros((n, n));
        for (i, j) in upper_pairs(n) {
            if rng.random::<f64>() < 0.4 {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
        let x = Array::from_shape_simple_fn((n, c), || rng.random_range(-1.0..1.0));
        Graph::new(a, x).unwrap()
    }

    fn loop_oracle(g: &Graph, params: &EncoderParams, perm: &[usize]) -> f64 {
        let n = g.num_nodes();
        let h = params.hidden_dim();
        let c = g.num_attributes();
        let a = g.adjacency();
        let deg: Vec<f64> = (0..n).map(|i| 1.0 + (0..n).map(|j| a[[i, j]]).sum::<f64>()).collect();
        let embed = |x: &dyn Fn(usize, usize) -> f64| {
            let mut z = vec![vec![0.0; h]; n];
            for i in 0..n {
                for k in 0..h {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let a_hat = a[[i, j]] + if i == j { 1.0 } else { 0.0 };
                        if a_hat == 0.0 {
                            continue;
                        }
                        let mut xt = 0.0;
                        for f in 0..c {
                            xt += x(j, f) * params.theta[[f, k]];
                        }
                        acc += a_hat / (deg[i] * deg[j]).sqrt() * xt;
                    }
                    z[i][k] = acc.max(0.0);
                }
            }
            z
        };
        let xs = g.attributes();
        let z = embed(&|j, f| xs[[j, f]]);
        let zn = embed(&|j, f| xs[[perm[j], f]]);
        let zg: Vec<f64> = (0..h)
            .map(|k| {
                let m = (0..n).map(|i| z[i][k]).sum::<f64>() / n as f64;
                1.0 / (1.0 + (-m).exp())
            })
            .collect();
        let score = |row: &[f64]| {
            let mut t = 0.0;
            for a in 0..h {
                for b in 0..h {
                    t += row[a] * params.phi[[a, b]] * zg[b];
                }
            }
            1.0 / (1.0 + (-t).exp())
        };
        let mut total = 0.0;
        for i in 0..n {
            total += score(&z[i]).ln() / n as f64;
            total += (1.0 - score(&zn[i])).ln() / n as f64;
        }
        total
    }

    #[test]
    fn negative_sample_is_a_seeded_bijection() {
        let g = random_graph(5, 3, 1);
        let neg = negative_sample(&g, 7).unwrap();
        assert_eq!(neg, negative_sample(&g, 7).unwrap());
        let mut sorted = neg.permutation.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        let inv = neg.inverse();
        let restored = neg.shuffled_attributes.select(Axis(0), &inv);
        assert_eq!(&restored, g.attributes());
    }

    #[test]
    fn negative_sample_needs_two_nodes() {
        let g = Graph::new(Array2::zeros((1, 1)), Array2::zeros((1, 2))).unwrap();
        assert!(negative_sample(&g, 0).is_err());
    }

    #[test]
    fn two_node_swap_frequency_is_binomial() {
        let g = random_graph(2, 1, 3);
        let swaps = (0..1000)
            .filter(|&s| negative_sample(&g, s).unwrap().permutation == vec![1, 0])
            .count();
        let freq = swaps as f64 / 1000.0;
        assert!((freq - 0.5).abs() < 0.05, "swap frequency {freq}");
    }

    #[test]
    fn zero_critic_gives_two_log_half() {
        let g = random_graph(6, 3, 2);
        let mut params = init_params(3, 4, 0).unwrap();
        params.phi.fill(0.0);
        let neg = negative_sample(&g, 1).unwrap();
        let (v, _) = mi_estimate(&g, &params, &neg).unwrap();
        assert!((v - 2.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((v + 1.386_294_361_119_890_6).abs() < 1e-12);
    }

    #[test]
    fn perfect_critic_limit_is_zero_from_below() {
        let mut last = f64::NEG_INFINITY;
        for gap in [1e-1, 1e-3, 1e-6, 1e-9, 1e-15] {
            let v = contrastive_value(&Array1::from(vec![1.0 - gap; 3]), &Array1::from(vec![gap; 3]));
            assert!(v < 0.0 && v > last);
            last = v;
        }
        assert!(last > -1e-11);
    }

    #[test]
    fn huge_critic_stays_finite() {
        let g = random_graph(8, 3, 21);
        let mut params = init_params(3, 4, 22).unwrap();
        params.phi *= 1e8;
        let neg = negative_sample(&g, 23).unwrap();
        let (v, tape) = mi_estimate(&g, &params, &neg).unwrap();
        assert!(v.is_finite() && v <= 0.0);
        assert!(mi_gradients(&params, &neg, &tape).is_ok());
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        for seed in 0..5 {
            let g = random_graph(8, 3, seed);
            let params = init_params(3, 4, seed + 10).unwrap();
            let neg = negative_sample(&g, seed + 20).unwrap();
            let (v, _) = mi_estimate(&g, &params, &neg).unwrap();
            let oracle = loop_oracle(&g, &params, &neg.permutation);
            assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
            assert!(v <= 0.0);
        }
    }

    #[test]
    fn relabeling_leaves_objective_invariant() {
        let g = random_graph(8, 3, 4);
        let params = init_params(3, 4, 5).unwrap();
        let neg = negative_sample(&g, 6).unwrap();
        let (v, _) = mi_estimate(&g, &params, &neg).unwrap();
        let relabel = [5, 2, 7, 0, 3, 1, 6, 4];
        let g2 = g.permuted(&relabel).unwrap();
        // negative row i maps original row perm[i]; relabeled row relabel[i] maps relabel[perm[i]]
        let mut perm2 = vec![0; 8];
        for i in 0..8 {
            perm2[relabel[i]] = relabel[neg.permutation[i]];
        }
        let neg2 = NegativeSample::from_permutation(g2.attributes(), perm2).unwrap();
        let (v2, _) = mi_estimate(&g2, &params, &neg2).unwrap();
        assert!((v - v2).abs() < 1e-12);
    }

    #[test]
    fn phi_gradient_cancels_for_identical_negatives() {
        let g = random_graph(6, 3, 7);
        let mut params = init_params(3, 4, 8).unwrap();
        params.phi.fill(0.0);
        let neg = NegativeSample::from_permutation(g.attributes(), (0..6).collect()).unwrap();
        let (_, tape) = mi_estimate(&g, &params, &neg).unwrap();
        let grads = mi_gradients(&params, &neg, &tape).unwrap();
        assert!(grads.phi.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn stale_tape_is_rejected() {
        let g = random_graph(6, 3, 9);
        let params = init_params(3, 4, 1).unwrap();
        let neg = negative_sample(&g, 2).unwrap();
        let (_, tape) = mi_estimate(&g, &params, &neg).unwrap();
        let other = init_params(3, 4, 2).unwrap();
        assert!(matches!(mi_gradients(&other, &neg, &tape), Err(Error::StaleTape)));
        let neg2 = negative_sample(&g, 3).unwrap();
        if neg2.permutation != neg.permutation {
            assert!(matches!(mi_gradients(&params, &neg2, &tape), Err(Error::StaleTape)));
        }
    }

    fn flat(a: &Array2<f64>) -> Vec<f64> {
        a.iter().copied().collect()
    }

    #[test]
    fn theta_gradient_passes_grad_check() {
        let g = random_graph(8, 3, 11);
        let params = init_params(3, 4, 12).unwrap();
        let neg = negative_sample(&g, 13).unwrap();
        let (_, tape) = mi_estimate(&g, &params, &neg).unwrap();
        let grads = mi_gradients(&params, &neg, &tape).unwrap();
        let err = grad_check(
            |t| {
                let mut p = params.clone();
                p.theta = Array2::from_shape_vec(params.theta.raw_dim(), t.to_vec()).unwrap();
                mi_estimate(&g, &p, &neg).unwrap().0
            },
            &flat(&grads.theta),
            &flat(&params.theta),
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "err = {err}");
    }

    #[test]
    fn perturbation_gradient_at_zero_passes_grad_check() {
        let g = random_graph(6, 3, 14);
        let params = init_params(3, 4, 15).unwrap();
        let neg = negative_sample(&g, 16).unwrap();
        let relaxed = RelaxedAdjacency::zero(g.adjacency(), 3);
        let (_, tape) = mi_relaxed(&relaxed, g.attributes(), &params, &neg).unwrap();
        let grads = mi_gradients(&params, &neg, &tape).unwrap();
        let dp = grads.perturbation(g.adjacency());
        assert_eq!(dp.len(), slot_count(6));
        let err = grad_check(
            |p| {
                let r = RelaxedAdjacency {
                    base: g.adjacency().clone(),
                    perturb: Array1::from(p.to_vec()),
                    budget: 3,
                };
                mi_relaxed(&r, g.attributes(), &params, &neg).unwrap().0
            },
            dp.as_slice().unwrap(),
            relaxed.perturb.as_slice().unwrap(),
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "err = {err}");
    }
}
