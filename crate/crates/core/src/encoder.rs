//! One-layer GNN encoder, mean readout and bilinear critic.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph, NormalizedPropagator};
use crate::kernels::{relu_forward, sigmoid, sigmoid_forward};
use crate::rng::rng_from;

/// Default representation width.
pub const DEFAULT_HIDDEN: usize = 512;

/// Learnable weights: the GNN layer `theta` (c x h) and the critic `phi` (h x h).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub theta: Array2<f64>,
    pub phi: Array2<f64>,
}

impl EncoderParams {
    pub fn new(theta: Array2<f64>, phi: Array2<f64>) -> Result<Self> {
        let h = theta.ncols();
        if phi.dim() != (h, h) {
            return Err(Error::shape(format!(
                "phi is {:?}, expected ({h}, {h})",
                phi.dim()
            )));
        }
        if theta.iter().chain(phi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical("parameters contain non-finite values"));
        }
        Ok(Self { theta, phi })
    }

    pub fn input_dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.theta.ncols()
    }

    pub fn check_input(&self, graph: &Graph) -> Result<()> {
        if graph.num_attributes() != self.input_dim() {
            return Err(Error::shape(format!(
                "graph has {} attributes but theta expects {}",
                graph.num_attributes(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Xavier-uniform initialization of both matrices, deterministic per seed.
pub fn init_params(c: usize, h: usize, seed: u64) -> Result<EncoderParams> {
    if c == 0 || h == 0 {
        return Err(Error::invalid("input and hidden dimensions must be at least 1"));
    }
    let mut rng = rng_from(seed);
    let mut xavier = |rows: usize, cols: usize| {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
    };
    let theta = xavier(c, h);
    let phi = xavier(h, h);
    EncoderParams::new(theta, phi)
}

/// Node embeddings `z` (n x h, post-ReLU) and the global summary `z_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub z: Array2<f64>,
    pub z_g: Array1<f64>,
}

/// `z_g = sigmoid(mean_i z_i)`.
pub fn readout(z: &Array2<f64>) -> Array1<f64> {
    let mean = z
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(z.ncols()));
    sigmoid_forward(&mean)
}

/// `ReLU(P X theta)` for a precomputed propagator.
pub fn propagate(
    propagator: &NormalizedPropagator,
    attributes: &Array2<f64>,
    theta: &Array2<f64>,
) -> Array2<f64> {
    relu_forward(&propagator.matrix.dot(&attributes.dot(theta)))
}

pub fn encode(graph: &Graph, params: &EncoderParams) -> Result<Representation> {
    params.check_input(graph)?;
    let propagator = normalize_adjacency(graph.adjacency())?;
    let z = propagate(&propagator, graph.attributes(), &params.theta);
    let z_g = readout(&z);
    Ok(Representation { z, z_g })
}

/// `sigmoid(z_row^T phi z_g)`.
pub fn critic_score(z_row: ArrayView1<f64>, z_g: ArrayView1<f64>, phi: &Array2<f64>) -> Result<f64> {
    let h = phi.nrows();
    if phi.ncols() != h || z_row.len() != h || z_g.len() != h {
        return Err(Error::shape("critic operands have inconsistent dimensions"));
    }
    Ok(sigmoid(z_row.dot(&phi.dot(&z_g))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_graph(n: usize, c: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.4 {
                    a[[i, j]] = 1.0;
                    a[[j, i]] = 1.0;
                }
            }
        }
        let x = Array::from_shape_simple_fn((n, c), || rng.random_range(-1.0..1.0));
        Graph::new(a, x).unwrap()
    }

    #[test]
    fn zero_theta_gives_zero_embeddings() {
        let g = random_graph(6, 3, 1);
        let params = EncoderParams::new(Array2::zeros((3, 4)), Array2::zeros((4, 4))).unwrap();
        let rep = encode(&g, &params).unwrap();
        assert!(rep.z.iter().all(|&v| v == 0.0));
        assert!(rep.z_g.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn single_node_with_identity_weights_is_relu_of_attributes() {
        let g = Graph::new(array![[0.0]], array![[1.0, -2.0, 3.0]]).unwrap();
        let params = EncoderParams::new(Array2::eye(3), Array2::eye(3)).unwrap();
        let rep = encode(&g, &params).unwrap();
        assert_eq!(rep.z, array![[1.0, 0.0, 3.0]]);
    }

    #[test]
    fn encode_matches_straight_line_recomputation() {
        let g = random_graph(8, 5, 2);
        let params = init_params(5, 4, 3).unwrap();
        let rep = encode(&g, &params).unwrap();
        let a = g.adjacency();
        let x = g.attributes();
        let n = 8;
        let deg: Vec<f64> = (0..n).map(|i| 1.0 + (0..n).map(|j| a[[i, j]]).sum::<f64>()).collect();
        let mut mean = [0.0; 4];
        for i in 0..n {
            for k in 0..4 {
                let mut acc = 0.0;
                for j in 0..n {
                    let a_hat = a[[i, j]] + if i == j { 1.0 } else { 0.0 };
                    let mut xt = 0.0;
                    for c in 0..5 {
                        xt += x[[j, c]] * params.theta[[c, k]];
                    }
                    acc += a_hat / (deg[i] * deg[j]).sqrt() * xt;
                }
                let expected = acc.max(0.0);
                assert!((rep.z[[i, k]] - expected).abs() < 1e-12);
                mean[k] += expected / n as f64;
            }
        }
        for k in 0..4 {
            assert!((rep.z_g[k] - 1.0 / (1.0 + (-mean[k]).exp())).abs() < 1e-12);
            assert!(rep.z_g[k] > 0.0 && rep.z_g[k] < 1.0);
        }
    }

    #[test]
    fn encode_rejects_dimension_mismatch() {
        let g = random_graph(4, 3, 4);
        let params = init_params(2, 4, 0).unwrap();
        assert!(matches!(encode(&g, &params), Err(Error::Shape(_))));
    }

    #[test]
    fn encode_is_permutation_equivariant() {
        let g = random_graph(8, 3, 5);
        let params = init_params(3, 4, 6).unwrap();
        let perm = [3, 7, 0, 5, 1, 6, 2, 4];
        let rep = encode(&g, &params).unwrap();
        let rep_p = encode(&g.permuted(&perm).unwrap(), &params).unwrap();
        for i in 0..8 {
            for k in 0..4 {
                assert!((rep.z[[i, k]] - rep_p.z[[perm[i], k]]).abs() < 1e-12);
            }
        }
        for k in 0..4 {
            assert!((rep.z_g[k] - rep_p.z_g[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn critic_with_zero_phi_is_half() {
        let z = array![0.3, -1.0, 2.0];
        let zg = array![0.1, 0.2, 0.9];
        assert_eq!(critic_score(z.view(), zg.view(), &Array2::zeros((3, 3))).unwrap(), 0.5);
    }

    #[test]
    fn critic_with_unit_vectors_and_identity() {
        let e1 = array![1.0, 0.0, 0.0];
        let s = critic_score(e1.view(), e1.view(), &Array2::eye(3)).unwrap();
        assert!((s - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn critic_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let h = 4;
            let z: Array1<f64> = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
            let zg: Array1<f64> = (0..h).map(|_| rng.random_range(0.0..1.0)).collect();
            let phi = Array::from_shape_simple_fn((h, h), || rng.random_range(-1.0..1.0));
            let mut t = 0.0;
            for a in 0..h {
                for b in 0..h {
                    t += z[a] * phi[[a, b]] * zg[b];
                }
            }
            let expected = 1.0 / (1.0 + (-t).exp());
            let got = critic_score(z.view(), zg.view(), &phi).unwrap();
            assert!((got - expected).abs() < 1e-14);
            assert!(got > 0.0 && got < 1.0);
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        assert_eq!(init_params(7, 5, 42).unwrap(), init_params(7, 5, 42).unwrap());
        assert_ne!(init_params(7, 5, 42).unwrap(), init_params(7, 5, 43).unwrap());
        let p = init_params(1, 1, 9).unwrap();
        let b = 3f64.sqrt();
        assert!(p.theta[[0, 0]].abs() <= b && p.phi[[0, 0]].abs() <= b);
    }

    #[test]
    fn init_variance_matches_uniform_formula() {
        // 10^5 draws from theta (500 x 200)
        let p = init_params(500, 200, 17).unwrap();
        let draws: Vec<f64> = p.theta.iter().copied().collect();
        assert_eq!(draws.len(), 100_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        // (b - a)^2 / 12 with b = -a = sqrt(6 / (c + h)) is 2 / (c + h)
        let expected = 2.0 / 700.0;
        assert!((var / expected - 1.0).abs() < 0.05, "var {var} vs {expected}");
    }
}
