//! Synthetic data models and the linear sign encoder used in the
//! special-case analysis.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{rng_from, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `a_i ~ Bern(0.5 + y (p - 0.5))`, `x_i ~ N(0, sigma^2 I)`.
    TopologyAware,
    /// As above but `x_i = 1_c` and the aggregate is recentred by `n/2`.
    TopologyAwareSimple,
    /// `a_i ~ Bern(0.5)`, `x_i ~ N(y mu, sigma^2 I)`.
    AttributeAware,
    /// The aggregate sums `n0` rows with mean `+mu` and `n1` with mean `-mu`,
    /// `n0 = n/4 + y (p - n/4)`, `n1 = n/4 + y (q - n/4)`, `q = n/2 - p`.
    AttributeAwareSimple,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        Self::TopologyAware,
        Self::TopologyAwareSimple,
        Self::AttributeAware,
        Self::AttributeAwareSimple,
    ];

    pub fn is_simple(self) -> bool {
        matches!(self, Self::TopologyAwareSimple | Self::AttributeAwareSimple)
    }

    pub fn is_topology(self) -> bool {
        matches!(self, Self::TopologyAware | Self::TopologyAwareSimple)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TopologyAware => "topology_aware",
            Self::TopologyAwareSimple => "topology_aware_simple",
            Self::AttributeAware => "attribute_aware",
            Self::AttributeAwareSimple => "attribute_aware_simple",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticModel {
    pub kind: ModelKind,
    /// Number of nodes aggregated per sample.
    pub n: usize,
    /// Attribute dimension.
    pub c: usize,
    /// Bernoulli parameter, or the integer count `p` for the simple
    /// attribute-aware model.
    pub p: f64,
    pub sigma: f64,
    /// Class mean of the attributes (attribute-aware kinds).
    pub mu: Vec<f64>,
    /// The perturbation ball is an `L_norm` ball on the aggregate.
    pub ball_norm: f64,
}

impl SyntheticModel {
    pub fn topology_aware(n: usize, c: usize, p: f64, sigma: f64) -> Self {
        Self {
            kind: ModelKind::TopologyAware,
            n,
            c,
            p,
            sigma,
            mu: vec![0.0; c],
            ball_norm: 2.0,
        }
    }

    pub fn attribute_aware(n: usize, mu: Vec<f64>, sigma: f64) -> Self {
        Self {
            kind: ModelKind::AttributeAware,
            n,
            c: mu.len(),
            p: 0.5,
            sigma,
            mu,
            ball_norm: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.c == 0 {
            return Err(Error::invalid("n and c must be >= 1"));
        }
        if self.mu.len() != self.c {
            return Err(Error::shape(format!("mu has length {} but c = {}", self.mu.len(), self.c)));
        }
        if !(self.ball_norm >= 1.0) {
            return Err(Error::invalid(format!("ball norm must be >= 1, got {}", self.ball_norm)));
        }
        if self.kind != ModelKind::TopologyAwareSimple && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        match self.kind {
            ModelKind::TopologyAware | ModelKind::TopologyAwareSimple => {
                if !(self.p > 0.0 && self.p < 1.0) {
                    return Err(Error::invalid(format!("p must be in (0, 1), got {}", self.p)));
                }
            }
            ModelKind::AttributeAware => {}
            ModelKind::AttributeAwareSimple => {
                let half = self.n as f64 / 2.0;
                if self.n % 2 != 0 {
                    return Err(Error::invalid("the simple attribute-aware model needs an even n"));
                }
                if self.p.fract() != 0.0 || !(0.0..=half).contains(&self.p) {
                    return Err(Error::invalid(format!(
                        "p must be an integer count in [0, n/2], got {}",
                        self.p
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(n0, n1)` for the simple attribute-aware model.
    pub fn simple_counts(&self, y: i8) -> (usize, usize) {
        let p = self.p as usize;
        let q = self.n / 2 - p;
        if y > 0 {
            (p, q)
        } else {
            (q, p)
        }
    }
}

/// `e(a, x) = sgn[h Theta]` with `||Theta||_2 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearEncoderHypothesis {
    theta: Vec<f64>,
}

impl LinearEncoderHypothesis {
    pub const UNIT_TOL: f64 = 1e-12;

    pub fn new(theta: Vec<f64>) -> Result<Self> {
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > Self::UNIT_TOL {
            return Err(Error::invalid(format!("theta must have unit L2 norm, got {norm}")));
        }
        Ok(Self { theta })
    }

    /// Normalizes `direction` to unit length.
    pub fn from_direction(direction: &[f64]) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("direction must be finite and nonzero"));
        }
        Ok(Self {
            theta: direction.iter().map(|v| v / norm).collect(),
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `||Theta||_q` for the exponent conjugate to `p`.
    pub fn dual_norm(&self, p: f64) -> f64 {
        if p == 1.0 {
            return self.theta.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        if p.is_infinite() {
            return self.theta.iter().map(|v| v.abs()).sum();
        }
        let q = p / (p - 1.0);
        self.theta.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }

    /// Worst-case shift of `h Theta` inside a `rho` ball: `rho ||Theta||_q`.
    pub fn radius(&self, rho: f64, ball_norm: f64) -> f64 {
        rho * self.dual_norm(ball_norm)
    }

    fn dot(&self, v: &[f64]) -> f64 {
        self.theta.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// One explicit draw `(a, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub a: Vec<u8>,
    pub x: Array2<f64>,
    pub y: i8,
}

/// Projected aggregates `u_k = h_k Theta` with their labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Draws {
    pub u: Vec<f64>,
    pub y: Vec<i8>,
}

impl Draws {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

fn label(rng: &mut crate::rng::Rng) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// Explicit i.i.d. draws. Memory grows as `count * n * c`; use
/// [`sample_projected`] for large experiments.
pub fn generate(model: &SyntheticModel, count: usize, seed: u64) -> Result<Vec<Sample>> {
    model.validate()?;
    let (n, c) = (model.n, model.c);
    let mut rng = rng_from(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let y = label(&mut rng);
        let yf = f64::from(y);
        let (a, x) = match model.kind {
            ModelKind::TopologyAware | ModelKind::TopologyAwareSimple => {
                let prob = 0.5 + yf * (model.p - 0.5);
                let a: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < prob)).collect();
                let x = if model.kind == ModelKind::TopologyAware {
                    Array2::from_shape_simple_fn((n, c), || {
                        model.sigma * rng.sample::<f64, _>(StandardNormal)
                    })
                } else {
                    Array2::ones((n, c))
                };
                (a, x)
            }
            ModelKind::AttributeAware => {
                let a: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
                let x = Array2::from_shape_fn((n, c), |(_, j)| {
                    yf * model.mu[j] + model.sigma * rng.sample::<f64, _>(StandardNormal)
                });
                (a, x)
            }
            ModelKind::AttributeAwareSimple => {
                // the first n0 selected rows carry mean +mu, the next n1 carry -mu,
                // unselected rows are filler with a random class mean
                let (n0, n1) = model.simple_counts(y);
                let mut order: Vec<usize> = (0..n).collect();
                rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
                let mut a = vec![0u8; n];
                let mut sign = vec![0.0; n];
                for (k, &i) in order.iter().enumerate() {
                    if k < n0 + n1 {
                        a[i] = 1;
                        sign[i] = if k < n0 { 1.0 } else { -1.0 };
                    } else {
                        sign[i] = f64::from(label(&mut rng));
                    }
                }
                let x = Array2::from_shape_fn((n, c), |(i, j)| {
                    sign[i] * model.mu[j] + model.sigma * rng.sample::<f64, _>(StandardNormal)
                });
                (a, x)
            }
        };
        out.push(Sample { a, x, y });
    }
    Ok(out)
}

/// Aggregate `h = a^T x` (recentred by `n/2` in the simple topology model).
pub fn aggregate(model: &SyntheticModel, sample: &Sample) -> Array1<f64> {
    let a: Array1<f64> = sample.a.iter().map(|&v| f64::from(v)).collect();
    let mut h = sample.x.t().dot(&a);
    if model.kind == ModelKind::TopologyAwareSimple {
        h -= 0.5 * model.n as f64;
    }
    h
}

pub fn project(model: &SyntheticModel, hypothesis: &LinearEncoderHypothesis, samples: &[Sample]) -> Draws {
    Draws {
        u: samples
            .iter()
            .map(|s| hypothesis.dot(aggregate(model, s).as_slice().expect("contiguous")))
            .collect(),
        y: samples.iter().map(|s| s.y).collect(),
    }
}

/// Samples per parallel chunk of [`sample_projected`].
pub const CHUNK: usize = 8192;

/// Draws `h Theta` directly from its exact conditional law given the number
/// of selected neighbours, without materializing `(a, x)`.
///
/// Given `r = sum a_i` and `m = mu . Theta`:
/// topology-aware `N(0, r sigma^2)`, attribute-aware `N(y r m, r sigma^2)`,
/// simple topology `(r - n/2) 1^T Theta`, simple attribute
/// `N((n0 - n1) m, (n0 + n1) sigma^2)`.
pub fn sample_projected(
    model: &SyntheticModel,
    hypothesis: &LinearEncoderHypothesis,
    count: usize,
    seed: u64,
) -> Result<Draws> {
    model.validate()?;
    if hypothesis.theta().len() != model.c {
        return Err(Error::shape(format!(
            "theta has length {} but c = {}",
            hypothesis.theta().len(),
            model.c
        )));
    }
    let m = hypothesis.dot(&model.mu);
    let ones = hypothesis.theta().iter().sum::<f64>();
    let n = model.n as u64;
    let binom = |prob: f64| Binomial::new(n, prob).map_err(|e| Error::invalid(format!("binomial: {e}")));
    // the count parameter of the simple attribute model is not a probability
    let (p_pos, p_neg) = if model.kind.is_topology() { (model.p, 1.0 - model.p) } else { (0.5, 0.5) };
    let (pos, neg, fair) = (binom(p_pos)?, binom(p_neg)?, binom(0.5)?);

    let chunks: Vec<(Vec<f64>, Vec<i8>)> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            let len = CHUNK.min(count - k * CHUNK);
            let mut rng = rng_from(substream(seed, &format!("theory:chunk:{k}")));
            let mut u = Vec::with_capacity(len);
            let mut y = Vec::with_capacity(len);
            for _ in 0..len {
                let label = label(&mut rng);
                let yf = f64::from(label);
                let z: f64 = rng.sample(StandardNormal);
                let value = match model.kind {
                    ModelKind::TopologyAware => {
                        let r = if label > 0 { pos.sample(&mut rng) } else { neg.sample(&mut rng) } as f64;
                        model.sigma * r.sqrt() * z
                    }
                    ModelKind::TopologyAwareSimple => {
                        let r = if label > 0 { pos.sample(&mut rng) } else { neg.sample(&mut rng) } as f64;
                        (r - 0.5 * model.n as f64) * ones
                    }
                    ModelKind::AttributeAware => {
                        let r = fair.sample(&mut rng) as f64;
                        yf * r * m + model.sigma * r.sqrt() * z
                    }
                    ModelKind::AttributeAwareSimple => {
                        let (n0, n1) = model.simple_counts(label);
                        (n0 as f64 - n1 as f64) * m + model.sigma * ((n0 + n1) as f64).sqrt() * z
                    }
                };
                u.push(value);
                y.push(label);
            }
            (u, y)
        })
        .collect();

    let mut draws = Draws {
        u: Vec::with_capacity(count),
        y: Vec::with_capacity(count),
    };
    for (u, y) in chunks {
        draws.u.extend(u);
        draws.y.extend(y);
    }
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (mean, v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn hypothesis_norms() {
        assert!(LinearEncoderHypothesis::new(vec![0.6, 0.8]).is_ok());
        assert!(LinearEncoderHypothesis::new(vec![0.6, 0.81]).is_err());
        let h = LinearEncoderHypothesis::from_direction(&[3.0, -4.0]).unwrap();
        assert_eq!(h.theta(), &[0.6, -0.8]);
        assert!((h.dual_norm(2.0) - 1.0).abs() < 1e-15);
        assert!((h.dual_norm(f64::INFINITY) - 1.4).abs() < 1e-15);
        assert_eq!(h.dual_norm(1.0), 0.8);
        assert!(LinearEncoderHypothesis::from_direction(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(SyntheticModel::topology_aware(10, 2, 0.7, 1.0).validate().is_ok());
        assert!(SyntheticModel::topology_aware(10, 2, 1.0, 1.0).validate().is_err());
        assert!(SyntheticModel::topology_aware(10, 2, 0.7, 0.0).validate().is_err());
        let mut simple = SyntheticModel::attribute_aware(10, vec![1.0], 1.0);
        simple.kind = ModelKind::AttributeAwareSimple;
        simple.p = 3.0;
        assert!(simple.validate().is_ok());
        assert_eq!(simple.simple_counts(1), (3, 2));
        assert_eq!(simple.simple_counts(-1), (2, 3));
        simple.p = 2.5;
        assert!(simple.validate().is_err());
        simple.p = 6.0;
        assert!(simple.validate().is_err());
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
    }

    #[test]
    fn fair_coin_adjacency_has_no_label_signal() {
        let model = SyntheticModel::topology_aware(1000, 1, 0.5, 1.0);
        let samples = generate(&model, 100, 3).unwrap();
        // 10^5 Bernoulli(0.5) entries per label group at most; check each group
        for label in [-1i8, 1] {
            let group: Vec<&Sample> = samples.iter().filter(|s| s.y == label).collect();
            let trials = (group.len() * model.n) as f64;
            let ones: usize = group.iter().map(|s| s.a.iter().map(|&v| v as usize).sum::<usize>()).sum();
            let se = (0.25 / trials).sqrt();
            assert!((ones as f64 / trials - 0.5).abs() < 3.0 * se, "label {label}");
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let model = SyntheticModel::attribute_aware(20, vec![0.5, -0.5], 1.0);
        assert_eq!(generate(&model, 5, 9).unwrap(), generate(&model, 5, 9).unwrap());
        let hyp = LinearEncoderHypothesis::from_direction(&[1.0, 1.0]).unwrap();
        assert_eq!(
            sample_projected(&model, &hyp, 20_000, 4).unwrap(),
            sample_projected(&model, &hyp, 20_000, 4).unwrap()
        );
    }

    /// The aggregate sampler and the explicit generator agree in the first two
    /// moments of `y u` for every kind.
    #[test]
    fn projected_sampler_matches_explicit_generation() {
        let mut models = vec![
            SyntheticModel::topology_aware(40, 3, 0.7, 1.5),
            SyntheticModel::attribute_aware(40, vec![0.3, -0.2, 0.1], 1.0),
        ];
        let mut topo_simple = SyntheticModel::topology_aware(40, 3, 0.7, 1.0);
        topo_simple.kind = ModelKind::TopologyAwareSimple;
        let mut attr_simple = SyntheticModel::attribute_aware(40, vec![0.3, -0.2, 0.1], 1.0);
        attr_simple.kind = ModelKind::AttributeAwareSimple;
        attr_simple.p = 14.0;
        models.extend([topo_simple, attr_simple]);
        let hyp = LinearEncoderHypothesis::from_direction(&[1.0, -0.5, 2.0]).unwrap();
        for model in models {
            let explicit = project(&model, &hyp, &generate(&model, 4000, 1).unwrap());
            let fast = sample_projected(&model, &hyp, 40_000, 2).unwrap();
            let signed = |d: &Draws| -> Vec<f64> { d.u.iter().zip(&d.y).map(|(u, &y)| u * f64::from(y)).collect() };
            let (m1, v1) = mean_var(&signed(&explicit));
            let (m2, v2) = mean_var(&signed(&fast));
            let se = (v2 / 4000.0).sqrt();
            assert!((m1 - m2).abs() < 4.0 * se + 1e-9, "{}: means {m1} vs {m2}", model.kind);
            assert!((v1 / v2 - 1.0).abs() < 0.1 || v2 < 1e-12, "{}: vars {v1} vs {v2}", model.kind);
        }
    }
}
