//! Worst-case perturbations inside the empirical budget ball and the
//! representation-vulnerability estimate built from them.
//!
//! Topology: projected gradient descent on a `[0, 1]` relaxation of the flip
//! vector, followed by Bernoulli sampling back to a binary flip set.
//! Attributes: L-infinity PGD around the clean attributes.

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rayon::prelude::*;

use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::graph::{flip_distance, slot_count, Graph, RelaxedAdjacency};
use crate::objective::{mi_forward, mi_gradients, mi_value, negative_sample, NegativeSample};
use crate::rng::{rng_from, substream};

/// Absolute tolerance on the budget constraint reached by the projection.
pub const PROJECTION_TOL: f64 = 1e-10;
const PROJECTION_MAX_ITERS: usize = 200;

/// How the relaxed flip vector is turned back into a binary flip set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    /// Draw `num_samples` Bernoulli vectors, keep the feasible ones and the zero vector.
    Sampling,
    /// Try every flip set of size at most `delta`. Only for tiny graphs.
    Exhaustive,
}

/// Perturbation budget and PGD schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackBudget {
    /// Maximum number of edge flips.
    pub delta: usize,
    /// L-infinity radius for attribute changes.
    pub epsilon: f64,
    pub topo_steps: usize,
    pub feat_steps: usize,
    pub topo_step_size: f64,
    pub feat_step_size: f64,
    pub num_samples: usize,
    pub recovery: Recovery,
}

impl AttackBudget {
    /// Schedule used inside the training loop.
    pub fn training(delta: usize, epsilon: f64) -> Self {
        Self {
            delta,
            epsilon,
            topo_steps: 10,
            feat_steps: 10,
            topo_step_size: 20.0,
            feat_step_size: 1e-5,
            num_samples: 20,
            recovery: Recovery::Sampling,
        }
    }

    /// Schedule used when evaluating a trained encoder.
    pub fn evaluation(delta: usize, epsilon: f64) -> Self {
        Self {
            topo_steps: 50,
            feat_steps: 50,
            feat_step_size: 1e-3,
            ..Self::training(delta, epsilon)
        }
    }

    pub fn zero() -> Self {
        Self::training(0, 0.0)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let m = slot_count(n);
        if self.delta > m {
            return Err(Error::invalid(format!(
                "flip budget {} exceeds the {m} candidate slots",
                self.delta
            )));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.topo_step_size >= 0.0) || !(self.feat_step_size >= 0.0) {
            return Err(Error::invalid("step sizes must be >= 0"));
        }
        Ok(())
    }
}

/// Flip count for a budget given as a fraction of the edge count (floored).
pub fn budget_from_fraction(num_edges: usize, fraction: f64) -> Result<usize> {
    if !(fraction >= 0.0) || !fraction.is_finite() {
        return Err(Error::invalid(format!("budget fraction must be >= 0, got {fraction}")));
    }
    // the small slack keeps e.g. 0.4 * 10 from flooring to 3
    Ok((fraction * num_edges as f64 + 1e-9).floor() as usize)
}

/// Euclidean projection onto `{q : 0 <= q <= 1, sum q <= delta}`.
pub fn project_budget_box(p: &Array1<f64>, delta: f64) -> Result<Array1<f64>> {
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be >= 0, got {delta}")));
    }
    let clipped = p.mapv(|v| v.clamp(0.0, 1.0));
    if clipped.sum() <= delta {
        return Ok(clipped);
    }
    let shifted_sum = |lambda: f64| p.iter().map(|&v| (v - lambda).clamp(0.0, 1.0)).sum::<f64>();
    // shifted_sum(lo) > delta >= shifted_sum(hi)
    let mut lo = 0.0;
    let mut hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..PROJECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let s = shifted_sum(mid);
        if (s - delta).abs() <= PROJECTION_TOL {
            return Ok(p.mapv(|v| (v - mid).clamp(0.0, 1.0)));
        }
        if s > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = shifted_sum(hi);
    if (s - delta).abs() <= PROJECTION_TOL {
        return Ok(p.mapv(|v| (v - hi).clamp(0.0, 1.0)));
    }
    Err(Error::numerical(format!(
        "budget projection did not converge (sum {s}, delta {delta})"
    )))
}

/// Projected gradient descent inside the box `[center - eps, center + eps]`,
/// returning the best iterate (lowest objective, the start included).
pub fn box_pgd<F>(
    mut objective: F,
    center: &Array2<f64>,
    epsilon: f64,
    steps: usize,
    step_size: f64,
) -> Result<(Array2<f64>, f64)>
where
    F: FnMut(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
{
    let mut current = center.clone();
    let (start_value, mut grad) = objective(&current)?;
    let mut best = (current.clone(), start_value);
    if epsilon == 0.0 {
        return Ok(best);
    }
    for _ in 0..steps {
        current.scaled_add(-step_size, &grad);
        ndarray::Zip::from(&mut current)
            .and(center)
            .for_each(|v, &c| *v = v.clamp(c - epsilon, c + epsilon));
        let (value, g) = objective(&current)?;
        if value < best.1 {
            best = (current.clone(), value);
        }
        grad = g;
    }
    Ok(best)
}

/// Outcome of an attribute attack.
#[derive(Debug, Clone)]
pub struct FeatureAttack {
    pub attributes: Array2<f64>,
    pub objective: f64,
}

/// L-infinity PGD on the attributes of `graph` (topology held fixed).
pub fn attack_features(
    graph: &Graph,
    params: &EncoderParams,
    neg: &NegativeSample,
    epsilon: f64,
    steps: usize,
    step_size: f64,
) -> Result<FeatureAttack> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let adjacency = graph.adjacency();
    let (attributes, objective) = box_pgd(
        |x| {
            let (value, tape) = mi_forward(adjacency, x, params, neg)?;
            let grads = mi_gradients(params, neg, &tape)?;
            Ok((value, grads.attributes))
        },
        graph.attributes(),
        epsilon,
        steps,
        step_size,
    )?;
    Ok(FeatureAttack {
        attributes,
        objective,
    })
}

/// Outcome of a topology attack.
#[derive(Debug, Clone)]
pub struct TopologyAttack {
    pub adjacency: Array2<f64>,
    /// Final relaxed flip vector after PGD.
    pub relaxed: Array1<f64>,
    /// Chosen binary flip vector.
    pub sample: Vec<u8>,
    pub objective: f64,
    pub flips: usize,
}

/// Graph PGD over the relaxed flip vector, then binary recovery.
pub fn attack_topology(
    graph: &Graph,
    params: &EncoderParams,
    neg: &NegativeSample,
    budget: &AttackBudget,
    seed: u64,
) -> Result<TopologyAttack> {
    budget.validate(graph.num_nodes())?;
    let base = graph.adjacency();
    let attributes = graph.attributes();
    let m = slot_count(graph.num_nodes());
    let mut relaxed = RelaxedAdjacency::zero(base, budget.delta);

    if budget.delta > 0 {
        for _ in 0..budget.topo_steps {
            let (_, tape) = mi_forward(&relaxed.dense(), attributes, params, neg)?;
            let grads = mi_gradients(params, neg, &tape)?;
            let step = &relaxed.perturb - &(grads.perturbation(base) * budget.topo_step_size);
            relaxed.perturb = project_budget_box(&step, budget.delta as f64)?;
        }
    }

    let mut candidates: Vec<Vec<u8>> = match budget.recovery {
        _ if budget.delta == 0 => Vec::new(),
        Recovery::Sampling => {
            let mut rng = rng_from(seed);
            let mut out = Vec::with_capacity(budget.num_samples + 1);
            for _ in 0..budget.num_samples {
                let s: Vec<u8> = relaxed
                    .perturb
                    .iter()
                    .map(|&p| u8::from(rng.random::<f64>() < p))
                    .collect();
                if s.iter().filter(|&&b| b == 1).count() <= budget.delta {
                    out.push(s);
                }
            }
            out
        }
        Recovery::Exhaustive => enumerate_flip_sets(m, budget.delta)?,
    };
    candidates.push(vec![0; m]);

    let scored: Vec<Result<f64>> = candidates
        .par_iter()
        .map(|s| {
            let adj = relaxed.materialize(s)?;
            mi_value(&adj, attributes, params, neg)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (idx, value) in scored.into_iter().enumerate() {
        let value = value?;
        // strict comparison keeps the lowest index on ties
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((idx, value));
        }
    }
    let (idx, objective) = best.expect("zero candidate is always present");
    let sample = candidates.swap_remove(idx);
    let adjacency = relaxed.materialize(&sample)?;
    let flips = flip_distance(base, &adjacency)?;
    Ok(TopologyAttack {
        adjacency,
        relaxed: relaxed.perturb,
        sample,
        objective,
        flips,
    })
}

/// All 0/1 vectors of length `m` with at most `delta` ones, smallest sets first.
pub fn enumerate_flip_sets(m: usize, delta: usize) -> Result<Vec<Vec<u8>>> {
    if m > 24 {
        return Err(Error::invalid(format!(
            "exhaustive recovery over {m} slots is infeasible"
        )));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << m) {
        let ones = mask.count_ones() as usize;
        if ones <= delta && ones > 0 {
            out.push((0..m).map(|k| ((mask >> k) & 1) as u8).collect());
        }
    }
    Ok(out)
}

/// A jointly perturbed graph and the objective it achieves.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub perturbed: Graph,
    pub objective: f64,
    pub benign_objective: f64,
    pub flips_used: usize,
    pub feat_linf_used: f64,
}

impl AttackResult {
    /// Drop of the estimate under attack; never negative.
    pub fn grv(&self) -> f64 {
        self.benign_objective - self.objective
    }
}

fn linf_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Topology attack followed by an attribute attack on the attacked topology.
///
/// The attribute-only attack on the clean topology is kept as a fallback
/// candidate, so the result is never worse (for the attacker) than either
/// single-space attack.
pub fn worst_case_attack(
    graph: &Graph,
    params: &EncoderParams,
    neg: &NegativeSample,
    budget: &AttackBudget,
    seed: u64,
) -> Result<AttackResult> {
    budget.validate(graph.num_nodes())?;
    params.check_input(graph)?;
    let benign_objective = mi_value(graph.adjacency(), graph.attributes(), params, neg)?;

    let topo = attack_topology(graph, params, neg, budget, substream(seed, "topology"))?;
    let topo_graph = graph.with_adjacency(topo.adjacency)?;
    let feat_on_topo = attack_features(
        &topo_graph,
        params,
        neg,
        budget.epsilon,
        budget.feat_steps,
        budget.feat_step_size,
    )?;
    let mut perturbed = topo_graph.with_attributes(feat_on_topo.attributes)?;
    let mut objective = feat_on_topo.objective;

    if topo.flips > 0 && budget.epsilon > 0.0 && budget.feat_steps > 0 {
        let feat_only = attack_features(
            graph,
            params,
            neg,
            budget.epsilon,
            budget.feat_steps,
            budget.feat_step_size,
        )?;
        if feat_only.objective < objective {
            perturbed = graph.with_attributes(feat_only.attributes)?;
            objective = feat_only.objective;
        }
    }
    let objective = objective.min(benign_objective);
    if objective == benign_objective {
        perturbed = graph.clone();
    }

    let flips_used = flip_distance(graph.adjacency(), perturbed.adjacency())?;
    let feat_linf_used = linf_distance(graph.attributes(), perturbed.attributes());
    Ok(AttackResult {
        perturbed,
        objective,
        benign_objective,
        flips_used,
        feat_linf_used,
    })
}

/// `l_enc(benign) - l_enc(worst case)` with one shared negative sample.
pub fn empirical_grv(graph: &Graph, params: &EncoderParams, budget: &AttackBudget, seed: u64) -> Result<f64> {
    let neg = negative_sample(graph, substream(seed, "grv:negative"))?;
    let result = worst_case_attack(graph, params, &neg, budget, substream(seed, "grv:attack"))?;
    Ok(result.grv())
}
