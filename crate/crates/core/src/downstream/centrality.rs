//! Heuristic baseline attacks that flip the node pairs with the highest
//! combined centrality.
//!
//! Centrality is scored once on the clean graph and all flips are applied in
//! one batch.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::graph::{slot_count, upper_pairs, Graph};

pub const EIGEN_TOL: f64 = 1e-9;
pub const EIGEN_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentralityKind {
    Degree,
    Betweenness,
    Eigenvector,
}

impl FromStr for CentralityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree" => Ok(Self::Degree),
            "betw" | "betweenness" => Ok(Self::Betweenness),
            "eigen" | "eigenvector" => Ok(Self::Eigenvector),
            other => Err(Error::invalid(format!("unknown centrality kind {other:?}"))),
        }
    }
}

impl fmt::Display for CentralityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Degree => "degree",
            Self::Betweenness => "betw",
            Self::Eigenvector => "eigen",
        })
    }
}

pub fn degree_centrality(graph: &Graph) -> Array1<f64> {
    graph.degrees().into_iter().map(|d| d as f64).collect()
}

/// Brandes' algorithm on the unweighted, undirected graph (each unordered
/// pair counted once).
pub fn betweenness_centrality(graph: &Graph) -> Array1<f64> {
    let n = graph.num_nodes();
    let adjacency: Vec<Vec<usize>> = (0..n).map(|u| graph.neighbors(u)).collect();
    let mut centrality = Array1::<f64>::zeros(n);
    for source in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        sigma[source] = 1.0;
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != source {
                centrality[w] += delta[w];
            }
        }
    }
    centrality / 2.0
}

/// Leading eigenvector of `A + I` by power iteration, unit L2 norm.
///
/// The identity shift keeps the iteration from oscillating on bipartite
/// graphs without changing the eigenvectors.
pub fn eigenvector_centrality(graph: &Graph) -> Result<Array1<f64>> {
    let n = graph.num_nodes();
    let shifted = graph.adjacency() + &ndarray::Array2::<f64>::eye(n);
    let mut v = Array1::<f64>::from_elem(n, 1.0 / (n as f64).sqrt());
    for _ in 0..EIGEN_MAX_ITERS {
        let next = shifted.dot(&v);
        let norm = next.dot(&next).sqrt();
        let next = next / norm;
        let change = (&next - &v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v = next;
        if change < EIGEN_TOL {
            return Ok(v);
        }
    }
    Err(Error::numerical(format!(
        "power iteration did not converge in {EIGEN_MAX_ITERS} iterations"
    )))
}

pub fn centrality(graph: &Graph, kind: CentralityKind) -> Result<Array1<f64>> {
    match kind {
        CentralityKind::Degree => Ok(degree_centrality(graph)),
        CentralityKind::Betweenness => Ok(betweenness_centrality(graph)),
        CentralityKind::Eigenvector => eigenvector_centrality(graph),
    }
}

/// Slots ranked by endpoint-centrality sum, highest first, lower index on ties.
pub fn ranked_slots(scores: &Array1<f64>) -> Vec<(usize, usize)> {
    let n = scores.len();
    let mut slots: Vec<(usize, (usize, usize))> = upper_pairs(n).enumerate().collect();
    slots.sort_by(|(ia, (a0, a1)), (ib, (b0, b1))| {
        let sa = scores[*a0] + scores[*a1];
        let sb = scores[*b0] + scores[*b1];
        sb.total_cmp(&sa).then(ia.cmp(ib))
    });
    slots.into_iter().map(|(_, pair)| pair).collect()
}

/// Flips the `delta` node pairs with the highest centrality sum.
pub fn centrality_attack(graph: &Graph, delta: usize, kind: CentralityKind) -> Result<Graph> {
    let m = slot_count(graph.num_nodes());
    if delta > m {
        return Err(Error::invalid(format!("flip budget {delta} exceeds the {m} candidate slots")));
    }
    if delta == 0 {
        return Ok(graph.clone());
    }
    let scores = centrality(graph, kind)?;
    let mut adjacency = graph.adjacency().clone();
    for (i, j) in ranked_slots(&scores).into_iter().take(delta) {
        let flipped = 1.0 - adjacency[[i, j]];
        adjacency[[i, j]] = flipped;
        adjacency[[j, i]] = flipped;
    }
    graph.with_adjacency(adjacency)
}
