use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::{upper_pairs, Graph};
use crate::rng::rng_from;

/// Held-out links for link prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSplit {
    /// Original graph with the test positives removed.
    pub train_graph: Graph,
    /// Removed edges, `(u, v)` with `u < v`.
    pub test_positives: Vec<(usize, usize)>,
    /// Non-edges of the original graph, as many as the positives.
    pub test_negatives: Vec<(usize, usize)>,
    /// Further non-edges (disjoint from the test negatives) for fitting the
    /// probe, one per training edge when enough exist.
    pub train_negatives: Vec<(usize, usize)>,
}

/// Removes `floor(fraction |E|)` uniformly chosen edges and samples as many
/// non-edges; deterministic per seed.
pub fn link_split(graph: &Graph, fraction: f64, seed: u64) -> Result<LinkSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("fraction must be in (0, 1), got {fraction}")));
    }
    let mut rng = rng_from(seed);
    let mut edges = graph.edges();
    let removed = (fraction * edges.len() as f64 + 1e-9).floor() as usize;
    if removed == 0 {
        return Err(Error::invalid(format!(
            "graph with {} edges is too small to hold out a {fraction} fraction",
            edges.len()
        )));
    }
    let mut non_edges: Vec<(usize, usize)> = upper_pairs(graph.num_nodes())
        .filter(|&(i, j)| !graph.has_edge(i, j))
        .collect();
    if non_edges.len() < removed {
        return Err(Error::invalid("not enough non-edges to sample test negatives"));
    }

    edges.shuffle(&mut rng);
    non_edges.shuffle(&mut rng);
    let mut test_positives = edges[..removed].to_vec();
    test_positives.sort_unstable();
    let mut test_negatives = non_edges[..removed].to_vec();
    test_negatives.sort_unstable();
    let kept = edges.len() - removed;
    let mut train_negatives = non_edges[removed..(removed + kept).min(non_edges.len())].to_vec();
    train_negatives.sort_unstable();
    if train_negatives.is_empty() {
        return Err(Error::invalid("no non-edges left to train the link probe"));
    }

    let mut adjacency = graph.adjacency().clone();
    for &(u, v) in &test_positives {
        adjacency[[u, v]] = 0.0;
        adjacency[[v, u]] = 0.0;
    }
    Ok(LinkSplit {
        train_graph: graph.with_adjacency(adjacency)?,
        test_positives,
        test_negatives,
        train_negatives,
    })
}
