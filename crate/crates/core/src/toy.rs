//! Seeded planted-partition graphs with Gaussian attributes, used by tests,
//! fixtures and benchmarks.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPartition {
    pub nodes: usize,
    pub communities: usize,
    pub attributes: usize,
    /// Edge probability inside a community.
    pub p_in: f64,
    /// Edge probability across communities.
    pub p_out: f64,
    /// Community `k` has mean `+mean_shift` on coordinates `j` with
    /// `j % communities == k` and `-mean_shift` elsewhere.
    pub mean_shift: f64,
    pub sigma: f64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        Self {
            nodes: 60,
            communities: 2,
            attributes: 8,
            p_in: 0.2,
            p_out: 0.02,
            mean_shift: 0.5,
            sigma: 1.0,
        }
    }
}

impl PlantedPartition {
    /// Node `i` belongs to community `i % communities`.
    pub fn generate(&self, seed: u64) -> Result<(Graph, Vec<usize>)> {
        if self.communities == 0 || self.nodes < self.communities.max(2) || self.attributes == 0 {
            return Err(Error::invalid(
                "need at least one community, one attribute and two nodes per graph",
            ));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return Err(Error::invalid("edge probabilities must lie in [0, 1]"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        let noise = Normal::new(0.0, self.sigma)
            .map_err(|e| Error::invalid(format!("bad sigma {}: {e}", self.sigma)))?;
        let labels: Vec<usize> = (0..self.nodes).map(|i| i % self.communities).collect();

        let mut rng = rng_for(seed, "toy:edges");
        let mut edges = Vec::new();
        for i in 0..self.nodes {
            for j in (i + 1)..self.nodes {
                let p = if labels[i] == labels[j] { self.p_in } else { self.p_out };
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let mut rng = rng_for(seed, "toy:attributes");
        let x = Array2::from_shape_fn((self.nodes, self.attributes), |(i, j)| {
            let sign = if j % self.communities == labels[i] { 1.0 } else { -1.0 };
            sign * self.mean_shift + noise.sample(&mut rng)
        });
        Ok((Graph::from_edges(self.nodes, &edges, x)?, labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_assortative() {
        let spec = PlantedPartition::default();
        let (g, labels) = spec.generate(3).unwrap();
        assert_eq!((g.clone(), labels.clone()), spec.generate(3).unwrap());
        let inside = g.edges().iter().filter(|(u, v)| labels[*u] == labels[*v]).count();
        assert!(inside * 2 > g.num_edges());
    }

    #[test]
    fn four_communities_have_distinct_means() {
        let spec = PlantedPartition { communities: 4, nodes: 400, sigma: 0.1, ..Default::default() };
        let (g, labels) = spec.generate(1).unwrap();
        assert_eq!(labels[5], 1);
        // node 5 is in community 1: positive on coordinates 1 and 5 only
        let row = g.attributes().row(5);
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v > 0.0, j % 4 == 1, "coordinate {j}: {v}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = PlantedPartition { sigma: -1.0, ..Default::default() };
        assert!(bad.generate(0).is_err());
        let bad = PlantedPartition { p_in: 1.5, ..Default::default() };
        assert!(bad.generate(0).is_err());
        let bad = PlantedPartition { communities: 0, ..Default::default() };
        assert!(bad.generate(0).is_err());
    }
}
