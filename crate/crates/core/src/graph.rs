//! Dense graph storage, edge-flip slots and the normalized propagation operator.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// An undirected, unweighted attributed graph `(A, X)`.
///
/// The stored adjacency never contains self-loops; they are added only inside
/// [`normalize_adjacency`].
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<f64>,
    attributes: Array2<f64>,
}

impl Graph {
    pub fn new(adjacency: Array2<f64>, attributes: Array2<f64>) -> Result<Self> {
        check_adjacency(&adjacency)?;
        if attributes.nrows() != adjacency.nrows() {
            return Err(Error::shape(format!(
                "attributes have {} rows for {} nodes",
                attributes.nrows(),
                adjacency.nrows()
            )));
        }
        if attributes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("attributes contain non-finite values"));
        }
        Ok(Self {
            adjacency,
            attributes,
        })
    }

    /// Builds a graph from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], attributes: Array2<f64>) -> Result<Self> {
        let mut adjacency = Array2::zeros((n, n));
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::InvalidAdjacency(format!("self-loop at node {u}")));
            }
            adjacency[[u, v]] = 1.0;
            adjacency[[v, u]] = 1.0;
        }
        Self::new(adjacency, attributes)
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn attributes(&self) -> &Array2<f64> {
        &self.attributes
    }

    pub fn num_edges(&self) -> usize {
        upper_pairs(self.num_nodes())
            .filter(|&(i, j)| self.adjacency[[i, j]] != 0.0)
            .count()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        upper_pairs(self.num_nodes())
            .filter(|&(i, j)| self.adjacency[[i, j]] != 0.0)
            .collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[[u, v]] != 0.0
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .collect()
    }

    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        self.adjacency
            .row(u)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Same topology, new attribute matrix.
    pub fn with_attributes(&self, attributes: Array2<f64>) -> Result<Self> {
        Self::new(self.adjacency.clone(), attributes)
    }

    /// Same attributes, new 0/1 adjacency.
    pub fn with_adjacency(&self, adjacency: Array2<f64>) -> Result<Self> {
        Self::new(adjacency, self.attributes.clone())
    }

    /// Graph with node `i` relabeled as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::shape("permutation length differs from node count"));
        }
        let mut adjacency = Array2::zeros((n, n));
        let mut attributes = Array2::zeros(self.attributes.raw_dim());
        for i in 0..n {
            attributes.row_mut(perm[i]).assign(&self.attributes.row(i));
            for j in 0..n {
                adjacency[[perm[i], perm[j]]] = self.adjacency[[i, j]];
            }
        }
        Self::new(adjacency, attributes)
    }
}

/// Validates a 0/1 symmetric adjacency with an empty diagonal.
pub fn check_adjacency(adjacency: &Array2<f64>) -> Result<()> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(Error::shape(format!(
            "adjacency is {}x{}",
            adjacency.nrows(),
            adjacency.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidAdjacency("graph has no nodes".into()));
    }
    for i in 0..n {
        if adjacency[[i, i]] != 0.0 {
            return Err(Error::InvalidAdjacency(format!("self-loop at node {i}")));
        }
        for j in (i + 1)..n {
            let v = adjacency[[i, j]];
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidAdjacency(format!("entry ({i}, {j}) = {v} is not 0/1")));
            }
            if adjacency[[j, i]] != v {
                return Err(Error::NotSymmetric(i, j));
            }
        }
    }
    Ok(())
}

/// Number of candidate flip slots, `n(n-1)/2`.
pub fn slot_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Upper-triangle pairs `(i, j)`, `i < j`, in row-major slot order.
pub fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

/// Row-major slot index of the pair `(i, j)` with `i < j`.
pub fn slot_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Number of upper-triangle positions where two adjacencies differ.
pub fn flip_distance(a: &Array2<f64>, a_prime: &Array2<f64>) -> Result<usize> {
    if a.dim() != a_prime.dim() || a.nrows() != a.ncols() {
        return Err(Error::shape(format!(
            "cannot compare {:?} with {:?}",
            a.dim(),
            a_prime.dim()
        )));
    }
    Ok(upper_pairs(a.nrows())
        .filter(|&(i, j)| a[[i, j]] != a_prime[[i, j]])
        .count())
}

/// Convex relaxation of an edge-flip perturbation: one value in `[0, 1]` per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedAdjacency {
    pub base: Array2<f64>,
    pub perturb: Array1<f64>,
    /// Maximum number of flips, `delta`.
    pub budget: usize,
}

impl RelaxedAdjacency {
    /// The identity perturbation (`p = 0`).
    pub fn zero(base: &Array2<f64>, budget: usize) -> Self {
        let m = slot_count(base.nrows());
        Self {
            base: base.clone(),
            perturb: Array1::zeros(m),
            budget,
        }
    }

    pub fn num_slots(&self) -> usize {
        self.perturb.len()
    }

    /// Real-valued adjacency `a + (1 - 2a) * p`, expanded symmetrically.
    pub fn dense(&self) -> Array2<f64> {
        apply_slots(&self.base, self.perturb.as_slice().expect("contiguous"))
    }

    /// Binary adjacency for a 0/1 flip sample.
    pub fn materialize(&self, sample: &[u8]) -> Result<Array2<f64>> {
        materialize(self, sample)
    }
}

fn apply_slots(base: &Array2<f64>, values: &[f64]) -> Array2<f64> {
    let n = base.nrows();
    let mut out = base.clone();
    for (k, (i, j)) in upper_pairs(n).enumerate() {
        let p = values[k];
        if p != 0.0 {
            let a = base[[i, j]];
            let v = a + (1.0 - 2.0 * a) * p;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Applies a binary flip sample to the relaxed adjacency's base graph.
pub fn materialize(relaxed: &RelaxedAdjacency, sample: &[u8]) -> Result<Array2<f64>> {
    if sample.len() != relaxed.num_slots() {
        return Err(Error::shape(format!(
            "sample has {} slots, expected {}",
            sample.len(),
            relaxed.num_slots()
        )));
    }
    if let Some(&bad) = sample.iter().find(|&&s| s > 1) {
        return Err(Error::invalid(format!("sample entry {bad} is not 0/1")));
    }
    let used = sample.iter().filter(|&&s| s == 1).count();
    if used > relaxed.budget {
        return Err(Error::BudgetViolation {
            used,
            budget: relaxed.budget,
        });
    }
    let values: Vec<f64> = sample.iter().map(|&s| f64::from(s)).collect();
    Ok(apply_slots(&relaxed.base, &values))
}

/// `D^{-1/2} (A + I) D^{-1/2}` for a (possibly relaxed) symmetric adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPropagator {
    pub matrix: Array2<f64>,
    /// `d^{-1/2}` where `d` are the degrees of `A + I`.
    pub inv_sqrt_degree: Array1<f64>,
}

impl NormalizedPropagator {
    /// Normalizes a real-valued symmetric adjacency with nonnegative entries.
    /// Used for the relaxed adjacency during topology attacks.
    pub fn from_weighted(adjacency: &Array2<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n || n == 0 {
            return Err(Error::shape(format!("adjacency is {:?}", adjacency.dim())));
        }
        let mut degree = Array1::zeros(n);
        for i in 0..n {
            let d = 1.0 + adjacency.row(i).sum();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::numerical(format!("degree {d} at node {i}")));
            }
            degree[i] = d;
        }
        let mut matrix = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let a_hat = adjacency[[i, j]] + if i == j { 1.0 } else { 0.0 };
                matrix[[i, j]] = a_hat / (degree[i] * degree[j]).sqrt();
            }
        }
        let inv_sqrt_degree = degree.mapv(|d: f64| 1.0 / d.sqrt());
        Ok(Self {
            matrix,
            inv_sqrt_degree,
        })
    }
}

/// The encoder's propagation operator for a 0/1 adjacency.
pub fn normalize_adjacency(adjacency: &Array2<f64>) -> Result<NormalizedPropagator> {
    check_adjacency(adjacency)?;
    NormalizedPropagator::from_weighted(adjacency)
}
