//! Weighted structural graphs: degrees, symmetric normalization, and
//! connected-component extraction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{CoreError, Result};

/// Relative tolerance for symmetry checks on ingest.
pub const SYMMETRY_REL_TOL: f64 = 1e-9;

/// Minimum subnetwork size considered by the detection pipelines; pairs of
/// nodes are a single edge and are never reported as components.
pub const MIN_COMPONENT_SIZE: usize = 3;

pub(crate) fn entries_close(a: f64, b: f64, rel_tol: f64) -> bool {
    (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0)
}

/// Checks symmetry with a scaled tolerance (relative for large entries,
/// absolute near zero).
pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for j in 0..m.ncols() {
        for i in (j + 1)..m.nrows() {
            if !entries_close(m[(i, j)], m[(j, i)], rel_tol) {
                return false;
            }
        }
    }
    true
}

/// A symmetric nonnegative edge-weight matrix over labelled regions.
///
/// Immutable after construction; all accessors borrow.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    labels: Vec<String>,
    weights: DMatrix<f64>,
}

impl WeightedGraph {
    /// Builds a graph after validating symmetry (relative tolerance 1e-9),
    /// nonnegative weights, a zero diagonal, and distinct labels.
    pub fn new(labels: Vec<String>, weights: DMatrix<f64>) -> Result<Self> {
        Self::build(labels, weights, false)
    }

    /// Like [`WeightedGraph::new`] but repairs near-asymmetric input by
    /// replacing the weights with `(A + A^T) / 2` before validation.
    pub fn new_symmetrized(labels: Vec<String>, weights: DMatrix<f64>) -> Result<Self> {
        Self::build(labels, weights, true)
    }

    fn build(labels: Vec<String>, weights: DMatrix<f64>, repair: bool) -> Result<Self> {
        let r = labels.len();
        if weights.nrows() != r || weights.ncols() != r {
            return Err(CoreError::Structural(format!(
                "weight matrix is {}x{} but {} labels were given",
                weights.nrows(),
                weights.ncols(),
                r
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(CoreError::Structural(format!("duplicate label {l:?}")));
            }
        }
        let weights = if repair {
            let half = 0.5 * (&weights + weights.transpose());
            half
        } else {
            if !is_symmetric(&weights, SYMMETRY_REL_TOL) {
                return Err(CoreError::Structural(
                    "weight matrix is not symmetric (use the repair flag to symmetrize)".into(),
                ));
            }
            weights
        };
        for i in 0..r {
            if weights[(i, i)] != 0.0 {
                return Err(CoreError::Structural(format!(
                    "nonzero diagonal weight {} at node {}",
                    weights[(i, i)],
                    i
                )));
            }
            for j in 0..r {
                let w = weights[(i, j)];
                if w.is_nan() {
                    return Err(CoreError::Input(format!("NaN weight at ({i}, {j})")));
                }
                if w < 0.0 {
                    return Err(CoreError::Input(format!("negative weight {w} at ({i}, {j})")));
                }
            }
        }
        // Enforce exact symmetry so downstream solves see bitwise-symmetric input.
        let mut weights = weights;
        for j in 0..r {
            for i in (j + 1)..r {
                let w = weights[(i, j)];
                weights[(j, i)] = w;
            }
        }
        Ok(Self { labels, weights })
    }

    /// Convenience constructor for tests and fixtures: numeric labels `"0"..`.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let labels = (0..weights.nrows()).map(|i| i.to_string()).collect();
        Self::new(labels, weights)
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Row sums of the weight matrix (the diagonal of the degree matrix).
    pub fn weighted_degrees(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.weights.row(i).sum()).collect()
    }

    /// Degree-normalized weights: entry `(a, b)` becomes
    /// `w[a][b] / sqrt(deg(a) * deg(b))`. Rows and columns of isolated
    /// (zero-degree) nodes are left all zero rather than dividing by zero.
    pub fn normalize_symmetric(&self) -> DMatrix<f64> {
        let r = self.n_nodes();
        let deg = self.weighted_degrees();
        let mut out = DMatrix::zeros(r, r);
        for j in 0..r {
            if deg[j] == 0.0 {
                continue;
            }
            for i in 0..r {
                if deg[i] == 0.0 || self.weights[(i, j)] == 0.0 {
                    continue;
                }
                out[(i, j)] = self.weights[(i, j)] / (deg[i] * deg[j]).sqrt();
            }
        }
        out
    }
}

/// A sorted set of node indices into a graph's label order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeSet {
    members: Vec<usize>,
}

impl NodeSet {
    /// Builds a set, sorting and checking for duplicates; `n_nodes` bounds
    /// the valid index range.
    pub fn new(mut members: Vec<usize>, n_nodes: usize) -> Result<Self> {
        members.sort_unstable();
        for w in members.windows(2) {
            if w[0] == w[1] {
                return Err(CoreError::Structural(format!("duplicate node index {}", w[0])));
            }
        }
        if let Some(&last) = members.last() {
            if last >= n_nodes {
                return Err(CoreError::Structural(format!(
                    "node index {last} out of range for {n_nodes} nodes"
                )));
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.binary_search(&node).is_ok()
    }

    /// Smallest member, used for deterministic ordering of reports.
    pub fn min_member(&self) -> Option<usize> {
        self.members.first().copied()
    }

    /// Number of unordered node pairs inside the set.
    pub fn n_pairs(&self) -> usize {
        self.members.len() * self.members.len().saturating_sub(1) / 2
    }

    /// Size of the symmetric difference with another set.
    pub fn symmetric_difference(&self, other: &NodeSet) -> usize {
        let mut i = 0;
        let mut j = 0;
        let mut diff = 0;
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                std::cmp::Ordering::Less => {
                    diff += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    diff += 1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        diff + (self.members.len() - i) + (other.members.len() - j)
    }
}

/// Maximal sets of nodes mutually reachable through nonzero entries of a
/// symmetric adjacency matrix, keeping only sets of at least `min_size`
/// nodes. Components are ordered by their smallest member; isolated nodes
/// never appear.
pub fn connected_components(adjacency: &DMatrix<f64>, min_size: usize) -> Result<Vec<NodeSet>> {
    if min_size < 1 {
        return Err(CoreError::Parameter("min_size must be >= 1".into()));
    }
    if !is_symmetric(adjacency, SYMMETRY_REL_TOL) {
        return Err(CoreError::Structural(
            "component extraction requires a symmetric adjacency matrix".into(),
        ));
    }
    let r = adjacency.nrows();
    let mut seen = vec![false; r];
    let mut out = Vec::new();
    for start in 0..r {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = std::collections::VecDeque::from([start]);
        let mut has_edge = false;
        while let Some(u) = queue.pop_front() {
            for v in 0..r {
                if u != v && adjacency[(u, v)] != 0.0 {
                    has_edge = true;
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
        }
        if has_edge && comp.len() >= min_size {
            out.push(NodeSet::new(comp, r).expect("BFS yields unique in-range indices"));
        }
    }
    // BFS from ascending start nodes already yields components ordered by
    // their smallest member.
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn path3() -> WeightedGraph {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        w[(1, 2)] = 1.0;
        w[(2, 1)] = 1.0;
        WeightedGraph::from_weights(w).unwrap()
    }

    #[test]
    fn degrees_of_unit_path() {
        assert_eq!(path3().weighted_degrees(), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn degrees_of_empty_graph_are_zero() {
        let g = WeightedGraph::from_weights(DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(g.weighted_degrees(), vec![0.0; 4]);
    }

    #[test]
    fn toy_fixture_hub_degree_is_six() {
        let g = fixtures::toy_graph();
        // node "1" of the sketch is index 0 here; it carries six unit edges
        assert_eq!(g.weighted_degrees()[0], 6.0);
    }

    #[test]
    fn normalization_of_single_edge_is_unit() {
        for w in [0.5, 1.0, 123.0] {
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 1)] = w;
            m[(1, 0)] = w;
            let g = WeightedGraph::from_weights(m).unwrap();
            let n = g.normalize_symmetric();
            assert!((n[(0, 1)] - 1.0).abs() < 1e-15);
            assert!((n[(1, 0)] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normalization_of_regular_graph_is_one_over_d() {
        // 4-cycle with uniform weight w: every nonzero entry becomes 1/2.
        let w = 3.7;
        let mut m = DMatrix::zeros(4, 4);
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            m[(a, b)] = w;
            m[(b, a)] = w;
        }
        let g = WeightedGraph::from_weights(m).unwrap();
        let n = g.normalize_symmetric();
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            assert!((n[(a, b)] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_node_row_stays_zero() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 2.0;
        m[(1, 0)] = 2.0;
        let g = WeightedGraph::from_weights(m).unwrap();
        let n = g.normalize_symmetric();
        for i in 0..3 {
            assert_eq!(n[(2, i)], 0.0);
            assert_eq!(n[(i, 2)], 0.0);
        }
    }

    #[test]
    fn asymmetric_weights_rejected_without_repair() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = 1.0;
        assert!(WeightedGraph::from_weights(m.clone()).is_err());
        let g = WeightedGraph::new_symmetrized(vec!["a".into(), "b".into()], m).unwrap();
        assert_eq!(g.weights()[(0, 1)], 0.5);
        assert_eq!(g.weights()[(1, 0)], 0.5);
    }

    #[test]
    fn negative_and_nan_weights_rejected() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = -1.0;
        m[(1, 0)] = -1.0;
        assert!(matches!(WeightedGraph::from_weights(m), Err(CoreError::Input(_))));
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        m[(1, 0)] = f64::NAN;
        assert!(WeightedGraph::from_weights(m).is_err());
    }

    #[test]
    fn duplicate_labels_rejected() {
        let m = DMatrix::zeros(2, 2);
        assert!(WeightedGraph::new(vec!["x".into(), "x".into()], m).is_err());
    }

    #[test]
    fn two_triangles_found_at_min_size_three() {
        let mut m = DMatrix::zeros(6, 6);
        for (a, b) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            m[(a, b)] = 1.0;
            m[(b, a)] = 1.0;
        }
        let comps = connected_components(&m, 3).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].members(), &[0, 1, 2]);
        assert_eq!(comps[1].members(), &[3, 4, 5]);
    }

    #[test]
    fn single_edge_pair_discarded_at_min_size_three() {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        let comps = connected_components(&m, 3).unwrap();
        assert!(comps.is_empty());
    }

    #[test]
    fn toy_fixture_is_one_component_of_ten() {
        let g = fixtures::toy_graph();
        let comps = connected_components(g.weights(), 3).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].len(), 10);
    }

    #[test]
    fn asymmetric_adjacency_rejected() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        assert!(connected_components(&m, 1).is_err());
    }

    #[test]
    fn symmetric_difference_counts_both_sides() {
        let a = NodeSet::new(vec![0, 1, 2, 3], 10).unwrap();
        let b = NodeSet::new(vec![2, 3, 4], 10).unwrap();
        assert_eq!(a.symmetric_difference(&b), 3);
        assert_eq!(b.symmetric_difference(&a), 3);
        assert_eq!(a.symmetric_difference(&a), 0);
    }
}
