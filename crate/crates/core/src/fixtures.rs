//! Small bundled graphs used by tests, documentation, and the demo fixtures.

use nalgebra::DMatrix;

use crate::graph::WeightedGraph;

/// Ten-node toy graph: a hub (node 0) with six unit edges, one of which is
/// the only edge of a leaf (node 9); a doubled edge 1-2; a triangle 4-5-6
/// of doubled edges; and a short spur 7-8.
///
/// Illustrates how diffusion down-weights the hub's many connections while
/// promoting its tie to the leaf and the ties inside the triangle.
pub fn toy_graph() -> WeightedGraph {
    let edges: &[(usize, usize, f64)] = &[
        (0, 1, 1.0),
        (0, 2, 1.0),
        (0, 3, 1.0),
        (0, 4, 1.0),
        (0, 7, 1.0),
        (0, 9, 1.0),
        (1, 2, 2.0),
        (4, 5, 2.0),
        (5, 6, 2.0),
        (4, 6, 2.0),
        (7, 8, 1.0),
    ];
    let mut w = DMatrix::zeros(10, 10);
    for &(a, b, v) in edges {
        w[(a, b)] = v;
        w[(b, a)] = v;
    }
    let labels = (1..=10).map(|i| format!("R{i:02}")).collect();
    WeightedGraph::new(labels, w).expect("toy graph is valid")
}

/// Unit-weight path graph on `n` nodes.
pub fn path_graph(n: usize) -> WeightedGraph {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        w[(i, i + 1)] = 1.0;
        w[(i + 1, i)] = 1.0;
    }
    WeightedGraph::from_weights(w).expect("path graph is valid")
}

/// Two disjoint cliques of sizes `a` and `b`, unit weights.
pub fn two_cliques(a: usize, b: usize) -> WeightedGraph {
    let n = a + b;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..a {
        for j in (i + 1)..a {
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
    }
    for i in a..n {
        for j in (i + 1)..n {
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
    }
    WeightedGraph::from_weights(w).expect("clique pair is valid")
}
