//! Candidate subnetwork detection by influence thresholding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diffusion::InfluenceGraph;
use crate::error::Result;
use crate::graph::{connected_components, NodeSet, MIN_COMPONENT_SIZE};

/// Components surviving a threshold `delta`, each of at least three nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSet {
    pub delta: f64,
    pub components: Vec<NodeSet>,
    pub source_labels: Vec<String>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Region names of one component, in index order.
    pub fn region_names(&self, component: &NodeSet) -> Vec<String> {
        component.members().iter().map(|&i| self.source_labels[i].clone()).collect()
    }
}

/// Zeroes every entry strictly below `delta` (ties at `delta` are kept)
/// and the whole diagonal.
pub fn threshold(g: &InfluenceGraph, delta: f64) -> DMatrix<f64> {
    let r = g.n_nodes();
    let mut out = g.influence().clone();
    for j in 0..r {
        out[(j, j)] = 0.0;
        for i in 0..r {
            if i != j && out[(i, j)] < delta {
                out[(i, j)] = 0.0;
            }
        }
    }
    out
}

/// Thresholds the influence graph and extracts components of at least
/// three nodes, ordered by smallest member.
pub fn candidates(g: &InfluenceGraph, delta: f64) -> Result<CandidateSet> {
    let adjacency = threshold(g, delta);
    let components = connected_components(&adjacency, MIN_COMPONENT_SIZE)?;
    Ok(CandidateSet { delta, components, source_labels: g.labels().to_vec() })
}

/// Component-size profile across a grid of thresholds, for choosing a
/// `delta` that yields subnetworks of the desired granularity.
pub fn component_size_profile(g: &InfluenceGraph, grid: &[f64]) -> Result<Vec<(f64, Vec<usize>)>> {
    grid.iter()
        .map(|&delta| {
            let sizes = candidates(g, delta)?.components.iter().map(NodeSet::len).collect();
            Ok((delta, sizes))
        })
        .collect()
}
