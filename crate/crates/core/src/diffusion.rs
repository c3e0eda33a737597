//! Equilibrium heat-diffusion influence graphs.
//!
//! A unit heat source at node `r` diffusing over the degree-normalized
//! graph with restart rate `gamma` reaches the equilibrium
//! `f^r = (L + gamma I)^{-1} b^r`, where `L` is the Laplacian of the
//! normalized weights. Solving for all sources at once and renormalizing
//! each row to a probability scale yields the influence matrix: entry
//! `(a, b)` is the symmetrized share of `a`'s equilibrium heat that sits
//! on `b`. Larger `gamma` localizes influence around each source; smaller
//! `gamma` lets it spread through the component.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::graph::WeightedGraph;

/// Symmetric matrix of pairwise diffusion influences for one graph and one
/// flow-rate parameter.
#[derive(Debug, Clone)]
pub struct InfluenceGraph {
    labels: Vec<String>,
    influence: DMatrix<f64>,
    gamma: f64,
}

impl InfluenceGraph {
    /// Wraps a precomputed influence matrix (used by file ingest); checks
    /// shape, symmetry, and nonnegativity.
    pub fn from_parts(labels: Vec<String>, influence: DMatrix<f64>, gamma: f64) -> Result<Self> {
        if influence.nrows() != labels.len() || influence.ncols() != labels.len() {
            return Err(CoreError::Structural(format!(
                "influence matrix is {}x{} but {} labels were given",
                influence.nrows(),
                influence.ncols(),
                labels.len()
            )));
        }
        if !crate::graph::is_symmetric(&influence, crate::graph::SYMMETRY_REL_TOL) {
            return Err(CoreError::Structural("influence matrix is not symmetric".into()));
        }
        if influence.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(CoreError::Input("influence entries must be nonnegative".into()));
        }
        Ok(Self { labels, influence, gamma })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn influence(&self) -> &DMatrix<f64> {
        &self.influence
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }
}

/// Computes the influence graph for flow rate `gamma`.
///
/// Steps: degree-normalize the weights; form `A = -M' + D' + gamma I`
/// with `D'` the diagonal of row sums of `M'`; invert `A` through its
/// Cholesky factorization, solving column by column; renormalize each row
/// of `f = (A^{-1})^T` by its sum and average with the transpose.
///
/// Isolated nodes get all-zero influence rows and columns (their row sum
/// is zero, so the 0/0 is resolved by convention). Nodes in different
/// structural components have exactly zero influence on each other: the
/// zero blocks of `A` survive factorization and substitution exactly.
pub fn diffuse(g: &WeightedGraph, gamma: f64) -> Result<InfluenceGraph> {
    if !(gamma > 0.0) {
        return Err(CoreError::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    let r = g.n_nodes();
    let normalized = g.normalize_symmetric();
    let mut a = -normalized;
    for i in 0..r {
        let row_sum = -a.row(i).sum(); // row sum of M'
        a[(i, i)] = row_sum + gamma;
    }
    let chol = nalgebra::Cholesky::new(a).ok_or_else(|| {
        CoreError::Numerical(format!(
            "Cholesky factorization of the regularized Laplacian failed (R = {r}, gamma = {gamma}); \
             the matrix should be positive definite for gamma > 0"
        ))
    })?;
    let inverse = chol.solve(&DMatrix::identity(r, r));
    let f = inverse.transpose();

    let degrees = g.weighted_degrees();
    let row_sums: Vec<f64> = (0..r).map(|i| f.row(i).sum()).collect();
    let mut influence = DMatrix::zeros(r, r);
    for a_idx in 0..r {
        if degrees[a_idx] == 0.0 {
            continue;
        }
        for b_idx in a_idx..r {
            if degrees[b_idx] == 0.0 {
                continue;
            }
            let value = 0.5 * (f[(a_idx, b_idx)] / row_sums[a_idx] + f[(b_idx, a_idx)] / row_sums[b_idx]);
            influence[(a_idx, b_idx)] = value;
            influence[(b_idx, a_idx)] = value;
        }
    }
    Ok(InfluenceGraph { labels: g.labels().to_vec(), influence, gamma })
}

/// Flow-rate parameter: a fixed value or the data-driven default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    /// Use [`suggest_gamma`] on the structural graph.
    Auto,
    Fixed(f64),
}

impl GammaChoice {
    pub fn resolve(&self, g: &WeightedGraph) -> Result<f64> {
        match self {
            GammaChoice::Auto => suggest_gamma(g),
            GammaChoice::Fixed(v) => {
                if *v > 0.0 {
                    Ok(*v)
                } else {
                    Err(CoreError::Parameter(format!("gamma must be positive, got {v}")))
                }
            }
        }
    }
}

impl std::fmt::Display for GammaChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaChoice::Auto => write!(f, "auto"),
            GammaChoice::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for GammaChoice {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GammaChoice::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| CoreError::Parameter(format!("gamma must be a number or \"auto\", got {s:?}")))?;
        Ok(GammaChoice::Fixed(v))
    }
}

impl serde::Serialize for GammaChoice {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GammaChoice::Auto => serializer.serialize_str("auto"),
            GammaChoice::Fixed(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> serde::Deserialize<'de> for GammaChoice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(GammaChoice::Fixed(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Default flow rate: the mean weighted degree over non-isolated nodes.
pub fn suggest_gamma(g: &WeightedGraph) -> Result<f64> {
    let degrees = g.weighted_degrees();
    let nonzero: Vec<f64> = degrees.into_iter().filter(|d| *d > 0.0).collect();
    if nonzero.is_empty() {
        return Err(CoreError::Parameter(
            "cannot suggest gamma for a graph without edges".into(),
        ));
    }
    Ok(nonzero.iter().sum::<f64>() / nonzero.len() as f64)
}
