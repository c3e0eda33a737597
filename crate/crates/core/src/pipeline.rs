//! End-to-end estimation pipelines composing the library modules.

use serde::{Deserialize, Serialize};

use crate::detect::{candidates, CandidateSet};
use crate::diffusion::{diffuse, GammaChoice};
use crate::error::Result;
use crate::graph::{NodeSet, WeightedGraph};
use crate::inference::{
    permutation_test_with_scheme, select, ttest_variant, NullScheme, SubjectSample, TestResult,
};

/// Which component test backs the diffusion pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Permutation,
    Ttest,
}

impl Default for TestMethod {
    fn default() -> Self {
        TestMethod::Permutation
    }
}

/// Parameters of the diffusion detection pipeline.
#[derive(Debug, Clone)]
pub struct NeuroHotnetParams {
    pub gamma: GammaChoice,
    pub delta: f64,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
    pub scheme: NullScheme,
    pub method: TestMethod,
}

/// Result of the diffusion detection pipeline: the resolved flow rate, the
/// structural candidates, and one test result per candidate (selection
/// flags set).
#[derive(Debug, Clone)]
pub struct NeuroHotnetOutcome {
    pub gamma: f64,
    pub candidates: CandidateSet,
    pub results: Vec<TestResult>,
}

impl NeuroHotnetOutcome {
    pub fn selected_components(&self) -> Vec<NodeSet> {
        self.results.iter().filter(|r| r.selected).map(|r| r.component.clone()).collect()
    }
}

/// Structure-first detection: diffuse the structural graph, threshold the
/// influences, and test each surviving component against the functional
/// data. Candidates come from structural data alone, so the functional
/// tests stay valid.
pub fn neurohotnet(
    sc: &WeightedGraph,
    samples: &[SubjectSample],
    params: &NeuroHotnetParams,
) -> Result<NeuroHotnetOutcome> {
    let gamma = params.gamma.resolve(sc)?;
    let influence = diffuse(sc, gamma)?;
    let cands = candidates(&influence, params.delta)?;
    let mut results = Vec::with_capacity(cands.len());
    for comp in &cands.components {
        let result = match params.method {
            TestMethod::Permutation => permutation_test_with_scheme(
                samples,
                comp,
                params.permutations,
                params.seed,
                params.scheme,
            )?,
            TestMethod::Ttest => ttest_variant(samples, comp, params.permutations, params.seed)?,
        };
        results.push(result);
    }
    let results = select(results, params.alpha)?;
    Ok(NeuroHotnetOutcome { gamma, candidates: cands, results })
}
