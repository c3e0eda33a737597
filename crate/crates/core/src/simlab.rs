//! Seeded simulation laboratory: ground-truth generation, subject
//! synthesis, recovery scoring, and the two benchmark studies (recovery
//! under noise; runtime scaling).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::baselines::naive_detect;
use crate::diffusion::{diffuse, GammaChoice};
use crate::error::{CoreError, Result};
use crate::graph::{connected_components, is_symmetric, NodeSet, WeightedGraph};
use crate::inference::SubjectSample;
use crate::pipeline::{self, NeuroHotnetParams, TestMethod};
use crate::precision::{glasso, pooled_covariance, siggm_with_diffusion, uniform_penalty, GlassoOptions};
use crate::rng::{rng_for, substream};

const TAG_TRUTH: u64 = 0x54525554; // "TRUT"
const TAG_SUBJECT: u64 = 0x53554242; // "SUBB"
const TAG_TRIAL: u64 = 0x5452_4941;
const TAG_TEST: u64 = 0x54455354;
const TAG_SIZE: u64 = 0x53495a45;

/// Full specification of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of regions.
    pub r: usize,
    /// Edge probability of the ground-truth graph, in (0, 1).
    pub density: f64,
    /// Ground-truth components smaller than this are deleted.
    pub min_component: usize,
    /// Participants per trial.
    pub subjects: usize,
    /// Frames per participant.
    pub frames: usize,
    /// Mean signal level of the synthetic time courses.
    pub signal_mean: f64,
    /// Per-region signal standard deviation (configurable stand-in for
    /// real acquisition statistics).
    pub signal_sd: f64,
    /// Standard deviation of the additive frame noise.
    pub noise_sd: f64,
    /// Monte-Carlo trials.
    pub trials: usize,
    /// Master seed; a fixed seed makes the whole run deterministic.
    pub seed: u64,
    /// Diffusion flow rate.
    pub gamma: GammaChoice,
    /// Influence threshold.
    pub delta: f64,
    /// Sparsity scale of the penalized precision methods.
    pub nu: f64,
    /// Structural weighting of the penalty (0 disables the influence
    /// prior).
    pub eta: f64,
    /// Edge p-value threshold of the correlation-only baseline.
    pub epsilon: f64,
    /// Significance level of the component tests.
    pub alpha: f64,
    /// Permutation replicates per component test.
    pub permutations: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::study1_preset(120)
    }
}

impl SimConfig {
    /// Recovery-study preset: tuning values reported for the 120/300/500
    /// region settings (the sparsity scale drops for the larger graphs).
    pub fn study1_preset(r: usize) -> Self {
        Self {
            r,
            density: 0.3,
            min_component: 8,
            subjects: 308,
            frames: 284,
            signal_mean: 9600.0,
            signal_sd: 400.0,
            noise_sd: 120.0,
            trials: 200,
            seed: 0,
            gamma: GammaChoice::Auto,
            delta: 1.8e-3,
            nu: if r < 300 { 2.5e-4 } else { 1.5e-4 },
            eta: 2.0,
            epsilon: 8e-4,
            alpha: 0.05,
            permutations: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(CoreError::Parameter(format!(
                "density must be in (0, 1), got {}",
                self.density
            )));
        }
        for (name, v) in [
            ("r", self.r),
            ("min_component", self.min_component),
            ("subjects", self.subjects),
            ("frames", self.frames),
            ("trials", self.trials),
        ] {
            if v < 1 {
                return Err(CoreError::Parameter(format!("{name} must be at least 1")));
            }
        }
        if self.frames < 2 {
            return Err(CoreError::Parameter("frames must be at least 2".into()));
        }
        if !(self.signal_sd > 0.0) || self.noise_sd < 0.0 {
            return Err(CoreError::Parameter("signal_sd must be positive, noise_sd nonnegative".into()));
        }
        if self.delta < 0.0 {
            return Err(CoreError::Parameter("delta must be nonnegative".into()));
        }
        if !(self.nu > 0.0) || self.eta < 0.0 {
            return Err(CoreError::Parameter("nu must be positive, eta nonnegative".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(CoreError::Parameter("epsilon must be in (0, 1)".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CoreError::Parameter("alpha must be in (0, 1)".into()));
        }
        if self.permutations < 100 {
            return Err(CoreError::Parameter("permutations must be at least 100".into()));
        }
        Ok(())
    }
}

/// The four estimation pipelines compared by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Neurohotnet,
    SiggmDiffusion,
    Glasso,
    Naive,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Neurohotnet, Method::SiggmDiffusion, Method::Glasso, Method::Naive];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Neurohotnet => "neurohotnet",
            Method::SiggmDiffusion => "siggm-diffusion",
            Method::Glasso => "glasso",
            Method::Naive => "naive",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A truth component paired with the estimate that matched it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedPair {
    pub truth: NodeSet,
    pub estimate: NodeSet,
    pub symmetric_difference: usize,
}

/// Matching of one method's estimates against the truth components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub recovery: f64,
    pub matched: Vec<MatchedPair>,
    pub missed_truth: Vec<NodeSet>,
    pub unmatched_estimates: Vec<NodeSet>,
}

/// One trial's truth and the per-method outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub truth_components: Vec<NodeSet>,
    pub outcomes: Vec<(Method, MatchOutcome)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub recovery_mean: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub recovery_ci_half: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub size: usize,
    pub method: Method,
    pub mean_seconds: f64,
    pub runs: usize,
}

/// Flat plot-ready row: one (size, method, metric) triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatRow {
    pub size: usize,
    pub method: Method,
    pub metric: String,
    pub value: f64,
    pub ci_half: f64,
}

/// Outcome of a study run. Recovery sections are filled by the recovery
/// study, timing sections by the runtime study; the flat table covers
/// both. Timing values are the only non-deterministic content.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub summaries: Vec<MethodSummary>,
    pub trials: Vec<TrialRecord>,
    pub failed_trials: usize,
    pub table: Vec<FlatRow>,
    pub timings: Vec<TimingRow>,
}

/// Random symmetric graph: each edge appears independently with the given
/// probability and carries a Uniform(0, 1) weight; components smaller than
/// `min_component` are then deleted (their nodes become isolated).
pub fn generate_truth(r: usize, density: f64, min_component: usize, seed: u64) -> WeightedGraph {
    let mut rng = rng_for(seed, &[TAG_TRUTH]);
    let mut w = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in (i + 1)..r {
            if rng.gen::<f64>() < density {
                let weight = rng.gen::<f64>();
                w[(i, j)] = weight;
                w[(j, i)] = weight;
            }
        }
    }
    let comps = connected_components(&w, 1).expect("generated matrix is symmetric");
    for comp in comps {
        if comp.len() < min_component {
            for &a in comp.members() {
                for b in 0..r {
                    w[(a, b)] = 0.0;
                    w[(b, a)] = 0.0;
                }
            }
        }
    }
    WeightedGraph::from_weights(w).expect("generated matrix is a valid graph")
}

/// Components of the pruned truth graph (everything that survived pruning).
pub fn truth_components(truth: &WeightedGraph) -> Vec<NodeSet> {
    connected_components(truth.weights(), 1).expect("truth weights are symmetric")
}

/// Nearest correlation matrix by alternating projections with a Dykstra
/// correction: project onto the positive-semidefinite cone and onto the
/// unit-diagonal affine set in turn until the iterates stabilize
/// (Frobenius change below `tol`). The returned matrix has its spectrum
/// floored at 1e-12 and an exactly unit diagonal.
pub fn nearest_correlation(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    let r = a.nrows();
    if a.ncols() != r {
        return Err(CoreError::Structural("input must be square".into()));
    }
    if !is_symmetric(a, crate::graph::SYMMETRY_REL_TOL) {
        return Err(CoreError::Structural("input must be symmetric".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Input("input contains non-finite entries".into()));
    }
    let mut y = a.clone();
    // re-symmetrize exactly so the eigensolver sees clean input
    for j in 0..r {
        for i in (j + 1)..r {
            let v = 0.5 * (y[(i, j)] + y[(j, i)]);
            y[(i, j)] = v;
            y[(j, i)] = v;
        }
    }
    let mut correction = DMatrix::zeros(r, r);
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let rk = &y - &correction;
        let x = psd_projection(&rk, 0.0);
        correction = &x - &rk;
        let mut y_next = x;
        for i in 0..r {
            y_next[(i, i)] = 1.0;
        }
        residual = (&y_next - &y).norm() / y.norm().max(1.0);
        y = y_next;
        if residual < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CoreError::Numerical(format!(
            "nearest-correlation projection did not converge within {max_iter} iterations \
             (residual {residual:.3e})"
        )));
    }
    // Floor the spectrum so downstream factorizations see a PSD matrix,
    // then restore the exactly unit diagonal.
    let mut out = psd_projection(&y, 1e-12);
    let scales: Vec<f64> = (0..r).map(|i| out[(i, i)].sqrt()).collect();
    for j in 0..r {
        for i in 0..r {
            if scales[i] > 0.0 && scales[j] > 0.0 {
                out[(i, j)] /= scales[i] * scales[j];
            }
        }
    }
    for j in 0..r {
        out[(j, j)] = 1.0;
        for i in (j + 1)..r {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Projection onto the symmetric matrices with eigenvalues >= `floor`.
fn psd_projection(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let clipped: DVector<f64> = eig.eigenvalues.map(|l| l.max(floor));
    let scaled = {
        let mut q = eig.eigenvectors.clone();
        for (j, lambda) in clipped.iter().enumerate() {
            q.column_mut(j).scale_mut(*lambda);
        }
        q
    };
    let out = scaled * eig.eigenvectors.transpose();
    // exact symmetry despite the float matmul
    let r = out.nrows();
    let mut sym = out;
    for j in 0..r {
        for i in (j + 1)..r {
            let v = 0.5 * (sym[(i, j)] + sym[(j, i)]);
            sym[(i, j)] = v;
            sym[(j, i)] = v;
        }
    }
    sym
}

/// Synthesizes participant time series from a truth graph: the weights are
/// rescaled by their maximum to a correlation-candidate matrix, projected
/// to the nearest correlation, scaled to a covariance by the per-region
/// signal standard deviations, and sampled `frames` times per subject with
/// independent N(0, noise_sd^2) frame noise added per region. Each
/// subject's Pearson correlation matrix is computed from the noisy
/// signals.
pub fn generate_subjects(truth: &WeightedGraph, cfg: &SimConfig) -> Result<Vec<SubjectSample>> {
    let r = truth.n_nodes();
    let max_w = truth.weights().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut rho = if max_w > 0.0 {
        truth.weights() / max_w
    } else {
        DMatrix::zeros(r, r)
    };
    for i in 0..r {
        rho[(i, i)] = 1.0;
    }
    let correlation = nearest_correlation(&rho, 1e-8, 200)?;
    // Sampling factor A with A A^T = C, from the spectral decomposition.
    let eig = nalgebra::SymmetricEigen::new(correlation);
    let mut factor = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        factor.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
    }

    let samples: Vec<Result<SubjectSample>> = (0..cfg.subjects)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(cfg.seed, &[TAG_SUBJECT, i as u64]);
            let normal = StandardNormal;
            let mut signals = DMatrix::zeros(cfg.frames, r);
            let mut z = DVector::zeros(r);
            for t in 0..cfg.frames {
                for k in 0..r {
                    z[k] = normal.sample(&mut rng);
                }
                let x = &factor * &z;
                for k in 0..r {
                    let noise: f64 = normal.sample(&mut rng);
                    signals[(t, k)] = cfg.signal_mean + cfg.signal_sd * x[k] + cfg.noise_sd * noise;
                }
            }
            SubjectSample::from_signals(format!("sim{i:04}"), signals)
        })
        .collect();
    samples.into_iter().collect()
}

/// Fraction of truth components matched by some estimate within symmetric
/// difference 2, each estimate consumed at most once (greedy matching by
/// smallest difference, ties broken by smallest member index). An empty
/// truth list counts as fully recovered.
pub fn recovery_rate(truth: &[NodeSet], estimated: &[NodeSet]) -> f64 {
    match_components(truth, estimated).recovery
}

/// Full matching record behind [`recovery_rate`].
pub fn match_components(truth: &[NodeSet], estimated: &[NodeSet]) -> MatchOutcome {
    if truth.is_empty() {
        return MatchOutcome {
            recovery: 1.0,
            matched: Vec::new(),
            missed_truth: Vec::new(),
            unmatched_estimates: estimated.to_vec(),
        };
    }
    let mut candidates = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (ei, e) in estimated.iter().enumerate() {
            let d = t.symmetric_difference(e);
            if d <= 2 {
                candidates.push((d, t.min_member().unwrap_or(0), e.min_member().unwrap_or(0), ti, ei));
            }
        }
    }
    candidates.sort();
    let mut truth_used = vec![false; truth.len()];
    let mut est_used = vec![false; estimated.len()];
    let mut matched = Vec::new();
    for (d, _, _, ti, ei) in candidates {
        if !truth_used[ti] && !est_used[ei] {
            truth_used[ti] = true;
            est_used[ei] = true;
            matched.push(MatchedPair {
                truth: truth[ti].clone(),
                estimate: estimated[ei].clone(),
                symmetric_difference: d,
            });
        }
    }
    let missed_truth: Vec<NodeSet> = truth
        .iter()
        .zip(&truth_used)
        .filter(|(_, used)| !**used)
        .map(|(t, _)| t.clone())
        .collect();
    let unmatched_estimates: Vec<NodeSet> = estimated
        .iter()
        .zip(&est_used)
        .filter(|(_, used)| !**used)
        .map(|(e, _)| e.clone())
        .collect();
    MatchOutcome {
        recovery: matched.len() as f64 / truth.len() as f64,
        matched,
        missed_truth,
        unmatched_estimates,
    }
}

fn run_methods_once(
    truth: &WeightedGraph,
    samples: &[SubjectSample],
    cfg: &SimConfig,
    test_seed: u64,
) -> Result<Vec<(Method, Vec<NodeSet>, f64)>> {
    let mut outcomes = Vec::with_capacity(4);

    let start = Instant::now();
    let nh = pipeline::neurohotnet(
        truth,
        samples,
        &NeuroHotnetParams {
            gamma: cfg.gamma,
            delta: cfg.delta,
            alpha: cfg.alpha,
            permutations: cfg.permutations,
            seed: test_seed,
            scheme: Default::default(),
            method: TestMethod::Permutation,
        },
    )?;
    let nh_estimates: Vec<NodeSet> = nh
        .results
        .iter()
        .filter(|r| r.selected)
        .map(|r| r.component.clone())
        .collect();
    outcomes.push((Method::Neurohotnet, nh_estimates, start.elapsed().as_secs_f64()));

    let glasso_opts = GlassoOptions::default();
    let start = Instant::now();
    let influence = diffuse(truth, nh.gamma)?;
    let siggm = siggm_with_diffusion(samples, &influence, cfg.nu, cfg.eta, &glasso_opts)?;
    outcomes.push((Method::SiggmDiffusion, siggm.components.clone(), start.elapsed().as_secs_f64()));

    let start = Instant::now();
    let pooled = pooled_covariance(samples)?;
    let plain = glasso(&pooled, &uniform_penalty(truth.n_nodes(), cfg.nu), &glasso_opts)?;
    outcomes.push((Method::Glasso, plain.components.clone(), start.elapsed().as_secs_f64()));

    let start = Instant::now();
    let naive = naive_detect(samples, cfg.epsilon)?;
    outcomes.push((Method::Naive, naive.components, start.elapsed().as_secs_f64()));

    Ok(outcomes)
}

/// Recovery study: for every trial, a fresh truth graph and subject set,
/// all four methods, and symmetric-difference matching against the truth
/// components. Trials run in parallel; each derives its own substreams
/// from `(seed, trial)`, so the outcome is independent of thread count.
/// Failing trials are excluded and counted.
pub fn run_study1(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let trial_results: Vec<Result<TrialRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = substream(cfg.seed, &[TAG_TRIAL, trial as u64]);
            let truth = generate_truth(cfg.r, cfg.density, cfg.min_component, trial_seed);
            let truth_comps = truth_components(&truth);
            let mut trial_cfg = cfg.clone();
            trial_cfg.seed = trial_seed;
            let samples = generate_subjects(&truth, &trial_cfg)?;
            let test_seed = substream(trial_seed, &[TAG_TEST]);
            let methods = run_methods_once(&truth, &samples, cfg, test_seed)?;
            let outcomes = methods
                .into_iter()
                .map(|(m, estimates, _seconds)| (m, match_components(&truth_comps, &estimates)))
                .collect();
            Ok(TrialRecord { trial, truth_components: truth_comps, outcomes })
        })
        .collect();

    let mut trials = Vec::new();
    let mut failed = 0usize;
    for t in trial_results {
        match t {
            Ok(rec) => trials.push(rec),
            Err(e) => {
                log::warn!("trial failed and was excluded: {e}");
                failed += 1;
            }
        }
    }

    let mut summaries = Vec::new();
    let mut table = Vec::new();
    for method in Method::ALL {
        let rates: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.outcomes.iter().filter(|(m, _)| *m == method).map(|(_, o)| o.recovery))
            .collect();
        let n = rates.len();
        let mean = if n > 0 { rates.iter().sum::<f64>() / n as f64 } else { f64::NAN };
        let ci = if n > 1 {
            let var = rates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        summaries.push(MethodSummary { method, recovery_mean: mean, recovery_ci_half: ci, trials: n });
        table.push(FlatRow {
            size: cfg.r,
            method,
            metric: "recovery".into(),
            value: mean,
            ci_half: ci,
        });
    }
    Ok(SimResult {
        config: cfg.clone(),
        summaries,
        trials,
        failed_trials: failed,
        table,
        timings: Vec::new(),
    })
}

/// Runtime study: one truth graph and subject set per size, then the two
/// diffusion-based pipelines timed `repeats` times each. Sizes and repeats
/// run serially so timings do not contend with each other.
pub fn run_study2(sizes: &[usize], repeats: usize, cfg: &SimConfig) -> Result<SimResult> {
    if sizes.is_empty() || repeats == 0 {
        return Err(CoreError::Parameter("need at least one size and one repeat".into()));
    }
    let mut timings = Vec::new();
    let mut table = Vec::new();
    for &size in sizes {
        let size_seed = substream(cfg.seed, &[TAG_SIZE, size as u64]);
        let mut size_cfg = cfg.clone();
        size_cfg.r = size;
        size_cfg.seed = size_seed;
        size_cfg.validate()?;
        let truth = generate_truth(size, size_cfg.density, size_cfg.min_component, size_seed);
        let samples = generate_subjects(&truth, &size_cfg)?;
        let test_seed = substream(size_seed, &[TAG_TEST]);

        let mut nh_total = 0.0;
        let mut siggm_total = 0.0;
        for _rep in 0..repeats {
            let start = Instant::now();
            let nh = pipeline::neurohotnet(
                &truth,
                &samples,
                &NeuroHotnetParams {
                    gamma: size_cfg.gamma,
                    delta: size_cfg.delta,
                    alpha: size_cfg.alpha,
                    permutations: size_cfg.permutations,
                    seed: test_seed,
                    scheme: Default::default(),
                    method: TestMethod::Permutation,
                },
            )?;
            nh_total += start.elapsed().as_secs_f64();

            let start = Instant::now();
            let influence = diffuse(&truth, nh.gamma)?;
            let _ = siggm_with_diffusion(
                &samples,
                &influence,
                size_cfg.nu,
                size_cfg.eta,
                &GlassoOptions::default(),
            )?;
            siggm_total += start.elapsed().as_secs_f64();
        }
        for (method, total) in [(Method::Neurohotnet, nh_total), (Method::SiggmDiffusion, siggm_total)] {
            let mean = total / repeats as f64;
            timings.push(TimingRow { size, method, mean_seconds: mean, runs: repeats });
            table.push(FlatRow { size, method, metric: "runtime".into(), value: mean, ci_half: 0.0 });
        }
    }
    Ok(SimResult {
        config: cfg.clone(),
        summaries: Vec::new(),
        trials: Vec::new(),
        failed_trials: 0,
        table,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_and_empty_density_limits() {
        let g = generate_truth(10, 1.0 - 1e-12, 3, 1);
        let comps = truth_components(&g);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].len(), 10);

        let g = generate_truth(10, 1e-12, 3, 1);
        assert!(truth_components(&g).is_empty());
    }

    #[test]
    fn truth_generation_is_deterministic() {
        let a = generate_truth(30, 0.2, 3, 99);
        let b = generate_truth(30, 0.2, 3, 99);
        assert_eq!(a.weights(), b.weights());
        let c = generate_truth(30, 0.2, 3, 100);
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn pruning_removes_small_components() {
        // moderately sparse graph: some seeds produce small components
        for seed in 0..20 {
            let g = generate_truth(40, 0.05, 5, seed);
            for comp in truth_components(&g) {
                assert!(comp.len() >= 5, "seed {seed} left a component of {}", comp.len());
            }
        }
    }

    #[test]
    fn valid_correlation_is_a_fixed_point() {
        let mut c = DMatrix::identity(4, 4);
        for (a, b, v) in [(0usize, 1usize, 0.5), (0, 2, 0.2), (1, 2, 0.3), (2, 3, -0.4)] {
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
        // c is PD (diagonally dominant-ish); verify first
        assert!(nalgebra::Cholesky::new(c.clone()).is_some());
        let out = nearest_correlation(&c, 1e-8, 200).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((out[(i, j)] - c[(i, j)]).abs() < 1e-10, "({i},{j})");
            }
        }
    }

    #[test]
    fn out_of_range_two_by_two_clips_to_ones() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = 1.2;
        a[(1, 0)] = 1.2;
        let out = nearest_correlation(&a, 1e-10, 500).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out[(i, j)] - 1.0).abs() < 1e-8, "got {:?}", out);
            }
        }
    }

    #[test]
    fn projection_output_is_valid_correlation() {
        let mut rng = rng_for(3, &[7]);
        let a = DMatrix::from_fn(8, 8, |i, j| if i == j { 1.0 } else { 0.0 });
        let mut m = a;
        for i in 0..8 {
            for j in (i + 1)..8 {
                let v: f64 = rng.gen_range(-1.5..1.5);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let out = nearest_correlation(&m, 1e-8, 500).unwrap();
        for i in 0..8 {
            assert_eq!(out[(i, i)], 1.0);
        }
        let eig = nalgebra::SymmetricEigen::new(out.clone());
        assert!(eig.eigenvalues.iter().all(|l| *l >= -1e-10));
    }

    #[test]
    fn recovery_examples() {
        let truth = vec![
            NodeSet::new(vec![0, 1, 2, 3, 4, 5, 6, 7], 20).unwrap(),
            NodeSet::new(vec![10, 11, 12, 13, 14, 15, 16, 17], 20).unwrap(),
        ];
        // exact recovery
        assert_eq!(recovery_rate(&truth, &truth), 1.0);
        // two nodes missing still matches
        let est = vec![
            NodeSet::new(vec![0, 1, 2, 3, 4, 5], 20).unwrap(),
            NodeSet::new(vec![10, 11, 12, 13, 14, 15, 16, 17], 20).unwrap(),
        ];
        assert_eq!(recovery_rate(&truth, &est), 1.0);
        // three nodes off is not a match
        let est = vec![
            NodeSet::new(vec![0, 1, 2, 3, 4], 20).unwrap(),
            NodeSet::new(vec![10, 11, 12, 13, 14, 15, 16, 17], 20).unwrap(),
        ];
        assert_eq!(recovery_rate(&truth, &est), 0.5);
        // an estimate is consumed by at most one truth component
        let shared = vec![NodeSet::new(vec![0, 1, 2, 3, 4, 5, 6, 7], 20).unwrap()];
        let two_truth = vec![truth[0].clone(), truth[0].clone()];
        assert_eq!(recovery_rate(&two_truth, &shared), 0.5);
        // empty truth counts as fully recovered
        assert_eq!(recovery_rate(&[], &est), 1.0);
    }

    #[test]
    fn recovery_is_relabel_invariant() {
        let truth = vec![NodeSet::new(vec![1, 3, 5, 7], 10).unwrap()];
        let est = vec![NodeSet::new(vec![1, 3, 5, 9], 10).unwrap()];
        let rate = recovery_rate(&truth, &est);
        // relabel every node by a fixed permutation
        let perm: Vec<usize> = vec![9, 8, 7, 6, 5, 4, 3, 2, 1, 0];
        let relabel = |s: &NodeSet| {
            NodeSet::new(s.members().iter().map(|&n| perm[n]).collect(), 10).unwrap()
        };
        let truth_p: Vec<NodeSet> = truth.iter().map(relabel).collect();
        let est_p: Vec<NodeSet> = est.iter().map(relabel).collect();
        assert_eq!(rate, recovery_rate(&truth_p, &est_p));
    }
}
