//! Combined permutation testing of candidate subnetworks against
//! multi-subject functional correlation data.
//!
//! Candidates come from structural data only; this module tests them with
//! functional data only, which keeps the selection and inference steps
//! independent. The test statistic is the mean Fisher z-score over all
//! subjects and all node pairs inside a component; its null distribution
//! comes from random node relabelings applied independently to each
//! subject's correlation matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CoreError, Result};
use crate::graph::NodeSet;
use crate::rng::{random_permutation, rng_for};

/// Correlations are clamped to this magnitude before the z-transform so
/// perfectly correlated pairs stay finite.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-7;

/// Smallest p-value reported by the t-based path (the permutation path is
/// bounded below by `1/(B+1)` already).
const MIN_P: f64 = 1e-300;

/// Tolerance for counting a permutation replicate as matching the observed
/// statistic: replicates within one part in 1e12 count as exceedances, so
/// relabel-invariant statistics (for example a component covering every
/// node) give p = 1 instead of depending on float summation order.
const TIE_TOL: f64 = 1e-12;

/// One participant's data: an optional time-series matrix (frames by
/// regions) and the region-by-region Pearson correlation matrix.
#[derive(Debug, Clone)]
pub struct SubjectSample {
    subject_id: String,
    signals: Option<DMatrix<f64>>,
    correlations: DMatrix<f64>,
}

impl SubjectSample {
    /// Builds a sample from a frames-by-regions signal matrix, computing
    /// the Pearson correlations of its columns.
    pub fn from_signals(subject_id: impl Into<String>, signals: DMatrix<f64>) -> Result<Self> {
        let t = signals.nrows();
        let r = signals.ncols();
        if t < 2 {
            return Err(CoreError::Structural(format!(
                "need at least 2 frames to correlate, got {t}"
            )));
        }
        if signals.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Input("signals contain non-finite values".into()));
        }
        let correlations = pearson_correlations(&signals);
        debug_assert_eq!(correlations.nrows(), r);
        Ok(Self { subject_id: subject_id.into(), signals: Some(signals), correlations })
    }

    /// Wraps a precomputed correlation matrix, validating symmetry, a unit
    /// diagonal, and the [-1, 1] range.
    pub fn from_correlations(
        subject_id: impl Into<String>,
        correlations: DMatrix<f64>,
    ) -> Result<Self> {
        let r = correlations.nrows();
        if correlations.ncols() != r {
            return Err(CoreError::Structural("correlation matrix must be square".into()));
        }
        if !crate::graph::is_symmetric(&correlations, crate::graph::SYMMETRY_REL_TOL) {
            return Err(CoreError::Structural("correlation matrix is not symmetric".into()));
        }
        let mut c = correlations;
        for j in 0..r {
            if (c[(j, j)] - 1.0).abs() > 1e-6 {
                return Err(CoreError::Input(format!(
                    "diagonal entry {} at region {j} is not 1",
                    c[(j, j)]
                )));
            }
            c[(j, j)] = 1.0;
            for i in 0..r {
                let v = c[(i, j)];
                if v.is_nan() {
                    return Err(CoreError::Input(format!("NaN correlation at ({i}, {j})")));
                }
                if v.abs() > 1.0 + 1e-9 {
                    return Err(CoreError::Input(format!(
                        "correlation {v} at ({i}, {j}) outside [-1, 1]"
                    )));
                }
                c[(i, j)] = v.clamp(-1.0, 1.0);
            }
        }
        for j in 0..r {
            for i in (j + 1)..r {
                let v = c[(i, j)];
                c[(j, i)] = v;
            }
        }
        Ok(Self { subject_id: subject_id.into(), signals: None, correlations: c })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn n_regions(&self) -> usize {
        self.correlations.nrows()
    }

    pub fn correlations(&self) -> &DMatrix<f64> {
        &self.correlations
    }

    pub fn signals(&self) -> Option<&DMatrix<f64>> {
        self.signals.as_ref()
    }
}

/// Pearson correlations of the columns of a frames-by-regions matrix.
/// Zero-variance columns get zero correlations with everything else.
pub fn pearson_correlations(signals: &DMatrix<f64>) -> DMatrix<f64> {
    let t = signals.nrows();
    let r = signals.ncols();
    let mut z = signals.clone();
    let mut constant = vec![false; r];
    for j in 0..r {
        let mut col = z.column_mut(j);
        let mean = col.sum() / t as f64;
        col.add_scalar_mut(-mean);
        let var = col.iter().map(|v| v * v).sum::<f64>() / (t as f64 - 1.0);
        if var > 0.0 {
            let sd = var.sqrt();
            col.iter_mut().for_each(|v| *v /= sd);
        } else {
            constant[j] = true;
            col.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let mut corr = z.transpose() * &z;
    corr.iter_mut().for_each(|v| *v = (*v / (t as f64 - 1.0)).clamp(-1.0, 1.0));
    for j in 0..r {
        corr[(j, j)] = 1.0;
        if constant[j] {
            for i in 0..r {
                if i != j {
                    corr[(i, j)] = 0.0;
                    corr[(j, i)] = 0.0;
                }
            }
        }
    }
    for j in 0..r {
        for i in (j + 1)..r {
            let v = corr[(i, j)];
            corr[(j, i)] = v;
        }
    }
    corr
}

/// Fisher z-transform: `atanh(r)` after clamping `|r|` to `1 - 1e-7`.
pub fn fisher_z(r: f64) -> Result<f64> {
    if r.is_nan() || r.abs() > 1.0 {
        return Err(CoreError::Input(format!("correlation {r} outside [-1, 1]")));
    }
    Ok(r.clamp(-FISHER_CLAMP, FISHER_CLAMP).atanh())
}

/// How null replicates are drawn from a subject's correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullScheme {
    /// One random node relabeling per subject, applied to rows and columns;
    /// preserves correlation-matrix validity while destroying the
    /// region-value association. Default.
    Relabel,
    /// Rows permuted alone. Breaks symmetry and the unit diagonal; kept as
    /// an escape hatch, not recommended.
    RowsOnly,
}

impl Default for NullScheme {
    fn default() -> Self {
        NullScheme::Relabel
    }
}

/// Outcome of one component's hypothesis test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub component: NodeSet,
    /// Observed statistic: mean z-score for the permutation path, the
    /// paired t statistic for the t-test path.
    pub statistic: f64,
    pub p_value: f64,
    /// Null replicates drawn (B for the permutation path, 1 per subject
    /// for the t-test path).
    pub permutations: usize,
    pub selected: bool,
}

fn check_samples(samples: &[SubjectSample]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| CoreError::Structural("no subject samples given".into()))?;
    let r = first.n_regions();
    for s in samples {
        if s.n_regions() != r {
            return Err(CoreError::Structural(format!(
                "subject {} has {} regions, expected {r}",
                s.subject_id(),
                s.n_regions()
            )));
        }
    }
    Ok(r)
}

/// Fisher z matrices for all subjects, flattened row-major for fast
/// permuted indexing.
fn z_matrices(samples: &[SubjectSample], r: usize) -> Vec<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let c = s.correlations();
            let mut flat = vec![0.0; r * r];
            for a in 0..r {
                for b in 0..r {
                    let v = c[(a, b)].clamp(-FISHER_CLAMP, FISHER_CLAMP);
                    flat[a * r + b] = v.atanh();
                }
            }
            flat
        })
        .collect()
}

fn component_pairs(component: &NodeSet) -> Vec<(usize, usize)> {
    let m = component.members();
    let mut pairs = Vec::with_capacity(component.n_pairs());
    for i in 0..m.len() {
        for j in (i + 1)..m.len() {
            pairs.push((m[i], m[j]));
        }
    }
    pairs
}

/// Accumulates the mean z over subjects and pairs, optionally relabeling
/// each subject's nodes. The observed statistic and every replicate go
/// through this same loop, in the same order, so identical value multisets
/// produce identical floats.
fn mean_z(
    z: &[Vec<f64>],
    r: usize,
    pairs: &[(usize, usize)],
    perms: Option<&[Vec<usize>]>,
    scheme: NullScheme,
) -> f64 {
    let mut sum = 0.0;
    for (i, zi) in z.iter().enumerate() {
        match perms {
            None => {
                for &(a, b) in pairs {
                    sum += zi[a * r + b];
                }
            }
            Some(ps) => {
                let p = &ps[i];
                match scheme {
                    NullScheme::Relabel => {
                        for &(a, b) in pairs {
                            sum += zi[p[a] * r + p[b]];
                        }
                    }
                    NullScheme::RowsOnly => {
                        for &(a, b) in pairs {
                            sum += zi[p[a] * r + b];
                        }
                    }
                }
            }
        }
    }
    sum / (z.len() * pairs.len()) as f64
}

/// Mean Fisher z-score over all subjects and unordered node pairs of the
/// component (the normalizer is `I * |pairs|`).
pub fn component_statistic(samples: &[SubjectSample], component: &NodeSet) -> Result<f64> {
    let r = check_samples(samples)?;
    if component.len() < 2 {
        return Err(CoreError::Parameter(format!(
            "component must have at least 2 nodes, got {}",
            component.len()
        )));
    }
    if component.members().last().copied().unwrap_or(0) >= r {
        return Err(CoreError::Structural("component index out of range".into()));
    }
    let z = z_matrices(samples, r);
    let pairs = component_pairs(component);
    Ok(mean_z(&z, r, &pairs, None, NullScheme::Relabel))
}

/// Two-sided permutation test of a component's mean z-score.
///
/// Each of the `b` replicates draws one uniform node relabeling per
/// subject (substream `(seed, subject, replicate)`), recomputes the
/// statistic over the same index set, and the p-value is the add-one
/// estimator `(1 + #{|S0| >= |S|}) / (b + 1)`. Deterministic for a given
/// seed regardless of thread count.
pub fn permutation_test(
    samples: &[SubjectSample],
    component: &NodeSet,
    b: usize,
    seed: u64,
) -> Result<TestResult> {
    permutation_test_with_scheme(samples, component, b, seed, NullScheme::Relabel)
}

/// [`permutation_test`] with an explicit null scheme.
pub fn permutation_test_with_scheme(
    samples: &[SubjectSample],
    component: &NodeSet,
    b: usize,
    seed: u64,
    scheme: NullScheme,
) -> Result<TestResult> {
    if b < 100 {
        return Err(CoreError::Parameter(format!(
            "need at least 100 permutation replicates for stable p-values, got {b}"
        )));
    }
    let r = check_samples(samples)?;
    if component.len() < 2 {
        return Err(CoreError::Parameter(format!(
            "component must have at least 2 nodes, got {}",
            component.len()
        )));
    }
    if component.members().last().copied().unwrap_or(0) >= r {
        return Err(CoreError::Structural("component index out of range".into()));
    }
    let z = z_matrices(samples, r);
    let pairs = component_pairs(component);
    let observed = mean_z(&z, r, &pairs, None, scheme);
    let cutoff = observed.abs() - TIE_TOL * (1.0 + observed.abs());

    let exceed: u64 = (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let perms: Vec<Vec<usize>> = (0..z.len())
                .map(|i| {
                    let mut rng = rng_for(seed, &[i as u64, rep]);
                    random_permutation(&mut rng, r)
                })
                .collect();
            let s0 = mean_z(&z, r, &pairs, Some(&perms), scheme);
            u64::from(s0.abs() >= cutoff)
        })
        .sum();

    let p_value = (1 + exceed) as f64 / (b + 1) as f64;
    Ok(TestResult {
        component: component.clone(),
        statistic: observed,
        p_value,
        permutations: b,
        selected: false,
    })
}

/// Paired t-test variant: per subject, the mean absolute within-component
/// correlation is compared against the same quantity on one relabeled
/// replicate; the p-value comes from the t distribution with `I - 1`
/// degrees of freedom.
///
/// `_b` is accepted for interface parity with [`permutation_test`]; this
/// path draws a single null replicate per subject.
pub fn ttest_variant(
    samples: &[SubjectSample],
    component: &NodeSet,
    _b: usize,
    seed: u64,
) -> Result<TestResult> {
    let r = check_samples(samples)?;
    let n = samples.len();
    if n < 3 {
        return Err(CoreError::Parameter(format!(
            "paired t-test needs at least 3 subjects, got {n}"
        )));
    }
    if component.len() < 2 {
        return Err(CoreError::Parameter(format!(
            "component must have at least 2 nodes, got {}",
            component.len()
        )));
    }
    if component.members().last().copied().unwrap_or(0) >= r {
        return Err(CoreError::Structural("component index out of range".into()));
    }
    let pairs = component_pairs(component);
    let mut diffs = Vec::with_capacity(n);
    for (i, s) in samples.iter().enumerate() {
        let c = s.correlations();
        let mut observed = 0.0;
        for &(a, b) in &pairs {
            observed += c[(a, b)].abs();
        }
        observed /= pairs.len() as f64;
        let mut rng = rng_for(seed, &[i as u64, 0]);
        let perm = random_permutation(&mut rng, r);
        let mut null = 0.0;
        for &(a, b) in &pairs {
            null += c[(perm[a], perm[b])].abs();
        }
        null /= pairs.len() as f64;
        diffs.push(observed - null);
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let t = if var > 0.0 {
        mean / (var / n as f64).sqrt()
    } else if mean == 0.0 {
        0.0
    } else {
        f64::INFINITY * mean.signum()
    };
    let p_value = if t.is_finite() {
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| CoreError::Numerical(format!("t distribution: {e}")))?;
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(MIN_P, 1.0)
    } else {
        MIN_P
    };
    Ok(TestResult {
        component: component.clone(),
        statistic: t,
        p_value,
        permutations: 1,
        selected: false,
    })
}

/// Marks as selected every component with `p < alpha / |C|`, where `|C|`
/// is the number of candidates tested.
pub fn select(mut results: Vec<TestResult>, alpha: f64) -> Result<Vec<TestResult>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::Parameter(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let n = results.len();
    if n == 0 {
        return Ok(results);
    }
    let cutoff = alpha / n as f64;
    for r in &mut results {
        r.selected = r.p_value < cutoff;
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn constant_corr(r: usize, rho: f64) -> DMatrix<f64> {
        let mut c = DMatrix::from_element(r, r, rho);
        for i in 0..r {
            c[(i, i)] = 1.0;
        }
        c
    }

    #[test]
    fn fisher_z_values() {
        assert_eq!(fisher_z(0.0).unwrap(), 0.0);
        // atanh(0.5) = ln(3)/2
        assert!((fisher_z(0.5).unwrap() - 0.5 * 3.0f64.ln()).abs() < 1e-12);
        assert!((fisher_z(0.5).unwrap() - 0.5493061443).abs() < 1e-10);
        let clamped = fisher_z(1.0).unwrap();
        assert!(clamped.is_finite());
        assert!((clamped - (1.0 - 1e-7f64).atanh()).abs() < 1e-12);
        assert!((clamped - 8.4).abs() < 0.1);
        assert!(fisher_z(1.0 + 1e-6).is_err());
        assert!(fisher_z(f64::NAN).is_err());
    }

    #[test]
    fn statistic_of_constant_correlations_is_their_z() {
        let samples: Vec<SubjectSample> = (0..4)
            .map(|i| SubjectSample::from_correlations(format!("s{i}"), constant_corr(5, 0.3)).unwrap())
            .collect();
        let comp = NodeSet::new(vec![0, 2, 4], 5).unwrap();
        let s = component_statistic(&samples, &comp).unwrap();
        assert!((s - fisher_z(0.3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn statistic_is_mean_of_pair_zscores() {
        // one subject, component {0,1,2}; correlations chosen so the three
        // pair z-scores are 1, 2, 3
        let mut c = DMatrix::identity(3, 3);
        let (r01, r02, r12) = (1.0f64.tanh(), 2.0f64.tanh(), 3.0f64.tanh());
        c[(0, 1)] = r01;
        c[(1, 0)] = r01;
        c[(0, 2)] = r02;
        c[(2, 0)] = r02;
        c[(1, 2)] = r12;
        c[(2, 1)] = r12;
        let s = SubjectSample::from_correlations("s", c).unwrap();
        let comp = NodeSet::new(vec![0, 1, 2], 3).unwrap();
        let stat = component_statistic(&[s], &comp).unwrap();
        assert!((stat - 2.0).abs() < 1e-9);
    }

    #[test]
    fn statistic_matches_brute_force_oracle() {
        let mut rng = crate::rng::rng_for(99, &[0]);
        let r = 7;
        let samples: Vec<SubjectSample> = (0..5)
            .map(|i| {
                let signals = DMatrix::from_fn(40, r, |_, _| {
                    crate::rng::randn(&mut rng)
                });
                SubjectSample::from_signals(format!("s{i}"), signals).unwrap()
            })
            .collect();
        let comp = NodeSet::new(vec![1, 3, 4, 6], r).unwrap();
        let stat = component_statistic(&samples, &comp).unwrap();
        // independent naive double loop
        let mut sum = 0.0;
        let mut count = 0;
        for s in &samples {
            let m = comp.members();
            for i in 0..m.len() {
                for j in (i + 1)..m.len() {
                    sum += fisher_z(s.correlations()[(m[i], m[j])]).unwrap();
                    count += 1;
                }
            }
        }
        assert!((stat - sum / count as f64).abs() < 1e-12);
    }

    #[test]
    fn full_node_set_gives_p_one() {
        let mut rng = crate::rng::rng_for(5, &[0]);
        let samples: Vec<SubjectSample> = (0..6)
            .map(|i| {
                let signals = DMatrix::from_fn(30, 6, |_, _| {
                    crate::rng::randn(&mut rng)
                });
                SubjectSample::from_signals(format!("s{i}"), signals).unwrap()
            })
            .collect();
        let comp = NodeSet::new((0..6).collect(), 6).unwrap();
        let res = permutation_test(&samples, &comp, 200, 11).unwrap();
        assert!(res.p_value > 0.99, "relabeling the full set permutes the same entries");
    }

    #[test]
    fn permutation_test_is_deterministic() {
        let samples: Vec<SubjectSample> = (0..5)
            .map(|i| {
                let mut rng = crate::rng::rng_for(123, &[i]);
                let signals = DMatrix::from_fn(25, 8, |_, _| {
                    crate::rng::randn(&mut rng)
                });
                SubjectSample::from_signals(format!("s{i}"), signals).unwrap()
            })
            .collect();
        let comp = NodeSet::new(vec![0, 1, 2], 8).unwrap();
        let a = permutation_test(&samples, &comp, 300, 42).unwrap();
        let b = permutation_test(&samples, &comp, 300, 42).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.statistic, b.statistic);
        let c = permutation_test(&samples, &comp, 300, 43).unwrap();
        assert!(a.p_value != c.p_value || a.statistic == c.statistic);
    }

    #[test]
    fn small_b_rejected() {
        let s = SubjectSample::from_correlations("s", constant_corr(4, 0.2)).unwrap();
        let comp = NodeSet::new(vec![0, 1, 2], 4).unwrap();
        assert!(permutation_test(&[s], &comp, 99, 0).is_err());
    }

    #[test]
    fn selection_uses_alpha_over_candidate_count() {
        let comp = NodeSet::new(vec![0, 1, 2], 5).unwrap();
        let mk = |p| TestResult {
            component: comp.clone(),
            statistic: 0.0,
            p_value: p,
            permutations: 1000,
            selected: false,
        };
        let results = select(vec![mk(0.001), mk(0.02), mk(0.2), mk(0.9)], 0.05).unwrap();
        let flags: Vec<bool> = results.iter().map(|r| r.selected).collect();
        assert_eq!(flags, vec![true, false, false, false]); // cutoff 0.0125

        let single = select(vec![mk(0.04)], 0.05).unwrap();
        assert!(single[0].selected);

        assert!(select(vec![mk(0.5)], 1.0).is_err());
        assert!(select(vec![mk(0.5)], 0.0).is_err());
    }

    #[test]
    fn ttest_identical_obs_and_null_gives_p_one() {
        // all-equal correlations: any relabeling gives the same mean
        let samples: Vec<SubjectSample> = (0..5)
            .map(|i| SubjectSample::from_correlations(format!("s{i}"), constant_corr(6, 0.4)).unwrap())
            .collect();
        let comp = NodeSet::new(vec![0, 1, 2], 6).unwrap();
        let res = ttest_variant(&samples, &comp, 1000, 3).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn ttest_strong_shift_gives_tiny_p() {
        // within-component correlation 0.8, everything else near zero, 30
        // subjects with microscopic jitter: observed mean |corr| far above
        // any relabeled mean
        let r = 12;
        let samples: Vec<SubjectSample> = (0..30)
            .map(|i| {
                let mut c = DMatrix::identity(r, r);
                let rho = 0.8 + 1e-4 * (i as f64 / 30.0);
                for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
                    c[(a, b)] = rho;
                    c[(b, a)] = rho;
                }
                SubjectSample::from_correlations(format!("s{i}"), c).unwrap()
            })
            .collect();
        let comp = NodeSet::new(vec![0, 1, 2], r).unwrap();
        let res = ttest_variant(&samples, &comp, 1000, 17).unwrap();
        assert!(res.p_value < 1e-6, "p = {}", res.p_value);
    }

    #[test]
    fn ttest_needs_three_subjects() {
        let samples: Vec<SubjectSample> = (0..2)
            .map(|i| SubjectSample::from_correlations(format!("s{i}"), constant_corr(4, 0.2)).unwrap())
            .collect();
        let comp = NodeSet::new(vec![0, 1, 2], 4).unwrap();
        assert!(ttest_variant(&samples, &comp, 100, 0).is_err());
    }

    #[test]
    fn signals_reproduce_correlations_to_tolerance() {
        let mut rng = crate::rng::rng_for(7, &[1]);
        let signals = DMatrix::from_fn(50, 4, |_, _| {
            crate::rng::randn(&mut rng)
        });
        let s = SubjectSample::from_signals("s", signals.clone()).unwrap();
        let direct = pearson_correlations(&signals);
        for i in 0..4 {
            for j in 0..4 {
                assert!((s.correlations()[(i, j)] - direct[(i, j)]).abs() < 1e-10);
            }
        }
        assert_eq!(s.correlations()[(2, 2)], 1.0);
    }

    #[test]
    fn invalid_correlation_matrices_rejected() {
        let mut c = constant_corr(3, 0.5);
        c[(0, 1)] = 1.5;
        c[(1, 0)] = 1.5;
        assert!(SubjectSample::from_correlations("s", c).is_err());
        let mut c = constant_corr(3, 0.5);
        c[(1, 1)] = 0.9;
        assert!(SubjectSample::from_correlations("s", c).is_err());
        let mut c = constant_corr(3, 0.5);
        c[(0, 2)] = 0.1; // asymmetric
        assert!(SubjectSample::from_correlations("s", c).is_err());
    }
}
