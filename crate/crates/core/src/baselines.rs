//! Correlation-only baseline detector: no structural data involved.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::detect::CandidateSet;
use crate::error::{CoreError, Result};
use crate::graph::{connected_components, MIN_COMPONENT_SIZE};
use crate::inference::{SubjectSample, FISHER_CLAMP};

/// Builds a graph by testing, for every region pair, whether the pair's
/// Fisher z-correlations across subjects differ from the grand mean z over
/// all pairs and subjects (one-sample two-sided t-test), keeps edges with
/// `p < epsilon`, and returns connected components of at least three nodes.
///
/// Pairs with zero variance across subjects cannot be tested; they get
/// p = 1 (never selected) and a warning.
pub fn naive_detect(samples: &[SubjectSample], epsilon: f64) -> Result<CandidateSet> {
    if samples.len() < 3 {
        return Err(CoreError::Parameter(format!(
            "need at least 3 subjects for the edge t-tests, got {}",
            samples.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CoreError::Parameter(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    let r = samples[0].n_regions();
    for s in samples {
        if s.n_regions() != r {
            return Err(CoreError::Structural(format!(
                "subject {} has {} regions, expected {r}",
                s.subject_id(),
                s.n_regions()
            )));
        }
    }
    let n = samples.len();
    // z[i][a * r + b]
    let z: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let c = s.correlations();
            let mut flat = vec![0.0; r * r];
            for a in 0..r {
                for b in 0..r {
                    flat[a * r + b] = c[(a, b)].clamp(-FISHER_CLAMP, FISHER_CLAMP).atanh();
                }
            }
            flat
        })
        .collect();

    let n_pairs = r * (r - 1) / 2;
    let mut grand = 0.0;
    for zi in &z {
        for a in 0..r {
            for b in (a + 1)..r {
                grand += zi[a * r + b];
            }
        }
    }
    grand /= (n * n_pairs) as f64;

    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| CoreError::Numerical(format!("t distribution: {e}")))?;
    let mut adjacency = DMatrix::zeros(r, r);
    let mut degenerate = 0usize;
    for a in 0..r {
        for b in (a + 1)..r {
            let values: Vec<f64> = z.iter().map(|zi| zi[a * r + b]).collect();
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let p = if var > 0.0 {
                let t = (mean - grand) / (var / n as f64).sqrt();
                2.0 * (1.0 - dist.cdf(t.abs()))
            } else {
                degenerate += 1;
                1.0
            };
            if p < epsilon {
                adjacency[(a, b)] = 1.0;
                adjacency[(b, a)] = 1.0;
            }
        }
    }
    if degenerate > 0 {
        log::warn!("{degenerate} region pairs had zero variance across subjects; their p-values were set to 1");
    }
    let components = connected_components(&adjacency, MIN_COMPONENT_SIZE)?;
    // Subjects carry no region names; callers with a labelled source (for
    // example a matrix-file header) overwrite these index labels.
    Ok(CandidateSet {
        delta: epsilon,
        components,
        source_labels: (0..r).map(|i| i.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand_distr::Distribution;

    fn subjects_with_block(
        n: usize,
        r: usize,
        block: &[usize],
        rho: f64,
        t: usize,
        seed: u64,
    ) -> Vec<SubjectSample> {
        // signals: independent noise, plus a shared driver inside the block
        (0..n)
            .map(|i| {
                let mut rng = crate::rng::rng_for(seed, &[i as u64]);
                let normal = rand_distr::StandardNormal;
                let mut signals = DMatrix::from_fn(t, r, |_, _| normal.sample(&mut rng));
                if rho > 0.0 {
                    let lambda = (rho / (1.0 - rho)).sqrt();
                    for frame in 0..t {
                        let shared: f64 = normal.sample(&mut rng);
                        for &node in block {
                            signals[(frame, node)] += lambda * shared;
                        }
                    }
                }
                SubjectSample::from_signals(format!("s{i}"), signals).unwrap()
            })
            .collect()
    }

    #[test]
    fn null_data_yields_empty_candidates_at_tiny_epsilon() {
        let samples = subjects_with_block(20, 8, &[], 0.0, 60, 31);
        let c = naive_detect(&samples, 1e-6).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn planted_clique_recovered() {
        // The clique's pairs must be a small share of all pairs, or the
        // pooled grand mean drifts upward and background pairs start to
        // test significantly below it.
        let block = [1usize, 8, 15, 22, 29];
        let samples = subjects_with_block(100, 40, &block, 0.7, 120, 77);
        let c = naive_detect(&samples, 1e-4).unwrap();
        assert_eq!(c.len(), 1, "components: {:?}", c.components);
        assert_eq!(c.components[0].members(), &block);
    }

    #[test]
    fn fewer_than_three_subjects_rejected() {
        let samples = subjects_with_block(2, 5, &[], 0.0, 30, 1);
        assert!(naive_detect(&samples, 1e-3).is_err());
    }

    #[test]
    fn epsilon_domain_checked() {
        let samples = subjects_with_block(5, 5, &[], 0.0, 30, 2);
        assert!(naive_detect(&samples, 0.0).is_err());
        assert!(naive_detect(&samples, 1.0).is_err());
    }

    #[test]
    fn shrinking_epsilon_never_adds_edges() {
        let block = [0usize, 1, 2, 3];
        let samples = subjects_with_block(40, 10, &block, 0.5, 80, 5);
        let loose = naive_detect(&samples, 1e-2).unwrap();
        let tight = naive_detect(&samples, 1e-5).unwrap();
        let count = |c: &CandidateSet| c.components.iter().map(|n| n.len()).sum::<usize>();
        assert!(count(&tight) <= count(&loose));
    }
}
