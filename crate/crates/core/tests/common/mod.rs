//! Independent oracle implementations for the integration tests.
//!
//! Everything here deliberately avoids the library's solver paths: matrix
//! inversion is plain Gauss-Jordan elimination, eigendecompositions use
//! cyclic Jacobi rotations, and statistics are naive double loops.

#![allow(dead_code)]

use nalgebra::DMatrix;
use neurohotnet_core::graph::WeightedGraph;
use rand::Rng;

/// Dense inversion by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[(row, col)].abs() > m[(pivot, col)].abs() {
                pivot = row;
            }
        }
        assert!(m[(pivot, col)].abs() > 1e-300, "singular matrix in oracle");
        if pivot != col {
            m.swap_rows(pivot, col);
            inv.swap_rows(pivot, col);
        }
        let scale = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= scale;
            inv[(col, j)] /= scale;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[(row, col)];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                m[(row, j)] -= factor * m[(col, j)];
                inv[(row, j)] -= factor * inv[(col, j)];
            }
        }
    }
    inv
}

/// Literal influence computation: normalize, build the regularized
/// Laplacian, invert it densely, transpose, renormalize rows, average with
/// the transpose. Isolated nodes get zero rows by the same convention the
/// library documents.
pub fn influence_oracle(g: &WeightedGraph, gamma: f64) -> DMatrix<f64> {
    let r = g.n_nodes();
    let degrees = g.weighted_degrees();
    let w = g.weights();
    let mut m_prime = DMatrix::<f64>::zeros(r, r);
    for a in 0..r {
        for b in 0..r {
            if degrees[a] > 0.0 && degrees[b] > 0.0 && w[(a, b)] != 0.0 {
                m_prime[(a, b)] = w[(a, b)] / (degrees[a] * degrees[b]).sqrt();
            }
        }
    }
    let mut l = -m_prime.clone();
    for i in 0..r {
        let row_sum: f64 = (0..r).map(|j| m_prime[(i, j)]).sum();
        l[(i, i)] = row_sum + gamma;
    }
    let f = gauss_jordan_inverse(&l).transpose();
    let row_sums: Vec<f64> = (0..r).map(|i| f.row(i).sum()).collect();
    let mut out = DMatrix::<f64>::zeros(r, r);
    for a in 0..r {
        if degrees[a] == 0.0 {
            continue;
        }
        for b in 0..r {
            if degrees[b] == 0.0 {
                continue;
            }
            out[(a, b)] = 0.5 * (f[(a, b)] / row_sums[a] + f[(b, a)] / row_sums[b]);
        }
    }
    out
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns the
/// eigenvalues and the matrix whose columns are the eigenvectors.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale: f64 = a.norm().max(1.0);
    for _sweep in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

/// Reference nearest-correlation projection: alternate an eigenvalue clip
/// (via Jacobi) with an exact unit-diagonal reset until stationary.
pub fn nearest_correlation_oracle(a: &DMatrix<f64>, iters: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut x = a.clone();
    let mut correction = DMatrix::<f64>::zeros(n, n);
    for _ in 0..iters {
        let rk = &x - &correction;
        let (values, vectors) = jacobi_eigen(&rk);
        let mut clipped = DMatrix::<f64>::zeros(n, n);
        for (j, &lambda) in values.iter().enumerate() {
            if lambda > 0.0 {
                let col = vectors.column(j);
                for row in 0..n {
                    for col2 in 0..n {
                        clipped[(row, col2)] += lambda * col[row] * col[col2];
                    }
                }
            }
        }
        correction = &clipped - &rk;
        for i in 0..n {
            clipped[(i, i)] = 1.0;
        }
        x = clipped;
    }
    x
}

/// Random graph: each edge present with the given probability, Uniform(0,1)
/// weights.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, density: f64) -> WeightedGraph {
    let mut w = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < density {
                let v = rng.gen::<f64>();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    WeightedGraph::from_weights(w).expect("random graph is valid")
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
