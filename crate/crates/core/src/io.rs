//! File formats: dense labelled matrices as CSV, subject directories, and
//! candidate-component documents.
//!
//! Matrix files are UTF-8 comma-separated values: the first row holds the
//! R region labels, each of the following R rows holds R numeric entries.
//! Subject files use the same layout with either R (correlation matrix) or
//! T (time series) data rows.

use nalgebra::DMatrix;
use std::fs;
use std::path::Path;

use crate::detect::CandidateSet;
use crate::diffusion::InfluenceGraph;
use crate::error::{CoreError, Result};
use crate::graph::WeightedGraph;
use crate::inference::SubjectSample;

/// How subject files should be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubjectKind {
    /// Square matrices with a unit diagonal load as correlations, anything
    /// else as time series.
    #[default]
    Auto,
    TimeSeries,
    Correlations,
}

/// Parses a labelled numeric matrix. NaN entries are always rejected.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_matrix(&text, path)
}

fn parse_matrix(text: &str, path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CoreError::Input(format!("{}: empty file", path.display())))?;
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let r = labels.len();
    if r == 0 || labels.iter().any(|l| l.is_empty()) {
        return Err(CoreError::Input(format!("{}: malformed header row", path.display())));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let entries: Vec<&str> = line.split(',').map(str::trim).collect();
        if entries.len() != r {
            return Err(CoreError::Input(format!(
                "{}: row {} has {} entries, expected {r}",
                path.display(),
                line_no + 2,
                entries.len()
            )));
        }
        let mut row = Vec::with_capacity(r);
        for e in entries {
            let v: f64 = e.parse().map_err(|_| {
                CoreError::Input(format!(
                    "{}: row {}: cannot parse {e:?} as a number",
                    path.display(),
                    line_no + 2
                ))
            })?;
            if v.is_nan() {
                return Err(CoreError::Input(format!(
                    "{}: row {} contains NaN",
                    path.display(),
                    line_no + 2
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CoreError::Input(format!("{}: no data rows", path.display())));
    }
    let matrix = DMatrix::from_fn(rows.len(), r, |i, j| rows[i][j]);
    Ok((labels, matrix))
}

/// Reads a structural weight matrix: square, symmetric, nonnegative, zero
/// diagonal. `repair` symmetrizes near-asymmetric input as `(A + A^T)/2`.
pub fn read_weighted_graph(path: &Path, repair: bool) -> Result<WeightedGraph> {
    let (labels, matrix) = read_matrix(path)?;
    if matrix.nrows() != matrix.ncols() {
        return Err(CoreError::Input(format!(
            "{}: weight matrix must be square, got {}x{}",
            path.display(),
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if repair {
        WeightedGraph::new_symmetrized(labels, matrix)
    } else {
        WeightedGraph::new(labels, matrix)
    }
}

/// Reads a previously written influence matrix. The flow rate is not part
/// of the file; callers that need it pass it along.
pub fn read_influence(path: &Path, gamma: f64) -> Result<InfluenceGraph> {
    let (labels, matrix) = read_matrix(path)?;
    if matrix.nrows() != matrix.ncols() {
        return Err(CoreError::Input(format!(
            "{}: influence matrix must be square",
            path.display()
        )));
    }
    InfluenceGraph::from_parts(labels, matrix, gamma)
}

/// Writes a labelled matrix with shortest-roundtrip float formatting, so
/// write/read cycles are lossless.
pub fn write_matrix(path: &Path, labels: &[String], matrix: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&labels.join(","));
    out.push('\n');
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", matrix[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn is_correlation_shaped(matrix: &DMatrix<f64>) -> bool {
    matrix.nrows() == matrix.ncols()
        && (0..matrix.nrows()).all(|i| (matrix[(i, i)] - 1.0).abs() <= 1e-6)
        && crate::graph::is_symmetric(matrix, 1e-6)
}

/// Loads every regular file of a directory as one subject, sorted by file
/// name for reproducibility. Returns the shared region labels and samples.
pub fn read_subject_dir(dir: &Path, kind: SubjectKind) -> Result<(Vec<String>, Vec<SubjectSample>)> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CoreError::Input(format!("cannot read directory {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CoreError::Input(format!("{}: no subject files found", dir.display())));
    }
    let mut labels: Option<Vec<String>> = None;
    let mut samples = Vec::with_capacity(paths.len());
    for path in &paths {
        let (file_labels, matrix) = read_matrix(path)?;
        match &labels {
            None => labels = Some(file_labels.clone()),
            Some(l) if *l != file_labels => {
                return Err(CoreError::Structural(format!(
                    "{}: region labels differ from the first subject file",
                    path.display()
                )));
            }
            _ => {}
        }
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let sample = match kind {
            SubjectKind::Correlations => SubjectSample::from_correlations(id, matrix)?,
            SubjectKind::TimeSeries => SubjectSample::from_signals(id, matrix)?,
            SubjectKind::Auto => {
                if is_correlation_shaped(&matrix) {
                    SubjectSample::from_correlations(id, matrix)?
                } else if matrix.nrows() != matrix.ncols() {
                    SubjectSample::from_signals(id, matrix)?
                } else {
                    return Err(CoreError::Input(format!(
                        "{}: square matrix without a unit diagonal; pass an explicit subject kind",
                        path.display()
                    )));
                }
            }
        };
        samples.push(sample);
    }
    Ok((labels.unwrap_or_default(), samples))
}

/// Serializes a candidate set as pretty JSON.
pub fn write_candidates(path: &Path, candidates: &CandidateSet) -> Result<()> {
    let json = serde_json::to_string_pretty(candidates)?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Reads a candidate set back from JSON.
pub fn read_candidates(path: &Path) -> Result<CandidateSet> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}
