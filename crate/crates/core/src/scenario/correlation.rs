use nalgebra::DMatrix;

use crate::error::{CfeError, Result};

const EIGEN_FLOOR: f64 = 1e-8;

/// Outcome of projecting a matrix onto valid correlation matrices.
#[derive(Clone, Debug)]
pub struct CorrelationRepair {
    pub matrix: DMatrix<f64>,
    /// Frobenius distance between the input and the repaired matrix.
    pub distance: f64,
}

/// Clips negative eigenvalues to a small positive floor and rescales back
/// to unit diagonal.
pub fn nearest_correlation(matrix: &DMatrix<f64>) -> Result<CorrelationRepair> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(CfeError::invalid("correlation matrix must be square"));
    }
    for i in 0..n {
        if (matrix[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(CfeError::invalid(format!(
                "correlation matrix diagonal entry {i} is {}, expected 1",
                matrix[(i, i)]
            )));
        }
        for j in 0..n {
            let v = matrix[(i, j)];
            if !(-1.0..=1.0).contains(&v) {
                return Err(CfeError::invalid(format!(
                    "correlation entry ({i}, {j}) = {v} outside [-1, 1]"
                )));
            }
            if (v - matrix[(j, i)]).abs() > 1e-12 {
                return Err(CfeError::invalid(format!(
                    "correlation matrix not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let eigen = matrix.clone().symmetric_eigen();
    if eigen.eigenvalues.iter().all(|&l| l >= EIGEN_FLOOR) {
        return Ok(CorrelationRepair {
            matrix: matrix.clone(),
            distance: 0.0,
        });
    }
    let clipped = eigen.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let mut repaired =
        &eigen.eigenvectors * DMatrix::from_diagonal(&clipped) * eigen.eigenvectors.transpose();
    let scale: Vec<f64> = (0..n).map(|i| repaired[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            repaired[(i, j)] /= scale[i] * scale[j];
        }
    }
    for i in 0..n {
        repaired[(i, i)] = 1.0;
        for j in 0..i {
            let avg = 0.5 * (repaired[(i, j)] + repaired[(j, i)]);
            repaired[(i, j)] = avg;
            repaired[(j, i)] = avg;
        }
    }
    let distance = (&repaired - matrix).norm();
    Ok(CorrelationRepair {
        matrix: repaired,
        distance,
    })
}

/// Pearson correlation of two equally long series, restricted to positions
/// where `mask` (if given) is true.
pub fn empirical_correlation(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> f64 {
    assert_eq!(a.len(), b.len());
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let mut count = 0usize;
    let (mut sa, mut sb) = (0.0, 0.0);
    for i in 0..a.len() {
        if keep(i) {
            count += 1;
            sa += a[i];
            sb += b[i];
        }
    }
    if count < 2 {
        return f64::NAN;
    }
    let (ma, mb) = (sa / count as f64, sb / count as f64);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        if keep(i) {
            let (da, db) = (a[i] - ma, b[i] - mb);
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
    }
    sab / (saa * sbb).sqrt()
}
