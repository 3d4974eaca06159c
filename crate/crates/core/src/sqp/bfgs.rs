use nalgebra::{DMatrix, DVector};

/// Smallest eigenvalue the approximation is allowed to carry.
pub const EIGEN_FLOOR: f64 = 1e-8;

/// Powell-damped BFGS approximation of the Lagrangian Hessian.
///
/// Damping keeps `s^T r > 0` for every accepted pair, so the update stays
/// positive definite even when the curvature pair is not.
#[derive(Clone, Debug)]
pub struct DampedBfgs {
    matrix: DMatrix<f64>,
}

impl DampedBfgs {
    pub fn new(dim: usize) -> Self {
        DampedBfgs {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn reset(&mut self) {
        let n = self.matrix.nrows();
        self.matrix = DMatrix::identity(n, n);
    }

    /// Replaces the approximation, flooring its spectrum.
    pub fn set(&mut self, matrix: DMatrix<f64>) {
        self.matrix = matrix;
        self.enforce_floor();
    }

    /// Applies the damped update for step `s` and gradient change `y`.
    /// Returns false when the pair is too small to carry information.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        let s = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(y);
        if s.amax() < 1e-14 || !y.iter().all(|v| v.is_finite()) {
            return false;
        }
        let bs = &self.matrix * &s;
        let sbs = s.dot(&bs);
        if sbs <= 1e-300 {
            return false;
        }
        let sy = s.dot(&y);
        let theta = if sy >= 0.2 * sbs {
            1.0
        } else {
            0.8 * sbs / (sbs - sy)
        };
        let r = theta * &y + (1.0 - theta) * &bs;
        let sr = s.dot(&r);
        if sr <= 1e-300 {
            return false;
        }
        self.matrix -= &bs * bs.transpose() / sbs;
        self.matrix += &r * r.transpose() / sr;
        self.enforce_floor();
        true
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn enforce_floor(&mut self) {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        if !sym.iter().all(|v| v.is_finite()) {
            self.reset();
            return;
        }
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().all(|&l| l >= EIGEN_FLOOR) {
            self.matrix = sym;
            return;
        }
        let clipped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
        let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        self.matrix = (&rebuilt + rebuilt.transpose()) * 0.5;
    }
}
