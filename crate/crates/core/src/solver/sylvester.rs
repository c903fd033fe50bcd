//! `(1/rho) S B T + B = C` for symmetric positive semidefinite `S` and `T`,
//! solved by diagonalizing both sides.

use nalgebra::DMatrix;

use crate::error::{FuvarError, Result};

fn sorted_eigen(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let eig = m.clone().symmetric_eigen();
    // Tiny negative eigenvalues from rounding are clamped; the operator is PSD.
    let values = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    (eig.eigenvectors, values)
}

#[derive(Debug, Clone)]
pub struct SylvesterSolver {
    q_left: DMatrix<f64>,
    eig_left: Vec<f64>,
    q_right: DMatrix<f64>,
    eig_right: Vec<f64>,
    rho: f64,
}

impl SylvesterSolver {
    pub fn new(left: &DMatrix<f64>, right: &DMatrix<f64>, rho: f64) -> Result<Self> {
        if !left.is_square() || !right.is_square() {
            return Err(FuvarError::InvalidDimensions("Sylvester factors must be square".into()));
        }
        if !(rho > 0.0) {
            return Err(FuvarError::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        let (q_left, eig_left) = sorted_eigen(left);
        let (q_right, eig_right) = sorted_eigen(right);
        Ok(Self { q_left, eig_left, q_right, eig_right, rho })
    }

    pub fn solve(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let mut t = self.q_left.transpose() * c * &self.q_right;
        for j in 0..t.ncols() {
            for i in 0..t.nrows() {
                t[(i, j)] /= 1.0 + self.eig_left[i] * self.eig_right[j] / self.rho;
            }
        }
        &self.q_left * t * self.q_right.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn residual_is_tiny() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r = DMatrix::from_fn(4, 10, |_, _| rng.random::<f64>());
            let a = DMatrix::from_fn(3, 30, |_, _| rng.random::<f64>());
            let s = r.transpose() * &r;
            let t = &a * a.transpose();
            let c = DMatrix::from_fn(10, 3, |_, _| rng.random::<f64>() - 0.5);
            let rho = 0.7;
            let b = SylvesterSolver::new(&s, &t, rho).unwrap().solve(&c);
            let lhs = &s * &b * &t / rho + &b;
            assert!((lhs - &c).norm() / c.norm() < 1e-10);
        }
    }
}
