//! ADMM for the scaling-factor subproblem
//!
//! ```text
//! min_Psi 1/2 ||Y_m - R (Psi o M_h) A||^2 + lambda_1/2 ||Psi - 1 1^T||^2
//!         + lambda_2/2 ||H_l Psi||^2   s.t. Psi >= 0
//! ```
//!
//! with the splitting `B = Psi o M_h` and scaled dual `U`.

use nalgebra::DMatrix;

use crate::error::{FuvarError, Result};
use crate::operators::spectral_diff_gram;
use crate::solver::admm_a::relative;
use crate::solver::sylvester::SylvesterSolver;
use crate::solver::{AdmmTrace, Observations};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmPsiState {
    pub b: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub rho: f64,
}

impl AdmmPsiState {
    pub fn new(mh: &DMatrix<f64>, psi: &DMatrix<f64>, rho: f64) -> Self {
        Self {
            b: psi.component_mul(mh),
            psi: psi.clone(),
            u: DMatrix::zeros(mh.nrows(), mh.ncols()),
            rho,
        }
    }
}

/// `L D L^T` factorization of a symmetric positive definite tridiagonal matrix.
#[derive(Debug, Clone)]
struct TridiagonalLdl {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagonalLdl {
    fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n];
        d[0] = diag[0];
        for i in 1..n {
            if !(d[i - 1] > 0.0) {
                break;
            }
            l[i] = off[i - 1] / d[i - 1];
            d[i] = diag[i] - l[i] * off[i - 1];
        }
        if d.iter().any(|v| !(*v > 0.0)) {
            return Err(FuvarError::Numerical("scaling-factor system is not positive definite".into()));
        }
        Ok(Self { d, l })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 1..n {
            x[i] -= self.l[i] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.l[i + 1] * x[i + 1];
        }
    }
}

/// Solver for the scaling-factor subproblem at fixed abundances.
pub struct ScalingSolver<'a> {
    mh: &'a DMatrix<f64>,
    lambda_1: f64,
    rho: f64,
    sylvester: SylvesterSolver,
    rty_at: DMatrix<f64>,
    columns: Vec<TridiagonalLdl>,
}

impl<'a> ScalingSolver<'a> {
    /// `a` is the pixel-major abundance matrix (`M x P`).
    pub fn new(
        obs: &Observations,
        mh: &'a DMatrix<f64>,
        a: &DMatrix<f64>,
        lambda_1: f64,
        lambda_2: f64,
        rho: f64,
    ) -> Result<Self> {
        let (l, p) = mh.shape();
        if l != obs.hs_bands() || a.shape() != (obs.pixels(), p) {
            return Err(FuvarError::InvalidDimensions(format!(
                "M_h {:?}, A {:?} for {} bands and {} pixels",
                mh.shape(),
                a.shape(),
                obs.hs_bands(),
                obs.pixels()
            )));
        }
        if !(rho > 0.0) || !(lambda_1 >= 0.0) || !(lambda_2 >= 0.0) {
            return Err(FuvarError::InvalidParameter(format!(
                "rho={rho}, lambda_1={lambda_1}, lambda_2={lambda_2}"
            )));
        }
        let r = obs.srf();
        let sylvester = SylvesterSolver::new(&(r.transpose() * r), &(a.transpose() * a), rho)?;
        let rty_at = r.transpose() * (obs.ym().transpose() * a);
        let gram = spectral_diff_gram(l)?;
        let off: Vec<f64> = gram.off.iter().map(|v| lambda_2 * v).collect();
        let columns = (0..p)
            .map(|k| {
                let diag: Vec<f64> = (0..l)
                    .map(|i| lambda_1 + lambda_2 * gram.diag[i] + rho * mh[(i, k)] * mh[(i, k)])
                    .collect();
                TridiagonalLdl::new(&diag, &off)
            })
            .collect::<Result<_>>()?;
        Ok(Self { mh, lambda_1, rho, sylvester, rty_at, columns })
    }

    /// `(1/rho) R^T R B A A^T + B = (1/rho) R^T Y_m A^T + Psi o M_h - U`.
    pub fn update_b(&self, s: &mut AdmmPsiState) {
        let c = &self.rty_at / self.rho + s.psi.component_mul(self.mh) - &s.u;
        s.b = self.sylvester.solve(&c);
    }

    /// Column-wise solve of
    /// `(lambda_1 I + lambda_2 H^T H + rho diag(m^2)) psi = lambda_1 + rho m o (b + u)`,
    /// then projection onto the nonnegative orthant.
    pub fn update_psi(&self, s: &mut AdmmPsiState) {
        let l = self.mh.nrows();
        let mut rhs = vec![0.0; l];
        for (k, factor) in self.columns.iter().enumerate() {
            for i in 0..l {
                rhs[i] = self.lambda_1 + self.rho * self.mh[(i, k)] * (s.b[(i, k)] + s.u[(i, k)]);
            }
            factor.solve_in_place(&mut rhs);
            for i in 0..l {
                s.psi[(i, k)] = rhs[i].max(0.0);
            }
        }
    }

    pub fn update_dual(&self, s: &mut AdmmPsiState) {
        s.u += &s.b - s.psi.component_mul(self.mh);
    }

    pub fn step(&self, s: &mut AdmmPsiState) -> (f64, f64) {
        if s.rho != self.rho {
            s.u *= s.rho / self.rho;
            s.rho = self.rho;
        }
        let psi_old = s.psi.clone();
        self.update_b(s);
        self.update_psi(s);
        self.update_dual(s);
        let mpsi = s.psi.component_mul(self.mh);
        let primal = relative((&s.b - &mpsi).norm(), s.b.norm().max(mpsi.norm()));
        let dual = relative((&s.psi - psi_old).component_mul(self.mh).norm(), s.u.norm());
        (primal, dual)
    }

    pub fn solve(&self, s: &mut AdmmPsiState, tol: f64, max_iters: usize) -> Result<AdmmTrace> {
        let mut trace = AdmmTrace::default();
        for _ in 0..max_iters {
            let (p, d) = self.step(s);
            if !p.is_finite() || !d.is_finite() {
                return Err(FuvarError::Numerical("scaling-factor ADMM diverged".into()));
            }
            trace.primal.push(p);
            trace.dual.push(d);
            if p < tol && d < tol {
                trace.converged = true;
                break;
            }
        }
        Ok(trace)
    }
}
