//! ADMM for the abundance subproblem
//!
//! ```text
//! min_A 1/2 ||Y_h - M_h A F D||^2 + 1/2 ||Y_m - R (Psi o M_h) A||^2
//!       + lambda_A (||H_h A||_{2,1} + ||H_v A||_{2,1})   s.t. A >= 0
//! ```
//!
//! with splittings `B1 = B2 F D`, `B2 = M_h A`, `B3 = A`, `B4 = H_h B3`,
//! `B5 = H_v B3`, `B6 = A` and scaled duals `U1..U6`.
//!
//! Layouts: `B1, U1` are `L_h x N` and `B2, U2` are `L_h x M` (one column per
//! pixel, so blur and decimation run over all bands at once). `A` and
//! `B3..B6, U3..U6` are pixel-major `M x P` (one column per material image).

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::error::{FuvarError, Result};
use crate::operators::{
    grad_h_adjoint_into, grad_h_into, grad_v_adjoint_into, grad_v_into, Circulant2d, CoarseGram,
    Fft2d, GradientMasks,
};
use crate::solver::cg::conjugate_gradient_rows;
use crate::solver::prox::block_soft_threshold;
use crate::solver::{AdmmTrace, Observations};

/// Splitting variables and scaled duals of the abundance ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmAState {
    pub b1: DMatrix<f64>,
    pub u1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    pub b3: DMatrix<f64>,
    pub u3: DMatrix<f64>,
    pub b4: DMatrix<f64>,
    pub u4: DMatrix<f64>,
    pub b5: DMatrix<f64>,
    pub u5: DMatrix<f64>,
    pub b6: DMatrix<f64>,
    pub u6: DMatrix<f64>,
    pub rho: f64,
}

fn map_columns(
    x: &DMatrix<f64>,
    rows: usize,
    cols: usize,
    f: fn(&[f64], usize, usize, &mut [f64]),
) -> DMatrix<f64> {
    let m = x.nrows();
    let mut out = DMatrix::zeros(m, x.ncols());
    for k in 0..x.ncols() {
        f(&x.as_slice()[k * m..(k + 1) * m], rows, cols, &mut out.as_mut_slice()[k * m..(k + 1) * m]);
    }
    out
}

pub(crate) fn grad_h_cols(x: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    map_columns(x, rows, cols, grad_h_into)
}

pub(crate) fn grad_v_cols(x: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    map_columns(x, rows, cols, grad_v_into)
}

pub(crate) fn grad_h_adjoint_cols(x: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    map_columns(x, rows, cols, grad_h_adjoint_into)
}

pub(crate) fn grad_v_adjoint_cols(x: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    map_columns(x, rows, cols, grad_v_adjoint_into)
}

impl AdmmAState {
    /// A consistent starting point: every split equals its definition at `a`
    /// (`M x P`) and all duals are zero.
    pub fn from_abundances(obs: &Observations, mh: &DMatrix<f64>, a: &DMatrix<f64>, rho: f64) -> Self {
        let b2 = mh * a.transpose();
        let b1 = obs.blur_decimate(&b2);
        let b4 = grad_h_cols(a, obs.rows(), obs.cols());
        let b5 = grad_v_cols(a, obs.rows(), obs.cols());
        let zeros = |m: &DMatrix<f64>| DMatrix::zeros(m.nrows(), m.ncols());
        Self {
            u1: zeros(&b1),
            u2: zeros(&b2),
            u3: zeros(a),
            u4: zeros(a),
            u5: zeros(a),
            u6: zeros(a),
            b1,
            b2,
            b3: a.clone(),
            b4,
            b5,
            b6: a.map(|v| v.max(0.0)),
            rho,
        }
    }

    fn rescale_duals(&mut self, rho: f64) {
        let s = self.rho / rho;
        for u in [&mut self.u1, &mut self.u2, &mut self.u3, &mut self.u4, &mut self.u5, &mut self.u6] {
            *u *= s;
        }
        self.rho = rho;
    }
}

/// Quantities of one iteration that the dual update and the residuals need.
#[derive(Debug, Clone)]
pub struct IterateA {
    /// The `w`-update result, `M x P`.
    pub a: DMatrix<f64>,
    /// `M_h A`, `L_h x M`.
    pub ma: DMatrix<f64>,
    /// `H_h B3` and `H_v B3` after the `B3` update.
    pub grad_h: DMatrix<f64>,
    pub grad_v: DMatrix<f64>,
}

/// How the `B2` system `(I + T^T T) b = r` is solved, `T` being blur plus
/// decimation. Both run CG per band to the same tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum B2Method {
    /// CG on the coarse system `(I + T T^T) z = T r`, then `b = r - T^T z`.
    /// `T T^T` is a small circulant stencil, so iterations are cheap.
    #[default]
    Coarse,
    /// CG directly on the fine-grid system.
    Fine,
}

/// Solver for the abundance subproblem at fixed `Psi o M_h`.
pub struct AbundanceSolver<'a> {
    obs: &'a Observations,
    mh: &'a DMatrix<f64>,
    lambda_a: f64,
    rho: f64,
    omega1_inv: DMatrix<f64>,
    ym_k: DMatrix<f64>,
    fft: Fft2d,
    b3_denominator: Vec<f64>,
    gram: CoarseGram,
    pub b2_method: B2Method,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Largest per-band CG iteration count of the most recent `B2` update.
    pub last_cg_iters: usize,
}

impl<'a> AbundanceSolver<'a> {
    /// `scaled` is `Psi o M_h`; it is the only way `Psi` enters.
    pub fn new(
        obs: &'a Observations,
        mh: &'a DMatrix<f64>,
        scaled: &DMatrix<f64>,
        lambda_a: f64,
        rho: f64,
    ) -> Result<Self> {
        if mh.nrows() != obs.hs_bands() || scaled.shape() != mh.shape() {
            return Err(FuvarError::InvalidDimensions(format!(
                "M_h {:?} and Psi o M_h {:?} for {} HS bands",
                mh.shape(),
                scaled.shape(),
                obs.hs_bands()
            )));
        }
        if !(rho > 0.0) || !(lambda_a >= 0.0) {
            return Err(FuvarError::InvalidParameter(format!("rho={rho}, lambda_A={lambda_a}")));
        }
        if obs.rows() < 2 || obs.cols() < 2 {
            return Err(FuvarError::InvalidDimensions("gradients need at least a 2x2 grid".into()));
        }
        let p = mh.ncols();
        let k = obs.srf() * scaled;
        let omega1 = k.transpose() * &k
            + mh.transpose() * mh * rho
            + DMatrix::identity(p, p) * (2.0 * rho);
        let omega1_inv = omega1
            .cholesky()
            .ok_or_else(|| FuvarError::Numerical("w-update system is not positive definite".into()))?
            .inverse();
        let ym_k = obs.ym() * &k;

        let (rows, cols) = (obs.rows(), obs.cols());
        let masks = GradientMasks::default();
        let hh = Circulant2d::from_taps(rows, cols, &masks.h_h);
        let hv = Circulant2d::from_taps(rows, cols, &masks.h_v);
        let b3_denominator = hh
            .transfer()
            .iter()
            .zip(hv.transfer())
            .map(|(a, b)| 1.0 + a.norm_sqr() + b.norm_sqr())
            .collect();

        Ok(Self {
            obs,
            mh,
            lambda_a,
            rho,
            omega1_inv,
            ym_k,
            fft: Fft2d::new(rows, cols),
            b3_denominator,
            gram: CoarseGram::new(obs.op()),
            b2_method: B2Method::default(),
            cg_tol: 1e-8,
            cg_max_iters: 200,
            last_cg_iters: 0,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Per-pixel solve of `Omega1 a_n = Omega2_n`.
    pub fn update_w(&self, s: &AdmmAState) -> DMatrix<f64> {
        self.update_w_with(s, s.b2.tr_mul(self.mh))
    }

    /// `update_w` given `B2^T M_h`.
    fn update_w_with(&self, s: &AdmmAState, b2m: DMatrix<f64>) -> DMatrix<f64> {
        let mut rhs = b2m;
        rhs += s.u2.tr_mul(self.mh);
        rhs += &s.b3;
        rhs += &s.u3;
        rhs += &s.b6;
        rhs += &s.u6;
        rhs *= self.rho;
        rhs += &self.ym_k;
        rhs * &self.omega1_inv
    }

    pub fn update_b1(&self, s: &mut AdmmAState) {
        let tb2 = self.obs.blur_decimate(&s.b2);
        let (r, c) = (self.rho, 1.0 / (1.0 + self.rho));
        for (((b1, t), u1), y) in s
            .b1
            .as_mut_slice()
            .iter_mut()
            .zip(tb2.as_slice())
            .zip(s.u1.as_slice())
            .zip(self.obs.yh().as_slice())
        {
            *b1 = (y + r * (t + u1)) * c;
        }
    }

    /// Per-band CG solve of `(I + T^T T) b = (M_h A)_l - u2_l + T^T (b1 - u1)_l`
    /// with `T` the blur-decimation. Returns `M_h A`.
    pub fn update_b2(&mut self, s: &mut AdmmAState, a: &DMatrix<f64>) -> DMatrix<f64> {
        let ma = self.mh * a.transpose();
        let mut base = ma.clone();
        base -= &s.u2;
        let resid = &s.b1 - &s.u1;
        let op = self.obs.op();
        let bands = s.b2.nrows();
        let info = match self.b2_method {
            B2Method::Fine => {
                let mut rhs = self.obs.blur_decimate_adjoint(&resid);
                rhs += &base;
                let mut coarse = DMatrix::zeros(bands, op.coarse_len());
                conjugate_gradient_rows(
                    |v, out| {
                        op.forward_interleaved(v.as_slice(), bands, coarse.as_mut_slice());
                        op.adjoint_interleaved(coarse.as_slice(), bands, out.as_mut_slice());
                        *out += v;
                    },
                    &rhs,
                    &mut s.b2,
                    self.cg_tol,
                    self.cg_max_iters,
                )
            }
            B2Method::Coarse => {
                // With r = base + T^T resid: T r = T base + T T^T resid and
                // b = base + T^T (resid - z).
                let gram = &self.gram;
                let mut rhs = self.obs.blur_decimate(&base);
                let mut g = DMatrix::zeros(bands, op.coarse_len());
                gram.apply_interleaved(resid.as_slice(), bands, g.as_mut_slice());
                rhs += &g;
                let mut z = DMatrix::zeros(bands, op.coarse_len());
                let info = conjugate_gradient_rows(
                    |v, out| {
                        gram.apply_interleaved(v.as_slice(), bands, out.as_mut_slice());
                        *out += v;
                    },
                    &rhs,
                    &mut z,
                    self.cg_tol,
                    self.cg_max_iters,
                );
                let mut back = resid;
                back -= &z;
                op.adjoint_interleaved(back.as_slice(), bands, s.b2.as_mut_slice());
                s.b2 += &base;
                info
            }
        };
        self.last_cg_iters = info.iter().map(|i| i.iterations).max().unwrap_or(0);
        ma
    }

    /// Fourier-domain solve of
    /// `(I + H_h^T H_h + H_v^T H_v) b = a - u3 + H_h^T (b4 + u4) + H_v^T (b5 + u5)`
    /// for every material.
    pub fn update_b3(&mut self, s: &mut AdmmAState, a: &DMatrix<f64>) {
        let (rows, cols) = (self.obs.rows(), self.obs.cols());
        let mut rhs = a - &s.u3;
        rhs += grad_h_adjoint_cols(&(&s.b4 + &s.u4), rows, cols);
        rhs += grad_v_adjoint_cols(&(&s.b5 + &s.u5), rows, cols);
        let m = rows * cols;
        let mut buf = vec![Complex64::default(); m];
        for k in 0..rhs.ncols() {
            let src = &rhs.as_slice()[k * m..(k + 1) * m];
            for (b, &v) in buf.iter_mut().zip(src) {
                *b = Complex64::new(v, 0.0);
            }
            self.fft.forward(&mut buf);
            for (b, d) in buf.iter_mut().zip(&self.b3_denominator) {
                *b /= *d;
            }
            self.fft.inverse(&mut buf);
            for (dst, b) in s.b3.as_mut_slice()[k * m..(k + 1) * m].iter_mut().zip(&buf) {
                *dst = b.re;
            }
        }
    }

    /// Block soft thresholding of `H B3 - u` per pixel, for both directions.
    /// Returns `(H_h B3, H_v B3)`.
    pub fn update_b4_b5(&self, s: &mut AdmmAState) -> (DMatrix<f64>, DMatrix<f64>) {
        let (rows, cols) = (self.obs.rows(), self.obs.cols());
        let gh = grad_h_cols(&s.b3, rows, cols);
        let gv = grad_v_cols(&s.b3, rows, cols);
        let thresh = self.lambda_a / self.rho;
        s.b4 = shrink_rows(&(&gh - &s.u4), thresh);
        s.b5 = shrink_rows(&(&gv - &s.u5), thresh);
        (gh, gv)
    }

    pub fn update_b6(&self, s: &mut AdmmAState, a: &DMatrix<f64>) {
        s.b6 = (a - &s.u6).map(|v| v.max(0.0));
    }

    /// Adds the constraint residuals to the duals and returns their squared
    /// norms, one per constraint.
    pub fn update_duals(&self, s: &mut AdmmAState, it: &IterateA) -> [f64; 6] {
        let tb2 = self.obs.blur_decimate(&s.b2);
        let add = |u: &mut DMatrix<f64>, x: &[f64], y: &[f64]| {
            let mut total = 0.0;
            for ((u, a), b) in u.as_mut_slice().iter_mut().zip(x).zip(y) {
                let r = a - b;
                total += r * r;
                *u += r;
            }
            total
        };
        [
            add(&mut s.u1, tb2.as_slice(), s.b1.as_slice()),
            add(&mut s.u2, s.b2.as_slice(), it.ma.as_slice()),
            add(&mut s.u3, s.b3.as_slice(), it.a.as_slice()),
            add(&mut s.u4, s.b4.as_slice(), it.grad_h.as_slice()),
            add(&mut s.u5, s.b5.as_slice(), it.grad_v.as_slice()),
            add(&mut s.u6, s.b6.as_slice(), it.a.as_slice()),
        ]
    }

    /// One full iteration. Returns the relative primal and dual residuals.
    pub fn step(&mut self, s: &mut AdmmAState) -> (f64, f64) {
        if s.rho != self.rho {
            s.rescale_duals(self.rho);
        }
        let b2m_old = s.b2.tr_mul(self.mh);
        let (b3_old, b6_old) = (s.b3.clone(), s.b6.clone());
        let a = self.update_w_with(s, b2m_old.clone());
        self.update_b1(s);
        let ma = self.update_b2(s, &a);
        self.update_b3(s, &a);
        let (grad_h, grad_v) = self.update_b4_b5(s);
        self.update_b6(s, &a);
        let it = IterateA { a, ma, grad_h, grad_v };

        let r = self.update_duals(s, &it);
        let primal = r.iter().sum::<f64>().sqrt();
        // Norm of the split-variable side of the constraints: the coupled
        // ones (`T B2 - B1`, `B4 - H B3`, ...) count as a whole.
        let split_norm =
            (r[0] + r[3] + r[4] + s.b2.norm_squared() + s.b3.norm_squared() + s.b6.norm_squared()).sqrt();
        let a_norm = (it.ma.norm_squared() + 2.0 * it.a.norm_squared()).sqrt();

        let dual = (s.b2.tr_mul(self.mh) - b2m_old + (&s.b3 - b3_old) + (&s.b6 - b6_old)).norm();
        let dual_scale = (s.u2.tr_mul(self.mh) + &s.u3 + &s.u6).norm();
        (relative(primal, split_norm.max(a_norm)), relative(dual, dual_scale))
    }

    /// Iterates until both relative residuals fall below `tol` or `max_iters`
    /// is reached. The estimate is `s.b6`.
    pub fn solve(&mut self, s: &mut AdmmAState, tol: f64, max_iters: usize) -> Result<AdmmTrace> {
        let mut trace = AdmmTrace::default();
        for _ in 0..max_iters {
            let (p, d) = self.step(s);
            if !p.is_finite() || !d.is_finite() {
                return Err(FuvarError::Numerical("abundance ADMM diverged".into()));
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

pub(crate) fn relative(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value / scale
    } else {
        value
    }
}

fn shrink_rows(x: &DMatrix<f64>, thresh: f64) -> DMatrix<f64> {
    let mut out = x.clone();
    let mut buf = vec![0.0; x.ncols()];
    for n in 0..x.nrows() {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = x[(n, k)];
        }
        block_soft_threshold(&mut buf, thresh);
        for (k, b) in buf.iter().enumerate() {
            out[(n, k)] = *b;
        }
    }
    out
}
