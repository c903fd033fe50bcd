use nalgebra::DMatrix;

use crate::error::{FuvarError, Result};
use crate::operators::{grad_h_into, grad_v_into};
use crate::solver::Observations;
use crate::types::FuvarConfig;

/// Regularization weights of the fusion objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    pub lambda_a: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
}

impl From<&FuvarConfig> for Penalties {
    fn from(c: &FuvarConfig) -> Self {
        Self { lambda_a: c.lambda_a, lambda_1: c.lambda_1, lambda_2: c.lambda_2 }
    }
}

/// `||H_h A||_{2,1} + ||H_v A||_{2,1}` for pixel-major `A` (`M x P`).
pub(crate) fn total_variation(a_t: &DMatrix<f64>, rows: usize, cols: usize) -> f64 {
    let (m, p) = a_t.shape();
    let mut gh = DMatrix::zeros(m, p);
    let mut gv = DMatrix::zeros(m, p);
    for k in 0..p {
        let src = &a_t.as_slice()[k * m..(k + 1) * m];
        grad_h_into(src, rows, cols, &mut gh.as_mut_slice()[k * m..(k + 1) * m]);
        grad_v_into(src, rows, cols, &mut gv.as_mut_slice()[k * m..(k + 1) * m]);
    }
    gh.row_iter().map(|r| r.norm()).sum::<f64>() + gv.row_iter().map(|r| r.norm()).sum::<f64>()
}

/// `1/2 ||Y_h - M_h A F D||^2` for pixel-major `A`.
pub(crate) fn hs_misfit(obs: &Observations, mh: &DMatrix<f64>, a_t: &DMatrix<f64>) -> f64 {
    let z = mh * a_t.transpose();
    0.5 * (obs.yh() - obs.blur_decimate(&z)).norm_squared()
}

/// `1/2 ||Y_m - R (Psi o M_h) A||^2` with `scaled = Psi o M_h`.
pub(crate) fn ms_misfit(obs: &Observations, scaled: &DMatrix<f64>, a_t: &DMatrix<f64>) -> f64 {
    let k = obs.srf() * scaled;
    0.5 * (obs.ym() - a_t * k.transpose()).norm_squared()
}

/// `lambda_1/2 ||Psi - 1 1^T||^2 + lambda_2/2 ||H_l Psi||^2`.
pub fn scaling_penalty(psi: &DMatrix<f64>, lambda_1: f64, lambda_2: f64) -> f64 {
    let dev: f64 = psi.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
    let mut smooth = 0.0;
    for col in psi.column_iter() {
        for k in 1..col.len() {
            smooth += (col[k] - col[k - 1]).powi(2);
        }
    }
    0.5 * lambda_1 * dev + 0.5 * lambda_2 * smooth
}

fn check_inputs(obs: &Observations, mh: &DMatrix<f64>, a: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<()> {
    if mh.nrows() != obs.hs_bands()
        || psi.shape() != mh.shape()
        || a.nrows() != mh.ncols()
        || a.ncols() != obs.pixels()
    {
        return Err(FuvarError::InvalidDimensions(format!(
            "A {:?}, Psi {:?}, M_h {:?} with {} bands and {} pixels",
            a.shape(),
            psi.shape(),
            mh.shape(),
            obs.hs_bands(),
            obs.pixels()
        )));
    }
    if a.iter().any(|v| *v < 0.0) || psi.iter().any(|v| *v < 0.0) {
        return Err(FuvarError::Infeasible("A and Psi must be nonnegative".into()));
    }
    if a.iter().chain(psi.iter()).any(|v| !v.is_finite()) {
        return Err(FuvarError::NonFinite("objective arguments".into()));
    }
    Ok(())
}

/// The full fusion objective at `(A, Psi)`, with `A` given as `P x M`.
pub fn objective(
    obs: &Observations,
    mh: &DMatrix<f64>,
    a: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    pen: Penalties,
) -> Result<f64> {
    check_inputs(obs, mh, a, psi)?;
    let a_t = a.transpose();
    Ok(objective_t(obs, mh, &a_t, psi, pen))
}

pub(crate) fn objective_t(
    obs: &Observations,
    mh: &DMatrix<f64>,
    a_t: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    pen: Penalties,
) -> f64 {
    let scaled = psi.component_mul(mh);
    hs_misfit(obs, mh, a_t)
        + ms_misfit(obs, &scaled, a_t)
        + pen.lambda_a * total_variation(a_t, obs.rows(), obs.cols())
        + scaling_penalty(psi, pen.lambda_1, pen.lambda_2)
}

/// The terms of the objective that depend on `A`, for fixed `Psi`.
pub fn abundance_objective(
    obs: &Observations,
    mh: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    a: &DMatrix<f64>,
    lambda_a: f64,
) -> Result<f64> {
    check_inputs(obs, mh, a, psi)?;
    let a_t = a.transpose();
    let scaled = psi.component_mul(mh);
    Ok(hs_misfit(obs, mh, &a_t)
        + ms_misfit(obs, &scaled, &a_t)
        + lambda_a * total_variation(&a_t, obs.rows(), obs.cols()))
}

/// The terms of the objective that depend on `Psi`, for fixed `A`.
pub fn scaling_objective(
    obs: &Observations,
    mh: &DMatrix<f64>,
    a: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    lambda_1: f64,
    lambda_2: f64,
) -> Result<f64> {
    check_inputs(obs, mh, a, psi)?;
    let scaled = psi.component_mul(mh);
    Ok(ms_misfit(obs, &scaled, &a.transpose()) + scaling_penalty(psi, lambda_1, lambda_2))
}
