//! The alternating fusion solver and its two ADMM subproblem solvers.

mod admm_a;
mod admm_psi;
pub mod cg;
mod objective;
mod problem;
pub mod prox;
pub mod sylvester;

use std::time::{Duration, Instant};

use nalgebra::DMatrix;

pub use admm_a::{AbundanceSolver, AdmmAState, B2Method, IterateA};
pub use admm_psi::{AdmmPsiState, ScalingSolver};
pub use objective::{abundance_objective, objective, scaling_objective, scaling_penalty, Penalties};
pub use problem::Observations;

use crate::error::{FuvarError, Result};
use crate::init::initial_abundances;
use crate::types::{
    AbundanceMap, EndmemberMatrix, FuvarConfig, ImageCube, ObservationModel, ScalingFactors,
};

/// Relative primal and dual residuals of an ADMM run, one entry per iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdmmTrace {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub converged: bool,
}

impl AdmmTrace {
    pub fn iterations(&self) -> usize {
        self.primal.len()
    }
}

/// Solves the abundance subproblem from `a_init` (`P x M`) with a fresh state.
#[allow(clippy::too_many_arguments)]
pub fn admm_solve_a(
    obs: &Observations,
    mh: &EndmemberMatrix,
    psi: &ScalingFactors,
    a_init: &DMatrix<f64>,
    lambda_a: f64,
    rho: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(DMatrix<f64>, AdmmTrace)> {
    if a_init.shape() != (mh.materials(), obs.pixels()) || a_init.iter().any(|v| *v < 0.0) {
        return Err(FuvarError::InvalidParameter(
            "initial abundances must be nonnegative and P x M".into(),
        ));
    }
    let scaled = psi.matrix().component_mul(mh.matrix());
    let mut solver = AbundanceSolver::new(obs, mh.matrix(), &scaled, lambda_a, rho)?;
    let mut state = AdmmAState::from_abundances(obs, mh.matrix(), &a_init.transpose(), rho);
    let trace = solver.solve(&mut state, tol, max_iters)?;
    Ok((state.b6.transpose(), trace))
}

/// Solves the scaling-factor subproblem at fixed `a` (`P x M`) from `psi_init`.
#[allow(clippy::too_many_arguments)]
pub fn admm_solve_psi(
    obs: &Observations,
    mh: &EndmemberMatrix,
    a: &DMatrix<f64>,
    psi_init: &ScalingFactors,
    lambda_1: f64,
    lambda_2: f64,
    rho: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(ScalingFactors, AdmmTrace)> {
    if a.iter().any(|v| *v < 0.0) {
        return Err(FuvarError::Infeasible("abundances must be nonnegative".into()));
    }
    let solver = ScalingSolver::new(obs, mh.matrix(), &a.transpose(), lambda_1, lambda_2, rho)?;
    let mut state = AdmmPsiState::new(mh.matrix(), psi_init.matrix(), rho);
    let trace = solver.solve(&mut state, tol, max_iters)?;
    Ok((ScalingFactors::new(state.psi)?, trace))
}

/// Convergence record of a fusion run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub outer_iters: usize,
    pub initial_objective: f64,
    /// Objective after each outer iteration.
    pub objectives: Vec<f64>,
    pub rel_change_a: f64,
    pub rel_change_psi: f64,
    pub admm_a_iters: Vec<usize>,
    pub admm_psi_iters: Vec<usize>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    /// `M_h A` on the fine grid.
    pub zh: ImageCube,
    /// `(Psi o M_h) A` on the fine grid.
    pub zm: ImageCube,
    pub abundances: AbundanceMap,
    pub scaling: ScalingFactors,
    pub report: SolveReport,
}

/// Full pipeline from the observations: abundances start from FCLS on `Y_h`
/// upsampled bicubically, `Psi` starts at ones.
pub fn fuvar(
    yh: &ImageCube,
    ym: &ImageCube,
    mh: &EndmemberMatrix,
    model: &ObservationModel,
    config: &FuvarConfig,
) -> Result<FusionResult> {
    let a0 = initial_abundances(yh, mh, model.decimation)?;
    let obs = Observations::new(yh, ym, model)?;
    fuvar_from(&obs, mh, &a0, config)
}

fn rel_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    let base = old.norm();
    let diff = (new - old).norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// Alternating minimization from a given initial abundance map.
pub fn fuvar_from(
    obs: &Observations,
    mh: &EndmemberMatrix,
    a0: &AbundanceMap,
    config: &FuvarConfig,
) -> Result<FusionResult> {
    config.validate()?;
    let start = Instant::now();
    let m = mh.matrix();
    let (l, p) = m.shape();
    if l != obs.hs_bands() || a0.materials() != p || a0.rows() != obs.rows() || a0.cols() != obs.cols() {
        return Err(FuvarError::InvalidDimensions(format!(
            "M_h {l}x{p} and A {}x{} on {}x{} for a {}x{} scene with {} bands",
            a0.materials(),
            a0.rows() * a0.cols(),
            a0.rows(),
            a0.cols(),
            obs.rows(),
            obs.cols(),
            obs.hs_bands()
        )));
    }
    let pen = Penalties::from(config);
    let rho = config.rho;

    let mut a = a0.matrix().transpose();
    let mut psi = DMatrix::from_element(l, p, 1.0);
    let initial_objective = objective::objective_t(obs, m, &a, &psi, pen);
    let mut state_a = AdmmAState::from_abundances(obs, m, &a, rho);
    let mut state_psi = AdmmPsiState::new(m, &psi, rho);

    let mut report = SolveReport {
        outer_iters: 0,
        initial_objective,
        objectives: Vec::new(),
        rel_change_a: f64::INFINITY,
        rel_change_psi: f64::INFINITY,
        admm_a_iters: Vec::new(),
        admm_psi_iters: Vec::new(),
        wall_time: Duration::ZERO,
    };

    for _ in 0..config.outer_max_iters {
        let scaled = psi.component_mul(m);
        let mut solver_a = AbundanceSolver::new(obs, m, &scaled, config.lambda_a, rho)?;
        let trace_a = solver_a.solve(&mut state_a, config.admm_rel_tol, config.admm_max_iters)?;
        let a_new = state_a.b6.clone();

        let (psi_new, psi_iters) = if config.freeze_psi {
            (psi.clone(), 0)
        } else {
            let solver_psi = ScalingSolver::new(obs, m, &a_new, config.lambda_1, config.lambda_2, rho)?;
            let trace = solver_psi.solve(&mut state_psi, config.admm_rel_tol, config.admm_max_iters)?;
            (state_psi.psi.clone(), trace.iterations())
        };

        report.rel_change_a = rel_change(&a_new, &a);
        report.rel_change_psi = rel_change(&psi_new, &psi);
        a = a_new;
        psi = psi_new;

        let obj = objective::objective_t(obs, m, &a, &psi, pen);
        if !obj.is_finite() {
            return Err(FuvarError::Numerical(format!(
                "objective became {obj} at outer iteration {}",
                report.outer_iters + 1
            )));
        }
        report.outer_iters += 1;
        report.objectives.push(obj);
        report.admm_a_iters.push(trace_a.iterations());
        report.admm_psi_iters.push(psi_iters);

        if report.rel_change_a < config.outer_rel_tol && report.rel_change_psi < config.outer_rel_tol {
            break;
        }
    }

    let (rows, cols) = (obs.rows(), obs.cols());
    let zh = ImageCube::from_band_matrix(rows, cols, &(m * a.transpose()))?;
    let zm = ImageCube::from_band_matrix(rows, cols, &(psi.component_mul(m) * a.transpose()))?;
    report.wall_time = start.elapsed();
    Ok(FusionResult {
        zh,
        zm,
        abundances: AbundanceMap::new(rows, cols, a.transpose())?,
        scaling: ScalingFactors::new(psi)?,
        report,
    })
}
