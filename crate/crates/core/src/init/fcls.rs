//! Fully constrained least squares: `min ||y - M a||^2` with `a >= 0` and
//! `1^T a = 1`.
//!
//! A Lawson-Hanson NNLS on the augmented system `[delta 1^T; M]` supplies a
//! feasible starting support; a primal active-set method then solves the
//! equality-constrained problem exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{FuvarError, Result};
use crate::types::EndmemberMatrix;

const SUM_ROW_WEIGHT: f64 = 1e3;

fn lstsq(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let svd = e.clone().svd(true, true);
    let eps = svd.singular_values.max() * 1e-14;
    svd.solve(f, eps).expect("SVD computed with both factors")
}

/// Lawson-Hanson nonnegative least squares `min ||E x - f||, x >= 0`.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let n = e.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * e.amax().max(1.0) * f.amax().max(1.0) * (e.nrows() as f64);

    for _outer in 0..3 * n + 10 {
        let w = e.transpose() * (f - e * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = e.select_columns(&idx);
            let s_sub = lstsq(&sub, f);
            if s_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &c) in idx.iter().enumerate() {
                    x[c] = s_sub[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &c) in idx.iter().enumerate() {
                if s_sub[k] <= 0.0 {
                    alpha = alpha.min(x[c] / (x[c] - s_sub[k]));
                }
            }
            for (k, &c) in idx.iter().enumerate() {
                x[c] += alpha * (s_sub[k] - x[c]);
            }
            for &c in &idx {
                if x[c] <= 1e-15 {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Per-pixel FCLS solver with the endmember Gram matrix precomputed.
pub struct FclsSolver {
    m: DMatrix<f64>,
    gram: DMatrix<f64>,
    augmented: DMatrix<f64>,
}

impl FclsSolver {
    pub fn new(endmembers: &EndmemberMatrix) -> Result<Self> {
        let m = endmembers.matrix().clone();
        let sv = m.singular_values();
        if sv.min() <= sv.max() * 1e-12 {
            return Err(FuvarError::RankDeficient(
                "endmember matrix is not full column rank".into(),
            ));
        }
        let (l, p) = m.shape();
        let mut augmented = DMatrix::from_element(l + 1, p, SUM_ROW_WEIGHT);
        augmented.rows_mut(1, l).copy_from(&m);
        let gram = m.transpose() * &m;
        Ok(Self { m, gram, augmented })
    }

    /// Solves the equality-constrained problem restricted to `free`.
    fn solve_on_support(&self, free: &[usize], mty: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let k = free.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = self.gram[(i, j)];
            }
            kkt[(a, k)] = 1.0;
            kkt[(k, a)] = 1.0;
            rhs[a] = mty[i];
        }
        rhs[k] = 1.0;
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| FuvarError::Numerical("singular FCLS KKT system".into()))?;
        Ok((sol.rows(0, k).into_owned(), sol[k]))
    }

    pub fn solve_pixel(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.m.ncols();
        let mut f = DVector::from_element(y.len() + 1, SUM_ROW_WEIGHT);
        f.rows_mut(1, y.len()).copy_from(y);
        let start = nnls(&self.augmented, &f);
        let total: f64 = start.sum();
        let mut x = if total > 0.0 {
            start / total
        } else {
            DVector::from_element(p, 1.0 / p as f64)
        };

        let mty = self.m.transpose() * y;
        let mut active: Vec<bool> = x.iter().map(|&v| v <= 0.0).collect();
        let scale = mty.amax().max(self.gram.amax()).max(1.0);

        for _ in 0..50 * (p + 1) {
            let free: Vec<usize> = (0..p).filter(|&i| !active[i]).collect();
            let (z, nu) = self.solve_on_support(&free, &mty)?;
            let step: Vec<f64> = free.iter().enumerate().map(|(a, &i)| z[a] - x[i]).collect();
            if step.iter().all(|s| s.abs() <= 1e-15) {
                // Multipliers of the active bounds: g_i + nu with g = M^T (M x - y).
                let g = &self.gram * &x - &mty;
                let worst = (0..p)
                    .filter(|&i| active[i])
                    .map(|i| (i, g[i] + nu))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                match worst {
                    Some((i, lambda)) if lambda < -1e-13 * scale => active[i] = false,
                    _ => return Ok(x),
                }
                continue;
            }
            let mut alpha = 1.0;
            let mut blocking = None;
            for (a, &i) in free.iter().enumerate() {
                if step[a] < 0.0 {
                    let ratio = x[i] / -step[a];
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for (a, &i) in free.iter().enumerate() {
                x[i] += alpha * step[a];
            }
            if let Some(i) = blocking {
                x[i] = 0.0;
                active[i] = true;
            }
        }
        Err(FuvarError::Numerical("FCLS active set did not terminate".into()))
    }
}

/// FCLS abundances for every column of `y` (`L x N`), returned as `P x N`.
pub fn fcls_abundances(y: &DMatrix<f64>, endmembers: &EndmemberMatrix) -> Result<DMatrix<f64>> {
    if y.nrows() != endmembers.bands() {
        return Err(FuvarError::InvalidDimensions(format!(
            "data has {} bands, endmembers {}",
            y.nrows(),
            endmembers.bands()
        )));
    }
    let solver = FclsSolver::new(endmembers)?;
    let mut out = DMatrix::zeros(endmembers.materials(), y.ncols());
    for (j, col) in y.column_iter().enumerate() {
        let a = solver.solve_pixel(&col.into_owned())?;
        out.set_column(j, &a);
    }
    Ok(out)
}

/// Largest violation of the FCLS optimality conditions at `a`.
pub fn fcls_kkt_residual(y: &DVector<f64>, m: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    let g = m.transpose() * (m * a - y);
    let support: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    // On the support g_i + nu = 0; nu is estimated as the mean.
    let nu = -support.iter().map(|&i| g[i]).sum::<f64>() / support.len().max(1) as f64;
    let stationarity = support.iter().map(|&i| (g[i] + nu).abs()).fold(0.0, f64::max);
    let dual = (0..a.len())
        .filter(|i| !support.contains(i))
        .map(|i| (-(g[i] + nu)).max(0.0))
        .fold(0.0, f64::max);
    let primal = (a.sum() - 1.0).abs().max(a.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max));
    stationarity.max(dual).max(primal)
}
