//! Property checks shared by the crate tests and the acceptance suite. Each
//! returns the worst observed value so callers can both assert and report.

use fuvar::metrics;
use fuvar::operators::{
    blur_adjoint, blur_apply, decimate, grad_h, grad_h_adjoint, grad_v, grad_v_adjoint, srf_adjoint,
    srf_apply, upsample_zero_fill, BlurDecimate, SpectralDiffOperator,
};
use fuvar::solver::sylvester::SylvesterSolver;
use fuvar::solver::{
    admm_solve_a, admm_solve_psi, AbundanceSolver, AdmmAState, AdmmPsiState, B2Method, ScalingSolver,
};
use fuvar::{BlurKernel, Decimation, ImageCube, ScalingFactors};
use nalgebra::DMatrix;
use rand::Rng;

use super::*;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

fn rel(num: f64, den: f64) -> f64 {
    num / den.max(1e-300)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

// ---------------------------------------------------------------------------
// Adjointness

/// Worst `|<Tx, y> - <x, T^T y>| / (||x|| ||y||)` per operator pair.
pub fn adjointness(trials: usize, seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = rng(seed);
    let mut worst = vec![
        ("blur", 0.0f64),
        ("decimation", 0.0),
        ("blur+decimation", 0.0),
        ("spectral response", 0.0),
        ("horizontal gradient", 0.0),
        ("vertical gradient", 0.0),
        ("spectral difference", 0.0),
    ];
    let mut record = |i: usize, lhs: f64, rhs: f64, nx: f64, ny: f64| {
        worst[i].1 = worst[i].1.max((lhs - rhs).abs() / (nx * ny));
    };
    for _ in 0..trials {
        let d = rng.random_range(1..=4usize);
        let rows = d * rng.random_range(3..=6usize);
        let cols = d * rng.random_range(3..=6usize);
        let radius = rng.random_range(0..=1usize);
        let kernel = BlurKernel::gaussian(rng.random_range(0.5..2.0), radius).unwrap();
        let dec = Decimation::new(d, rng.random_range(0..d)).unwrap();
        let m = rows * cols;
        let (cr, cc) = (rows / d, cols / d);

        let x = random_vec(m, &mut rng);
        let y = random_vec(m, &mut rng);
        let fx = blur_apply(&x, rows, cols, &kernel).unwrap();
        let fty = blur_adjoint(&y, rows, cols, &kernel).unwrap();
        record(0, dot(&fx, &y), dot(&x, &fty), norm(&x), norm(&y));

        let yc = random_vec(cr * cc, &mut rng);
        let dx = decimate(&x, rows, cols, dec).unwrap();
        let dty = upsample_zero_fill(&yc, cr, cc, dec).unwrap();
        record(1, dot(&dx, &yc), dot(&x, &dty), norm(&x), norm(&yc));

        let op = BlurDecimate::new(rows, cols, kernel.clone(), dec).unwrap();
        record(2, dot(&op.forward(&x), &yc), dot(&x, &op.adjoint(&yc)), norm(&x), norm(&yc));

        let l = rng.random_range(4..12usize);
        let lm = rng.random_range(1..l);
        let srf = random_positive(lm, l, 0.0, 1.0, &mut rng);
        let s = random_matrix(l, 3, &mut rng);
        let t = random_matrix(lm, 3, &mut rng);
        let lhs = inner(&srf_apply(&srf, &s).unwrap(), &t);
        let rhs = inner(&s, &srf_adjoint(&srf, &t).unwrap());
        record(3, lhs, rhs, s.norm(), t.norm());

        let gx = grad_h(&x, rows, cols).unwrap();
        record(4, dot(&gx, &y), dot(&x, &grad_h_adjoint(&y, rows, cols).unwrap()), norm(&x), norm(&y));
        let gx = grad_v(&x, rows, cols).unwrap();
        record(5, dot(&gx, &y), dot(&x, &grad_v_adjoint(&y, rows, cols).unwrap()), norm(&x), norm(&y));

        let op = SpectralDiffOperator { bands: l };
        let p = random_vec(l, &mut rng);
        let q = random_vec(l - 1, &mut rng);
        record(6, dot(&op.apply(&p), &q), dot(&p, &op.apply_adjoint(&q)), norm(&p), norm(&q));
    }
    worst
}

// ---------------------------------------------------------------------------
// Metrics

pub struct NaiveMetrics {
    pub psnr: f64,
    pub sam: f64,
    pub ergas: f64,
    pub uiqi: f64,
}

/// Scalar-loop evaluation over `(row, col, band)` indices. `uiqi` treats the
/// whole band as one window, with the same `0/0 = 1` convention.
pub fn naive_metrics(z: &ImageCube, zh: &ImageCube, coarse_pixels: usize) -> NaiveMetrics {
    let (rows, cols, bands) = (z.rows(), z.cols(), z.bands());
    let at = |c: &ImageCube, i: usize, j: usize, b: usize| c.data()[b * rows * cols + i * cols + j];
    let m = (rows * cols) as f64;

    let mut psnr = 0.0;
    let mut ergas = 0.0;
    let mut uiqi = 0.0;
    for b in 0..bands {
        let mut peak = f64::NEG_INFINITY;
        let mut err = 0.0;
        let mut mean_h = 0.0;
        let mut mean_z = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let (u, v) = (at(z, i, j, b), at(zh, i, j, b));
                peak = peak.max(u);
                err += (u - v).powi(2);
                mean_h += v;
                mean_z += u;
            }
        }
        mean_h /= m;
        mean_z /= m;
        psnr += 10.0 * (m * peak * peak / err).log10();
        ergas += err / (mean_h * mean_h);

        let (mut vz, mut vh, mut c) = (0.0, 0.0, 0.0);
        for i in 0..rows {
            for j in 0..cols {
                let (u, v) = (at(z, i, j, b) - mean_z, at(zh, i, j, b) - mean_h);
                vz += u * u;
                vh += v * v;
                c += u * v;
            }
        }
        let q1 = if vz + vh == 0.0 { 1.0 } else { 2.0 * c / (vz + vh) };
        let den = mean_z * mean_z + mean_h * mean_h;
        let q2 = if den == 0.0 { 1.0 } else { 2.0 * mean_z * mean_h / den };
        uiqi += q1 * q2;
    }

    let mut sam = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let (mut d, mut nz, mut nh) = (0.0, 0.0, 0.0);
            for b in 0..bands {
                d += at(z, i, j, b) * at(zh, i, j, b);
                nz += at(z, i, j, b).powi(2);
                nh += at(zh, i, j, b).powi(2);
            }
            sam += (d / (nz.sqrt() * nh.sqrt())).clamp(-1.0, 1.0).acos();
        }
    }
    NaiveMetrics {
        psnr: psnr / bands as f64,
        sam: sam / m,
        ergas: 100.0 * (coarse_pixels as f64 / (bands as f64 * m) * ergas).sqrt(),
        uiqi: uiqi / bands as f64,
    }
}

fn random_cube(rows: usize, cols: usize, bands: usize, rng: &mut ChaCha8Rng) -> ImageCube {
    let data = (0..rows * cols * bands).map(|_| rng.random_range(0.05..1.0)).collect();
    ImageCube::new(rows, cols, bands, data).unwrap()
}

/// Largest deviation between library metrics and the scalar-loop oracle on
/// random 8x8x4 cube pairs, plus whether the identity case gives
/// `(inf, 0, 0, 1)`.
pub fn metric_agreement(trials: usize, seed: u64) -> (f64, bool) {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let z = random_cube(8, 8, 4, &mut rng);
        let zh = random_cube(8, 8, 4, &mut rng);
        let lib = metrics::evaluate(&z, &zh, 4, &metrics::MetricOptions { uiqi_patch: 8, ..Default::default() })
            .unwrap();
        let naive = naive_metrics(&z, &zh, 4);
        for (a, b) in [
            (lib.psnr_db, naive.psnr),
            (lib.sam_rad, naive.sam),
            (lib.ergas, naive.ergas),
            (lib.uiqi, naive.uiqi),
        ] {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let z = random_cube(8, 8, 4, &mut rng);
    let same = metrics::evaluate(&z, &z, 4, &metrics::MetricOptions::default()).unwrap();
    let identity = same.psnr_db == f64::INFINITY && same.sam_rad == 0.0 && same.ergas == 0.0 && same.uiqi == 1.0;
    (worst, identity)
}

// ---------------------------------------------------------------------------
// Closed-form updates

/// Random ADMM state for the abundance problem on `tiny`.
fn random_state_a(t: &Tiny, rho: f64, rng: &mut ChaCha8Rng) -> AdmmAState {
    let l = t.mh.bands();
    let p = t.mh.materials();
    let m = t.rows * t.cols;
    let n = t.t.nrows();
    let mut r = |a, b| random_matrix(a, b, rng);
    AdmmAState {
        b1: r(l, n),
        u1: r(l, n),
        b2: r(l, m),
        u2: r(l, m),
        b3: r(m, p),
        u3: r(m, p),
        b4: r(m, p),
        u4: r(m, p),
        b5: r(m, p),
        u5: r(m, p),
        b6: r(m, p),
        u6: r(m, p),
        rho,
    }
}

/// Worst relative first-order residual of every abundance and scaling
/// update over `trials` random states. Names follow the updated variable.
pub fn update_optimality(trials: usize, seed: u64) -> Vec<(&'static str, f64)> {
    let mut worst = vec![
        ("w", 0.0f64),
        ("B1", 0.0),
        ("B2 coarse", 0.0),
        ("B2 fine", 0.0),
        ("B3", 0.0),
        ("B4", 0.0),
        ("B5", 0.0),
        ("B6", 0.0),
        ("Psi-B", 0.0),
        ("Psi", 0.0),
    ];
    let mut rng = rng(seed);
    for trial in 0..trials {
        let tiny = tiny(&TinySpec::default(), seed.wrapping_mul(1000).wrapping_add(trial as u64));
        let rho = rng.random_range(0.5..2.0);
        let lambda_a = rng.random_range(0.05..0.5);
        let m = tiny.mh.matrix();
        let psi = random_positive(m.nrows(), m.ncols(), 0.8, 1.2, &mut rng);
        let k = &tiny.r * psi.component_mul(m);
        let scaled = psi.component_mul(m);
        let mut solver = AbundanceSolver::new(&tiny.obs, m, &scaled, lambda_a, rho).unwrap();
        solver.cg_tol = 1e-14;
        let s0 = random_state_a(&tiny, rho, &mut rng);
        let (hh, hv, tt) = (&tiny.hh, &tiny.hv, &tiny.t);

        // w: gradient of the smooth A-subproblem, in the P x M layout.
        let a = solver.update_w(&s0).transpose();
        let g_fit = -(k.transpose() * (&tiny.ym - &k * &a));
        let v2 = &s0.b2 + &s0.u2;
        let v3 = (&s0.b3 + &s0.u3).transpose();
        let v6 = (&s0.b6 + &s0.u6).transpose();
        let g = &g_fit - (m.transpose() * (&v2 - m * &a)) * rho - (&v3 - &a) * rho - (&v6 - &a) * rho;
        let scale = (k.transpose() * &tiny.ym).norm()
            + rho * ((m.transpose() * &v2).norm() + v3.norm() + v6.norm())
            + ((k.transpose() * &k + m.transpose() * m * rho) * &a).norm()
            + 2.0 * rho * a.norm();
        worst[0].1 = worst[0].1.max(rel(g.norm(), scale));

        // B1.
        let mut s = s0.clone();
        solver.update_b1(&mut s);
        let tb2 = &s.b2 * tt.transpose();
        let g = (&s.b1 - &tiny.yh) - (&tb2 + &s.u1 - &s.b1) * rho;
        let scale = tiny.yh.norm() + rho * (&tb2 + &s.u1).norm() + (1.0 + rho) * s.b1.norm();
        worst[1].1 = worst[1].1.max(rel(g.norm(), scale));

        // B2, both ways of solving it. `a` here is the w-update result.
        let a_mp = a.transpose();
        for (slot, method) in [(2, B2Method::Coarse), (3, B2Method::Fine)] {
            let mut s = s0.clone();
            solver.b2_method = method;
            solver.update_b2(&mut s, &a_mp);
            let ma = m * &a;
            let r1 = &s.b2 * tt.transpose() - &s.b1 + &s.u1;
            let g = &r1 * tt + (&s.b2 - &ma + &s.u2);
            let scale = ((&s.b1 - &s.u1) * tt).norm() + (&ma - &s.u2).norm() + s.b2.norm()
                + (&s.b2 * tt.transpose() * tt).norm();
            worst[slot].1 = worst[slot].1.max(rel(g.norm(), scale));
        }

        // B3.
        let mut s = s0.clone();
        solver.update_b3(&mut s, &a_mp);
        let r4 = &s.b4 - hh * &s.b3 + &s.u4;
        let r5 = &s.b5 - hv * &s.b3 + &s.u5;
        let g = (&s.b3 - &a_mp + &s.u3) - hh.transpose() * &r4 - hv.transpose() * &r5;
        let scale = (&a_mp - &s.u3).norm()
            + (hh.transpose() * (&s.b4 + &s.u4)).norm()
            + (hv.transpose() * (&s.b5 + &s.u5)).norm()
            + s.b3.norm()
            + (hh.transpose() * hh * &s.b3).norm()
            + (hv.transpose() * hv * &s.b3).norm();
        worst[4].1 = worst[4].1.max(rel(g.norm(), scale));

        // B4, B5: group soft thresholding per pixel.
        let mut s = s0.clone();
        solver.update_b4_b5(&mut s);
        for (slot, b, h, u) in [(5, &s.b4, hh, &s.u4), (6, &s.b5, hv, &s.u5)] {
            let v = h * &s.b3 - u;
            for row in 0..v.nrows() {
                let bv = b.row(row).transpose();
                let vv = v.row(row).transpose();
                let res = if bv.norm() > 0.0 {
                    let g = &bv * (lambda_a / bv.norm()) + (&bv - &vv) * rho;
                    rel(g.norm(), lambda_a + rho * vv.norm())
                } else {
                    // Zero is optimal iff rho ||v|| <= lambda.
                    ((rho * vv.norm() - lambda_a) / lambda_a).max(0.0)
                };
                worst[slot].1 = worst[slot].1.max(res);
            }
        }

        // B6: projection onto the nonnegative orthant.
        let mut s = s0.clone();
        solver.update_b6(&mut s, &a_mp);
        let v = &a_mp - &s.u6;
        for (b, v) in s.b6.iter().zip(v.iter()) {
            let res = (-b).max(0.0) + (v - b).max(0.0) + (b * (b - v)).abs();
            worst[7].1 = worst[7].1.max(res / v.abs().max(1.0));
        }

        // Scaling-factor updates at nonnegative abundances.
        let l1 = rng.random_range(0.01..1.0);
        let l2 = rng.random_range(0.01..10.0);
        let a_pos = random_positive(m.ncols(), tiny.rows * tiny.cols, 0.0, 1.0, &mut rng);
        let sol = ScalingSolver::new(&tiny.obs, m, &a_pos.transpose(), l1, l2, rho).unwrap();
        let mut ps = AdmmPsiState {
            b: random_positive(m.nrows(), m.ncols(), 0.0, 1.0, &mut rng),
            psi: random_positive(m.nrows(), m.ncols(), 0.5, 1.5, &mut rng),
            u: random_matrix(m.nrows(), m.ncols(), &mut rng) * 0.1,
            rho,
        };
        sol.update_b(&mut ps);
        let e = &tiny.ym - &tiny.r * &ps.b * &a_pos;
        let g = -(tiny.r.transpose() * &e * a_pos.transpose()) + (&ps.b - ps.psi.component_mul(m) + &ps.u) * rho;
        let scale = (tiny.r.transpose() * &tiny.ym * a_pos.transpose()).norm()
            + (tiny.r.transpose() * &tiny.r * &ps.b * &a_pos * a_pos.transpose()).norm()
            + rho * (ps.b.norm() + ps.psi.component_mul(m).norm() + ps.u.norm());
        worst[8].1 = worst[8].1.max(rel(g.norm(), scale));

        // Psi: only meaningful where the clamp is inactive, so make b + u
        // comfortably positive.
        ps.b = random_positive(m.nrows(), m.ncols(), 0.5, 1.5, &mut rng).component_mul(m);
        ps.u = random_matrix(m.nrows(), m.ncols(), &mut rng) * 0.01;
        sol.update_psi(&mut ps);
        assert!(ps.psi.iter().all(|v| *v > 0.0), "clamp active in an interior test state");
        let d = dense_spectral_diff(m.nrows());
        let g = ps.psi.map(|v| v - 1.0) * l1 + d.transpose() * &d * &ps.psi * l2
            - m.component_mul(&(&ps.b + &ps.u - ps.psi.component_mul(m))) * rho;
        let scale = l1 * (ps.psi.norm() + (ps.psi.len() as f64).sqrt())
            + l2 * (d.transpose() * &d * &ps.psi).norm()
            + rho * (m.component_mul(&(&ps.b + &ps.u)).norm() + m.component_mul(&ps.psi.component_mul(m)).norm());
        worst[9].1 = worst[9].1.max(rel(g.norm(), scale));
    }
    worst
}

/// Largest relative difference between the FFT `B3` solve and a dense solve
/// on an 8x8 grid.
pub fn b3_fft_vs_dense(trials: usize, seed: u64) -> f64 {
    let spec = TinySpec { rows: 8, cols: 8, factor: 2, ..TinySpec::default() };
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let t = tiny(&spec, seed + trial as u64);
        let m = t.mh.matrix();
        let mut solver = AbundanceSolver::new(&t.obs, m, m, 0.1, 1.0).unwrap();
        let s0 = random_state_a(&t, 1.0, &mut rng);
        let a = random_matrix(64, m.ncols(), &mut rng);
        let mut s = s0.clone();
        solver.update_b3(&mut s, &a);
        let lhs = DMatrix::identity(64, 64) + t.hh.transpose() * &t.hh + t.hv.transpose() * &t.hv;
        let rhs = &a - &s0.u3 + t.hh.transpose() * (&s0.b4 + &s0.u4) + t.hv.transpose() * (&s0.b5 + &s0.u5);
        let dense = lhs.lu().solve(&rhs).unwrap();
        worst = worst.max(rel((&s.b3 - &dense).norm(), dense.norm()));
    }
    worst
}

/// Relative residual of `(1/rho) L X R + X = C` for random symmetric
/// positive semidefinite `L`, `R`.
pub fn sylvester_residual(trials: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (a, b) = (rng.random_range(2..12usize), rng.random_range(2..6usize));
        let ga = random_matrix(a, a + 2, &mut rng);
        let gb = random_matrix(b, b + 3, &mut rng);
        let left = &ga * ga.transpose();
        let right = &gb * gb.transpose();
        let rho = rng.random_range(0.1..10.0);
        let c = random_matrix(a, b, &mut rng);
        let x = SylvesterSolver::new(&left, &right, rho).unwrap().solve(&c);
        let res = &left * &x * &right / rho + &x - &c;
        worst = worst.max(rel(res.norm(), c.norm()));
    }
    worst
}

// ---------------------------------------------------------------------------
// Subproblem solvers against slow oracles

pub struct OracleGap {
    pub admm: f64,
    pub oracle: f64,
}

impl OracleGap {
    pub fn gap(&self) -> f64 {
        relative_gap(self.admm, self.oracle)
    }
}

pub const ORACLE_LAMBDA_A: f64 = 0.01;
pub const ORACLE_LAMBDA_1: f64 = 0.5;
pub const ORACLE_LAMBDA_2: f64 = 1.0;

/// Abundance subproblem at the true scaling factors: ADMM versus the
/// primal-dual oracle, both scored with the dense objective.
pub fn abundance_oracle_gap(seed: u64, oracle_iters: usize) -> OracleGap {
    let t = tiny(&TinySpec::default(), seed);
    let psi = ScalingFactors::new(t.psi_true.clone()).unwrap();
    let (p, m) = t.a_true.shape();
    let a0 = DMatrix::from_element(p, m, 1.0 / p as f64);
    let (a, _) = admm_solve_a(&t.obs, &t.mh, &psi, &a0, ORACLE_LAMBDA_A, 1.0, 1e-12, 20_000).unwrap();
    let oracle = t.abundance_oracle(&t.psi_true, ORACLE_LAMBDA_A, oracle_iters);
    OracleGap {
        admm: t.abundance_objective(&t.psi_true, &a, ORACLE_LAMBDA_A),
        oracle: t.abundance_objective(&t.psi_true, &oracle, ORACLE_LAMBDA_A),
    }
}

/// Scaling-factor subproblem at the true abundances.
pub fn scaling_oracle_gap(seed: u64, oracle_iters: usize) -> OracleGap {
    let t = tiny(&TinySpec::default(), seed);
    let (l, p) = t.psi_true.shape();
    let (psi, _) = admm_solve_psi(
        &t.obs,
        &t.mh,
        &t.a_true,
        &ScalingFactors::ones(l, p),
        ORACLE_LAMBDA_1,
        ORACLE_LAMBDA_2,
        1.0,
        1e-12,
        20_000,
    )
    .unwrap();
    let oracle = t.scaling_oracle(&t.a_true, ORACLE_LAMBDA_1, ORACLE_LAMBDA_2, oracle_iters);
    OracleGap {
        admm: t.scaling_objective(&t.a_true, psi.matrix(), ORACLE_LAMBDA_1, ORACLE_LAMBDA_2),
        oracle: t.scaling_objective(&t.a_true, &oracle, ORACLE_LAMBDA_1, ORACLE_LAMBDA_2),
    }
}
