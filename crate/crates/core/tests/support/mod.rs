//! Dense reference operators, naive objectives and slow iterative oracles
//! used by the integration and acceptance tests. Everything here is built
//! from the definitions with explicit loops and never calls the solver code.

#![allow(dead_code)]

pub mod checks;

use fuvar::solver::Observations;
use fuvar::{BlurKernel, Decimation, EndmemberMatrix, ImageCube, ObservationModel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_positive(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Dense circular convolution `y[i,j] = sum k[a,b] x[i-a, j-b]`, `M x M`.
pub fn dense_blur(rows: usize, cols: usize, kernel: &BlurKernel) -> DMatrix<f64> {
    let r = kernel.radius() as isize;
    let m = rows * cols;
    let mut b = DMatrix::zeros(m, m);
    for i in 0..rows {
        for j in 0..cols {
            for a in -r..=r {
                for c in -r..=r {
                    let src = wrap(i as isize - a, rows) * cols + wrap(j as isize - c, cols);
                    b[(i * cols + j, src)] += kernel.at(a, c);
                }
            }
        }
    }
    b
}

/// Dense decimation, `N x M`.
pub fn dense_decimation(rows: usize, cols: usize, dec: Decimation) -> DMatrix<f64> {
    let (cr, cc) = (rows / dec.factor, cols / dec.factor);
    let mut s = DMatrix::zeros(cr * cc, rows * cols);
    for i in 0..cr {
        for j in 0..cc {
            s[(i * cc + j, (dec.phase + i * dec.factor) * cols + dec.phase + j * dec.factor)] = 1.0;
        }
    }
    s
}

/// Blur then decimate, `N x M`; a band matrix `X` maps to `X T^T`.
pub fn dense_blur_decimate(rows: usize, cols: usize, kernel: &BlurKernel, dec: Decimation) -> DMatrix<f64> {
    dense_decimation(rows, cols, dec) * dense_blur(rows, cols, kernel)
}

/// Circular horizontal difference `x[i, j+1] - x[i, j]`, `M x M`.
pub fn dense_grad_h(rows: usize, cols: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(rows * cols, rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            h[(i * cols + j, i * cols + j)] -= 1.0;
            h[(i * cols + j, i * cols + (j + 1) % cols)] += 1.0;
        }
    }
    h
}

/// Circular vertical difference `x[i+1, j] - x[i, j]`, `M x M`.
pub fn dense_grad_v(rows: usize, cols: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(rows * cols, rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            h[(i * cols + j, i * cols + j)] -= 1.0;
            h[(i * cols + j, ((i + 1) % rows) * cols + j)] += 1.0;
        }
    }
    h
}

/// Non-circular first difference on `l` bands, `(l-1) x l`.
pub fn dense_spectral_diff(l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(l - 1, l, |i, j| {
        if j == i + 1 {
            1.0
        } else if j == i {
            -1.0
        } else {
            0.0
        }
    })
}

pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Sum over columns of the Euclidean norm of each column.
pub fn norm21_columns(x: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for c in 0..x.ncols() {
        let mut s = 0.0;
        for r in 0..x.nrows() {
            s += x[(r, c)] * x[(r, c)];
        }
        total += s.sqrt();
    }
    total
}

/// A small fusion problem with dense copies of every operator.
pub struct Tiny {
    pub rows: usize,
    pub cols: usize,
    pub obs: Observations,
    pub model: ObservationModel,
    pub yh_cube: ImageCube,
    pub ym_cube: ImageCube,
    pub mh: EndmemberMatrix,
    /// `P x M` abundances and `L x P` scaling factors used to simulate.
    pub a_true: DMatrix<f64>,
    pub psi_true: DMatrix<f64>,
    /// `L x N` and `L_m x M` observations.
    pub yh: DMatrix<f64>,
    pub ym: DMatrix<f64>,
    /// `N x M` blur-decimation, `M x M` gradients, `L_m x L` response.
    pub t: DMatrix<f64>,
    pub hh: DMatrix<f64>,
    pub hv: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

pub struct TinySpec {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub ms_bands: usize,
    pub materials: usize,
    pub factor: usize,
    pub radius: usize,
    pub noise: f64,
}

impl Default for TinySpec {
    fn default() -> Self {
        Self { rows: 4, cols: 4, bands: 6, ms_bands: 3, materials: 2, factor: 2, radius: 1, noise: 0.01 }
    }
}

fn averaging_response(bands: usize, ms_bands: usize) -> DMatrix<f64> {
    let per = bands / ms_bands;
    DMatrix::from_fn(ms_bands, bands, |g, i| if i / per == g { 1.0 / per as f64 } else { 0.0 })
}

pub fn tiny(spec: &TinySpec, seed: u64) -> Tiny {
    let mut rng = rng(seed);
    let (rows, cols, l, p) = (spec.rows, spec.cols, spec.bands, spec.materials);
    let m = rows * cols;
    let kernel = BlurKernel::gaussian(1.0, spec.radius).unwrap();
    let dec = Decimation::new(spec.factor, 0).unwrap();
    let r = averaging_response(l, spec.ms_bands);
    let model = ObservationModel::new(kernel.clone(), dec, r.clone(), f64::INFINITY, f64::INFINITY).unwrap();

    let mh = random_positive(l, p, 0.1, 1.0, &mut rng);
    let mut a_true = random_positive(p, m, 0.0, 1.0, &mut rng);
    for n in 0..m {
        let s: f64 = a_true.column(n).sum();
        a_true.column_mut(n).scale_mut(1.0 / s);
    }
    let psi_true = random_positive(l, p, 0.8, 1.2, &mut rng);
    let t = dense_blur_decimate(rows, cols, &kernel, dec);
    let mut yh = &mh * &a_true * t.transpose();
    let mut ym = &r * psi_true.component_mul(&mh) * &a_true;
    for v in yh.iter_mut().chain(ym.iter_mut()) {
        *v += spec.noise * rng.random_range(-1.0..1.0);
    }
    let (cr, cc) = (rows / spec.factor, cols / spec.factor);
    let yh_cube = ImageCube::from_band_matrix(cr, cc, &yh).unwrap();
    let ym_cube = ImageCube::from_band_matrix(rows, cols, &ym).unwrap();
    let obs = Observations::new(&yh_cube, &ym_cube, &model).unwrap();
    Tiny {
        rows,
        cols,
        obs,
        model,
        yh_cube,
        ym_cube,
        mh: EndmemberMatrix::new(mh).unwrap(),
        a_true,
        psi_true,
        yh,
        ym,
        t,
        hh: dense_grad_h(rows, cols),
        hv: dense_grad_v(rows, cols),
        r,
    }
}

impl Tiny {
    /// Objective terms written out with the dense operators, `A` is `P x M`.
    pub fn abundance_objective(&self, psi: &DMatrix<f64>, a: &DMatrix<f64>, lambda_a: f64) -> f64 {
        let m = self.mh.matrix();
        let eh = &self.yh - m * a * self.t.transpose();
        let em = &self.ym - &self.r * psi.component_mul(m) * a;
        let tv = norm21_columns(&(a * self.hh.transpose())) + norm21_columns(&(a * self.hv.transpose()));
        0.5 * eh.norm_squared() + 0.5 * em.norm_squared() + lambda_a * tv
    }

    pub fn scaling_objective(&self, a: &DMatrix<f64>, psi: &DMatrix<f64>, l1: f64, l2: f64) -> f64 {
        let m = self.mh.matrix();
        let em = &self.ym - &self.r * psi.component_mul(m) * a;
        let d = dense_spectral_diff(psi.nrows()) * psi;
        let dev = psi.map(|v| v - 1.0);
        0.5 * em.norm_squared() + 0.5 * l1 * dev.norm_squared() + 0.5 * l2 * d.norm_squared()
    }

    /// Primal-dual splitting (Condat-Vu) for the abundance problem with the
    /// nonnegativity handled by projection and the total variation through
    /// its dual. Returns `P x M` abundances.
    pub fn abundance_oracle(&self, psi: &DMatrix<f64>, lambda_a: f64, iters: usize) -> DMatrix<f64> {
        let m = self.mh.matrix();
        let k = &self.r * psi.component_mul(m);
        let (p, npix) = self.a_true.shape();
        let grad = |a: &DMatrix<f64>| -> DMatrix<f64> {
            let eh = m * a * self.t.transpose() - &self.yh;
            let em = &k * a - &self.ym;
            m.transpose() * eh * &self.t + k.transpose() * em
        };
        // Lipschitz constant of the smooth part by power iteration.
        let mut v = DMatrix::from_element(p, npix, 1.0);
        let mut beta = 0.0;
        for _ in 0..500 {
            let g = grad(&v) - grad(&DMatrix::zeros(p, npix));
            beta = g.norm() / v.norm();
            v = g / beta.max(1e-300);
        }
        let beta = 1.01 * beta;
        let tau = 1.0 / beta;
        let sigma = beta / 16.0;
        let mut a = self.a_true.clone();
        let mut yh_dual = DMatrix::zeros(p, npix);
        let mut yv_dual = DMatrix::zeros(p, npix);
        let hh_t = self.hh.transpose();
        let hv_t = self.hv.transpose();
        for _ in 0..iters {
            let step = grad(&a) + &yh_dual * &self.hh + &yv_dual * &self.hv;
            let a_new = (&a - step * tau).map(|x| x.max(0.0));
            let extra = &a_new * 2.0 - &a;
            yh_dual += &extra * &hh_t * sigma;
            yv_dual += &extra * &hv_t * sigma;
            if lambda_a > 0.0 {
                for dual in [&mut yh_dual, &mut yv_dual] {
                    for c in 0..npix {
                        let nrm = dual.column(c).norm();
                        if nrm > lambda_a {
                            dual.column_mut(c).scale_mut(lambda_a / nrm);
                        }
                    }
                }
            } else {
                yh_dual.fill(0.0);
                yv_dual.fill(0.0);
            }
            a = a_new;
        }
        a
    }

    /// Projected gradient for the scaling-factor problem. Returns `L x P`.
    pub fn scaling_oracle(&self, a: &DMatrix<f64>, l1: f64, l2: f64, iters: usize) -> DMatrix<f64> {
        let m = self.mh.matrix();
        let (l, p) = m.shape();
        let d = dense_spectral_diff(l);
        let dtd = d.transpose() * &d;
        let aat = a * a.transpose();
        let rtr = self.r.transpose() * &self.r;
        let rt_ym_at = self.r.transpose() * &self.ym * a.transpose();
        let grad = |psi: &DMatrix<f64>| -> DMatrix<f64> {
            let b = psi.component_mul(m);
            let fit = (&rtr * b * &aat - &rt_ym_at).component_mul(m);
            fit + psi.map(|v| v - 1.0) * l1 + &dtd * psi * l2
        };
        let mut v = DMatrix::from_element(l, p, 1.0);
        let zero_grad = grad(&DMatrix::zeros(l, p));
        let mut lip = 0.0;
        for _ in 0..500 {
            let g = grad(&v) - &zero_grad;
            lip = g.norm() / v.norm();
            v = g / lip.max(1e-300);
        }
        let step = 1.0 / (1.01 * lip);
        let mut psi = DMatrix::from_element(l, p, 1.0);
        let mut prev = psi.clone();
        // Nesterov momentum with restart keeps the iteration count modest.
        let mut t_k: f64 = 1.0;
        for _ in 0..iters {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
            let y = &psi + (&psi - &prev) * ((t_k - 1.0) / t_next);
            let next = (&y - grad(&y) * step).map(|x| x.max(0.0));
            if inner(&(&next - &psi), &(&psi - &prev)) < 0.0 {
                t_k = 1.0;
            } else {
                t_k = t_next;
            }
            prev = psi;
            psi = next;
        }
        psi
    }
}

pub fn relative_gap(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-300)
}
