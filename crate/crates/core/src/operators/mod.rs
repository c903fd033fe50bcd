//! Linear operators of the observation model and the regularizers.
//!
//! Spatial operators act on one band (or one abundance map) at a time, stored
//! row-major as a flat slice with explicit `rows` and `cols`. Blur and the
//! spatial gradients use circular boundaries; the spectral difference does
//! not.

pub mod fft;
mod noise;

pub use fft::{Circulant2d, Fft2d};
pub use noise::{add_noise_snr, empirical_snr_db, noise_variance_for_snr};

use nalgebra::DMatrix;

use crate::error::{FuvarError, Result};
use crate::types::{BlurKernel, Decimation};

fn check_grid(x: &[f64], rows: usize, cols: usize) -> Result<()> {
    if x.len() != rows * cols {
        return Err(FuvarError::InvalidDimensions(format!(
            "grid slice has {} entries, expected {rows}x{cols}",
            x.len()
        )));
    }
    Ok(())
}

fn check_kernel_fits(rows: usize, cols: usize, kernel: &BlurKernel) -> Result<()> {
    if kernel.side() > rows || kernel.side() > cols {
        return Err(FuvarError::InvalidDimensions(format!(
            "kernel of side {} does not fit a {rows}x{cols} grid",
            kernel.side()
        )));
    }
    Ok(())
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Circular convolution with `kernel`.
pub fn blur_apply(x: &[f64], rows: usize, cols: usize, kernel: &BlurKernel) -> Result<Vec<f64>> {
    check_grid(x, rows, cols)?;
    check_kernel_fits(rows, cols, kernel)?;
    let r = kernel.radius() as isize;
    let mut y = vec![0.0; rows * cols];
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            let mut acc = 0.0;
            for a in -r..=r {
                let src_row = wrap(i - a, rows) * cols;
                for b in -r..=r {
                    acc += kernel.at(a, b) * x[src_row + wrap(j - b, cols)];
                }
            }
            y[i as usize * cols + j as usize] = acc;
        }
    }
    Ok(y)
}

/// Adjoint of [`blur_apply`]: circular correlation with `kernel`.
pub fn blur_adjoint(y: &[f64], rows: usize, cols: usize, kernel: &BlurKernel) -> Result<Vec<f64>> {
    check_grid(y, rows, cols)?;
    check_kernel_fits(rows, cols, kernel)?;
    let r = kernel.radius() as isize;
    let mut x = vec![0.0; rows * cols];
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            let mut acc = 0.0;
            for a in -r..=r {
                let src_row = wrap(i + a, rows) * cols;
                for b in -r..=r {
                    acc += kernel.at(a, b) * y[src_row + wrap(j + b, cols)];
                }
            }
            x[i as usize * cols + j as usize] = acc;
        }
    }
    Ok(x)
}

fn check_divisible(rows: usize, cols: usize, dec: Decimation) -> Result<()> {
    if rows % dec.factor != 0 || cols % dec.factor != 0 {
        return Err(FuvarError::InvalidDimensions(format!(
            "grid {rows}x{cols} is not divisible by decimation factor {}",
            dec.factor
        )));
    }
    Ok(())
}

/// Keeps samples `phase + k * factor` along both axes.
pub fn decimate(x: &[f64], rows: usize, cols: usize, dec: Decimation) -> Result<Vec<f64>> {
    check_grid(x, rows, cols)?;
    check_divisible(rows, cols, dec)?;
    let (cr, cc) = (rows / dec.factor, cols / dec.factor);
    let mut y = Vec::with_capacity(cr * cc);
    for i in 0..cr {
        let src = (dec.phase + i * dec.factor) * cols;
        for j in 0..cc {
            y.push(x[src + dec.phase + j * dec.factor]);
        }
    }
    Ok(y)
}

/// Adjoint of [`decimate`]: places coarse samples on the fine grid, zeros
/// elsewhere.
pub fn upsample_zero_fill(
    y: &[f64],
    coarse_rows: usize,
    coarse_cols: usize,
    dec: Decimation,
) -> Result<Vec<f64>> {
    check_grid(y, coarse_rows, coarse_cols)?;
    let cols = coarse_cols * dec.factor;
    let mut x = vec![0.0; coarse_rows * dec.factor * cols];
    for i in 0..coarse_rows {
        let dst = (dec.phase + i * dec.factor) * cols;
        for j in 0..coarse_cols {
            x[dst + dec.phase + j * dec.factor] = y[i * coarse_cols + j];
        }
    }
    Ok(x)
}

/// Blur followed by decimation, evaluated only at the retained samples.
///
/// This is the per-band map from a fine image to the observed coarse image;
/// its adjoint scatters each coarse sample back through the kernel.
#[derive(Debug, Clone)]
pub struct BlurDecimate {
    rows: usize,
    cols: usize,
    dec: Decimation,
    /// `side^2` consecutive `(fine index, weight)` pairs per coarse sample.
    taps: Vec<(usize, f64)>,
    taps_per_sample: usize,
}

impl BlurDecimate {
    pub fn new(rows: usize, cols: usize, kernel: BlurKernel, dec: Decimation) -> Result<Self> {
        check_kernel_fits(rows, cols, &kernel)?;
        check_divisible(rows, cols, dec)?;
        let r = kernel.radius() as isize;
        let mut taps = Vec::new();
        for ci in 0..rows / dec.factor {
            let i = (dec.phase + ci * dec.factor) as isize;
            for cj in 0..cols / dec.factor {
                let j = (dec.phase + cj * dec.factor) as isize;
                for a in -r..=r {
                    for b in -r..=r {
                        taps.push((wrap(i - a, rows) * cols + wrap(j - b, cols), kernel.at(a, b)));
                    }
                }
            }
        }
        Ok(Self { rows, cols, dec, taps, taps_per_sample: kernel.side() * kernel.side() })
    }

    pub fn fine_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn coarse_rows(&self) -> usize {
        self.rows / self.dec.factor
    }

    pub fn coarse_cols(&self) -> usize {
        self.cols / self.dec.factor
    }

    pub fn coarse_len(&self) -> usize {
        self.coarse_rows() * self.coarse_cols()
    }

    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.fine_len());
        debug_assert_eq!(y.len(), self.coarse_len());
        for (out, taps) in y.iter_mut().zip(self.taps.chunks_exact(self.taps_per_sample)) {
            *out = taps.iter().map(|&(k, w)| w * x[k]).sum();
        }
    }

    /// Overwrites `x` with the adjoint applied to `y`.
    pub fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.fine_len());
        debug_assert_eq!(y.len(), self.coarse_len());
        x.iter_mut().for_each(|v| *v = 0.0);
        for (&v, taps) in y.iter().zip(self.taps.chunks_exact(self.taps_per_sample)) {
            for &(k, w) in taps {
                x[k] += w * v;
            }
        }
    }

    /// Applies the operator to `channels` interleaved images: `x` stores the
    /// `channels` values of each fine pixel contiguously, and so does `y` for
    /// each coarse pixel.
    pub fn forward_interleaved(&self, x: &[f64], channels: usize, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.fine_len() * channels);
        debug_assert_eq!(y.len(), self.coarse_len() * channels);
        for (out, taps) in y.chunks_exact_mut(channels).zip(self.taps.chunks_exact(self.taps_per_sample)) {
            out.iter_mut().for_each(|v| *v = 0.0);
            for &(k, w) in taps {
                let src = &x[k * channels..(k + 1) * channels];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
    }

    /// Adjoint of [`Self::forward_interleaved`]; overwrites `x`.
    pub fn adjoint_interleaved(&self, y: &[f64], channels: usize, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.fine_len() * channels);
        debug_assert_eq!(y.len(), self.coarse_len() * channels);
        x.iter_mut().for_each(|v| *v = 0.0);
        for (src, taps) in y.chunks_exact(channels).zip(self.taps.chunks_exact(self.taps_per_sample)) {
            for &(k, w) in taps {
                let dst = &mut x[k * channels..(k + 1) * channels];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.coarse_len()];
        self.forward_into(x, &mut y);
        y
    }

    pub fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.fine_len()];
        self.adjoint_into(y, &mut x);
        x
    }
}

/// `T T^T` for a blur-decimation `T`, which is circulant on the coarse grid:
/// `(T T^T x)[n] = sum_k g_k x[n + offset_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGram {
    rows: usize,
    cols: usize,
    taps: Vec<(usize, usize, f64)>,
}

impl CoarseGram {
    pub fn new(op: &BlurDecimate) -> Self {
        let mut e0 = vec![0.0; op.coarse_len()];
        e0[0] = 1.0;
        let row = op.forward(&op.adjoint(&e0));
        let cols = op.coarse_cols();
        let taps = row
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(n, &w)| (n / cols, n % cols, w))
            .collect();
        Self { rows: op.coarse_rows(), cols, taps }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Applies `T T^T` to `channels` interleaved coarse images; overwrites `y`.
    pub fn apply_interleaved(&self, x: &[f64], channels: usize, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.len() * channels);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let dst = &mut y[(i * self.cols + j) * channels..(i * self.cols + j + 1) * channels];
                for &(di, dj, w) in &self.taps {
                    let src_n = ((i + di) % self.rows) * self.cols + (j + dj) % self.cols;
                    let src = &x[src_n * channels..(src_n + 1) * channels];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
    }
}

/// `R X` for an `L_m x L_h` response and `L_h x K` spectra.
pub fn srf_apply(srf: &DMatrix<f64>, spectra: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if srf.ncols() != spectra.nrows() {
        return Err(FuvarError::InvalidDimensions(format!(
            "response has {} columns but spectra have {} bands",
            srf.ncols(),
            spectra.nrows()
        )));
    }
    Ok(srf * spectra)
}

/// `R^T Y`, adjoint of [`srf_apply`].
pub fn srf_adjoint(srf: &DMatrix<f64>, ms: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if srf.nrows() != ms.nrows() {
        return Err(FuvarError::InvalidDimensions(format!(
            "response has {} rows but the MS data has {} bands",
            srf.nrows(),
            ms.nrows()
        )));
    }
    Ok(srf.tr_mul(ms))
}

/// Convolution masks of the circular first differences, as
/// `(row_offset, col_offset, weight)` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMasks {
    pub h_h: Vec<(isize, isize, f64)>,
    pub h_v: Vec<(isize, isize, f64)>,
}

impl Default for GradientMasks {
    fn default() -> Self {
        // x[i, j+1] - x[i, j] and x[i+1, j] - x[i, j] as convolutions.
        Self {
            h_h: vec![(0, 0, -1.0), (0, -1, 1.0)],
            h_v: vec![(0, 0, -1.0), (-1, 0, 1.0)],
        }
    }
}

fn check_gradient_grid(x: &[f64], rows: usize, cols: usize) -> Result<()> {
    check_grid(x, rows, cols)?;
    if rows < 2 || cols < 2 {
        return Err(FuvarError::InvalidDimensions(format!(
            "gradients need at least a 2x2 grid, got {rows}x{cols}"
        )));
    }
    Ok(())
}

pub(crate) fn grad_h_into(x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        let row = &x[i * cols..(i + 1) * cols];
        let dst = &mut out[i * cols..(i + 1) * cols];
        for j in 0..cols - 1 {
            dst[j] = row[j + 1] - row[j];
        }
        dst[cols - 1] = row[0] - row[cols - 1];
    }
}

pub(crate) fn grad_v_into(x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        let next = ((i + 1) % rows) * cols;
        for j in 0..cols {
            out[i * cols + j] = x[next + j] - x[i * cols + j];
        }
    }
}

pub(crate) fn grad_h_adjoint_into(y: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        let row = &y[i * cols..(i + 1) * cols];
        let dst = &mut out[i * cols..(i + 1) * cols];
        dst[0] = row[cols - 1] - row[0];
        for j in 1..cols {
            dst[j] = row[j - 1] - row[j];
        }
    }
}

pub(crate) fn grad_v_adjoint_into(y: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        let prev = ((i + rows - 1) % rows) * cols;
        for j in 0..cols {
            out[i * cols + j] = y[prev + j] - y[i * cols + j];
        }
    }
}

macro_rules! grid_op {
    ($(#[$doc:meta])* $name:ident, $inner:ident) => {
        $(#[$doc])*
        pub fn $name(x: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
            check_gradient_grid(x, rows, cols)?;
            let mut out = vec![0.0; rows * cols];
            $inner(x, rows, cols, &mut out);
            Ok(out)
        }
    };
}

grid_op!(
    /// Circular horizontal first difference `x[i, j+1] - x[i, j]`.
    grad_h,
    grad_h_into
);
grid_op!(
    /// Circular vertical first difference `x[i+1, j] - x[i, j]`.
    grad_v,
    grad_v_into
);
grid_op!(grad_h_adjoint, grad_h_adjoint_into);
grid_op!(grad_v_adjoint, grad_v_adjoint_into);

/// Non-circular first-difference operator on spectra of length `L`,
/// represented by its `(L-1) x L` action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralDiffOperator {
    pub bands: usize,
}

impl SpectralDiffOperator {
    /// `(H psi)[k] = psi[k+1] - psi[k]`.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        psi.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `H^T d` for `d` of length `L - 1`.
    pub fn apply_adjoint(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bands];
        for (k, v) in d.iter().enumerate() {
            out[k] -= v;
            out[k + 1] += v;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.bands - 1, self.bands);
        for k in 0..self.bands - 1 {
            h[(k, k)] = -1.0;
            h[(k, k + 1)] = 1.0;
        }
        h
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[k]` sits at `(k, k+1)` and `(k+1, k)`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let mut v = self.diag[k] * x[k];
                if k > 0 {
                    v += self.off[k - 1] * x[k - 1];
                }
                if k + 1 < n {
                    v += self.off[k] * x[k + 1];
                }
                v
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = self.diag[k];
            if k + 1 < n {
                m[(k, k + 1)] = self.off[k];
                m[(k + 1, k)] = self.off[k];
            }
        }
        m
    }
}

/// `H^T H` for the non-circular first difference on `L` bands.
pub fn spectral_diff_gram(bands: usize) -> Result<SymTridiagonal> {
    if bands < 2 {
        return Err(FuvarError::InvalidDimensions(format!(
            "spectral difference needs at least 2 bands, got {bands}"
        )));
    }
    let mut diag = vec![2.0; bands];
    diag[0] = 1.0;
    diag[bands - 1] = 1.0;
    Ok(SymTridiagonal { diag, off: vec![-1.0; bands - 1] })
}
