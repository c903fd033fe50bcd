//! Two-dimensional FFTs and circulant (circular convolution) operators.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized forward / normalized inverse 2-D DFT on a fixed grid.
pub struct Fft2d {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    column: Vec<Complex64>,
}

impl Fft2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
            column: vec![Complex64::default(); rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.rows * self.cols);
        let (row_plan, col_plan) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row_plan.process(data);
        for c in 0..self.cols {
            for r in 0..self.rows {
                self.column[r] = data[r * self.cols + c];
            }
            col_plan.process(&mut self.column);
            for r in 0..self.rows {
                data[r * self.cols + c] = self.column[r];
            }
        }
        if inverse {
            let scale = 1.0 / (self.rows * self.cols) as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    pub fn forward_real(&mut self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }
}

/// A circular convolution `y[i,j] = sum_{a,b} h[a,b] x[i-a, j-b]` applied in
/// the Fourier domain.
pub struct Circulant2d {
    rows: usize,
    cols: usize,
    transfer: Vec<Complex64>,
}

impl Circulant2d {
    /// `mask` holds `(row_offset, col_offset, weight)` taps.
    pub fn from_taps(rows: usize, cols: usize, mask: &[(isize, isize, f64)]) -> Self {
        let mut h = vec![0.0; rows * cols];
        for &(a, b, w) in mask {
            let i = a.rem_euclid(rows as isize) as usize;
            let j = b.rem_euclid(cols as isize) as usize;
            h[i * cols + j] += w;
        }
        let transfer = Fft2d::new(rows, cols).forward_real(&h);
        Self { rows, cols, transfer }
    }

    /// The DFT of the embedded convolution mask.
    pub fn transfer(&self) -> &[Complex64] {
        &self.transfer
    }

    fn run(&self, fft: &mut Fft2d, x: &[f64], adjoint: bool) -> Vec<f64> {
        assert_eq!((fft.rows(), fft.cols()), (self.rows, self.cols));
        let mut buf = fft.forward_real(x);
        for (v, h) in buf.iter_mut().zip(&self.transfer) {
            *v *= if adjoint { h.conj() } else { *h };
        }
        fft.inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    pub fn apply(&self, fft: &mut Fft2d, x: &[f64]) -> Vec<f64> {
        self.run(fft, x, false)
    }

    pub fn apply_adjoint(&self, fft: &mut Fft2d, x: &[f64]) -> Vec<f64> {
        self.run(fft, x, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let mut fft = Fft2d::new(6, 5);
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut buf = fft.forward_real(&x);
        fft.inverse(&mut buf);
        for (a, b) in x.iter().zip(&buf) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn shift_tap_shifts() {
        let mut fft = Fft2d::new(4, 4);
        let shift = Circulant2d::from_taps(4, 4, &[(1, 0, 1.0)]);
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let y = shift.apply(&mut fft, &x);
        assert!((y[4] - 1.0).abs() < 1e-12);
        assert!(y.iter().enumerate().all(|(i, v)| i == 4 || v.abs() < 1e-12));
    }
}
