use nalgebra::DMatrix;

use crate::error::{FuvarError, Result};
use crate::operators::BlurDecimate;
use crate::types::{ImageCube, ObservationModel};

/// The two observed images together with the operators that produced them.
///
/// The HS image is held band-interleaved (`L_h x N`, one column per pixel)
/// so that blur and decimation run over all bands at once; the MS image is
/// held as `M x L_m`.
#[derive(Debug, Clone)]
pub struct Observations {
    rows: usize,
    cols: usize,
    yh: DMatrix<f64>,
    ym: DMatrix<f64>,
    op: BlurDecimate,
    srf: DMatrix<f64>,
}

impl Observations {
    pub fn new(yh: &ImageCube, ym: &ImageCube, model: &ObservationModel) -> Result<Self> {
        let d = model.decimation.factor;
        let (rows, cols) = (ym.rows(), ym.cols());
        if yh.rows() * d != rows || yh.cols() * d != cols {
            return Err(FuvarError::InvalidDimensions(format!(
                "HS grid {}x{} times factor {d} does not match MS grid {rows}x{cols}",
                yh.rows(),
                yh.cols()
            )));
        }
        if yh.bands() != model.hs_bands() || ym.bands() != model.ms_bands() {
            return Err(FuvarError::InvalidDimensions(format!(
                "cubes have {} and {} bands, spectral response is {}x{}",
                yh.bands(),
                ym.bands(),
                model.ms_bands(),
                model.hs_bands()
            )));
        }
        let op = BlurDecimate::new(rows, cols, model.blur.clone(), model.decimation)?;
        Ok(Self {
            rows,
            cols,
            yh: yh.to_band_matrix(),
            ym: DMatrix::from_column_slice(ym.pixels(), ym.bands(), ym.data()),
            op,
            srf: model.srf.clone(),
        })
    }

    /// Fine grid rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn coarse_pixels(&self) -> usize {
        self.op.coarse_len()
    }

    pub fn hs_bands(&self) -> usize {
        self.yh.nrows()
    }

    pub fn ms_bands(&self) -> usize {
        self.ym.ncols()
    }

    /// Observed HS image, `L_h x N`.
    pub fn yh(&self) -> &DMatrix<f64> {
        &self.yh
    }

    /// Observed MS image, `M x L_m`.
    pub fn ym(&self) -> &DMatrix<f64> {
        &self.ym
    }

    pub fn op(&self) -> &BlurDecimate {
        &self.op
    }

    pub fn srf(&self) -> &DMatrix<f64> {
        &self.srf
    }

    /// Blur and decimate every row of an `K x M` matrix.
    pub fn blur_decimate(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), self.coarse_pixels());
        self.op.forward_interleaved(x.as_slice(), x.nrows(), out.as_mut_slice());
        out
    }

    /// Adjoint of [`Self::blur_decimate`], `K x N` to `K x M`.
    pub fn blur_decimate_adjoint(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(y.nrows(), self.pixels());
        self.op.adjoint_interleaved(y.as_slice(), y.nrows(), out.as_mut_slice());
        out
    }
}
