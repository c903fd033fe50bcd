//! Domain types shared by every stage of the pipeline.
//!
//! All matrices are `nalgebra::DMatrix<f64>`. Spatial grids are flattened in
//! row-major order (rows vary slowest), so row `l` of a band matrix is band
//! `l` of the cube read line by line, and column `n` is the spectrum of pixel
//! `n`.

use nalgebra::DMatrix;

use crate::error::{FuvarError, Result};

fn ensure_finite(data: &[f64], what: &str) -> Result<()> {
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(FuvarError::NonFinite(format!("{what}: entry {i} is {}", data[i])));
    }
    Ok(())
}

fn ensure_nonnegative(data: &[f64], what: &str) -> Result<()> {
    ensure_finite(data, what)?;
    if let Some(i) = data.iter().position(|v| *v < 0.0) {
        return Err(FuvarError::InvalidParameter(format!(
            "{what}: entry {i} is negative ({})",
            data[i]
        )));
    }
    Ok(())
}

/// A `rows x cols x bands` radiance cube.
///
/// Storage is band-major, then row-major within a band, which is also the
/// on-disk payload order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCube {
    rows: usize,
    cols: usize,
    bands: usize,
    data: Vec<f64>,
}

impl ImageCube {
    pub fn new(rows: usize, cols: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(FuvarError::InvalidDimensions(format!(
                "cube dimensions must be positive, got {rows}x{cols}x{bands}"
            )));
        }
        let expected = rows * cols * bands;
        if data.len() != expected {
            return Err(FuvarError::PayloadMismatch { expected, found: data.len() });
        }
        ensure_finite(&data, "image cube")?;
        Ok(Self { rows, cols, bands, data })
    }

    /// Builds a cube from an `L x M` band matrix on a `rows x cols` grid.
    pub fn from_band_matrix(rows: usize, cols: usize, matrix: &DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() != rows * cols {
            return Err(FuvarError::InvalidDimensions(format!(
                "band matrix has {} columns, grid {rows}x{cols} needs {}",
                matrix.ncols(),
                rows * cols
            )));
        }
        // DMatrix is column-major, so the transpose's storage is the
        // row-major layout of the original.
        let data = matrix.transpose().as_slice().to_vec();
        Self::new(rows, cols, matrix.nrows(), data)
    }

    /// The `L x M` matrix view: row `l` is band `l` flattened row-major.
    pub fn to_band_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.bands, self.pixels(), &self.data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let m = self.pixels();
        &self.data[b * m..(b + 1) * m]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `L x P` matrix of endmember spectra, one material per column.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberMatrix(DMatrix<f64>);

impl EndmemberMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() == 0 || matrix.ncols() >= matrix.nrows() {
            return Err(FuvarError::InvalidDimensions(format!(
                "endmember matrix must have fewer materials than bands, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        ensure_nonnegative(matrix.as_slice(), "endmember matrix")?;
        Ok(Self(matrix))
    }

    pub fn bands(&self) -> usize {
        self.0.nrows()
    }

    pub fn materials(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// `P x M` nonnegative abundance matrix on a `rows x cols` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMap {
    rows: usize,
    cols: usize,
    data: DMatrix<f64>,
}

impl AbundanceMap {
    pub fn new(rows: usize, cols: usize, data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() != rows * cols || data.nrows() == 0 {
            return Err(FuvarError::InvalidDimensions(format!(
                "abundance matrix {}x{} does not match grid {rows}x{cols}",
                data.nrows(),
                data.ncols()
            )));
        }
        ensure_nonnegative(data.as_slice(), "abundance map")?;
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn materials(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }
}

/// `L x P` matrix of per-band, per-material multiplicative scaling factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFactors(DMatrix<f64>);

impl ScalingFactors {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        ensure_nonnegative(matrix.as_slice(), "scaling factors")?;
        Ok(Self(matrix))
    }

    /// The no-variability point `1 1^T`.
    pub fn ones(bands: usize, materials: usize) -> Self {
        Self(DMatrix::from_element(bands, materials, 1.0))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Square, odd-sized, nonnegative point spread function that sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    radius: usize,
    weights: Vec<f64>,
}

impl BlurKernel {
    /// `weights` is row-major with side `2 * radius + 1`.
    pub fn from_weights(radius: usize, weights: Vec<f64>) -> Result<Self> {
        let side = 2 * radius + 1;
        if weights.len() != side * side {
            return Err(FuvarError::InvalidDimensions(format!(
                "kernel of radius {radius} needs {} weights, got {}",
                side * side,
                weights.len()
            )));
        }
        ensure_nonnegative(&weights, "blur kernel")?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FuvarError::InvalidParameter(format!(
                "blur kernel must sum to 1, sums to {total}"
            )));
        }
        Ok(Self { radius, weights })
    }

    /// Isotropic Gaussian truncated at `radius` and renormalized to sum 1.
    pub fn gaussian(sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(FuvarError::InvalidParameter(format!("gaussian sigma {sigma}")));
        }
        let r = radius as isize;
        let mut weights = Vec::with_capacity((2 * radius + 1).pow(2));
        for a in -r..=r {
            for b in -r..=r {
                let d2 = (a * a + b * b) as f64;
                weights.push((-d2 / (2.0 * sigma * sigma)).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self::from_weights(radius, weights)
    }

    /// Unit-variance Gaussian truncated at four standard deviations (9x9).
    pub fn default_psf() -> Self {
        Self::gaussian(1.0, 4).expect("valid default kernel")
    }

    /// The identity (no blur).
    pub fn identity() -> Self {
        Self { radius: 0, weights: vec![1.0] }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(a, b)` with `a, b` in `[-radius, radius]`.
    pub fn at(&self, a: isize, b: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((a + r) as usize) * self.side() + (b + r) as usize]
    }
}

/// Keeps every `factor`-th sample per axis, starting at `phase`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decimation {
    pub factor: usize,
    pub phase: usize,
}

impl Decimation {
    pub fn new(factor: usize, phase: usize) -> Result<Self> {
        if factor == 0 || phase >= factor {
            return Err(FuvarError::InvalidParameter(format!(
                "decimation factor {factor} with phase {phase}"
            )));
        }
        Ok(Self { factor, phase })
    }
}

/// Blur, decimation, spectral response and noise levels of the two sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    pub blur: BlurKernel,
    pub decimation: Decimation,
    /// `L_m x L_h` spectral response matrix.
    pub srf: DMatrix<f64>,
    /// `f64::INFINITY` disables noise.
    pub snr_hs_db: f64,
    pub snr_ms_db: f64,
}

impl ObservationModel {
    pub fn new(
        blur: BlurKernel,
        decimation: Decimation,
        srf: DMatrix<f64>,
        snr_hs_db: f64,
        snr_ms_db: f64,
    ) -> Result<Self> {
        ensure_nonnegative(srf.as_slice(), "spectral response")?;
        for (i, row) in srf.row_iter().enumerate() {
            if !row.iter().any(|v| *v > 0.0) {
                return Err(FuvarError::InvalidParameter(format!(
                    "spectral response row {i} has no positive entry"
                )));
            }
        }
        if snr_hs_db.is_nan() || snr_ms_db.is_nan() {
            return Err(FuvarError::InvalidParameter("SNR target is NaN".into()));
        }
        Ok(Self { blur, decimation, srf, snr_hs_db, snr_ms_db })
    }

    pub fn hs_bands(&self) -> usize {
        self.srf.ncols()
    }

    pub fn ms_bands(&self) -> usize {
        self.srf.nrows()
    }
}

/// Parameters of the alternating solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FuvarConfig {
    /// Number of endmembers `P`.
    pub endmembers: usize,
    pub lambda_a: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub rho: f64,
    pub outer_max_iters: usize,
    pub outer_rel_tol: f64,
    pub admm_max_iters: usize,
    pub admm_rel_tol: f64,
    pub rng_seed: u64,
    /// Hold `Psi` at `1 1^T` and only solve for the abundances.
    pub freeze_psi: bool,
}

impl Default for FuvarConfig {
    fn default() -> Self {
        Self {
            endmembers: 30,
            lambda_a: 1e-4,
            lambda_1: 0.01,
            lambda_2: 1e4,
            rho: 1.0,
            outer_max_iters: 10,
            outer_rel_tol: 1e-3,
            admm_max_iters: 100,
            admm_rel_tol: 1e-4,
            rng_seed: 0,
            freeze_psi: false,
        }
    }
}

impl FuvarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(FuvarError::InvalidParameter(what.to_string()));
        if self.endmembers == 0 {
            return bad("endmember count must be positive");
        }
        for (name, v) in [
            ("lambda_a", self.lambda_a),
            ("lambda_1", self.lambda_1),
            ("lambda_2", self.lambda_2),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(&format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return bad("rho must be positive");
        }
        if !(self.outer_rel_tol > 0.0) || !(self.admm_rel_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.outer_max_iters == 0 || self.admm_max_iters == 0 {
            return bad("iteration caps must be at least 1");
        }
        Ok(())
    }
}
