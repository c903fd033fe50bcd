//! Reconstruction quality: PSNR, SAM, ERGAS and UIQI between a reference
//! cube `z` and an estimate `zh`.

use crate::error::{FuvarError, Result};
use crate::types::ImageCube;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub sam_rad: f64,
    pub ergas: f64,
    pub uiqi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    /// Use the peak itself instead of its square in the PSNR numerator.
    pub psnr_peak_unsquared: bool,
    /// Normalize ERGAS by the reference band means instead of the estimate's.
    pub ergas_reference_mean: bool,
    pub uiqi_patch: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { psnr_peak_unsquared: false, ergas_reference_mean: false, uiqi_patch: 32 }
    }
}

fn check_same(z: &ImageCube, zh: &ImageCube) -> Result<()> {
    if (z.rows(), z.cols(), z.bands()) != (zh.rows(), zh.cols(), zh.bands()) {
        return Err(FuvarError::InvalidDimensions(format!(
            "reference is {}x{}x{}, estimate is {}x{}x{}",
            z.rows(),
            z.cols(),
            z.bands(),
            zh.rows(),
            zh.cols(),
            zh.bands()
        )));
    }
    Ok(())
}

fn sq_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean over bands of `10 log10(M peak^2 / ||z_l - zh_l||^2)`, with the peak
/// taken as the band maximum of the reference. Infinite if any band matches
/// exactly.
pub fn psnr(z: &ImageCube, zh: &ImageCube, peak_unsquared: bool) -> Result<f64> {
    check_same(z, zh)?;
    let m = z.pixels() as f64;
    let mut total = 0.0;
    for b in 0..z.bands() {
        let err = sq_err(z.band(b), zh.band(b));
        if err == 0.0 {
            return Ok(f64::INFINITY);
        }
        let peak = z.band(b).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let num = if peak_unsquared { peak } else { peak * peak };
        total += 10.0 * (m * num / err).log10();
    }
    Ok(total / z.bands() as f64)
}

/// Mean spectral angle in radians. A pixel where both spectra vanish counts
/// as angle 0.
///
/// The angle is `2 atan2(|a/|a| - b/|b||, |a/|a| + b/|b||)`, which stays
/// accurate for nearly parallel spectra where `acos` of the cosine does not.
pub fn sam(z: &ImageCube, zh: &ImageCube) -> Result<f64> {
    check_same(z, zh)?;
    let (m, l) = (z.pixels(), z.bands());
    let (a, b) = (z.data(), zh.data());
    let mut total = 0.0;
    for n in 0..m {
        let (mut na, mut nb) = (0.0, 0.0);
        for k in 0..l {
            na += a[k * m + n] * a[k * m + n];
            nb += b[k * m + n] * b[k * m + n];
        }
        match (na == 0.0, nb == 0.0) {
            (true, true) => {}
            (false, false) => {
                let (na, nb) = (na.sqrt(), nb.sqrt());
                let (mut diff, mut sum) = (0.0, 0.0);
                for k in 0..l {
                    let (x, y) = (a[k * m + n] / na, b[k * m + n] / nb);
                    diff += (x - y) * (x - y);
                    sum += (x + y) * (x + y);
                }
                total += 2.0 * diff.sqrt().atan2(sum.sqrt());
            }
            _ => {
                return Err(FuvarError::InvalidParameter(format!(
                    "pixel {n} has a zero spectrum in only one image"
                )))
            }
        }
    }
    Ok(total / m as f64)
}

/// `100 sqrt(N / (L M) sum_l ||z_l - zh_l||^2 / mean(zh_l)^2)` with `N` the
/// coarse pixel count.
pub fn ergas(z: &ImageCube, zh: &ImageCube, coarse_pixels: usize, reference_mean: bool) -> Result<f64> {
    check_same(z, zh)?;
    let m = z.pixels() as f64;
    let mut sum = 0.0;
    for b in 0..z.bands() {
        let norm_band = if reference_mean { z.band(b) } else { zh.band(b) };
        let mean = norm_band.iter().sum::<f64>() / m;
        if mean == 0.0 {
            return Err(FuvarError::InvalidParameter(format!("band {b} has zero mean")));
        }
        sum += sq_err(z.band(b), zh.band(b)) / (mean * mean);
    }
    Ok(100.0 * (coarse_pixels as f64 / (z.bands() as f64 * m) * sum).sqrt())
}

/// `2 x y / (x^2 + y^2)`-type ratio where `0 / 0` counts as perfect agreement.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Quality index of one pair of equally sized sample sets.
fn quality_index(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    let norm = (n - 1.0).max(1.0);
    let (vx, vy, cxy) = (vx / norm, vy / norm, cxy / norm);
    ratio(2.0 * cxy, vx + vy) * ratio(2.0 * mx * my, mx * mx + my * my)
}

/// Mean quality index over bands and non-overlapping `patch x patch` blocks.
/// Blocks that would cross the image border are skipped; an image smaller
/// than one block in either direction is treated as a single block.
pub fn uiqi(z: &ImageCube, zh: &ImageCube, patch: usize) -> Result<f64> {
    check_same(z, zh)?;
    if patch == 0 {
        return Err(FuvarError::InvalidParameter("patch size must be positive".into()));
    }
    let (rows, cols) = (z.rows(), z.cols());
    let blocks: Vec<(usize, usize, usize, usize)> = if rows < patch || cols < patch {
        vec![(0, 0, rows, cols)]
    } else {
        (0..rows / patch)
            .flat_map(|bi| (0..cols / patch).map(move |bj| (bi * patch, bj * patch, patch, patch)))
            .collect()
    };
    let mut total = 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for b in 0..z.bands() {
        let (zb, hb) = (z.band(b), zh.band(b));
        for &(r0, c0, h, w) in &blocks {
            xs.clear();
            ys.clear();
            for i in r0..r0 + h {
                xs.extend_from_slice(&zb[i * cols + c0..i * cols + c0 + w]);
                ys.extend_from_slice(&hb[i * cols + c0..i * cols + c0 + w]);
            }
            total += quality_index(&xs, &ys);
        }
    }
    Ok(total / (z.bands() * blocks.len()) as f64)
}

pub fn evaluate(z: &ImageCube, zh: &ImageCube, coarse_pixels: usize, opts: &MetricOptions) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr_db: psnr(z, zh, opts.psnr_peak_unsquared)?,
        sam_rad: sam(z, zh)?,
        ergas: ergas(z, zh, coarse_pixels, opts.ergas_reference_mean)?,
        uiqi: uiqi(z, zh, opts.uiqi_patch)?,
    })
}
