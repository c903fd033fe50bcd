//! Three-band composites written as 8-bit RGB PNG.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use fuvar::ImageCube;

use crate::error::{CliError, CliResult};

pub const STRETCH_QUANTILE: f64 = 0.999;

/// Nearest-rank quantile: the smallest sample with at least a fraction `q`
/// of the samples at or below it.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Maps `[0, q]` linearly onto `[0, 255]`, `q` being the channel's stretch
/// quantile; values outside are clipped.
pub fn stretch_channel(values: &[f64]) -> Vec<u8> {
    let top = quantile(values, STRETCH_QUANTILE);
    values
        .iter()
        .map(|&v| {
            let x = if top > 0.0 { (v / top).clamp(0.0, 1.0) } else { 0.0 };
            (x * 255.0).round() as u8
        })
        .collect()
}

/// Band index nearest to `wavelength` on a linear grid of `bands` samples
/// from `start` to `end`.
pub fn band_for_wavelength(wavelength: f64, start: f64, end: f64, bands: usize) -> CliResult<usize> {
    if bands < 2 || !(end > start) {
        return Err(CliError::Usage(format!("bad wavelength grid {start}..{end} over {bands} bands")));
    }
    if !(start..=end).contains(&wavelength) {
        return Err(CliError::Usage(format!("wavelength {wavelength} outside {start}..{end}")));
    }
    let step = (end - start) / (bands - 1) as f64;
    Ok(((wavelength - start) / step).round() as usize)
}

/// Interleaved RGB bytes of the composite of `bands` (red, green, blue).
pub fn composite(cube: &ImageCube, bands: [usize; 3]) -> CliResult<Vec<u8>> {
    if let Some(b) = bands.iter().find(|b| **b >= cube.bands()) {
        return Err(CliError::Usage(format!("band {b} out of range for a {}-band cube", cube.bands())));
    }
    let channels: Vec<Vec<u8>> = bands.iter().map(|&b| stretch_channel(cube.band(b))).collect();
    let mut rgb = Vec::with_capacity(cube.pixels() * 3);
    for n in 0..cube.pixels() {
        rgb.extend(channels.iter().map(|c| c[n]));
    }
    Ok(rgb)
}

pub fn write_png(path: &Path, width: usize, height: usize, rgb: &[u8]) -> CliResult<()> {
    let file = File::create(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header()?;
    w.write_image_data(rgb)?;
    w.finish()?;
    Ok(())
}

pub fn render_composite(cube: &ImageCube, bands: [usize; 3], path: &Path) -> CliResult<()> {
    let rgb = composite(cube, bands)?;
    write_png(path, cube.cols(), cube.rows(), &rgb)
}
