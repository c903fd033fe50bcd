use nalgebra::DMatrix;

use crate::error::{FuvarError, Result};

/// Keys cubic convolution kernel with `a = -0.5` (Catmull-Rom).
fn cubic_weight(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (A + 2.0) * x * x * x - (A + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        A * x * x * x - 5.0 * A * x * x + 8.0 * A * x - 4.0 * A
    } else {
        0.0
    }
}

/// Interpolation taps for each fine index: four clamped coarse indices and
/// their weights. Fine index `i` sits at coarse coordinate `(i - phase) / d`.
fn taps(coarse_len: usize, factor: usize, phase: usize) -> Vec<([usize; 4], [f64; 4])> {
    (0..coarse_len * factor)
        .map(|i| {
            let u = (i as f64 - phase as f64) / factor as f64;
            let base = u.floor();
            let t = u - base;
            let mut idx = [0usize; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                let offset = k as isize - 1;
                let c = (base as isize + offset).clamp(0, coarse_len as isize - 1);
                idx[k] = c as usize;
                w[k] = cubic_weight(t - offset as f64);
            }
            (idx, w)
        })
        .collect()
}

/// Separable bicubic upsampling of each row of `coarse` (a `P x N` stack of
/// `coarse_rows x coarse_cols` maps) by `factor`, with replicated edges.
/// Negative overshoot is clipped to zero.
pub fn bicubic_upsample(
    coarse: &DMatrix<f64>,
    coarse_rows: usize,
    coarse_cols: usize,
    factor: usize,
    phase: usize,
) -> Result<DMatrix<f64>> {
    if factor == 0 || phase >= factor.max(1) {
        return Err(FuvarError::InvalidParameter(format!(
            "upsampling factor {factor}, phase {phase}"
        )));
    }
    if coarse.ncols() != coarse_rows * coarse_cols {
        return Err(FuvarError::InvalidDimensions(format!(
            "{} pixels on a {coarse_rows}x{coarse_cols} grid",
            coarse.ncols()
        )));
    }
    let (rows, cols) = (coarse_rows * factor, coarse_cols * factor);
    let row_taps = taps(coarse_rows, factor, phase);
    let col_taps = taps(coarse_cols, factor, phase);
    let mut out = DMatrix::zeros(coarse.nrows(), rows * cols);
    let mut wide = vec![0.0; coarse_rows * cols];
    for p in 0..coarse.nrows() {
        for r in 0..coarse_rows {
            for (j, (idx, w)) in col_taps.iter().enumerate() {
                wide[r * cols + j] =
                    (0..4).map(|k| w[k] * coarse[(p, r * coarse_cols + idx[k])]).sum();
            }
        }
        for (i, (idx, w)) in row_taps.iter().enumerate() {
            for j in 0..cols {
                let v: f64 = (0..4).map(|k| w[k] * wide[idx[k] * cols + j]).sum();
                out[(p, i * cols + j)] = v.max(0.0);
            }
        }
    }
    Ok(out)
}
