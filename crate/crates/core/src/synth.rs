//! Synthetic scenes: smooth random abundances, procedural endmember spectra,
//! piecewise-linear scaling factors, and the two observations with noise.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::{FuvarError, Result};
use crate::operators::{add_noise_snr, BlurDecimate, Fft2d};
use crate::types::{
    AbundanceMap, BlurKernel, Decimation, EndmemberMatrix, ImageCube, ObservationModel,
    ScalingFactors,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub rows: usize,
    pub cols: usize,
    pub materials: usize,
    pub bands: usize,
    pub decimation: usize,
    pub decimation_phase: usize,
    pub ms_bands: usize,
    /// `f64::INFINITY` disables noise.
    pub snr_hs_db: f64,
    pub snr_ms_db: f64,
    pub psi_breakpoints: usize,
    pub psi_amplitude: f64,
    /// Exponent `s` of the field power spectrum `(1 + |k|^2)^-s`.
    pub grf_smoothness: f64,
    /// Standard deviation of each field before the softmax; larger values
    /// give purer pixels.
    pub grf_contrast: f64,
    pub rng_seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            rows: 100,
            cols: 100,
            materials: 3,
            bands: 224,
            decimation: 4,
            decimation_phase: 0,
            ms_bands: 16,
            snr_hs_db: 30.0,
            snr_ms_db: 40.0,
            psi_breakpoints: 5,
            psi_amplitude: 0.2,
            grf_smoothness: 2.0,
            grf_contrast: 3.0,
            rng_seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(FuvarError::InvalidParameter(s));
        if self.rows == 0 || self.cols == 0 || self.bands < 2 {
            return bad(format!("scene {}x{} with {} bands", self.rows, self.cols, self.bands));
        }
        if self.materials < 2 || self.materials >= self.bands {
            return bad(format!("{} materials for {} bands", self.materials, self.bands));
        }
        if self.ms_bands == 0 || self.ms_bands > self.bands {
            return bad(format!("{} MS bands for {} HS bands", self.ms_bands, self.bands));
        }
        Decimation::new(self.decimation, self.decimation_phase)?;
        if self.rows % self.decimation != 0 || self.cols % self.decimation != 0 {
            return bad(format!("grid {}x{} not divisible by {}", self.rows, self.cols, self.decimation));
        }
        if !(self.grf_smoothness >= 0.0) || !(self.grf_contrast >= 0.0) {
            return bad("GRF parameters must be nonnegative".into());
        }
        if self.snr_hs_db.is_nan() || self.snr_ms_db.is_nan() {
            return bad("SNR is NaN".into());
        }
        Ok(())
    }
}

/// Independent random streams, so that changing one part of a spec leaves
/// the draws of the other parts untouched.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const STREAM_ABUNDANCES: u64 = 1;
const STREAM_ENDMEMBERS: u64 = 2;
const STREAM_SCALING: u64 = 3;
const STREAM_NOISE_HS: u64 = 4;
const STREAM_NOISE_MS: u64 = 5;

/// A zero-mean, unit-variance field with power spectrum `(1 + |k|^2)^-s`,
/// `k` in integer cycles per image.
fn gaussian_field(rows: usize, cols: usize, smoothness: f64, fft: &mut Fft2d, rng: &mut impl Rng) -> Vec<f64> {
    let mut buf: Vec<Complex64> =
        (0..rows * cols).map(|_| Complex64::new(rng.sample(StandardNormal), 0.0)).collect();
    fft.forward(&mut buf);
    let freq = |i: usize, n: usize| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    for i in 0..rows {
        for j in 0..cols {
            let k2 = freq(i, rows).powi(2) + freq(j, cols).powi(2);
            buf[i * cols + j] *= (1.0 + k2).powf(-smoothness / 2.0);
        }
    }
    fft.inverse(&mut buf);
    let mut field: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let std = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let std = if std > 0.0 { std } else { 1.0 };
    field.iter_mut().for_each(|v| *v = (*v - mean) / std);
    field
}

/// Smooth abundances on the simplex: one Gaussian random field per material,
/// mapped through a per-pixel softmax.
pub fn gen_abundances_grf(spec: &SceneSpec) -> Result<AbundanceMap> {
    if spec.materials < 2 {
        return Err(FuvarError::InvalidParameter("need at least 2 materials".into()));
    }
    let (rows, cols, p) = (spec.rows, spec.cols, spec.materials);
    let mut rng = stream(spec.rng_seed, STREAM_ABUNDANCES);
    let mut fft = Fft2d::new(rows, cols);
    let fields: Vec<Vec<f64>> =
        (0..p).map(|_| gaussian_field(rows, cols, spec.grf_smoothness, &mut fft, &mut rng)).collect();
    let mut a = DMatrix::zeros(p, rows * cols);
    for n in 0..rows * cols {
        let top = (0..p).map(|k| fields[k][n]).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = (0..p).map(|k| (spec.grf_contrast * (fields[k][n] - top)).exp()).collect();
        let total: f64 = weights.iter().sum();
        for k in 0..p {
            a[(k, n)] = weights[k] / total;
        }
    }
    AbundanceMap::new(rows, cols, a)
}

/// Nominal wavelengths in micrometres, evenly spaced over 0.4 to 2.5.
pub fn wavelength_grid(bands: usize) -> Vec<f64> {
    if bands == 1 {
        return vec![0.4];
    }
    (0..bands).map(|i| 0.4 + 2.1 * i as f64 / (bands - 1) as f64).collect()
}

fn spectral_angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

const MIN_ENDMEMBER_ANGLE_DEG: f64 = 15.0;

/// Smooth nonnegative spectra: a baseline plus 3 to 5 Gaussian bumps each,
/// redrawn until all pairwise angles are at least 15 degrees.
pub fn gen_endmembers(spec: &SceneSpec) -> Result<EndmemberMatrix> {
    let (l, p) = (spec.bands, spec.materials);
    if p > 8 {
        return Err(FuvarError::InvalidParameter(format!("at most 8 materials, got {p}")));
    }
    let wl = wavelength_grid(l);
    let mut rng = stream(spec.rng_seed, STREAM_ENDMEMBERS);
    let min_angle = MIN_ENDMEMBER_ANGLE_DEG.to_radians();
    for _attempt in 0..100 {
        let spectra: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                let base = rng.random_range(0.05..0.3);
                let tilt = rng.random_range(-0.1..0.1);
                let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(3..=5))
                    .map(|_| {
                        (rng.random_range(0.1..0.6), rng.random_range(0.4..2.5), rng.random_range(0.05..0.35))
                    })
                    .collect();
                wl.iter()
                    .map(|&w| {
                        let bump: f64 = bumps
                            .iter()
                            .map(|(amp, c, s)| amp * (-(w - c).powi(2) / (2.0 * s * s)).exp())
                            .sum();
                        (base + tilt * (w - 1.45) + bump).max(0.0)
                    })
                    .collect()
            })
            .collect();
        let separated = (0..p).all(|i| (i + 1..p).all(|j| spectral_angle(&spectra[i], &spectra[j]) >= min_angle));
        if separated {
            let m = DMatrix::from_fn(l, p, |i, k| spectra[k][i]);
            return EndmemberMatrix::new(m);
        }
    }
    Err(FuvarError::Numerical(format!(
        "no endmember set with pairwise angles of {MIN_ENDMEMBER_ANGLE_DEG} degrees after 100 draws"
    )))
}

/// Knot positions (in band index units) of the piecewise-linear scaling factors.
pub fn psi_knots(bands: usize, breakpoints: usize) -> Vec<f64> {
    (0..breakpoints)
        .map(|j| j as f64 * (bands - 1) as f64 / (breakpoints - 1) as f64)
        .collect()
}

/// Per material, linear interpolation between uniformly spaced knots whose
/// values are uniform on `[1 - amplitude, 1 + amplitude]`.
pub fn gen_scaling_piecewise(spec: &SceneSpec) -> Result<ScalingFactors> {
    let (l, p, k) = (spec.bands, spec.materials, spec.psi_breakpoints);
    if k < 2 {
        return Err(FuvarError::InvalidParameter(format!("need at least 2 breakpoints, got {k}")));
    }
    let amp = spec.psi_amplitude;
    if !(0.0..1.0).contains(&amp) {
        return Err(FuvarError::InvalidParameter(format!(
            "scaling amplitude must lie in [0, 1), got {amp}"
        )));
    }
    let mut rng = stream(spec.rng_seed, STREAM_SCALING);
    let knots = psi_knots(l, k);
    let mut psi = DMatrix::from_element(l, p, 1.0);
    if amp == 0.0 {
        return ScalingFactors::new(psi);
    }
    for m in 0..p {
        let values: Vec<f64> = (0..k).map(|_| rng.random_range(1.0 - amp..=1.0 + amp)).collect();
        for i in 0..l {
            let x = i as f64;
            let seg = knots.iter().rposition(|&t| t <= x).unwrap_or(0).min(k - 2);
            let t = (x - knots[seg]) / (knots[seg + 1] - knots[seg]);
            psi[(i, m)] = values[seg] * (1.0 - t) + values[seg + 1] * t;
        }
    }
    ScalingFactors::new(psi)
}

/// Averaging over contiguous band groups; the first `L mod L_m` groups get
/// one extra band.
pub fn gen_srf_uniform(bands: usize, ms_bands: usize) -> Result<DMatrix<f64>> {
    if ms_bands == 0 || ms_bands > bands {
        return Err(FuvarError::InvalidParameter(format!("{ms_bands} MS bands for {bands} HS bands")));
    }
    let (base, extra) = (bands / ms_bands, bands % ms_bands);
    let mut r = DMatrix::zeros(ms_bands, bands);
    let mut start = 0;
    for g in 0..ms_bands {
        let size = base + usize::from(g < extra);
        for i in start..start + size {
            r[(g, i)] = 1.0 / size as f64;
        }
        start += size;
    }
    Ok(r)
}

/// A synthetic scene with its ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    /// `M_h A`.
    pub zh: ImageCube,
    /// `(Psi o M_h) A`.
    pub zm: ImageCube,
    pub yh: ImageCube,
    pub ym: ImageCube,
    pub abundances: AbundanceMap,
    pub scaling: ScalingFactors,
    pub endmembers: EndmemberMatrix,
    pub model: ObservationModel,
    pub wavelengths: Vec<f64>,
}

pub fn build_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let abundances = gen_abundances_grf(spec)?;
    let endmembers = gen_endmembers(spec)?;
    let scaling = gen_scaling_piecewise(spec)?;
    let srf = gen_srf_uniform(spec.bands, spec.ms_bands)?;
    let dec = Decimation::new(spec.decimation, spec.decimation_phase)?;
    let model = ObservationModel::new(BlurKernel::default_psf(), dec, srf, spec.snr_hs_db, spec.snr_ms_db)?;

    let (rows, cols) = (spec.rows, spec.cols);
    let a = abundances.matrix();
    let zh_mat = endmembers.matrix() * a;
    let zm_mat = scaling.matrix().component_mul(endmembers.matrix()) * a;

    let op = BlurDecimate::new(rows, cols, model.blur.clone(), dec)?;
    let mut yh_clean = DMatrix::zeros(spec.bands, op.coarse_len());
    let mut coarse = vec![0.0; op.coarse_len()];
    let mut band = vec![0.0; rows * cols];
    for l in 0..spec.bands {
        for (n, v) in band.iter_mut().enumerate() {
            *v = zh_mat[(l, n)];
        }
        op.forward_into(&band, &mut coarse);
        for (n, v) in coarse.iter().enumerate() {
            yh_clean[(l, n)] = *v;
        }
    }
    let yh_mat = add_noise_snr(&yh_clean, spec.snr_hs_db, &mut stream(spec.rng_seed, STREAM_NOISE_HS))?;
    let ym_mat = add_noise_snr(&(&model.srf * &zm_mat), spec.snr_ms_db, &mut stream(spec.rng_seed, STREAM_NOISE_MS))?;

    Ok(Scene {
        spec: spec.clone(),
        zh: ImageCube::from_band_matrix(rows, cols, &zh_mat)?,
        zm: ImageCube::from_band_matrix(rows, cols, &zm_mat)?,
        yh: ImageCube::from_band_matrix(op.coarse_rows(), op.coarse_cols(), &yh_mat)?,
        ym: ImageCube::from_band_matrix(rows, cols, &ym_mat)?,
        abundances,
        scaling,
        endmembers,
        model,
        wavelengths: wavelength_grid(spec.bands),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::empirical_snr_db;

    fn small() -> SceneSpec {
        SceneSpec { rows: 20, cols: 20, bands: 30, ms_bands: 5, ..SceneSpec::default() }
    }

    #[test]
    fn abundances_sum_to_one() {
        let a = gen_abundances_grf(&small()).unwrap();
        for col in a.matrix().column_iter() {
            assert!((col.sum() - 1.0).abs() <= 1e-12);
            assert!(col.iter().all(|v| *v > 0.0 && *v < 1.0));
        }
    }

    #[test]
    fn abundances_are_deterministic() {
        let s = small();
        assert_eq!(gen_abundances_grf(&s).unwrap(), gen_abundances_grf(&s).unwrap());
    }

    #[test]
    fn fields_are_spatially_correlated() {
        let spec = SceneSpec { grf_smoothness: 2.0, ..SceneSpec::default() };
        let a = gen_abundances_grf(&spec).unwrap();
        let (rows, cols) = (spec.rows, spec.cols);
        for k in 0..spec.materials {
            let x: Vec<f64> = a.matrix().row(k).iter().copied().collect();
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
            let mut cov = 0.0;
            for i in 0..rows {
                for j in 0..cols {
                    let n = i * cols + j;
                    cov += (x[n] - mean) * (x[i * cols + (j + 1) % cols] - mean);
                }
            }
            assert!(cov / var > 0.5, "lag-1 autocorrelation {}", cov / var);
        }
    }

    #[test]
    fn endmembers_are_separated_and_nonnegative() {
        for seed in 0..5 {
            let spec = SceneSpec { rng_seed: seed, materials: 5, ..small() };
            let m = gen_endmembers(&spec).unwrap();
            assert!(m.matrix().iter().all(|v| *v >= 0.0));
            let cols: Vec<Vec<f64>> = m.matrix().column_iter().map(|c| c.iter().copied().collect()).collect();
            for i in 0..5 {
                for j in i + 1..5 {
                    assert!(spectral_angle(&cols[i], &cols[j]).to_degrees() >= 15.0);
                }
            }
            assert_eq!(m, gen_endmembers(&spec).unwrap());
        }
    }

    #[test]
    fn zero_amplitude_gives_ones() {
        let spec = SceneSpec { psi_amplitude: 0.0, ..small() };
        let psi = gen_scaling_piecewise(&spec).unwrap();
        assert!(psi.matrix().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn scaling_is_piecewise_linear_through_knots() {
        let spec = SceneSpec { bands: 41, psi_breakpoints: 5, ..small() };
        let psi = gen_scaling_piecewise(&spec).unwrap();
        let knots = psi_knots(41, 5);
        for col in psi.matrix().column_iter() {
            let mean = col.mean();
            assert!((0.8..=1.2).contains(&mean));
            assert!(col.iter().all(|v| *v >= 0.8 - 1e-12 && *v <= 1.2 + 1e-12));
            for w in knots.windows(2) {
                let (lo, hi) = (w[0] as usize, w[1] as usize);
                for i in lo + 1..hi {
                    let second = col[i + 1] - 2.0 * col[i] + col[i - 1];
                    assert!(second.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn amplitude_of_one_is_rejected() {
        let spec = SceneSpec { psi_amplitude: 1.0, ..small() };
        assert!(gen_scaling_piecewise(&spec).is_err());
    }

    #[test]
    fn uniform_srf_even_partition() {
        let r = gen_srf_uniform(4, 2).unwrap();
        assert_eq!(r, DMatrix::from_row_slice(2, 4, &[0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]));
    }

    #[test]
    fn uniform_srf_rows_sum_to_one() {
        let r = gen_srf_uniform(224, 16).unwrap();
        for row in r.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-14);
        }
        let r = gen_srf_uniform(10, 3).unwrap();
        assert_eq!(r.row(0).iter().filter(|v| **v > 0.0).count(), 4);
        let c = DMatrix::from_element(10, 1, 0.7);
        assert!((r * c).iter().all(|v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn noiseless_scene_without_variability_is_exact() {
        let spec = SceneSpec {
            psi_amplitude: 0.0,
            snr_hs_db: f64::INFINITY,
            snr_ms_db: f64::INFINITY,
            ..small()
        };
        let s = build_scene(&spec).unwrap();
        let expected = &s.model.srf * s.endmembers.matrix() * s.abundances.matrix();
        assert!((s.ym.to_band_matrix() - expected).amax() < 1e-14);
        assert_eq!((s.yh.rows(), s.yh.cols(), s.yh.bands()), (5, 5, 30));
    }

    #[test]
    fn hs_noise_hits_target_snr() {
        let spec = SceneSpec::default();
        let noisy = build_scene(&spec).unwrap();
        let clean = build_scene(&SceneSpec { snr_hs_db: f64::INFINITY, ..spec }).unwrap();
        let snr = empirical_snr_db(&clean.yh.to_band_matrix(), &noisy.yh.to_band_matrix());
        assert!((snr - 30.0).abs() <= 0.5, "{snr}");
    }

    #[test]
    fn scenes_are_reproducible() {
        let a = build_scene(&small()).unwrap();
        let b = build_scene(&small()).unwrap();
        assert_eq!(a.yh, b.yh);
        assert_eq!(a.ym, b.ym);
    }
}
