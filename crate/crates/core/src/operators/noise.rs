use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{FuvarError, Result};

/// Per-entry variance of white noise that puts `signal` at `snr_db`.
pub fn noise_variance_for_snr(signal: &DMatrix<f64>, snr_db: f64) -> Result<f64> {
    let power = signal.norm_squared();
    if power == 0.0 {
        return Err(FuvarError::InvalidParameter(
            "cannot calibrate noise on an all-zero signal".into(),
        ));
    }
    if !power.is_finite() {
        return Err(FuvarError::NonFinite("signal power".into()));
    }
    Ok(power / (signal.len() as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Adds white Gaussian noise scaled from the clean signal's empirical power.
/// An infinite target disables noise.
pub fn add_noise_snr<R: Rng + ?Sized>(
    signal: &DMatrix<f64>,
    snr_db: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    if !snr_db.is_finite() {
        return Err(FuvarError::InvalidParameter(format!("SNR target {snr_db}")));
    }
    let sigma = noise_variance_for_snr(signal, snr_db)?.sqrt();
    Ok(signal.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)))
}

/// `10 log10(||clean||^2 / ||noisy - clean||^2)`.
pub fn empirical_snr_db(clean: &DMatrix<f64>, noisy: &DMatrix<f64>) -> f64 {
    10.0 * (clean.norm_squared() / (noisy - clean).norm_squared()).log10()
}
