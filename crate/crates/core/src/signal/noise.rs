use rand_distr::{Distribution, Normal};

use super::{db_to_linear, ComplexWaveform, RngSeed, Stage};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Total complex noise variance for `snr_db` relative to `signal_power_ref`.
pub fn noise_variance(snr_db: f64, signal_power_ref: f64) -> f64 {
    signal_power_ref / db_to_linear(snr_db)
}

/// Adds circularly symmetric complex Gaussian noise.
///
/// The total variance is `signal_power_ref / 10^(snr_db/10)`, split evenly
/// between I and Q. `snr_db = +inf` disables the noise and returns a copy.
/// Draws come from the [`Stage::TxNoise`] stream of `seed`.
pub fn awgn_add(w: &ComplexWaveform, snr_db: f64, signal_power_ref: f64, seed: RngSeed) -> Result<ComplexWaveform> {
    let mut rng = seed.stream(Stage::TxNoise);
    add_awgn_with(w, snr_db, signal_power_ref, &mut rng)
}

pub(crate) fn add_awgn_with<R: rand::Rng + ?Sized>(
    w: &ComplexWaveform,
    snr_db: f64,
    signal_power_ref: f64,
    rng: &mut R,
) -> Result<ComplexWaveform> {
    if !(signal_power_ref > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "signal power reference must be positive, got {signal_power_ref}"
        )));
    }
    if snr_db == f64::INFINITY {
        return Ok(w.clone());
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("snr_db is NaN".into()));
    }
    let sigma = (noise_variance(snr_db, signal_power_ref) / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let out = w
        .samples()
        .iter()
        .map(|s| s + Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect();
    Ok(w.with_samples(out))
}
