use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{noise::add_awgn_with, Complex64, ComplexWaveform, RngSeed, Stage};

/// Laser phase noise, carrier offset and receiver AWGN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RxImpairments {
    /// Combined transmitter + LO linewidth (one shared laser).
    pub linewidth_hz: f64,
    pub freq_offset_hz: f64,
    /// SNR relative to the unit-power probe; `None` or `inf` disables
    /// receiver noise.
    pub rx_snr_db: Option<f64>,
}

impl Default for RxImpairments {
    fn default() -> Self {
        Self {
            linewidth_hz: 100e3,
            freq_offset_hz: 0.0,
            rx_snr_db: Some(25.0),
        }
    }
}

impl RxImpairments {
    /// No phase noise, no offset, no receiver noise.
    pub fn none() -> Self {
        Self {
            linewidth_hz: 0.0,
            freq_offset_hz: 0.0,
            rx_snr_db: None,
        }
    }

    /// Variance of the Wiener phase increment per sample.
    pub fn phase_increment_variance(&self, sample_rate: f64) -> f64 {
        TAU * self.linewidth_hz / sample_rate
    }
}

/// Rotates sample `n` by `2π·Δf·n/f_s + θ[n]` (θ a Wiener process starting at
/// 0) and then adds receiver AWGN if enabled.
pub fn apply_rx_impairments(w: &ComplexWaveform, imp: &RxImpairments, seed: RngSeed) -> Result<ComplexWaveform> {
    if !(imp.linewidth_hz >= 0.0) {
        return Err(Error::InvalidArgument(format!("linewidth must be >= 0, got {}", imp.linewidth_hz)));
    }
    let fs = w.sample_rate();
    let rotated = if imp.linewidth_hz == 0.0 && imp.freq_offset_hz == 0.0 {
        w.clone()
    } else {
        let step = TAU * imp.freq_offset_hz / fs;
        let sigma = imp.phase_increment_variance(fs).sqrt();
        let mut rng = seed.stream(Stage::LaserPhase);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut theta = 0.0;
        let out = w
            .samples()
            .iter()
            .enumerate()
            .map(|(n, s)| {
                if n > 0 && sigma > 0.0 {
                    theta += normal.sample(&mut rng);
                }
                s * Complex64::from_polar(1.0, step * n as f64 + theta)
            })
            .collect();
        w.with_samples(out)
    };
    match imp.rx_snr_db {
        Some(snr) => add_awgn_with(&rotated, snr, 1.0, &mut seed.stream(Stage::RxNoise)),
        None => Ok(rotated),
    }
}
