//! PAM4 transmitter: bit labeling, unequally spaced field levels, NRZ
//! synthesis with transmitter AWGN, and the EDFA gain that sets the gateway
//! input power.

use serde::{Deserialize, Serialize};

use crate::constellation::Labeling;
use crate::error::{Error, Result};
use crate::signal::{self, BitSequence, Complex64, ComplexWaveform, RngSeed, Stage};

/// Level powers `P_k = (k/3)·P_peak` and fields `E_k = sqrt(P_k)`.
///
/// Powers are equally spaced, so the fields are not: `E_1 - E_0 > E_2 - E_1
/// > E_3 - E_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pam4LevelMap {
    pub peak_power_w: f64,
    pub labeling: Labeling,
}

impl Pam4LevelMap {
    pub fn new(peak_power_w: f64, labeling: Labeling) -> Result<Self> {
        if !(peak_power_w > 0.0) || !peak_power_w.is_finite() {
            return Err(Error::InvalidArgument(format!("peak power must be positive, got {peak_power_w}")));
        }
        Ok(Self {
            peak_power_w,
            labeling,
        })
    }

    pub fn level_power(&self, k: usize) -> f64 {
        assert!(k < 4, "level index {k} out of range");
        self.peak_power_w * k as f64 / 3.0
    }

    pub fn level_field(&self, k: usize) -> f64 {
        self.level_power(k).sqrt()
    }

    pub fn level_powers(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.level_power(k))
    }

    pub fn level_fields(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.level_field(k))
    }

    /// Average power over four equiprobable levels, `P_peak / 2`.
    pub fn average_power(&self) -> f64 {
        self.peak_power_w / 2.0
    }
}

/// Transmitter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TxConfig {
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    /// Average signal power over total noise variance, in dB. `inf` disables
    /// the transmitter noise.
    pub pam4_snr_db: f64,
    /// Gain of the amplifier between the transmitter and the gateway.
    pub edfa_gain_db: f64,
    pub seed: RngSeed,
}

impl Default for TxConfig {
    fn default() -> Self {
        Self {
            symbol_rate: signal::DEFAULT_SYMBOL_RATE,
            samples_per_symbol: 2,
            pam4_snr_db: 25.0,
            edfa_gain_db: 0.0,
            seed: RngSeed(1),
        }
    }
}

/// One level index per bit pair under `labeling`.
pub fn map_bits_to_levels(bits: &BitSequence, labeling: Labeling) -> Result<Vec<u8>> {
    Ok(bits.pairs()?.map(|p| labeling.level(p) as u8).collect())
}

/// Inverse of [`map_bits_to_levels`].
pub fn levels_to_bits(levels: &[u8], labeling: Labeling) -> BitSequence {
    let mut out = Vec::with_capacity(levels.len() * 2);
    for &l in levels {
        out.extend_from_slice(&labeling.label(l as usize));
    }
    BitSequence::new(out).expect("labels are bits")
}

/// NRZ PAM4 field with transmitter AWGN.
///
/// Each symbol holds `E_k` for `samples_per_symbol` samples. Noise is added at
/// `cfg.pam4_snr_db` relative to the nominal average power `P_peak / 2`, using
/// the [`Stage::TxNoise`] stream of `cfg.seed`. The EDFA gain is not applied
/// here; see [`apply_gain`].
pub fn synthesize_pam4(levels: &[u8], cfg: &TxConfig, map: &Pam4LevelMap) -> Result<ComplexWaveform> {
    if !(map.peak_power_w > 0.0) {
        return Err(Error::InvalidArgument("peak power must be positive".into()));
    }
    let fields = map.level_fields();
    let sps = cfg.samples_per_symbol;
    let mut samples = Vec::with_capacity(levels.len() * sps);
    for &l in levels {
        let e = *fields
            .get(l as usize)
            .ok_or_else(|| Error::InvalidArgument(format!("level index {l} out of range")))?;
        samples.extend(std::iter::repeat_n(Complex64::new(e, 0.0), sps));
    }
    let clean = ComplexWaveform::new(samples, sps, cfg.symbol_rate)?;
    let mut rng = cfg.seed.stream(Stage::TxNoise);
    signal::noise::add_awgn_with(&clean, cfg.pam4_snr_db, map.average_power(), &mut rng)
}

/// Scales the field by `10^(gain_db/20)`; noise already on the waveform
/// scales with it.
pub fn apply_gain(w: &ComplexWaveform, gain_db: f64) -> ComplexWaveform {
    if gain_db == 0.0 {
        return w.clone();
    }
    let g = 10f64.powf(gain_db / 20.0);
    w.with_samples(w.samples().iter().map(|s| s * g).collect())
}

/// Gain in dB that takes `from_w` to `to_w`.
pub fn gain_db_between(from_w: f64, to_w: f64) -> f64 {
    10.0 * (to_w / from_w).log10()
}
