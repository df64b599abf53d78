//! Numeric types shared by every stage of the link: complex waveforms, bit
//! sequences, seeded random streams, PRBS patterns, AWGN and unit conversions.

pub(crate) mod noise;
mod prbs;
mod rng;
mod units;

pub use noise::{awgn_add, noise_variance};
pub use num_complex::Complex64;
pub use prbs::{prbs_generate, Prbs};
pub use rng::{RngSeed, Stage};
pub use units::{db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm};

use crate::error::{Error, Result};

/// Default symbol rate of the simulated link, 10 GBd.
pub const DEFAULT_SYMBOL_RATE: f64 = 10e9;

/// Complex baseband samples at `samples_per_symbol` samples per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    samples: Vec<Complex64>,
    samples_per_symbol: usize,
    symbol_rate: f64,
}

impl ComplexWaveform {
    pub fn new(samples: Vec<Complex64>, samples_per_symbol: usize, symbol_rate: f64) -> Result<Self> {
        if samples_per_symbol == 0 {
            return Err(Error::InvalidArgument("samples_per_symbol must be >= 1".into()));
        }
        if !(symbol_rate > 0.0) || !symbol_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("symbol_rate must be positive, got {symbol_rate}")));
        }
        if !samples.len().is_multiple_of(samples_per_symbol) {
            return Err(Error::InvalidArgument(format!(
                "waveform length {} is not a multiple of samples_per_symbol {}",
                samples.len(),
                samples_per_symbol
            )));
        }
        Ok(Self {
            samples,
            samples_per_symbol,
            symbol_rate,
        })
    }

    /// Returns a waveform with the same timing metadata and new samples.
    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            samples,
            samples_per_symbol: self.samples_per_symbol,
            symbol_rate: self.symbol_rate,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_symbols(&self) -> usize {
        self.samples.len() / self.samples_per_symbol
    }

    /// Mean of |s|^2 over all samples.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.re.is_finite() && s.im.is_finite())
    }
}

/// Ordered sequence of bits, one `u8` in {0, 1} per bit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitSequence(Vec<u8>);

impl BitSequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidArgument(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self(bits))
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Contiguous sub-sequence `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> BitSequence {
        BitSequence(self.0[start..end].to_vec())
    }

    /// Iterates over 2-bit symbol groups; fails on odd length.
    pub fn pairs(&self) -> Result<impl Iterator<Item = [u8; 2]> + '_> {
        if !self.0.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "bit sequence length {} is odd; 2 bits per symbol required",
                self.0.len()
            )));
        }
        Ok(self.0.chunks_exact(2).map(|c| [c[0], c[1]]))
    }
}

impl From<BitSequence> for Vec<u8> {
    fn from(b: BitSequence) -> Self {
        b.0
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = phi.rem_euclid(tau);
    if w >= tau {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveform_rejects_ragged_length() {
        let s = vec![Complex64::new(1.0, 0.0); 3];
        assert!(ComplexWaveform::new(s, 2, 10e9).is_err());
    }

    #[test]
    fn waveform_rejects_bad_rate() {
        assert!(ComplexWaveform::new(vec![], 1, 0.0).is_err());
        assert!(ComplexWaveform::new(vec![], 0, 1.0).is_err());
    }

    #[test]
    fn bits_must_be_binary() {
        assert!(BitSequence::new(vec![0, 1, 2]).is_err());
        let b = BitSequence::new(vec![0, 1, 1]).unwrap();
        assert!(b.pairs().is_err());
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!((wrap_phase(-0.1) - (std::f64::consts::TAU - 0.1)).abs() < 1e-15);
        assert!(wrap_phase(7.0) < std::f64::consts::TAU);
    }
}
