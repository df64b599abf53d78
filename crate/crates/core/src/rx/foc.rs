use std::f64::consts::TAU;

use rustfft::FftPlanner;

use super::FOC_MIN_SYMBOLS;
use crate::error::{Error, Result};
use crate::signal::Complex64;

#[derive(Debug, Clone)]
pub struct FocEstimate {
    pub symbols: Vec<Complex64>,
    pub offset_hz: f64,
    /// Resolution of the estimate, `symbol_rate / (m·N)`.
    pub bin_hz: f64,
}

/// M-th power spectral frequency-offset estimator.
///
/// The symbols are raised to `m_power`, the largest bin of the magnitude
/// spectrum is taken as `m·Δf`, and the symbols are derotated by the estimate.
/// The unambiguous range is `|Δf| < symbol_rate / (2·m)`.
pub fn foc_estimate_and_correct(symbols: &[Complex64], symbol_rate: f64, m_power: u32) -> Result<FocEstimate> {
    if symbols.len() < FOC_MIN_SYMBOLS {
        return Err(Error::InvalidArgument(format!(
            "FOC needs at least {FOC_MIN_SYMBOLS} symbols, got {}",
            symbols.len()
        )));
    }
    if m_power == 0 {
        return Err(Error::InvalidArgument("m_power must be >= 1".into()));
    }
    let n = symbols.len();
    let mut buf: Vec<Complex64> = symbols.iter().map(|s| s.powu(m_power)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let (peak, mag) = buf
        .iter()
        .map(|z| z.norm_sqr())
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    if !(mag > 0.0) || !mag.is_finite() {
        return Err(Error::DegenerateSpectrum);
    }
    let signed = if peak > n / 2 { peak as f64 - n as f64 } else { peak as f64 };
    let offset_hz = signed * symbol_rate / (n as f64 * m_power as f64);

    let corrected = if peak == 0 {
        symbols.to_vec()
    } else {
        let step = -TAU * offset_hz / symbol_rate;
        symbols
            .iter()
            .enumerate()
            .map(|(i, s)| s * Complex64::from_polar(1.0, step * i as f64))
            .collect()
    };
    Ok(FocEstimate {
        symbols: corrected,
        offset_hz,
        bin_hz: symbol_rate / (n as f64 * m_power as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{awgn_add, ComplexWaveform, RngSeed};
    use std::f64::consts::FRAC_PI_2;

    fn qpsk(n: usize) -> Vec<Complex64> {
        let bits = crate::signal::prbs_generate(23, 2 * n, RngSeed(11)).unwrap();
        bits.as_slice()
            .chunks(2)
            .map(|c| Complex64::from_polar(1.0, FRAC_PI_2 * (c[0] * 2 + c[1]) as f64))
            .collect()
    }

    fn rotate(s: &[Complex64], f: f64, baud: f64) -> Vec<Complex64> {
        s.iter()
            .enumerate()
            .map(|(i, z)| z * Complex64::from_polar(1.0, TAU * f * i as f64 / baud))
            .collect()
    }

    #[test]
    fn zero_offset() {
        let s = qpsk(4096);
        let e = foc_estimate_and_correct(&s, 10e9, 4).unwrap();
        assert_eq!(e.offset_hz, 0.0);
        assert_eq!(e.symbols, s);
    }

    #[test]
    fn recovers_50mhz() {
        let n = 1 << 14;
        let s = rotate(&qpsk(n), 50e6, 10e9);
        let e = foc_estimate_and_correct(&s, 10e9, 4).unwrap();
        assert!((e.bin_hz - 10e9 / (4.0 * n as f64)).abs() < 1e-6);
        assert!((e.offset_hz - 50e6).abs() <= e.bin_hz, "{}", e.offset_hz);
    }

    #[test]
    fn recovers_offset_with_rx_noise() {
        let n = 1 << 14;
        let s = rotate(&qpsk(n), 50e6, 10e9);
        let w = ComplexWaveform::new(s, 1, 10e9).unwrap();
        let noisy = awgn_add(&w, 20.0, 1.0, RngSeed(2)).unwrap();
        let e = foc_estimate_and_correct(noisy.samples(), 10e9, 4).unwrap();
        assert!((e.offset_hz - 50e6).abs() <= 2.0 * e.bin_hz);
    }

    #[test]
    fn errors() {
        assert!(foc_estimate_and_correct(&qpsk(100), 10e9, 4).is_err());
        let z = vec![Complex64::new(0.0, 0.0); 2048];
        assert!(matches!(foc_estimate_and_correct(&z, 10e9, 4), Err(Error::DegenerateSpectrum)));
    }
}
