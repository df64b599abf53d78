use crate::constellation::ShapedConstellation;
use crate::error::{Error, Result};
use crate::signal::Complex64;

/// First-order decision-directed phase-locked loop.
#[derive(Debug, Clone)]
pub struct CprConfig {
    loop_gain: f64,
    reference: ShapedConstellation,
}

impl CprConfig {
    pub fn new(loop_gain: f64, reference: ShapedConstellation) -> Result<Self> {
        if !(loop_gain > 0.0 && loop_gain <= 1.0) {
            return Err(Error::InvalidArgument(format!("loop_gain must lie in (0, 1], got {loop_gain}")));
        }
        Ok(Self { loop_gain, reference })
    }

    pub fn loop_gain(&self) -> f64 {
        self.loop_gain
    }

    pub fn reference(&self) -> &ShapedConstellation {
        &self.reference
    }
}

/// Derotates each symbol by the running estimate, decides it against the
/// reference, then moves the estimate by `loop_gain · arg(z · conj(decision))`.
/// Returns the corrected symbols and the estimate applied to each symbol.
pub fn cpr_decision_directed(symbols: &[Complex64], cfg: &CprConfig) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let pts = cfg.reference.points();
    let mut theta = 0.0f64;
    let mut out = Vec::with_capacity(symbols.len());
    let mut track = Vec::with_capacity(symbols.len());
    for &r in symbols {
        let z = if theta == 0.0 { r } else { r * Complex64::from_polar(1.0, -theta) };
        let d = pts[cfg.reference.nearest(z)];
        out.push(z);
        track.push(theta);
        let err = (z * d.conj()).arg();
        theta += cfg.loop_gain * err;
    }
    Ok((out, track))
}

/// Removes a residual quarter-turn rotation using the known first symbols.
///
/// The mean phase of `r · conj(ref)` over the prefix is snapped to the
/// nearest multiple of π/2 and undone exactly. Returns the rotated symbols and
/// the number of quarter turns removed.
pub fn resolve_phase_ambiguity(symbols: &[Complex64], prefix: &[Complex64]) -> (Vec<Complex64>, u8) {
    let n = prefix.len().min(symbols.len());
    if n == 0 {
        return (symbols.to_vec(), 0);
    }
    let acc: Complex64 = symbols[..n].iter().zip(&prefix[..n]).map(|(r, p)| r * p.conj()).sum();
    let turns = (acc.arg() / std::f64::consts::FRAC_PI_2).round().rem_euclid(4.0) as u8;
    // exact multiplication by e^{-jkπ/2}
    let undo = match turns {
        0 => return (symbols.to_vec(), 0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    (symbols.iter().map(|s| s * undo).collect(), turns)
}
