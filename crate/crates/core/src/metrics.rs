//! Bit error counting, per-bit GMI from LLRs and per-level phase statistics.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{wrap_phase, BitSequence, Complex64};

/// Per-bit log-likelihood ratios. `llrs[2i + j]` belongs to bit `j` of symbol
/// `i`; a positive value means bit 0 is more likely.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub llrs: Vec<f64>,
    pub truth: Option<Vec<u8>>,
}

impl LlrFrame {
    pub fn new(llrs: Vec<f64>, truth: Option<Vec<u8>>) -> Result<Self> {
        if !llrs.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument("LLR frame must hold 2 values per symbol".into()));
        }
        if let Some(t) = &truth {
            if t.len() != llrs.len() {
                return Err(Error::LengthMismatch {
                    left: llrs.len(),
                    right: t.len(),
                });
            }
        }
        if llrs.iter().any(|l| l.is_nan()) {
            return Err(Error::InvalidArgument("LLR frame contains NaN".into()));
        }
        Ok(Self { llrs, truth })
    }

    /// Saturated LLRs `±lambda_max` for hard decisions.
    pub fn from_hard_bits(bits: &BitSequence, lambda_max: f64, truth: Option<Vec<u8>>) -> Result<Self> {
        let llrs = bits
            .as_slice()
            .iter()
            .map(|&b| if b == 0 { lambda_max } else { -lambda_max })
            .collect();
        Self::new(llrs, truth)
    }

    pub fn num_symbols(&self) -> usize {
        self.llrs.len() / 2
    }

    /// Sign decisions; `Λ = 0` decides 0.
    pub fn hard_bits(&self) -> BitSequence {
        BitSequence::new(self.llrs.iter().map(|&l| u8::from(l < 0.0)).collect()).expect("bits")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub bit_errors: u64,
    pub total_bits: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn ber_count(decided: &BitSequence, truth: &BitSequence) -> Result<BerReport> {
    if decided.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: decided.len(),
            right: truth.len(),
        });
    }
    let errors = decided
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .filter(|(a, b)| a != b)
        .count() as u64;
    let total = truth.len() as u64;
    let ber = if total == 0 { 0.0 } else { errors as f64 / total as f64 };
    let (ci_lo, ci_hi) = wilson_interval(errors, total, Z95);
    Ok(BerReport {
        bit_errors: errors,
        total_bits: total,
        ber,
        ci_lo,
        ci_hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmiReport {
    pub gmi_per_bit: f64,
    pub llr_scale_used: f64,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `1 - mean(log2(1 + exp(-s·(1-2b)·Λ)))` for one scale `s`.
pub fn gmi_at_scale(llrs: &[f64], truth: &[u8], s: f64) -> f64 {
    let n = llrs.len() as f64;
    let sum: f64 = llrs
        .iter()
        .zip(truth)
        .map(|(&l, &b)| {
            let signed = if b == 0 { l } else { -l };
            // per-term division keeps all-zero LLRs at exactly 1 bit each
            softplus(-s * signed) / LN_2
        })
        .sum();
    1.0 - sum / n
}

const SCALE_LO: f64 = 1e-2;
const SCALE_HI: f64 = 1e2;

/// Per-bit GMI maximized over a scalar LLR scale `s ∈ [1e-2, 1e2]`
/// (golden-section search on `ln s`).
pub fn gmi_from_llrs(frame: &LlrFrame) -> Result<GmiReport> {
    let truth = frame
        .truth
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("GMI needs ground-truth bits".into()))?;
    if frame.llrs.is_empty() {
        return Err(Error::InvalidArgument("empty LLR frame".into()));
    }
    let f = |log_s: f64| gmi_at_scale(&frame.llrs, truth, log_s.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (SCALE_LO.ln(), SCALE_HI.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-9 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // the optimum may sit on a bound
    let candidates = [(a + b) / 2.0, SCALE_LO.ln(), SCALE_HI.ln()];
    let (log_s, gmi) = candidates
        .iter()
        .map(|&x| (x, f(x)))
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(GmiReport {
        gmi_per_bit: gmi,
        llr_scale_used: log_s.exp(),
    })
}

/// Circular statistics of the received phase for one transmitted level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPhaseStats {
    pub level: u8,
    pub count: usize,
    /// Circular mean in `[0, 2π)`.
    pub mean: f64,
    /// `sqrt(-2 ln R)` with `R` the mean resultant length.
    pub std: f64,
}

/// Per-level circular mean and standard deviation. Levels that never occur
/// are `None`.
pub fn phase_stats_per_level(symbols: &[Complex64], true_levels: &[u8]) -> Result<[Option<LevelPhaseStats>; 4]> {
    if symbols.len() != true_levels.len() {
        return Err(Error::LengthMismatch {
            left: symbols.len(),
            right: true_levels.len(),
        });
    }
    let mut acc = [(Complex64::new(0.0, 0.0), 0usize); 4];
    for (s, &l) in symbols.iter().zip(true_levels) {
        let slot = acc
            .get_mut(l as usize)
            .ok_or_else(|| Error::InvalidArgument(format!("level {l} out of range")))?;
        let n = s.norm();
        if n > 0.0 {
            slot.0 += s / n;
        }
        slot.1 += 1;
    }
    let mut out = [None; 4];
    for (k, (sum, count)) in acc.into_iter().enumerate() {
        if count == 0 {
            continue;
        }
        let r = (sum.norm() / count as f64).min(1.0);
        out[k] = Some(LevelPhaseStats {
            level: k as u8,
            count,
            mean: wrap_phase(sum.arg()),
            std: if r > 0.0 { (-2.0 * r.ln()).max(0.0).sqrt() } else { f64::INFINITY },
        });
    }
    Ok(out)
}

/// First SNR at which `ys` rises through `threshold`, linearly interpolated.
/// `xs` must be increasing.
pub fn crossing_point(xs: &[f64], ys: &[f64], threshold: f64) -> Option<f64> {
    if ys.first().is_some_and(|&y| y >= threshold) {
        return None;
    }
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        (y[0] < threshold && y[1] >= threshold).then(|| x[0] + (threshold - y[0]) / (y[1] - y[0]) * (x[1] - x[0]))
    })
}
