//! Symbol-to-bit demappers: nearest-point hard decision, the single-tap
//! affine equalizer baseline, and the neural soft demapper.

pub mod mlp;

use serde::{Deserialize, Serialize};

use crate::constellation::ShapedConstellation;
use crate::error::{Error, Result};
use crate::signal::{BitSequence, Complex64};

pub use mlp::{
    gradient_check, mlp_forward, mlp_train, Adam, ForwardMode, MlpModel, MlpSpec, TrainConfig, TrainReport,
};

/// Label of the nearest constellation point for every symbol.
pub fn hard_decide(symbols: &[Complex64], c: &ShapedConstellation) -> BitSequence {
    let labels = c.labels();
    let mut out = Vec::with_capacity(symbols.len() * 2);
    for &s in symbols {
        out.extend_from_slice(&labels[c.nearest(s)]);
    }
    BitSequence::new(out).expect("labels are bits")
}

/// Minimum pilot count accepted by [`AffineEqualizer::fit`].
pub const MIN_PILOTS: usize = 64;

/// `y = a·x + b` fitted by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineEqualizer {
    pub a: Complex64,
    pub b: Complex64,
}

impl AffineEqualizer {
    /// Least-squares fit of received pilots onto their targets.
    pub fn fit(received: &[Complex64], targets: &[Complex64]) -> Result<Self> {
        if received.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: received.len(),
                right: targets.len(),
            });
        }
        if received.len() < MIN_PILOTS {
            return Err(Error::InvalidArgument(format!(
                "affine equalizer needs at least {MIN_PILOTS} pilots, got {}",
                received.len()
            )));
        }
        let n = received.len() as f64;
        let mut sxx = 0.0;
        let mut sx = Complex64::new(0.0, 0.0);
        let mut sxt = Complex64::new(0.0, 0.0);
        let mut st = Complex64::new(0.0, 0.0);
        for (&x, &t) in received.iter().zip(targets) {
            sxx += x.norm_sqr();
            sx += x;
            sxt += x.conj() * t;
            st += t;
        }
        // [sxx, conj(sx); sx, n] [a; b] = [sxt; st]
        let det = sxx * n - sx.norm_sqr();
        if !(det.abs() > 1e-12 * (sxx * n).max(1e-300)) {
            return Err(Error::SingularPilots);
        }
        let a = (sxt * n - sx.conj() * st) / det;
        let b = (st * sxx - sx * sxt) / det;
        Ok(Self { a, b })
    }

    pub fn apply(&self, symbols: &[Complex64]) -> Vec<Complex64> {
        symbols.iter().map(|&x| self.a * x + self.b).collect()
    }
}

/// The conventional baseline: fit an affine map from received pilots onto the
/// standard QPSK points of their labels, then apply it to every symbol.
/// Decisions are made afterwards with [`hard_decide`] against
/// [`ShapedConstellation::unshaped_qpsk`].
pub fn linear_equalize(
    symbols: &[Complex64],
    pilots_rx: &[Complex64],
    pilot_levels: &[u8],
    unshaped: &ShapedConstellation,
) -> Result<(Vec<Complex64>, AffineEqualizer)> {
    let targets: Vec<Complex64> = pilot_levels.iter().map(|&l| unshaped.points()[l as usize]).collect();
    let eq = AffineEqualizer::fit(pilots_rx, &targets)?;
    Ok((eq.apply(symbols), eq))
}
