//! Four-point phase constellations and their bit labels.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Complex64;

/// Mapping between 2-bit patterns and PAM4 level indices.
///
/// The same index also identifies the gateway phase `Δφ(k)` that level `k`
/// produces, so the labeling carries over unchanged to the QPSK side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeling {
    /// 00, 01, 11, 10 for levels 0..3.
    #[default]
    Gray,
    /// 00, 01, 10, 11 for levels 0..3.
    Natural,
}

impl Labeling {
    pub fn label(self, level: usize) -> [u8; 2] {
        match (self, level) {
            (_, 0) => [0, 0],
            (_, 1) => [0, 1],
            (Labeling::Gray, 2) | (Labeling::Natural, 3) => [1, 1],
            (Labeling::Gray, 3) | (Labeling::Natural, 2) => [1, 0],
            _ => panic!("level index {level} out of range"),
        }
    }

    pub fn level(self, bits: [u8; 2]) -> usize {
        match (self, bits) {
            (_, [0, 0]) => 0,
            (_, [0, 1]) => 1,
            (Labeling::Gray, [1, 1]) | (Labeling::Natural, [1, 0]) => 2,
            (Labeling::Gray, [1, 0]) | (Labeling::Natural, [1, 1]) => 3,
            _ => panic!("invalid bit pair {bits:?}"),
        }
    }

    pub fn labels(self) -> [[u8; 2]; 4] {
        [self.label(0), self.label(1), self.label(2), self.label(3)]
    }
}

/// Reference points of a (possibly shaped) QPSK constellation. Point `k` is
/// the noiseless image of PAM4 level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedConstellation {
    points: [Complex64; 4],
    labels: [[u8; 2]; 4],
    /// Peak gateway input power that generated the points, if any.
    pub peak_power_w: Option<f64>,
    /// Free-form description of the generator (e.g. "calibrated").
    pub generator: String,
}

impl ShapedConstellation {
    pub fn new(points: [Complex64; 4], labels: [[u8; 2]; 4]) -> Result<Self> {
        for i in 0..4 {
            if !(points[i].re.is_finite() && points[i].im.is_finite()) {
                return Err(Error::InvalidArgument("constellation point is not finite".into()));
            }
            for j in (i + 1)..4 {
                if (points[i] - points[j]).norm() < 1e-12 {
                    return Err(Error::InvalidArgument(format!("constellation points {i} and {j} coincide")));
                }
                if labels[i] == labels[j] {
                    return Err(Error::InvalidArgument("constellation labels are not a bijection".into()));
                }
            }
            if labels[i].iter().any(|&b| b > 1) {
                return Err(Error::InvalidArgument("labels must be bits".into()));
            }
        }
        Ok(Self {
            points,
            labels,
            peak_power_w: None,
            generator: "custom".into(),
        })
    }

    /// Unit-amplitude points at the given phases.
    pub fn from_phases(phases: [f64; 4], labeling: Labeling) -> Result<Self> {
        let points = phases.map(|p| Complex64::from_polar(1.0, p));
        Self::new(points, labeling.labels())
    }

    /// Standard QPSK {1, j, -1, -j}.
    pub fn unshaped_qpsk(labeling: Labeling) -> Self {
        let mut c = Self::from_phases([0.0, FRAC_PI_2, 2.0 * FRAC_PI_2, 3.0 * FRAC_PI_2], labeling)
            .expect("standard QPSK is valid");
        // exact axis points
        c.points = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        c.generator = "unshaped".into();
        c
    }

    pub fn points(&self) -> &[Complex64; 4] {
        &self.points
    }

    pub fn labels(&self) -> &[[u8; 2]; 4] {
        &self.labels
    }

    /// Phases of the points in `[0, 2π)`.
    pub fn phases(&self) -> [f64; 4] {
        self.points.map(|p| crate::signal::wrap_phase(p.arg()))
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = (z - self.points[0]).norm_sqr();
        for (i, p) in self.points.iter().enumerate().skip(1) {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}
