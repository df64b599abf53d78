//! XPM gateway: the HNLF cascade turns PAM4 intensity into probe phase.
//!
//! The probe is a unit-amplitude CW. Its phase follows the instantaneous PAM4
//! power through `Δφ = 2·γ·L_eff·P`; walk-off, dispersion and FWM are not
//! modeled, so the conversion is memoryless.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constellation::{Labeling, ShapedConstellation};
use crate::error::{Error, Result};
use crate::signal::{Complex64, ComplexWaveform};

/// Physical parameters of one HNLF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    #[serde(alias = "length")]
    pub length_km: f64,
    #[serde(alias = "nonlinearity")]
    pub gamma_per_w_km: f64,
    #[serde(alias = "dispersion", default)]
    pub dispersion_ps_nm_km: f64,
    #[serde(alias = "slope", default)]
    pub slope_ps_nm_km2: f64,
    #[serde(alias = "loss")]
    pub loss_db_km: f64,
}

impl FiberSpec {
    /// HNLF #A: 2.5 km, γ = 10 /W/km, 1.07 dB/km.
    pub fn hnlf_a() -> Self {
        Self {
            length_km: 2.5,
            gamma_per_w_km: 10.0,
            dispersion_ps_nm_km: 0.57,
            slope_ps_nm_km2: 0.018,
            loss_db_km: 1.07,
        }
    }

    /// HNLF #B: 1 km, γ = 10 /W/km, 0.76 dB/km.
    pub fn hnlf_b() -> Self {
        Self {
            length_km: 1.0,
            gamma_per_w_km: 10.0,
            dispersion_ps_nm_km: 0.52,
            slope_ps_nm_km2: 0.016,
            loss_db_km: 0.76,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.length_km >= 0.0 && self.gamma_per_w_km >= 0.0 && self.loss_db_km >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fiber length, nonlinearity and loss must be non-negative: {self:?}"
            )));
        }
        Ok(())
    }

    /// Attenuation in 1/km.
    pub fn alpha_per_km(&self) -> f64 {
        self.loss_db_km * std::f64::consts::LN_10 / 10.0
    }

    pub fn total_loss_db(&self) -> f64 {
        self.loss_db_km * self.length_km
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.total_loss_db() / 10.0)
    }
}

/// Fibers in propagation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberCascade {
    pub fibers: Vec<FiberSpec>,
    /// Loss inserted between consecutive fibers.
    #[serde(default)]
    pub extra_connection_loss_db: f64,
}

impl FiberCascade {
    pub fn new(fibers: Vec<FiberSpec>, extra_connection_loss_db: f64) -> Result<Self> {
        let c = Self {
            fibers,
            extra_connection_loss_db,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fibers.is_empty() {
            return Err(Error::InvalidArgument("fiber cascade is empty".into()));
        }
        if self.extra_connection_loss_db.is_nan() {
            return Err(Error::InvalidArgument("connection loss is NaN".into()));
        }
        self.fibers.iter().try_for_each(FiberSpec::validate)
    }
}

impl Default for FiberCascade {
    /// HNLF #A followed by #B with lossless splices.
    fn default() -> Self {
        Self {
            fibers: vec![FiberSpec::hnlf_a(), FiberSpec::hnlf_b()],
            extra_connection_loss_db: 0.0,
        }
    }
}

/// `L_eff = (1 - e^(-αL)) / α`, or `L` for a lossless fiber.
pub fn effective_length(f: &FiberSpec) -> f64 {
    let alpha = f.alpha_per_km();
    if alpha == 0.0 {
        f.length_km
    } else {
        -(-alpha * f.length_km).exp_m1() / alpha
    }
}

/// Sum of each fiber's effective length weighted by the power transmittance
/// of everything before it.
pub fn cascade_effective_length(c: &FiberCascade) -> f64 {
    let splice = 10f64.powf(-c.extra_connection_loss_db / 10.0);
    let mut transmittance = 1.0;
    let mut total = 0.0;
    for (i, f) in c.fibers.iter().enumerate() {
        if i > 0 {
            transmittance *= splice;
        }
        total += transmittance * effective_length(f);
        transmittance *= f.transmittance();
    }
    total
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XpmMode {
    /// `Δφ = 2·γ·L_eff·P` from the fiber parameters.
    Physical,
    /// `Δφ` scales linearly through the reference point (default 55 mW → 3π/2).
    #[default]
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XpmModelConfig {
    pub mode: XpmMode,
    pub reference_power_w: f64,
    pub reference_phase_rad: f64,
    /// Overrides `reference_phase_rad / reference_power_w` when set.
    pub phase_scale: Option<f64>,
}

impl Default for XpmModelConfig {
    fn default() -> Self {
        Self {
            mode: XpmMode::Calibrated,
            reference_power_w: 0.055,
            reference_phase_rad: 1.5 * PI,
            phase_scale: None,
        }
    }
}

impl XpmModelConfig {
    pub fn physical() -> Self {
        Self {
            mode: XpmMode::Physical,
            ..Self::default()
        }
    }

    /// Calibrated-mode slope in rad/W.
    pub fn calibrated_phase_scale(&self) -> f64 {
        self.phase_scale
            .unwrap_or(self.reference_phase_rad / self.reference_power_w)
    }

    /// Phase per watt in the active mode.
    pub fn phase_per_watt(&self, cascade: &FiberCascade) -> Result<f64> {
        match self.mode {
            XpmMode::Calibrated => {
                let s = self.calibrated_phase_scale();
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::InvalidArgument(format!("phase_scale must be positive, got {s}")));
                }
                Ok(s)
            }
            XpmMode::Physical => {
                cascade.validate()?;
                let gamma = cascade.fibers[0].gamma_per_w_km;
                Ok(2.0 * gamma * cascade_effective_length(cascade))
            }
        }
    }
}

/// XPM phase shift in radians imposed by instantaneous pump power `power_w`.
pub fn xpm_phase(power_w: f64, cfg: &XpmModelConfig, cascade: &FiberCascade) -> Result<f64> {
    if power_w < 0.0 || power_w.is_nan() {
        return Err(Error::NegativePower(power_w));
    }
    match (cfg.mode, cfg.phase_scale) {
        // ratio first, so the calibration point maps to the reference phase
        // without rounding (55 mW → 3π/2, 38.5 mW → 0.7·3π/2)
        (XpmMode::Calibrated, None) => {
            cfg.phase_per_watt(cascade)?;
            Ok(cfg.reference_phase_rad * (power_w / cfg.reference_power_w))
        }
        _ => Ok(cfg.phase_per_watt(cascade)? * power_w),
    }
}

/// Unit-amplitude probe whose phase tracks `|pam4|²` sample by sample.
pub fn convert_pam4_to_qpsk(
    pam4: &ComplexWaveform,
    cfg: &XpmModelConfig,
    cascade: &FiberCascade,
) -> Result<ComplexWaveform> {
    if !pam4.is_finite() {
        return Err(Error::InvalidArgument("PAM4 waveform contains non-finite samples".into()));
    }
    let k = cfg.phase_per_watt(cascade)?;
    let out = pam4
        .samples()
        .iter()
        .map(|s| Complex64::from_polar(1.0, k * s.norm_sqr()))
        .collect();
    Ok(pam4.with_samples(out))
}

/// Noiseless gateway output for each PAM4 level at `peak_power_w`.
pub fn reference_constellation(
    cfg: &XpmModelConfig,
    cascade: &FiberCascade,
    peak_power_w: f64,
    labeling: Labeling,
) -> Result<ShapedConstellation> {
    if !(peak_power_w > 0.0) {
        return Err(Error::InvalidArgument(format!("peak power must be positive, got {peak_power_w}")));
    }
    let k = cfg.phase_per_watt(cascade)?;
    let phases = [0.0, 1.0, 2.0, 3.0].map(|l| k * peak_power_w * l / 3.0);
    let mut c = ShapedConstellation::from_phases(phases, labeling)?;
    c.peak_power_w = Some(peak_power_w);
    c.generator = match cfg.mode {
        XpmMode::Calibrated => "calibrated".into(),
        XpmMode::Physical => "physical".into(),
    };
    Ok(c)
}
