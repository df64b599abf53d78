//! Coherent receiver: laser/LO impairments and the offline DSP chain
//! (downsampling, frequency-offset compensation, decision-directed carrier
//! phase recovery, data-aided phase-ambiguity removal).

mod cpr;
mod foc;
mod impairments;

pub use cpr::{cpr_decision_directed, resolve_phase_ambiguity, CprConfig};
pub use foc::{foc_estimate_and_correct, FocEstimate};
pub use impairments::{apply_rx_impairments, RxImpairments};

use crate::constellation::ShapedConstellation;
use crate::error::Result;
use crate::signal::{Complex64, ComplexWaveform};

/// Minimum number of symbols the FOC stage accepts.
pub const FOC_MIN_SYMBOLS: usize = 1024;

/// One complex value per symbol, taken at the middle sample of each NRZ
/// symbol (sample index `sps / 2`).
pub fn downsample(w: &ComplexWaveform) -> Vec<Complex64> {
    let sps = w.samples_per_symbol();
    w.samples().iter().skip(sps / 2).step_by(sps).copied().collect()
}

/// Settings for [`run_dsp_chain`].
#[derive(Debug, Clone)]
pub struct DspChain {
    pub foc_enabled: bool,
    pub cpr: CprConfig,
    /// Known transmitted points at the start of the frame, used to pick the
    /// correct π/2 rotation after CPR.
    pub training_prefix: Vec<Complex64>,
}

/// Symbols after the DSP chain plus what each stage estimated.
#[derive(Debug, Clone)]
pub struct DspOutput {
    pub symbols: Vec<Complex64>,
    pub est_offset_hz: f64,
    pub phase_track: Vec<f64>,
    /// Number of quarter turns removed by ambiguity resolution.
    pub quarter_turns: u8,
}

pub fn run_dsp_chain(w: &ComplexWaveform, chain: &DspChain) -> Result<DspOutput> {
    let symbols = downsample(w);
    let (symbols, est_offset_hz) = if chain.foc_enabled {
        let f = foc_estimate_and_correct(&symbols, w.symbol_rate(), 4)?;
        (f.symbols, f.offset_hz)
    } else {
        (symbols, 0.0)
    };
    let (symbols, phase_track) = cpr_decision_directed(&symbols, &chain.cpr)?;
    let (symbols, quarter_turns) = resolve_phase_ambiguity(&symbols, &chain.training_prefix);
    Ok(DspOutput {
        symbols,
        est_offset_hz,
        phase_track,
        quarter_turns,
    })
}

/// Reference point sequence for a run of level indices.
pub fn points_for_levels(levels: &[u8], c: &ShapedConstellation) -> Vec<Complex64> {
    levels.iter().map(|&l| c.points()[l as usize]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Labeling;

    fn wave(s: Vec<Complex64>, sps: usize) -> ComplexWaveform {
        ComplexWaveform::new(s, sps, 10e9).unwrap()
    }

    #[test]
    fn downsample_cases() {
        let s: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 0.0)).collect();
        assert_eq!(downsample(&wave(s.clone(), 1)), s);
        let c = vec![Complex64::new(0.3, -0.2); 8];
        assert_eq!(downsample(&wave(c, 2)), vec![Complex64::new(0.3, -0.2); 4]);
        let alt: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let d = downsample(&wave(alt, 2));
        assert_eq!(d.iter().map(|z| z.re).collect::<Vec<_>>(), vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn clean_chain_is_idempotent() {
        use crate::gateway::{reference_constellation, FiberCascade, XpmModelConfig};
        for p in [0.0385, 0.055, 0.0605] {
            let r = reference_constellation(&XpmModelConfig::default(), &FiberCascade::default(), p, Labeling::Gray)
                .unwrap();
            let levels: Vec<u8> = crate::signal::prbs_generate(15, 8192, crate::signal::RngSeed(3))
                .unwrap()
                .as_slice()
                .chunks(2)
                .map(|c| c[0] * 2 + c[1])
                .collect();
            let pts = points_for_levels(&levels, &r);
            let up: Vec<Complex64> = pts.iter().flat_map(|&z| [z, z]).collect();
            let chain = DspChain {
                foc_enabled: true,
                cpr: CprConfig::new(0.01, r.clone()).unwrap(),
                training_prefix: pts[..256].to_vec(),
            };
            let out = run_dsp_chain(&wave(up, 2), &chain).unwrap();
            assert_eq!(out.est_offset_hz, 0.0);
            assert_eq!(out.quarter_turns, 0);
            let worst = out.symbols.iter().zip(&pts).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(worst <= 1e-9, "{p}: {worst}");
        }
    }
}
