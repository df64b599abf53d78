use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use super::{run_single, DemapperKind, ExperimentConfig};
use crate::constellation::Labeling;
use crate::demap::{gradient_check, MlpModel, MlpSpec};
use crate::error::Result;
use crate::gateway::{cascade_effective_length, effective_length, reference_constellation, xpm_phase, FiberCascade, XpmModelConfig};
use crate::metrics::{gmi_from_llrs, LlrFrame};
use crate::rx::{self, CprConfig, DspChain};
use crate::signal::{Complex64, ComplexWaveform, RngSeed, Stage};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Quick end-to-end consistency checks (a few seconds).
pub fn selftest() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let cascade = FiberCascade::default();
    let xpm = XpmModelConfig::default();

    let p55 = xpm_phase(0.055, &xpm, &cascade)?;
    let p385 = xpm_phase(0.0385, &xpm, &cascade)?;
    out.push(check(
        "calibrated phase",
        (p55 - 1.5 * PI).abs() < 1e-12 && (p385 - 0.7 * 1.5 * PI).abs() < 1e-12,
        format!("55 mW {p55:.6} rad, 38.5 mW {p385:.6} rad"),
    ));

    let la = effective_length(&cascade.fibers[0]);
    let lb = effective_length(&cascade.fibers[1]);
    let lc = cascade_effective_length(&cascade);
    out.push(check(
        "effective lengths",
        (la - 1.866).abs() <= 1e-3 && (lb - 0.917).abs() <= 1e-3 && (lc - 2.362).abs() <= 2e-3,
        format!("{la:.4} / {lb:.4} / {lc:.4} km"),
    ));

    let mut rng = RngSeed(3).stream(Stage::Other(100));
    let symbols: Vec<Complex64> = (0..32)
        .map(|_| Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
        .collect();
    let bits: Vec<u8> = (0..64).map(|_| rng.gen_range(0..2)).collect();
    let model = MlpModel::new(
        MlpSpec {
            width: 8,
            blocks: 2,
            ..MlpSpec::default()
        },
        RngSeed(5),
    )?;
    let err = gradient_check(&model, &symbols, &bits, 1e-5)?;
    out.push(check("gradient check", err < 1e-4, format!("max relative error {err:.2e}")));

    let zero = gmi_from_llrs(&LlrFrame::new(vec![0.0; 64], Some(bits.clone()))?)?;
    out.push(check("zero-LLR GMI", zero.gmi_per_bit == 0.0, format!("{}", zero.gmi_per_bit)));

    let restored = MlpModel::from_bytes(&model.to_bytes())?;
    let same = model.infer(&symbols)? == restored.infer(&symbols)?;
    out.push(check("model round trip", same, "bit-identical inference".into()));

    let c = reference_constellation(&xpm, &cascade, 0.055, Labeling::Gray)?;
    let levels: Vec<u8> = (0..2048).map(|_| rng.gen_range(0..4)).collect();
    let pts = rx::points_for_levels(&levels, &c);
    let samples: Vec<Complex64> = pts.iter().flat_map(|&p| [p, p]).collect();
    let w = ComplexWaveform::new(samples, 2, 10e9)?;
    let chain = DspChain {
        foc_enabled: true,
        cpr: CprConfig::new(0.01, c.clone())?,
        training_prefix: pts[..256].to_vec(),
    };
    let dsp = rx::run_dsp_chain(&w, &chain)?;
    let dev = dsp.symbols.iter().zip(&pts).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    out.push(check("clean DSP idempotence", dev <= 1e-9, format!("max deviation {dev:.1e}")));

    let mut cfg = ExperimentConfig {
        test_bits: 1 << 14,
        ..ExperimentConfig::default()
    };
    cfg.tx.pam4_snr_db = 30.0;
    cfg.demapper.kind = DemapperKind::Hard;
    let (a, _) = run_single(&cfg)?;
    let (b, _) = run_single(&cfg)?;
    out.push(check(
        "55 mW, 30 dB hard decision",
        a.ber < 1e-3 && a == b,
        format!("BER {:.2e}, repeat identical: {}", a.ber, a == b),
    ));
    Ok(out)
}
