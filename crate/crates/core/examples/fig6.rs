//! Linear vs DNN demapping at the shaped (38.5 mW) and standard (55 mW)
//! powers, with SNR at GMI 0.8.
//!
//! A reduced grid keeps this to a few minutes on one core; use the `ogs fig6`
//! command with the default config for the full run.
//!
//! `cargo run --release --example fig6 [output_dir]`

#![allow(clippy::field_reassign_with_default)]

use ogs_core::harness::{curve, run_fig6, DemapperKind, ExperimentConfig};

fn main() -> ogs_core::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.output_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("ogs-fig6"));
    cfg.sweep.pam4_snr_db = (0..=8).map(|i| 13.0 + i as f64).collect();
    cfg.test_bits = 1 << 17;
    cfg.demapper.train.epochs = 10;

    let r = run_fig6(&cfg)?;
    for kind in [DemapperKind::Linear, DemapperKind::Dnn] {
        for p in [38.5, 55.0] {
            let gmi: Vec<String> = curve(&r.curves, kind, p).iter().map(|c| format!("{:.3}", c.gmi)).collect();
            println!("{kind:<6} {p:>4} mW  GMI {}", gmi.join(" "));
        }
    }
    for c in &r.crossings {
        println!("GMI 0.8 crossing, {} {} mW: {:?}", c.demapper, c.power_mw, c.snr_db);
    }
    println!("DNN over linear at 55 mW: {:?} dB", r.dnn_over_linear_db);
    println!("shaping gain with DNN: {:?} dB", r.shaping_gain_db);
    println!("written to {}", cfg.output_dir.display());
    Ok(())
}
