//! Constellation dumps over the SNR × power grid.
//!
//! `cargo run --release --example fig4 [output_dir]`

#![allow(clippy::field_reassign_with_default)]

use ogs_core::harness::{run_fig4, ExperimentConfig};

fn main() -> ogs_core::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.output_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("ogs-fig4"));
    for c in run_fig4(&cfg)? {
        let spread: Vec<String> = c
            .phase_stats
            .iter()
            .map(|s| s.map_or("-".into(), |s| format!("{:.3}", s.std)))
            .collect();
        println!(
            "SNR {:>4} dB  {:>5} mW  phase std [{}]  -> {}",
            c.snr_db,
            c.power_mw,
            spread.join(" "),
            c.file.display()
        );
    }
    Ok(())
}
