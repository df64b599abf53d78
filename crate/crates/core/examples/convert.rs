//! PAM4 → QPSK conversion: per-level phase spread with and without laser
//! phase noise.
//!
//! Transmitter noise enters the phase through |E|², so the spread grows with
//! the level; laser phase noise and receiver noise add a level-independent
//! floor.
//!
//! `cargo run --example convert`

use ogs_core::harness::{simulate_frame, Cell, ExperimentConfig, Part, RunMode};
use ogs_core::metrics::phase_stats_per_level;
use ogs_core::signal::RngSeed;

fn main() -> ogs_core::Result<()> {
    let cell = Cell {
        snr_db: 20.0,
        power_mw: 55.0,
        seed: RngSeed(3),
    };
    let mut cfg = ExperimentConfig::default();
    for (label, mode, rx_snr) in [
        ("tx noise only", RunMode::Fig6, None),
        ("+ 100 kHz laser, rx noise 25 dB", RunMode::Fig3, Some(25.0)),
    ] {
        cfg.mode = mode;
        cfg.rx.impairments.rx_snr_db = rx_snr;
        let f = simulate_frame(&cfg, &cell, 0, 1 << 15)?;
        let stats = phase_stats_per_level(f.symbols_of(Part::Test), f.levels_of(Part::Test))?;
        println!("{label}:");
        for s in stats.iter().flatten() {
            println!(
                "  level {}  mean {:+.4}π  std {:.4} rad",
                s.level,
                s.mean / std::f64::consts::PI,
                s.std
            );
        }
    }
    Ok(())
}
