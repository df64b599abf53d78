//! Receiver DSP against a carrier offset and laser phase noise.
//!
//! `cargo run --example dsp_chain`

#![allow(clippy::field_reassign_with_default)]

use ogs_core::demap::hard_decide;
use ogs_core::harness::{simulate_frame, Cell, ExperimentConfig, Part, RunMode};
use ogs_core::metrics::ber_count;
use ogs_core::signal::{BitSequence, RngSeed};

fn main() -> ogs_core::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.mode = RunMode::Fig3;
    let cell = Cell {
        snr_db: 25.0,
        power_mw: 55.0,
        seed: RngSeed(11),
    };
    for offset in [0.0, 150e6, 600e6, -1.1e9] {
        cfg.rx.impairments.freq_offset_hz = offset;
        let f = simulate_frame(&cfg, &cell, 0, 1 << 15)?;
        let decided = hard_decide(f.symbols_of(Part::Test), &f.reference);
        let truth = BitSequence::new(f.bits_of(Part::Test).to_vec())?;
        let ber = ber_count(&decided, &truth)?;
        println!(
            "offset {:>+9.1} MHz  estimate {:>+9.3} MHz  quarter turns {}  BER {:.2e}",
            offset / 1e6,
            f.est_offset_hz / 1e6,
            f.quarter_turns,
            ber.ber
        );
    }
    Ok(())
}
