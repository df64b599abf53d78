//! Hard, linear and DNN demappers on the same shaped frame.
//!
//! `cargo run --release --example demappers`

use ogs_core::harness::{demap_frame, simulate_frame, train_dnn, train_symbols, Cell, DemapperKind, ExperimentConfig};
use ogs_core::signal::RngSeed;

fn main() -> ogs_core::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.demapper.train.epochs = 10;
    for power_mw in [38.5, 55.0] {
        let cell = Cell {
            snr_db: 16.0,
            power_mw,
            seed: RngSeed(1),
        };
        let frame = simulate_frame(&cfg, &cell, train_symbols(&cfg), 1 << 17)?;
        let (model, report) = train_dnn(&cfg, &frame)?;
        println!(
            "{power_mw} mW, SNR 16 dB ({} parameters, loss {:.4} -> {:.4})",
            model.num_params(),
            report.train_loss[0],
            report.train_loss.last().unwrap()
        );
        for kind in [DemapperKind::Hard, DemapperKind::Linear, DemapperKind::Dnn] {
            let o = demap_frame(&cfg, &frame, kind, Some(&model))?;
            println!("  {kind:<6} BER {:.3e}  GMI {:.4}", o.ber.ber, o.gmi);
        }
    }
    Ok(())
}
