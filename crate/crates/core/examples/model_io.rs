//! Save a trained demapper, reload it and confirm identical LLRs.
//!
//! `cargo run --release --example model_io`

use ogs_core::demap::MlpModel;
use ogs_core::harness::{simulate_frame, train_dnn, Cell, ExperimentConfig, Part};
use ogs_core::signal::RngSeed;

fn main() -> ogs_core::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.demapper.train.epochs = 3;
    cfg.demapper.train.train_bits = 20_000;
    let cell = Cell {
        snr_db: 22.0,
        power_mw: 55.0,
        seed: RngSeed(5),
    };
    let frame = simulate_frame(&cfg, &cell, 10_000, 4096)?;
    let (model, _) = train_dnn(&cfg, &frame)?;

    let path = std::env::temp_dir().join("ogs-example-model.ogsmlp");
    model.save(&path)?;
    let loaded = MlpModel::load(&path)?;
    let test = frame.symbols_of(Part::Test);
    let a = model.infer(test)?;
    let b = loaded.infer(test)?;
    let identical = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    println!(
        "{} bytes at {}; {} LLRs bit-identical: {identical}",
        std::fs::metadata(&path)?.len(),
        path.display(),
        a.len()
    );
    Ok(())
}
