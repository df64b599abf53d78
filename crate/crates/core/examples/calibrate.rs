//! Gateway phase versus HNLF input power under both XPM models.
//!
//! `cargo run --example calibrate`

use ogs_core::harness::{calibrate, ExperimentConfig};

fn main() -> ogs_core::Result<()> {
    let r = calibrate(&ExperimentConfig::default())?;
    println!(
        "L_eff per fiber {:?} km, cascade {:.4} km",
        r.effective_length_km, r.cascade_effective_length_km
    );
    println!("physical / calibrated phase ratio: {:.4}", r.physical_to_calibrated);
    println!("{:>8} {:>12} {:>12}", "P [mW]", "spacing/π", "physical/π");
    for row in &r.rows {
        println!(
            "{:>8.1} {:>12.4} {:>12.4}",
            row.power_mw, row.calibrated_spacing_pi, row.physical_spacing_pi
        );
    }
    Ok(())
}
