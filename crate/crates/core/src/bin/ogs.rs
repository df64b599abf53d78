use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ogs_core::harness::{self, ExperimentConfig, RunManifest};
use ogs_core::{Error, Result};

/// PAM4-to-QPSK gateway link simulator.
///
/// Any config key can be overridden after the subcommand with
/// `--key value` or `--key=value`, using either the dotted path
/// (`--gateway.xpm.mode physical`) or a unique leaf name (`--test-bits 65536`).
#[derive(Parser)]
#[command(name = "ogs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML config file; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config overrides as `--key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Gateway phase under both XPM models at each sweep power.
    Calibrate(Common),
    /// One-shot PAM4→QPSK conversion; writes constellation.csv.
    Convert(Common),
    /// Train a DNN demapper at one operating point; writes model.ogsmlp.
    TrainDnn(Common),
    /// Full grid sweep; writes sweep.csv.
    Sweep(Common),
    /// Constellation dumps over the 3 × 5 SNR/power grid.
    Fig4(Common),
    /// Linear vs DNN at 38.5 and 55 mW with GMI crossings.
    Fig6(Common),
    /// Fast internal consistency checks.
    Selftest(Common),
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected `--key`, got `{a}`")))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("missing value for `--{key}`")))?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    ExperimentConfig::load(c.config.as_deref(), &parse_overrides(&c.overrides)?)
}

fn run(cli: Cli) -> Result<bool> {
    let started = Instant::now();
    let (name, common) = match &cli.command {
        Command::Calibrate(c) => ("calibrate", c),
        Command::Convert(c) => ("convert", c),
        Command::TrainDnn(c) => ("train-dnn", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Fig4(c) => ("fig4", c),
        Command::Fig6(c) => ("fig6", c),
        Command::Selftest(c) => ("selftest", c),
    };
    let cfg = load(common)?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut ok = true;
    let outputs = match cli.command {
        Command::Calibrate(_) => {
            let r = harness::calibrate(&cfg)?;
            println!(
                "L_eff: {:?} km, cascade {:.4} km",
                r.effective_length_km, r.cascade_effective_length_km
            );
            println!(
                "rad/W: calibrated {:.4}, physical {:.4} (physical/calibrated = {:.4})",
                r.calibrated_rad_per_w, r.physical_rad_per_w, r.physical_to_calibrated
            );
            println!("power_mw  cal_rad  cal_spacing/pi  phys_rad  phys_spacing/pi");
            for row in &r.rows {
                println!(
                    "{:8.2}  {:7.4}  {:14.4}  {:8.4}  {:15.4}",
                    row.power_mw, row.calibrated_rad, row.calibrated_spacing_pi, row.physical_rad, row.physical_spacing_pi
                );
            }
            let path = dir.join("calibration.json");
            std::fs::write(&path, serde_json::to_string_pretty(&r)?)?;
            vec![path]
        }
        Command::Convert(_) => {
            let (frame, path) = harness::run_convert(&cfg)?;
            println!(
                "{} symbols at {} mW, SNR {} dB -> {}",
                frame.test,
                frame.cell.power_mw,
                frame.cell.snr_db,
                path.display()
            );
            vec![path]
        }
        Command::TrainDnn(_) => {
            let t = harness::run_train_dnn(&cfg)?;
            println!(
                "{} params, final loss train {:.5} / held-out {:.5}; test BER {:.3e} [{:.3e}, {:.3e}], GMI {:.4}",
                t.num_params,
                t.report.train_loss.last().copied().unwrap_or(f64::NAN),
                t.report.test_loss.last().copied().unwrap_or(f64::NAN),
                t.row.ber,
                t.row.ber_ci_lo,
                t.row.ber_ci_hi,
                t.row.gmi
            );
            vec![t.model_path]
        }
        Command::Sweep(_) => {
            let r = harness::run_sweep(&cfg)?;
            let path = dir.join("sweep.csv");
            harness::write_sweep_csv(&path, &r.rows)?;
            for f in &r.failed {
                eprintln!("failed cell {:?} {}: {}", f.cell, f.demapper, f.reason);
            }
            let dsp = dir.join("sweep_dsp.json");
            std::fs::write(&dsp, serde_json::to_string_pretty(&r.dsp)?)?;
            println!("{} rows -> {}", r.rows.len(), path.display());
            vec![path, dsp]
        }
        Command::Fig4(_) => {
            let cells = harness::run_fig4(&cfg)?;
            for c in &cells {
                let stds: Vec<String> = c
                    .phase_stats
                    .iter()
                    .map(|s| s.as_ref().map_or("-".into(), |s| format!("{:.4}", s.std)))
                    .collect();
                println!("SNR {:4} dB  {:5} mW  std per level [{}]", c.snr_db, c.power_mw, stds.join(", "));
            }
            cells.into_iter().map(|c| c.file).collect()
        }
        Command::Fig6(_) => {
            let r = harness::run_fig6(&cfg)?;
            for c in &r.crossings {
                println!("GMI {} crossing {} @ {} mW: {:?} dB", harness::GMI_THRESHOLD, c.demapper, c.power_mw, c.snr_db);
            }
            println!("DNN over linear: {:?} dB", r.dnn_over_linear_db);
            println!("shaping gain (DNN): {:?} dB", r.shaping_gain_db);
            println!("shaped BER <= standard BER at {}/{} SNR points", r.shaped_ber_wins, r.shaped_ber_points);
            ["fig6_rows.csv", "fig6_ber.csv", "fig6_gmi.csv", "fig6_summary.json"]
                .iter()
                .map(|f| dir.join(f))
                .collect()
        }
        Command::Selftest(_) => {
            for check in ogs_core::harness::selftest()? {
                println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
                ok &= check.passed;
            }
            vec![]
        }
    };
    let manifest = RunManifest::new(name, &cfg, outputs, started).write(&dir)?;
    println!("manifest -> {}", manifest.display());
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
