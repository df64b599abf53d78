//! Configuration, sweeps and figure pipelines.
//!
//! Every pipeline writes into `cfg.output_dir` and returns its results, so
//! the CLI and the examples share one code path. Outputs are deterministic
//! for a given config: rows are sorted by key before writing and all
//! randomness is derived from the configured seeds.

mod config;
mod pipeline;
mod selftest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use config::*;
pub use pipeline::*;
pub use selftest::{selftest, Check};

use crate::demap::{MlpModel, TrainReport};
use crate::error::{Error, Result};
use crate::gateway::{cascade_effective_length, effective_length, xpm_phase, XpmMode, XpmModelConfig};
use crate::metrics::{crossing_point, phase_stats_per_level, LevelPhaseStats};
use crate::signal::RngSeed;

pub const SWEEP_HEADER: [&str; 10] = [
    "snr_db",
    "power_mw",
    "demapper",
    "ber",
    "ber_ci_lo",
    "ber_ci_hi",
    "gmi",
    "n_bits",
    "seed",
    "config_hash",
];
pub const DUMP_HEADER: [&str; 4] = ["i", "q", "level", "bits"];

/// GMI level at which SNR crossings are read.
pub const GMI_THRESHOLD: f64 = 0.8;
pub const FIG4_SNR_DB: [f64; 3] = [20.0, 25.0, 30.0];
pub const FIG4_POWER_MW: [f64; 5] = [38.5, 44.0, 49.5, 55.0, 60.5];
/// Shaped and standard operating points compared by [`run_fig6`].
pub const FIG6_SHAPED_MW: f64 = 38.5;
pub const FIG6_STANDARD_MW: f64 = 55.0;

/// A cell whose demapper could not be trained.
#[derive(Debug, Clone, Serialize)]
pub struct FailedCell {
    pub cell: Cell,
    pub demapper: DemapperKind,
    pub reason: String,
}

/// What the receiver DSP estimated for one cell. With shaped constellations
/// the 4th-power tone used by FOC weakens, so the residual offset estimate is
/// kept alongside the results.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CellDsp {
    pub cell: Cell,
    pub est_offset_hz: f64,
    pub quarter_turns: u8,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub failed: Vec<FailedCell>,
    /// In grid order (power, SNR, seed).
    pub dsp: Vec<CellDsp>,
}

fn is_training_failure(e: &Error) -> bool {
    match e {
        Error::Diverged { .. } | Error::NonFinite { .. } => true,
        Error::Stage { source, .. } => is_training_failure(source),
        _ => false,
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Grid of cells in key order (power, SNR, seed).
pub fn sweep_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let s = &cfg.sweep;
    let mut cells = Vec::new();
    for &power_mw in &s.peak_power_mw {
        for &snr_db in &s.pam4_snr_db {
            for &seed in &s.seeds {
                cells.push(Cell {
                    snr_db,
                    power_mw,
                    seed: RngSeed(seed),
                });
            }
        }
    }
    cells
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.power_mw
            .total_cmp(&b.power_mw)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.demapper.cmp(&b.demapper))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Evaluates every configured demapper on every grid cell.
///
/// Each frame always carries a training segment so the test segment (and
/// hence the linear and hard results) does not depend on which demappers are
/// selected. Training failures are recorded in `failed` with a NaN row; all
/// other errors abort the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let hash = cfg.hash();
    let kinds = cfg.sweep.demappers.clone();
    let n_train = train_symbols(cfg);
    let n_test = cfg.test_bits / 2;
    let want_dnn = kinds.contains(&DemapperKind::Dnn);
    let pool = pool(cfg.workers)?;

    // train-once: one model per (power, seed), shared read-only by its cells
    let mut shared: BTreeMap<(u64, u64), std::result::Result<MlpModel, String>> = BTreeMap::new();
    if let (true, DnnTraining::TrainOnce { snr_db }) = (want_dnn, cfg.demapper.training) {
        let keys: Vec<(f64, u64)> = cfg
            .sweep
            .peak_power_mw
            .iter()
            .flat_map(|&p| cfg.sweep.seeds.iter().map(move |&s| (p, s)))
            .collect();
        let trained: Vec<_> = pool.install(|| {
            keys.par_iter()
                .map(|&(power_mw, seed)| {
                    let cell = Cell {
                        snr_db,
                        power_mw,
                        seed: RngSeed(seed),
                    };
                    let frame = simulate_frame(cfg, &cell, n_train, 0)?;
                    let model = match train_dnn(cfg, &frame) {
                        Ok((m, _)) => Ok(m),
                        Err(e) if is_training_failure(&e) => Err(e.to_string()),
                        Err(e) => return Err(e),
                    };
                    Ok(((power_mw.to_bits(), seed), model))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        shared.extend(trained);
    }

    let cells = sweep_cells(cfg);
    let per_cell: Vec<(Vec<SweepRow>, Vec<FailedCell>, CellDsp)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let frame = simulate_frame(cfg, cell, n_train, n_test)?;
                let mut rows = Vec::new();
                let mut failed = Vec::new();
                for &kind in &kinds {
                    let model = match (kind, shared.get(&(cell.power_mw.to_bits(), cell.seed.0))) {
                        (DemapperKind::Dnn, Some(Ok(m))) => Some(m),
                        (DemapperKind::Dnn, Some(Err(reason))) => {
                            rows.push(SweepRow::failed(cell, kind, &hash));
                            failed.push(FailedCell {
                                cell: *cell,
                                demapper: kind,
                                reason: reason.clone(),
                            });
                            continue;
                        }
                        _ => None,
                    };
                    match demap_frame(cfg, &frame, kind, model) {
                        Ok(o) => rows.push(SweepRow::new(cell, kind, &o, &hash)),
                        Err(e) if is_training_failure(&e) => {
                            rows.push(SweepRow::failed(cell, kind, &hash));
                            failed.push(FailedCell {
                                cell: *cell,
                                demapper: kind,
                                reason: e.to_string(),
                            });
                        }
                        Err(e) => return Err(e.in_stage("demap")),
                    }
                }
                let dsp = CellDsp {
                    cell: *cell,
                    est_offset_hz: frame.est_offset_hz,
                    quarter_turns: frame.quarter_turns,
                };
                Ok((rows, failed, dsp))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut out = SweepResult::default();
    for (rows, failed, dsp) in per_cell {
        out.rows.extend(rows);
        out.failed.extend(failed);
        out.dsp.push(dsp);
    }
    sort_rows(&mut out.rows);
    Ok(out)
}

/// Seed-averaged value of one (demapper, power, SNR) point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub demapper: DemapperKind,
    pub power_mw: f64,
    pub snr_db: f64,
    pub ber: f64,
    pub gmi: f64,
    pub seeds: usize,
}

/// Averages rows over seeds, ignoring failed cells. Output is sorted by
/// (demapper, power, SNR).
pub fn average_over_seeds(rows: &[SweepRow]) -> Vec<CurvePoint> {
    let mut acc: BTreeMap<(DemapperKind, u64, u64), CurvePoint> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.ber.is_finite() && r.gmi.is_finite()) {
        // f64 bit patterns of positive values sort like the values
        let p = acc
            .entry((r.demapper, r.power_mw.to_bits(), r.snr_db.to_bits()))
            .or_insert(CurvePoint {
                demapper: r.demapper,
                power_mw: r.power_mw,
                snr_db: r.snr_db,
                ber: 0.0,
                gmi: 0.0,
                seeds: 0,
            });
        p.ber += r.ber;
        p.gmi += r.gmi;
        p.seeds += 1;
    }
    acc.into_values()
        .map(|p| CurvePoint {
            ber: p.ber / p.seeds as f64,
            gmi: p.gmi / p.seeds as f64,
            ..p
        })
        .collect()
}

/// The points of one curve, sorted by SNR.
pub fn curve(points: &[CurvePoint], demapper: DemapperKind, power_mw: f64) -> Vec<&CurvePoint> {
    let mut c: Vec<_> = points
        .iter()
        .filter(|p| p.demapper == demapper && p.power_mw == power_mw)
        .collect();
    c.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    c
}

/// SNR at which a seed-averaged GMI curve first reaches `threshold`.
pub fn gmi_crossing(points: &[CurvePoint], demapper: DemapperKind, power_mw: f64, threshold: f64) -> Option<f64> {
    let c = curve(points, demapper, power_mw);
    let xs: Vec<f64> = c.iter().map(|p| p.snr_db).collect();
    let ys: Vec<f64> = c.iter().map(|p| p.gmi).collect();
    crossing_point(&xs, &ys, threshold)
}

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub demapper: DemapperKind,
    pub power_mw: f64,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig6Report {
    pub sweep: SweepResult,
    pub curves: Vec<CurvePoint>,
    pub crossings: Vec<Crossing>,
    /// Linear crossing minus DNN crossing at the standard power.
    pub dnn_over_linear_db: Option<f64>,
    /// DNN crossing at the standard power minus at the shaped power.
    pub shaping_gain_db: Option<f64>,
    /// SNR points where DNN BER at the shaped power is no worse than at the
    /// standard power, out of the points where both exist.
    pub shaped_ber_wins: usize,
    pub shaped_ber_points: usize,
}

/// Linear and DNN sweeps at the shaped and standard powers, with GMI
/// crossings and gains. The power and demapper axes of `cfg.sweep` are
/// replaced; the SNR and seed axes are used as given.
pub fn run_fig6(cfg: &ExperimentConfig) -> Result<Fig6Report> {
    let mut cfg = cfg.clone();
    cfg.sweep.peak_power_mw = vec![FIG6_SHAPED_MW, FIG6_STANDARD_MW];
    cfg.sweep.demappers = vec![DemapperKind::Linear, DemapperKind::Dnn];
    let sweep = run_sweep(&cfg)?;
    let curves = average_over_seeds(&sweep.rows);

    let mut crossings = Vec::new();
    for &demapper in &cfg.sweep.demappers {
        for &power_mw in &cfg.sweep.peak_power_mw {
            crossings.push(Crossing {
                demapper,
                power_mw,
                snr_db: gmi_crossing(&curves, demapper, power_mw, GMI_THRESHOLD),
            });
        }
    }
    let at = |d, p| gmi_crossing(&curves, d, p, GMI_THRESHOLD);
    let dnn_std = at(DemapperKind::Dnn, FIG6_STANDARD_MW);
    let dnn_over_linear_db = at(DemapperKind::Linear, FIG6_STANDARD_MW).zip(dnn_std).map(|(l, d)| l - d);
    let shaping_gain_db = dnn_std.zip(at(DemapperKind::Dnn, FIG6_SHAPED_MW)).map(|(s, o)| s - o);

    let shaped = curve(&curves, DemapperKind::Dnn, FIG6_SHAPED_MW);
    let standard = curve(&curves, DemapperKind::Dnn, FIG6_STANDARD_MW);
    let mut wins = 0;
    let mut points = 0;
    for s in &shaped {
        if let Some(t) = standard.iter().find(|t| t.snr_db == s.snr_db) {
            points += 1;
            if s.ber <= t.ber {
                wins += 1;
            }
        }
    }

    let report = Fig6Report {
        sweep,
        curves,
        crossings,
        dnn_over_linear_db,
        shaping_gain_db,
        shaped_ber_wins: wins,
        shaped_ber_points: points,
    };
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    write_sweep_csv(dir.join("fig6_rows.csv"), &report.sweep.rows)?;
    write_curve_table(dir.join("fig6_ber.csv"), &report.curves, |p| p.ber)?;
    write_curve_table(dir.join("fig6_gmi.csv"), &report.curves, |p| p.gmi)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        gmi_threshold: f64,
        crossings: &'a [Crossing],
        dnn_over_linear_db: Option<f64>,
        shaping_gain_db: Option<f64>,
        shaped_ber_wins: usize,
        shaped_ber_points: usize,
        failed: &'a [FailedCell],
        dsp: &'a [CellDsp],
    }
    let summary = Summary {
        gmi_threshold: GMI_THRESHOLD,
        crossings: &report.crossings,
        dnn_over_linear_db: report.dnn_over_linear_db,
        shaping_gain_db: report.shaping_gain_db,
        shaped_ber_wins: report.shaped_ber_wins,
        shaped_ber_points: report.shaped_ber_points,
        failed: &report.sweep.failed,
        dsp: &report.sweep.dsp,
    };
    std::fs::write(dir.join("fig6_summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(report)
}

/// One constellation-dump cell.
#[derive(Debug, Clone, Serialize)]
pub struct Fig4Cell {
    pub snr_db: f64,
    pub power_mw: f64,
    pub file: PathBuf,
    pub phase_stats: [Option<LevelPhaseStats>; 4],
    #[serde(skip)]
    pub rows: Vec<DumpRow>,
}

/// Post-DSP constellation dumps over the SNR × power grid, `dump_symbols`
/// per cell.
pub fn run_fig4(cfg: &ExperimentConfig) -> Result<Vec<Fig4Cell>> {
    cfg.validate()?;
    let dir = cfg.output_dir.join("fig4");
    std::fs::create_dir_all(&dir)?;
    let grid: Vec<(f64, f64)> = FIG4_SNR_DB
        .iter()
        .flat_map(|&s| FIG4_POWER_MW.iter().map(move |&p| (s, p)))
        .collect();
    let cells = pool(cfg.workers)?.install(|| {
        grid.par_iter()
            .map(|&(snr_db, power_mw)| {
                let cell = Cell {
                    snr_db,
                    power_mw,
                    seed: cfg.seed,
                };
                let frame = simulate_frame(cfg, &cell, 0, cfg.dump_symbols)?;
                let phase_stats = phase_stats_per_level(frame.symbols_of(Part::Test), frame.levels_of(Part::Test))?;
                let file = dir.join(format!("snr{snr_db}_p{power_mw}.csv"));
                Ok(Fig4Cell {
                    snr_db,
                    power_mw,
                    file,
                    phase_stats,
                    rows: dump_rows(&frame, cfg.dump_symbols),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for c in &cells {
        write_dump_csv(&c.file, &c.rows)?;
    }
    Ok(cells)
}

/// One-shot conversion at the configured operating point; writes the dump.
pub fn run_convert(cfg: &ExperimentConfig) -> Result<(Frame, PathBuf)> {
    cfg.validate()?;
    let cell = Cell {
        snr_db: cfg.tx.pam4_snr_db,
        power_mw: cfg.gateway.peak_power_mw,
        seed: cfg.seed,
    };
    let frame = simulate_frame(cfg, &cell, 0, cfg.dump_symbols)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("constellation.csv");
    write_dump_csv(&path, &dump_rows(&frame, cfg.dump_symbols))?;
    Ok((frame, path))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub row: SweepRow,
    pub report: TrainReport,
    pub model_path: PathBuf,
    pub num_params: usize,
}

/// Trains a DNN at the configured operating point, scores it on the test
/// segment and saves it as `model.ogsmlp`.
pub fn run_train_dnn(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let cell = Cell {
        snr_db: cfg.tx.pam4_snr_db,
        power_mw: cfg.gateway.peak_power_mw,
        seed: cfg.seed,
    };
    let frame = simulate_frame(cfg, &cell, train_symbols(cfg), cfg.test_bits / 2)?;
    let (model, report) = train_dnn(cfg, &frame).map_err(|e| e.in_stage("train"))?;
    let outcome = demap_frame(cfg, &frame, DemapperKind::Dnn, Some(&model))?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let model_path = cfg.output_dir.join("model.ogsmlp");
    model.save(&model_path)?;
    Ok(TrainOutcome {
        row: SweepRow::new(&cell, DemapperKind::Dnn, &outcome, &cfg.hash()),
        report,
        model_path,
        num_params: model.num_params(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRow {
    pub power_mw: f64,
    /// Phase of the top level in each mode.
    pub calibrated_rad: f64,
    pub physical_rad: f64,
    /// Spacing between adjacent levels, in units of π.
    pub calibrated_spacing_pi: f64,
    pub physical_spacing_pi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub calibrated_rad_per_w: f64,
    pub physical_rad_per_w: f64,
    pub effective_length_km: Vec<f64>,
    pub cascade_effective_length_km: f64,
    pub rows: Vec<CalibrationRow>,
    /// Physical over calibrated phase (power independent).
    pub physical_to_calibrated: f64,
}

/// Phase of the top level under both gateway models at every sweep power.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<CalibrationReport> {
    let cascade = &cfg.gateway.cascade;
    let cal = XpmModelConfig {
        mode: XpmMode::Calibrated,
        ..cfg.gateway.xpm
    };
    let phys = XpmModelConfig {
        mode: XpmMode::Physical,
        ..cfg.gateway.xpm
    };
    let mut rows = Vec::new();
    for &p in &cfg.sweep.peak_power_mw {
        let c = xpm_phase(p * 1e-3, &cal, cascade)?;
        let f = xpm_phase(p * 1e-3, &phys, cascade)?;
        rows.push(CalibrationRow {
            power_mw: p,
            calibrated_rad: c,
            physical_rad: f,
            calibrated_spacing_pi: c / 3.0 / std::f64::consts::PI,
            physical_spacing_pi: f / 3.0 / std::f64::consts::PI,
        });
    }
    let calibrated_rad_per_w = cal.phase_per_watt(cascade)?;
    let physical_rad_per_w = phys.phase_per_watt(cascade)?;
    Ok(CalibrationReport {
        calibrated_rad_per_w,
        physical_rad_per_w,
        effective_length_km: cascade.fibers.iter().map(effective_length).collect(),
        cascade_effective_length_km: cascade_effective_length(cascade),
        rows,
        physical_to_calibrated: physical_rad_per_w / calibrated_rad_per_w,
    })
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(SWEEP_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dump_csv(path: impl AsRef<Path>, rows: &[DumpRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(DUMP_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

/// Wide table: one row per SNR, one column per (demapper, power) curve.
fn write_curve_table(path: impl AsRef<Path>, points: &[CurvePoint], value: impl Fn(&CurvePoint) -> f64) -> Result<()> {
    let mut columns: Vec<(DemapperKind, f64)> = points.iter().map(|p| (p.demapper, p.power_mw)).collect();
    columns.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    columns.dedup();
    let mut snrs: Vec<f64> = points.iter().map(|p| p.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();

    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["snr_db".to_string()];
    header.extend(columns.iter().map(|(d, p)| format!("{d}_{p}mw")));
    w.write_record(&header)?;
    for s in snrs {
        let mut rec = vec![s.to_string()];
        for &(d, p) in &columns {
            let v = points
                .iter()
                .find(|q| q.demapper == d && q.power_mw == p && q.snr_db == s)
                .map(&value);
            rec.push(v.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Record of one invocation, written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<PathBuf>,
    pub elapsed_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, outputs: Vec<PathBuf>, started: Instant) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            outputs,
            elapsed_s: started.elapsed().as_secs_f64(),
        }
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        std::fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
