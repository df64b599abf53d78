use serde::{Deserialize, Serialize};

use super::config::{DemapperKind, ExperimentConfig, RunMode};
use crate::constellation::ShapedConstellation;
use crate::demap::{self, mlp_train, MlpModel, TrainReport};
use crate::error::{Error, Result};
use crate::gateway::{convert_pam4_to_qpsk, reference_constellation};
use crate::metrics::{ber_count, gmi_from_llrs, BerReport, LlrFrame};
use crate::pam4::{self, Pam4LevelMap, TxConfig};
use crate::rx::{self, apply_rx_impairments, CprConfig, DspChain, RxImpairments};
use crate::signal::{prbs_generate, BitSequence, Complex64, RngSeed};

/// One operating point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub snr_db: f64,
    pub power_mw: f64,
    pub seed: RngSeed,
}

/// Post-DSP symbols of one simulated frame: `[prefix | train | test]`.
#[derive(Debug, Clone)]
pub struct Frame {
    pub cell: Cell,
    pub levels: Vec<u8>,
    pub bits: BitSequence,
    pub symbols: Vec<Complex64>,
    pub reference: ShapedConstellation,
    pub prefix: usize,
    pub train: usize,
    pub test: usize,
    pub est_offset_hz: f64,
    pub quarter_turns: u8,
}

impl Frame {
    fn range(&self, part: Part) -> std::ops::Range<usize> {
        match part {
            Part::Prefix => 0..self.prefix,
            Part::Train => self.prefix..self.prefix + self.train,
            Part::Test => self.prefix + self.train..self.prefix + self.train + self.test,
        }
    }

    pub fn symbols_of(&self, part: Part) -> &[Complex64] {
        &self.symbols[self.range(part)]
    }

    pub fn levels_of(&self, part: Part) -> &[u8] {
        &self.levels[self.range(part)]
    }

    pub fn bits_of(&self, part: Part) -> &[u8] {
        let r = self.range(part);
        &self.bits.as_slice()[2 * r.start..2 * r.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Prefix,
    Train,
    Test,
}

/// Transmitter → EDFA → gateway → receiver impairments → DSP for one cell.
///
/// Bits, transmitter noise and receiver noise depend only on `cell.seed`,
/// so cells that share a seed see the same normalized noise realization.
pub fn simulate_frame(cfg: &ExperimentConfig, cell: &Cell, train_symbols: usize, test_symbols: usize) -> Result<Frame> {
    let prefix = cfg.rx.prefix_symbols;
    let total = prefix + train_symbols + test_symbols;
    let labeling = cfg.tx.labeling;

    let bits = prbs_generate(cfg.tx.prbs_order, 2 * total, cell.seed).map_err(|e| e.in_stage("prbs"))?;
    let levels = pam4::map_bits_to_levels(&bits, labeling).map_err(|e| e.in_stage("tx"))?;

    let launch_w = cfg.tx.launch_peak_mw * 1e-3;
    let target_w = cell.power_mw * 1e-3;
    let tx = TxConfig {
        symbol_rate: cfg.tx.symbol_rate,
        samples_per_symbol: cfg.tx.samples_per_symbol,
        pam4_snr_db: cell.snr_db,
        edfa_gain_db: pam4::gain_db_between(launch_w, target_w),
        seed: cell.seed,
    };
    let map = Pam4LevelMap::new(launch_w, labeling).map_err(|e| e.in_stage("tx"))?;
    let pam4_wave = pam4::synthesize_pam4(&levels, &tx, &map).map_err(|e| e.in_stage("tx"))?;
    let amplified = pam4::apply_gain(&pam4_wave, tx.edfa_gain_db);

    let gw = &cfg.gateway;
    let probe = convert_pam4_to_qpsk(&amplified, &gw.xpm, &gw.cascade).map_err(|e| e.in_stage("gateway"))?;
    let reference =
        reference_constellation(&gw.xpm, &gw.cascade, target_w, labeling).map_err(|e| e.in_stage("gateway"))?;

    let imp = match cfg.mode {
        RunMode::Fig6 => RxImpairments::none(),
        RunMode::Fig3 => cfg.rx.impairments,
    };
    let received = apply_rx_impairments(&probe, &imp, cell.seed).map_err(|e| e.in_stage("rx"))?;

    let chain = DspChain {
        foc_enabled: cfg.rx.foc,
        cpr: CprConfig::new(cfg.rx.cpr_loop_gain, reference.clone()).map_err(|e| e.in_stage("dsp"))?,
        training_prefix: rx::points_for_levels(&levels[..prefix], &reference),
    };
    let out = rx::run_dsp_chain(&received, &chain).map_err(|e| e.in_stage("dsp"))?;

    Ok(Frame {
        cell: *cell,
        levels,
        bits,
        symbols: out.symbols,
        reference,
        prefix,
        train: train_symbols,
        test: test_symbols,
        est_offset_hz: out.est_offset_hz,
        quarter_turns: out.quarter_turns,
    })
}

/// Scores of one demapper on the test part of a frame.
#[derive(Debug, Clone)]
pub struct DemapOutcome {
    pub ber: BerReport,
    pub gmi: f64,
    pub llr_scale: f64,
    pub train: Option<TrainReport>,
}

/// Trains a demapper network on the training part of `frame`. The per-epoch
/// held-out loss is tracked on the first `demapper.train.test_bits` of the
/// test part (fewer if the frame is shorter).
pub fn train_dnn(cfg: &ExperimentConfig, frame: &Frame) -> Result<(MlpModel, TrainReport)> {
    let d = &cfg.demapper;
    let mut model = MlpModel::new(d.mlp, d.train.seed.derive(frame.cell.seed.0))?;
    let n = (d.train.test_bits / 2).min(frame.test);
    let held_out = (n > 0).then(|| (&frame.symbols_of(Part::Test)[..n], &frame.bits_of(Part::Test)[..2 * n]));
    let report = mlp_train(
        &mut model,
        frame.symbols_of(Part::Train),
        frame.bits_of(Part::Train),
        held_out,
        &d.train,
    )?;
    Ok((model, report))
}

/// Runs `kind` on the test part of `frame`. DNN cells use `model` when given,
/// otherwise train one on the frame's training part.
pub fn demap_frame(
    cfg: &ExperimentConfig,
    frame: &Frame,
    kind: DemapperKind,
    model: Option<&MlpModel>,
) -> Result<DemapOutcome> {
    let test = frame.symbols_of(Part::Test);
    let truth = frame.bits_of(Part::Test).to_vec();
    let truth_seq = BitSequence::new(truth.clone())?;
    let (llrs, train) = match kind {
        DemapperKind::Hard => {
            let bits = demap::hard_decide(test, &frame.reference);
            (LlrFrame::from_hard_bits(&bits, cfg.demapper.hard_llr_max, Some(truth))?, None)
        }
        DemapperKind::Linear => {
            let unshaped = ShapedConstellation::unshaped_qpsk(cfg.tx.labeling);
            let (eq, _) = demap::linear_equalize(
                test,
                frame.symbols_of(Part::Prefix),
                frame.levels_of(Part::Prefix),
                &unshaped,
            )?;
            let bits = demap::hard_decide(&eq, &unshaped);
            (LlrFrame::from_hard_bits(&bits, cfg.demapper.hard_llr_max, Some(truth))?, None)
        }
        DemapperKind::Dnn => {
            let (owned, report);
            let m = match model {
                Some(m) => {
                    report = None;
                    m
                }
                None => {
                    let (mm, r) = train_dnn(cfg, frame)?;
                    owned = mm;
                    report = Some(r);
                    &owned
                }
            };
            (LlrFrame::new(m.infer(test)?, Some(truth))?, report)
        }
    };
    let ber = ber_count(&llrs.hard_bits(), &truth_seq)?;
    let gmi = gmi_from_llrs(&llrs)?;
    Ok(DemapOutcome {
        ber,
        gmi: gmi.gmi_per_bit,
        llr_scale: gmi.llr_scale_used,
        train,
    })
}

/// Number of symbols in the training part for `cfg`.
pub fn train_symbols(cfg: &ExperimentConfig) -> usize {
    cfg.demapper.train.train_bits / 2
}

/// One CSV record of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub power_mw: f64,
    pub demapper: DemapperKind,
    pub ber: f64,
    pub ber_ci_lo: f64,
    pub ber_ci_hi: f64,
    pub gmi: f64,
    pub n_bits: u64,
    pub seed: u64,
    pub config_hash: String,
}

impl SweepRow {
    pub fn new(cell: &Cell, kind: DemapperKind, o: &DemapOutcome, hash: &str) -> Self {
        Self {
            snr_db: cell.snr_db,
            power_mw: cell.power_mw,
            demapper: kind,
            ber: o.ber.ber,
            ber_ci_lo: o.ber.ci_lo,
            ber_ci_hi: o.ber.ci_hi,
            gmi: o.gmi,
            n_bits: o.ber.total_bits,
            seed: cell.seed.0,
            config_hash: hash.to_string(),
        }
    }

    /// Row for a cell whose demapper could not be trained.
    pub fn failed(cell: &Cell, kind: DemapperKind, hash: &str) -> Self {
        Self {
            snr_db: cell.snr_db,
            power_mw: cell.power_mw,
            demapper: kind,
            ber: f64::NAN,
            ber_ci_lo: f64::NAN,
            ber_ci_hi: f64::NAN,
            gmi: f64::NAN,
            n_bits: 0,
            seed: cell.seed.0,
            config_hash: hash.to_string(),
        }
    }
}

/// Test symbols with their labels, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpRow {
    pub i: f64,
    pub q: f64,
    pub level: u8,
    pub bits: String,
}

pub fn dump_rows(frame: &Frame, max: usize) -> Vec<DumpRow> {
    let syms = frame.symbols_of(Part::Test);
    let levels = frame.levels_of(Part::Test);
    let bits = frame.bits_of(Part::Test);
    syms.iter()
        .zip(levels)
        .enumerate()
        .take(max)
        .map(|(n, (s, &l))| DumpRow {
            i: s.re,
            q: s.im,
            level: l,
            bits: format!("{}{}", bits[2 * n], bits[2 * n + 1]),
        })
        .collect()
}

/// Runs the configured single operating point (`tx.pam4_snr_db`,
/// `gateway.peak_power_mw`, `demapper.kind`, `seed`).
pub fn run_single(cfg: &ExperimentConfig) -> Result<(SweepRow, Frame)> {
    cfg.validate()?;
    let cell = Cell {
        snr_db: cfg.tx.pam4_snr_db,
        power_mw: cfg.gateway.peak_power_mw,
        seed: cfg.seed,
    };
    let kind = cfg.demapper.kind;
    let n_train = if kind == DemapperKind::Dnn { train_symbols(cfg) } else { 0 };
    let frame = simulate_frame(cfg, &cell, n_train, cfg.test_bits / 2)?;
    let outcome = demap_frame(cfg, &frame, kind, None).map_err(|e| match e {
        Error::Stage { .. } => e,
        other => other.in_stage("demap"),
    })?;
    Ok((SweepRow::new(&cell, kind, &outcome, &cfg.hash()), frame))
}
