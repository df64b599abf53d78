//! Residual MLP soft demapper with hand-written backpropagation.

mod adam;
mod io;
mod model;

pub use adam::Adam;
pub use model::{ForwardMode, MlpModel, MlpSpec, INPUT_DIM, OUTPUT_DIM};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::LlrFrame;
use crate::signal::{Complex64, RngSeed, Stage};
use model::bce_with_llrs;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub train_bits: usize,
    pub test_bits: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub seed: RngSeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            train_bits: 120_600,
            test_bits: 13_400,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 50,
            seed: RngSeed(7),
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> Adam {
        Adam::new(self.learning_rate, self.beta1, self.beta2, self.epsilon)
    }
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<f64>,
}

fn bit_matrix(bits: &[u8]) -> Array2<f64> {
    Array2::from_shape_fn((bits.len() / OUTPUT_DIM, OUTPUT_DIM), |(i, j)| bits[OUTPUT_DIM * i + j] as f64)
}

/// LLRs for `symbols`. Inference mode is deterministic; training mode uses
/// batch statistics (updating the running moments) and draws dropout masks
/// from the `Dropout` stream of `seed`.
pub fn mlp_forward(model: &mut MlpModel, symbols: &[Complex64], mode: ForwardMode, seed: RngSeed) -> Result<LlrFrame> {
    let llrs = match mode {
        ForwardMode::Infer => model.infer(symbols)?,
        ForwardMode::Train { dropout } => {
            let x = model.features(symbols);
            let mut rng = seed.stream(Stage::Dropout);
            let (out, _) = model.forward_train(&x, dropout, &mut rng)?;
            out.iter().copied().collect()
        }
    };
    LlrFrame::new(llrs, None)
}

/// Mean loss of `model` on `(x, bits)` in inference mode.
pub fn eval_loss(model: &MlpModel, symbols: &[Complex64], bits: &[u8]) -> Result<f64> {
    let llrs = model.infer(symbols)?;
    let logits = Array2::from_shape_vec((symbols.len(), OUTPUT_DIM), llrs).expect("shape");
    Ok(bce_with_llrs(&logits, &bit_matrix(bits)).0)
}

/// One optimizer step on a batch; the loss is multiplied by `loss_scale`
/// before differentiation. Returns the unscaled batch loss.
pub fn train_step<R: Rng + ?Sized>(
    model: &mut MlpModel,
    opt: &mut Adam,
    x: &Array2<f64>,
    bits: &Array2<f64>,
    rng: &mut R,
    loss_scale: f64,
) -> Result<f64> {
    let (logits, cache) = model.forward_train(x, true, rng)?;
    let (loss, mut dlogits) = bce_with_llrs(&logits, bits);
    if loss_scale != 1.0 {
        dlogits *= loss_scale;
    }
    let grads = model.backward(&cache, &dlogits);
    opt.step(model.params_mut(), &grads);
    Ok(loss)
}

/// Trains with mini-batch Adam on sigmoid cross-entropy.
///
/// Input standardization is refitted on the training symbols first. Batches
/// are reshuffled every epoch from the `BatchOrder` stream of `cfg.seed`.
/// If the loss turns non-finite the model is restored to its state at the
/// start of that epoch and [`Error::Diverged`] is returned.
pub fn mlp_train(
    model: &mut MlpModel,
    symbols: &[Complex64],
    true_bits: &[u8],
    test: Option<(&[Complex64], &[u8])>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if true_bits.len() != OUTPUT_DIM * symbols.len() {
        return Err(Error::LengthMismatch {
            left: true_bits.len(),
            right: OUTPUT_DIM * symbols.len(),
        });
    }
    if symbols.is_empty() || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("training needs symbols and a positive batch size".into()));
    }
    if let Some((ts, tb)) = test {
        if tb.len() != OUTPUT_DIM * ts.len() {
            return Err(Error::LengthMismatch {
                left: tb.len(),
                right: OUTPUT_DIM * ts.len(),
            });
        }
    }
    model.fit_standardization(symbols);
    let x_all = model.features(symbols);
    let y_all = bit_matrix(true_bits);
    let mut opt = cfg.optimizer();
    let mut order_rng = cfg.seed.stream(Stage::BatchOrder);
    let mut drop_rng = cfg.seed.stream(Stage::Dropout);
    let mut order: Vec<usize> = (0..symbols.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..cfg.epochs {
        let snapshot = model.clone();
        order.shuffle(&mut order_rng);
        let mut sum = 0.0;
        let mut seen = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            if idx.len() < 2 && symbols.len() >= 2 {
                continue;
            }
            let x = x_all.select(ndarray::Axis(0), idx);
            let y = y_all.select(ndarray::Axis(0), idx);
            let loss = match train_step(model, &mut opt, &x, &y, &mut drop_rng, 1.0) {
                Ok(l) if l.is_finite() && model.params().iter().all(|p| p.iter().all(|v| v.is_finite())) => l,
                _ => {
                    *model = snapshot;
                    return Err(Error::Diverged { epoch });
                }
            };
            sum += loss * idx.len() as f64;
            seen += idx.len();
        }
        report.train_loss.push(sum / seen.max(1) as f64);
        if let Some((ts, tb)) = test {
            report.test_loss.push(eval_loss(model, ts, tb)?);
        }
    }
    Ok(report)
}

/// Largest relative difference between backpropagated gradients and central
/// finite differences with step `h`, over every trainable parameter.
///
/// Runs batch-norm in training mode on the fixed batch with dropout off.
/// Relative error is `|g_fd − g_an| / max(|g_fd|, |g_an|, 1e-8)`.
pub fn gradient_check(model: &MlpModel, symbols: &[Complex64], bits: &[u8], h: f64) -> Result<f64> {
    let mut work = model.clone();
    let x = work.features(symbols);
    let y = bit_matrix(bits);
    let mut rng = RngSeed(0).stream(Stage::Dropout);
    let (logits, cache) = work.forward_train(&x, false, &mut rng)?;
    let (_, dlogits) = bce_with_llrs(&logits, &y);
    let analytic = work.backward(&cache, &dlogits);

    let mut loss_at = |m: &mut MlpModel| -> Result<f64> {
        let (l, _) = m.forward_train(&x, false, &mut rng)?;
        Ok(bce_with_llrs(&l, &y).0)
    };
    let mut worst = 0.0f64;
    for (t, grad) in analytic.iter().enumerate() {
        for (i, &g) in grad.iter().enumerate() {
            let orig = work.params()[t][i];
            work.params_mut()[t][i] = orig + h;
            let up = loss_at(&mut work)?;
            work.params_mut()[t][i] = orig - h;
            let down = loss_at(&mut work)?;
            work.params_mut()[t][i] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn small_spec(blocks: usize) -> MlpSpec {
        MlpSpec {
            width: 6,
            blocks,
            dropout: 0.1,
            ..MlpSpec::default()
        }
    }

    fn batch(n: usize, seed: u64) -> (Vec<Complex64>, Vec<u8>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
            .collect();
        let b = (0..2 * n).map(|_| rng.gen_range(0..2)).collect();
        (s, b)
    }

    #[test]
    fn zero_model_gives_zero_llrs() {
        let mut m = MlpModel::zeros(MlpSpec::default());
        let (s, _) = batch(32, 1);
        let f = mlp_forward(&mut m, &s, ForwardMode::Infer, RngSeed(0)).unwrap();
        assert!(f.llrs.iter().all(|&l| l == 0.0));
        assert_eq!(f.llrs.len(), 64);
    }

    #[test]
    fn identical_batch_stays_finite() {
        let mut m = MlpModel::new(MlpSpec::default(), RngSeed(2)).unwrap();
        let s = vec![Complex64::new(0.3, -0.2); 16];
        let f = mlp_forward(&mut m, &s, ForwardMode::Train { dropout: true }, RngSeed(1)).unwrap();
        assert!(f.llrs.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn nonfinite_input_names_layer() {
        let m = MlpModel::new(MlpSpec::default(), RngSeed(2)).unwrap();
        let err = m.infer(&[Complex64::new(f64::NAN, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref layer } if layer == "input"), "{err}");
    }

    #[test]
    fn inference_is_deterministic() {
        let m = MlpModel::new(MlpSpec::default(), RngSeed(3)).unwrap();
        let (s, _) = batch(500, 4);
        assert_eq!(m.infer(&s).unwrap(), m.infer(&s).unwrap());
    }

    #[test]
    fn gradcheck_linear_only() {
        let m = MlpModel::new(small_spec(0), RngSeed(5)).unwrap();
        let (s, b) = batch(16, 6);
        let err = gradient_check(&m, &s, &b, 1e-5).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn gradcheck_residual_blocks() {
        let mut m = MlpModel::new(small_spec(2), RngSeed(7)).unwrap();
        // non-trivial affine batch-norm parameters
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for b in &mut m.blocks {
            b.gamma.mapv_inplace(|_| rng.gen_range(0.5..1.5));
            b.beta.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
        }
        let (s, b) = batch(24, 9);
        let err = gradient_check(&m, &s, &b, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn gradcheck_step_sweep() {
        let m = MlpModel::new(small_spec(1), RngSeed(11)).unwrap();
        let (s, b) = batch(16, 12);
        let errs: Vec<f64> = [1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&h| gradient_check(&m, &s, &b, h).unwrap())
            .collect();
        // truncation error shrinks from 1e-3 to the plateau
        assert!(errs[1] < errs[0], "{errs:?}");
        assert!(errs.iter().skip(1).all(|&e| e < 1e-4), "{errs:?}");
    }

    #[test]
    fn adam_is_invariant_to_loss_scale() {
        let m0 = MlpModel::new(small_spec(2), RngSeed(13)).unwrap();
        let (s, b) = batch(64, 14);
        let x = m0.features(&s);
        let y = bit_matrix(&b);
        let run = |scale: f64| {
            let mut m = m0.clone();
            let mut opt = Adam::new(1e-3, 0.9, 0.999, 1e-12);
            let mut rng = RngSeed(15).stream(Stage::Dropout);
            for _ in 0..10 {
                train_step(&mut m, &mut opt, &x, &y, &mut rng, scale).unwrap();
            }
            m
        };
        let (a, c) = (run(1.0), run(10.0));
        let dist: f64 = a
            .params()
            .iter()
            .zip(c.params())
            .flat_map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v).powi(2)))
            .sum::<f64>()
            .sqrt();
        assert!(dist < 1e-6, "{dist}");
    }

    #[test]
    fn learns_separable_clusters() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let n = 2000;
        let mut s = Vec::with_capacity(n);
        let mut bits = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let c = rng.gen_range(0..2u8);
            let centre = if c == 0 { Complex64::new(1.0, 1.0) } else { Complex64::new(-1.0, -1.0) };
            s.push(centre + Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)));
            bits.extend([c, 1 - c]);
        }
        let mut m = MlpModel::new(MlpSpec::default(), RngSeed(22)).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 64,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        };
        let rep = mlp_train(&mut m, &s, &bits, None, &cfg).unwrap();
        assert!(rep.train_loss.last().unwrap() < &rep.train_loss[0]);
        let llrs = m.infer(&s).unwrap();
        let errors = llrs.iter().zip(&bits).filter(|(l, b)| u8::from(**l < 0.0) != **b).count();
        assert_eq!(errors, 0);
    }

    #[test]
    fn random_labels_carry_no_information() {
        let (s, b) = batch(3000, 30);
        let (ts, tb) = batch(3000, 31);
        let mut m = MlpModel::new(MlpSpec::default(), RngSeed(32)).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        mlp_train(&mut m, &s, &b, Some((&ts, &tb)), &cfg).unwrap();
        let f = LlrFrame::new(m.infer(&ts).unwrap(), Some(tb)).unwrap();
        let g = crate::metrics::gmi_from_llrs(&f).unwrap().gmi_per_bit;
        assert!(g.abs() < 0.02, "{g}");
    }

    #[test]
    fn rejects_mismatched_bits() {
        let (s, b) = batch(10, 1);
        let mut m = MlpModel::new(MlpSpec::default(), RngSeed(1)).unwrap();
        assert!(mlp_train(&mut m, &s, &b[..5], None, &TrainConfig::default()).is_err());
    }

    #[test]
    fn divergence_restores_last_finite_state() {
        let (s, b) = batch(64, 40);
        let mut m = MlpModel::new(MlpSpec::default(), RngSeed(41)).unwrap();
        let before = m.clone();
        let cfg = TrainConfig {
            learning_rate: f64::NAN,
            epochs: 3,
            ..TrainConfig::default()
        };
        let err = mlp_train(&mut m, &s, &b, None, &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 0 }));
        // standardization is refitted before the first epoch
        let mut expect = before;
        expect.fit_standardization(&s);
        assert_eq!(m, expect);
    }
}
