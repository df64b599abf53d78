use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Complex64, RngSeed, Stage};

/// Layer sizes and regularization of the demapper network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSpec {
    pub width: usize,
    pub blocks: usize,
    pub dropout: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            width: 32,
            blocks: 3,
            dropout: 0.1,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

pub const INPUT_DIM: usize = 2;
pub const OUTPUT_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    /// `in × out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Bias-free linear map, batch-norm, ReLU, dropout; added onto its input.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ResidualBlock {
    pub w: Array2<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

/// Residual MLP mapping a received symbol (I, Q) to two bit LLRs.
///
/// `x → standardize → dense(2→W) → B × [x + drop(relu(bn(x·W)))] → dense(W→2)`.
/// The two outputs are read directly as LLRs, positive meaning bit 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) spec: MlpSpec,
    pub(crate) feature_mean: [f64; INPUT_DIM],
    pub(crate) feature_std: [f64; INPUT_DIM],
    pub(crate) input: Dense,
    pub(crate) blocks: Vec<ResidualBlock>,
    pub(crate) output: Dense,
}

/// Whether batch-norm uses batch statistics and dropout is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Infer,
    Train { dropout: bool },
}

pub(crate) struct BlockCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    pre_relu: Array2<f64>,
    mask: Option<Array2<f64>>,
}

/// Activations kept by a training forward pass for backpropagation.
pub(crate) struct ForwardCache {
    x: Array2<f64>,
    /// Input of each block, then the final hidden state.
    h: Vec<Array2<f64>>,
    blocks: Vec<BlockCache>,
}

fn check_finite(a: &Array2<f64>, layer: impl FnOnce() -> String) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer: layer() })
    }
}

impl MlpModel {
    /// He-initialized model; weights come from the `WeightInit` stream.
    pub fn new(spec: MlpSpec, seed: RngSeed) -> Result<Self> {
        if spec.width == 0 {
            return Err(Error::InvalidArgument("MLP width must be positive".into()));
        }
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(Error::InvalidArgument(format!("dropout must lie in [0, 1), got {}", spec.dropout)));
        }
        let mut rng = seed.stream(Stage::WeightInit);
        let mut he = |fan_in: usize, fan_out: usize| {
            let n = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
            Array2::from_shape_fn((fan_in, fan_out), |_| n.sample(&mut rng))
        };
        let w = spec.width;
        let input = Dense {
            w: he(INPUT_DIM, w),
            b: Array1::zeros(w),
        };
        let blocks = (0..spec.blocks)
            .map(|_| ResidualBlock {
                w: he(w, w),
                gamma: Array1::ones(w),
                beta: Array1::zeros(w),
                running_mean: Array1::zeros(w),
                running_var: Array1::ones(w),
            })
            .collect();
        let mut out_w = he(w, OUTPUT_DIM);
        out_w.mapv_inplace(|v| v * 0.5);
        Ok(Self {
            spec,
            feature_mean: [0.0; INPUT_DIM],
            feature_std: [1.0; INPUT_DIM],
            input,
            blocks,
            output: Dense {
                w: out_w,
                b: Array1::zeros(OUTPUT_DIM),
            },
        })
    }

    /// Model with every weight and bias set to zero.
    pub fn zeros(spec: MlpSpec) -> Self {
        let mut m = Self::new(spec, RngSeed(0)).expect("valid spec");
        for p in m.params_mut() {
            p.fill(0.0);
        }
        m
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Per-feature mean and standard deviation used to standardize inputs.
    pub fn standardization(&self) -> ([f64; 2], [f64; 2]) {
        (self.feature_mean, self.feature_std)
    }

    /// Sets input standardization from the (I, Q) statistics of `symbols`.
    pub fn fit_standardization(&mut self, symbols: &[Complex64]) {
        if symbols.is_empty() {
            return;
        }
        let n = symbols.len() as f64;
        let mean = [
            symbols.iter().map(|s| s.re).sum::<f64>() / n,
            symbols.iter().map(|s| s.im).sum::<f64>() / n,
        ];
        let var = [
            symbols.iter().map(|s| (s.re - mean[0]).powi(2)).sum::<f64>() / n,
            symbols.iter().map(|s| (s.im - mean[1]).powi(2)).sum::<f64>() / n,
        ];
        self.feature_mean = mean;
        self.feature_std = var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    }

    /// Standardized feature matrix, one row per symbol.
    pub fn features(&self, symbols: &[Complex64]) -> Array2<f64> {
        Array2::from_shape_fn((symbols.len(), INPUT_DIM), |(i, j)| {
            let v = if j == 0 { symbols[i].re } else { symbols[i].im };
            (v - self.feature_mean[j]) / self.feature_std[j]
        })
    }

    /// Trainable tensors in a fixed order: input w, b; per block w, γ, β;
    /// output w, b.
    pub(crate) fn params(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![
            self.input.w.as_slice().expect("standard layout"),
            self.input.b.as_slice().expect("standard layout"),
        ];
        for b in &self.blocks {
            v.push(b.w.as_slice().expect("standard layout"));
            v.push(b.gamma.as_slice().expect("standard layout"));
            v.push(b.beta.as_slice().expect("standard layout"));
        }
        v.push(self.output.w.as_slice().expect("standard layout"));
        v.push(self.output.b.as_slice().expect("standard layout"));
        v
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        v.push(self.input.w.as_slice_mut().expect("standard layout"));
        v.push(self.input.b.as_slice_mut().expect("standard layout"));
        for b in &mut self.blocks {
            v.push(b.w.as_slice_mut().expect("standard layout"));
            v.push(b.gamma.as_slice_mut().expect("standard layout"));
            v.push(b.beta.as_slice_mut().expect("standard layout"));
        }
        v.push(self.output.w.as_slice_mut().expect("standard layout"));
        v.push(self.output.b.as_slice_mut().expect("standard layout"));
        v
    }

    /// Deterministic inference on standardized features.
    pub fn infer_features(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut h = x.dot(&self.input.w) + &self.input.b;
        check_finite(&h, || "input".into())?;
        let eps = self.spec.bn_eps;
        for (i, b) in self.blocks.iter().enumerate() {
            let z = h.dot(&b.w);
            let scale = &b.gamma / &b.running_var.mapv(|v| (v + eps).sqrt());
            let shift = &b.beta - &(&b.running_mean * &scale);
            let y = (z * &scale + &shift).mapv(|v| v.max(0.0));
            h += &y;
            check_finite(&h, || format!("block{i}"))?;
        }
        let out = h.dot(&self.output.w) + &self.output.b;
        check_finite(&out, || "output".into())?;
        Ok(out)
    }

    /// LLRs (two per symbol, interleaved) in inference mode.
    pub fn infer(&self, symbols: &[Complex64]) -> Result<Vec<f64>> {
        let mut llrs = Vec::with_capacity(symbols.len() * OUTPUT_DIM);
        for chunk in symbols.chunks(8192) {
            let out = self.infer_features(&self.features(chunk))?;
            llrs.extend(out.iter());
        }
        Ok(llrs)
    }

    /// Training-mode forward pass: batch statistics in batch-norm (running
    /// moments are updated) and, if enabled, inverted dropout.
    pub(crate) fn forward_train<R: Rng + ?Sized>(
        &mut self,
        x: &Array2<f64>,
        dropout: bool,
        rng: &mut R,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        let n = x.nrows();
        let eps = self.spec.bn_eps;
        let mom = self.spec.bn_momentum;
        let p = self.spec.dropout;
        let mut h = x.dot(&self.input.w) + &self.input.b;
        check_finite(&h, || "input".into())?;
        let mut hs = Vec::with_capacity(self.blocks.len() + 1);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let z = h.dot(&b.w);
            let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
            let centered = &z - &mean;
            let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
            let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
            let xhat = &centered * &inv_std;
            let pre_relu = &xhat * &b.gamma + &b.beta;
            let mut y = pre_relu.mapv(|v| v.max(0.0));
            let mask = if dropout && p > 0.0 {
                let keep = 1.0 / (1.0 - p);
                let m = Array2::from_shape_fn(y.raw_dim(), |_| if rng.gen::<f64>() < p { 0.0 } else { keep });
                y *= &m;
                Some(m)
            } else {
                None
            };
            let unbiased = if n > 1 { n as f64 / (n as f64 - 1.0) } else { 1.0 };
            b.running_mean = &b.running_mean * (1.0 - mom) + &(&mean * mom);
            b.running_var = &b.running_var * (1.0 - mom) + &(&var * (mom * unbiased));
            let next = &h + &y;
            check_finite(&next, || format!("block{i}"))?;
            hs.push(std::mem::replace(&mut h, next));
            caches.push(BlockCache {
                xhat,
                inv_std,
                pre_relu,
                mask,
            });
        }
        let out = h.dot(&self.output.w) + &self.output.b;
        check_finite(&out, || "output".into())?;
        hs.push(h);
        Ok((
            out,
            ForwardCache {
                x: x.clone(),
                h: hs,
                blocks: caches,
            },
        ))
    }

    /// Gradients of the loss for each tensor of [`params`](Self::params),
    /// given the gradient with respect to the outputs.
    pub(crate) fn backward(&self, cache: &ForwardCache, dout: &Array2<f64>) -> Vec<Vec<f64>> {
        let n = dout.nrows() as f64;
        let nb = self.blocks.len();
        let h_last = &cache.h[nb];
        let d_out_w = h_last.t().dot(dout);
        let d_out_b = dout.sum_axis(Axis(0));
        let mut dh = dout.dot(&self.output.w.t());

        let mut block_grads = Vec::with_capacity(nb);
        for i in (0..nb).rev() {
            let b = &self.blocks[i];
            let c = &cache.blocks[i];
            let mut dy = dh.clone();
            if let Some(m) = &c.mask {
                dy *= m;
            }
            ndarray::Zip::from(&mut dy).and(&c.pre_relu).for_each(|g, &v| {
                if v <= 0.0 {
                    *g = 0.0;
                }
            });
            let dgamma = (&dy * &c.xhat).sum_axis(Axis(0));
            let dbeta = dy.sum_axis(Axis(0));
            let dxhat = &dy * &b.gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &c.xhat).sum_axis(Axis(0));
            // dz = inv_std/n · (n·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
            let dz = (&dxhat * n - &sum_dxhat - &(&c.xhat * &sum_dxhat_xhat)) * &(&c.inv_std / n);
            let dw = cache.h[i].t().dot(&dz);
            dh += &dz.dot(&b.w.t());
            block_grads.push([dw, dgamma.insert_axis(Axis(0)), dbeta.insert_axis(Axis(0))]);
        }
        block_grads.reverse();

        let d_in_w = cache.x.t().dot(&dh);
        let d_in_b = dh.sum_axis(Axis(0));

        let flat2 = |a: Array2<f64>| a.iter().copied().collect::<Vec<f64>>();
        let flat1 = |a: Array1<f64>| a.to_vec();
        let mut grads = vec![flat2(d_in_w), flat1(d_in_b)];
        for [dw, dg, db] in block_grads {
            grads.push(flat2(dw));
            grads.push(flat2(dg));
            grads.push(flat2(db));
        }
        grads.push(flat2(d_out_w));
        grads.push(flat1(d_out_b));
        grads
    }
}

/// Mean sigmoid cross-entropy `softplus((2b−1)·Λ)` over all bits and its
/// gradient with respect to the logits.
pub(crate) fn bce_with_llrs(logits: &Array2<f64>, bits: &Array2<f64>) -> (f64, Array2<f64>) {
    let count = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    ndarray::Zip::from(&mut grad)
        .and(logits)
        .and(bits)
        .for_each(|g, &l, &b| {
            let s = 2.0 * b - 1.0;
            let x = s * l;
            loss += x.max(0.0) + (-x.abs()).exp().ln_1p();
            let sig = if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            };
            *g = s * sig / count;
        });
    (loss / count, grad)
}
