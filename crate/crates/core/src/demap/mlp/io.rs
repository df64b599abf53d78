//! Flat little-endian model file.
//!
//! ```text
//! magic    8 bytes  "OGSMLP\x01\0"
//! header   4 × u32  input_dim, width, blocks, output_dim
//!          3 × f64  dropout, bn_eps, bn_momentum
//! scaling  4 × f64  feature mean (I, Q), feature std (I, Q)
//! input    f64[input_dim·width] row-major, f64[width] bias
//! block i  f64[width·width] row-major, γ[width], β[width],
//!          running mean[width], running var[width]
//! output   f64[width·output_dim] row-major, f64[output_dim] bias
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{Dense, ResidualBlock, INPUT_DIM, OUTPUT_DIM};
use super::{MlpModel, MlpSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"OGSMLP\x01\0";

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::ModelFormat("truncated file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        Ok(Array2::from_shape_vec((rows, cols), self.vec(rows * cols)?).expect("shape"))
    }

    fn array(&mut self, n: usize) -> Result<Array1<f64>> {
        Ok(Array1::from(self.vec(n)?))
    }
}

fn put(out: &mut Vec<u8>, vals: impl IntoIterator<Item = f64>) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl MlpModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.spec;
        let mut out = Vec::with_capacity(64 + 8 * (self.num_params() + 2 * s.width * s.blocks));
        out.extend_from_slice(MAGIC);
        for v in [INPUT_DIM, s.width, s.blocks, OUTPUT_DIM] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        put(&mut out, [s.dropout, s.bn_eps, s.bn_momentum]);
        put(&mut out, self.feature_mean.iter().chain(&self.feature_std).copied());
        put(&mut out, self.input.w.iter().copied());
        put(&mut out, self.input.b.iter().copied());
        for b in &self.blocks {
            put(&mut out, b.w.iter().copied());
            put(&mut out, b.gamma.iter().copied());
            put(&mut out, b.beta.iter().copied());
            put(&mut out, b.running_mean.iter().copied());
            put(&mut out, b.running_var.iter().copied());
        }
        put(&mut out, self.output.w.iter().copied());
        put(&mut out, self.output.b.iter().copied());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes };
        if r.take(8)? != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let (input_dim, width, blocks, output_dim) =
            (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if input_dim != INPUT_DIM || output_dim != OUTPUT_DIM {
            return Err(Error::ModelFormat(format!(
                "expected {INPUT_DIM} inputs and {OUTPUT_DIM} outputs, got {input_dim} and {output_dim}"
            )));
        }
        if width == 0 || width > 1 << 16 || blocks > 1 << 10 {
            return Err(Error::ModelFormat(format!("implausible sizes width={width} blocks={blocks}")));
        }
        let spec = MlpSpec {
            width,
            blocks,
            dropout: r.f64()?,
            bn_eps: r.f64()?,
            bn_momentum: r.f64()?,
        };
        let feature_mean = [r.f64()?, r.f64()?];
        let feature_std = [r.f64()?, r.f64()?];
        let input = Dense {
            w: r.matrix(INPUT_DIM, width)?,
            b: r.array(width)?,
        };
        let blocks = (0..blocks)
            .map(|_| {
                Ok(ResidualBlock {
                    w: r.matrix(width, width)?,
                    gamma: r.array(width)?,
                    beta: r.array(width)?,
                    running_mean: r.array(width)?,
                    running_var: r.array(width)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let output = Dense {
            w: r.matrix(width, OUTPUT_DIM)?,
            b: r.array(OUTPUT_DIM)?,
        };
        if !r.buf.is_empty() {
            return Err(Error::ModelFormat(format!("{} trailing bytes", r.buf.len())));
        }
        Ok(Self {
            spec,
            feature_mean,
            feature_std,
            input,
            blocks,
            output,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Complex64, RngSeed};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = MlpModel::new(MlpSpec::default(), RngSeed(1)).unwrap();
        let s: Vec<Complex64> = (0..100).map(|i| Complex64::from_polar(1.0, i as f64 * 0.1)).collect();
        m.fit_standardization(&s);
        let back = MlpModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        let a = m.infer(&s).unwrap();
        let b = back.infer(&s).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_corrupt_files() {
        let m = MlpModel::new(MlpSpec::default(), RngSeed(1)).unwrap();
        let bytes = m.to_bytes();
        assert!(MlpModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(MlpModel::from_bytes(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(MlpModel::from_bytes(&bad).is_err());
    }
}
