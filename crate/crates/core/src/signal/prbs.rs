use super::rng::splitmix64;
use super::{BitSequence, RngSeed};
use crate::error::{Error, Result};

/// Fibonacci LFSR for the ITU-T PRBS polynomials x^n + x^m + 1.
#[derive(Debug, Clone)]
pub struct Prbs {
    state: u32,
    order: u32,
    tap: u32,
    mask: u32,
}

impl Prbs {
    /// Generator of the given order starting from a non-zero `state`
    /// (reduced into `[1, 2^order - 1]`).
    pub fn new(order: u32, state: u64) -> Result<Self> {
        let tap = match order {
            7 => 6,
            15 => 14,
            23 => 18,
            31 => 28,
            _ => return Err(Error::UnsupportedPrbsOrder(order)),
        };
        let mask = ((1u64 << order) - 1) as u32;
        let state = (state % mask as u64) as u32 + 1;
        Ok(Self {
            state,
            order,
            tap,
            mask,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Sequence period, `2^order - 1`.
    pub fn period(&self) -> u64 {
        self.mask as u64
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    pub fn next_bit(&mut self) -> u8 {
        let fb = ((self.state >> (self.order - 1)) ^ (self.state >> (self.tap - 1))) & 1;
        self.state = ((self.state << 1) | fb) & self.mask;
        fb as u8
    }
}

/// `n_bits` of the maximal-length PRBS of `order`; the LFSR start state is
/// derived from `seed`.
pub fn prbs_generate(order: u32, n_bits: usize, seed: RngSeed) -> Result<BitSequence> {
    if n_bits == 0 {
        return Err(Error::InvalidArgument("n_bits must be positive".into()));
    }
    let mut g = Prbs::new(order, splitmix64(seed.0))?;
    Ok(BitSequence((0..n_bits).map(|_| g.next_bit()).collect()))
}
