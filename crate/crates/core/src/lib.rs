//! Link-level simulator for optical PAM4-to-QPSK format conversion with
//! geometric constellation shaping.
//!
//! A PAM4 transmitter with adjustable noise drives an XPM gateway whose
//! input power sets the phase spread of the generated QPSK. A coherent
//! receiver (phase noise, FOC, decision-directed CPR) feeds one of three
//! demappers: nearest-point hard decision, a pilot-fitted affine equalizer,
//! or a residual MLP producing per-bit LLRs. BER and per-bit GMI score them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constellation;
pub mod demap;
pub mod error;
pub mod gateway;
pub mod harness;
pub mod metrics;
pub mod pam4;
pub mod rx;
pub mod signal;

pub use error::{Error, Result};
