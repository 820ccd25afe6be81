//! Simulation and attack-analysis toolkit for the Y00 quantum-noise stream cipher.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod breach;
pub mod channel;
pub mod config;
pub mod error;
pub mod fca;
pub mod infotheory;
pub mod keyfresh;
pub mod prng;
pub mod qdetect;
pub mod y00;

pub use error::{Error, Result};
