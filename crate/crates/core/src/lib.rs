//! Simulator for a radio link that uses a chaotic hybrid-system basis as
//! its pulse-shaping filter, together with the conventional BPSK
//! root-raised-cosine link and MMSE equalizer it is compared against.
//!
//! The chain is `txchain` (bits to passband) -> `channel` (tapped delay
//! line plus AWGN) -> `rxchain` (coherent demodulation, matched filter,
//! threshold decoding). `harness` runs Monte Carlo BER sweeps over it and
//! `cli` is the batch front end.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod harness;
pub mod rxchain;
pub mod signal;
pub mod txchain;
pub mod waveforms;

pub use error::{Error, Result};
pub use signal::SampledSignal;
