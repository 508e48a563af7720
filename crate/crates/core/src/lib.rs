//! Moving window network coding (MWNC) and the MWNCast cooperative
//! multicast scheme.
//!
//! * [`gf256`]: GF(2^8) arithmetic.
//! * [`codec`]: sliding window encoder, progressive decoder and relay recoder.
//! * [`coopsched`]: relay selection, relay time allocation and slot scheduling.
//! * [`analysis`]: random-walk and point-process models of decode/loss events.
//! * [`simulator`]: slotted Bernoulli-erasure simulation of MWNC, MWNCast and RLNC.
//! * [`cli`]: experiment drivers behind the `mwnc` binary.

pub mod analysis;
pub mod cli;
pub mod codec;
pub mod coopsched;
pub mod error;
pub mod gf256;
pub mod rational;
pub mod simulator;

pub use error::{Error, Result};
pub use rational::Ratio;
