//! Channel-state prediction for MIMO-OFDM links with a hybrid CNN /
//! Chebyshev-KAN model operating on frequency- and delay-domain views of the
//! channel history.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: tensors, unitary FFTs and a small reverse-mode tape.
//! - [`channel`]: multipath channel synthesis, noise, windowing and dataset files.
//! - [`model`]: the forward graph, parameters and checkpoint format.
//! - [`train`]: NMSE loss and the Adam training loop.
//! - [`eval`]: metrics, classical baselines and the experiment grid.

pub mod channel;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
