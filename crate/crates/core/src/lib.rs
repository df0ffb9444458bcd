//! Time-domain source separation with the Wave-U-Net.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`], [`ops`] and [`autodiff`]: rank-3 tensors, the handful of
//!   differentiable kernels the network needs, and a reverse-mode tape.
//! * [`model`]: configuration, the input/output size calculus, parameter
//!   initialisation, the forward graph and the checkpoint format.
//! * [`training`]: excerpt sampling, augmentation, Adam and the two-stage
//!   early-stopping schedule.
//! * [`audio`]: WAV I/O, resampling, dataset directories and full-track
//!   separation.
//! * [`eval`]: segment-wise SDR and robust summary statistics.

pub mod audio;
pub mod autodiff;
pub mod error;
pub mod eval;
pub mod model;
pub mod ops;
pub mod tensor;
pub mod training;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use tensor::{ConvParams, Real, Shape, Tensor, UpsampleWeights};
