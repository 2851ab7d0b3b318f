//! Neural-network building blocks on the tensor backend: the custom 3x3
//! convolution (forward + analytic backward), shape-manipulation ops,
//! ordered parameter storage, and the Adam optimizer.
//!
//! Everything runs on CPU. Models are constructed with an explicit dtype:
//! `F32` for training speed, `F64` when a test wants finite-difference
//! gradient checks at tight tolerances.

pub mod adam;
pub mod conv;
pub mod kernels;
pub mod ops;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use conv::conv3x3;
pub use params::ParamStore;
