//! Super-resolution of remote-sensing imagery, trained against elevation
//! instead of perception.
//!
//! This crate implements the full pipeline behind the `terrasr` tool: raster
//! IO and alignment checks, bicubic resampling, synthetic scene generation,
//! patch sampling, the SR generator / discriminator / height-estimation
//! networks, the loss stack (Huber content + adversarial + height-map
//! consistency), deterministic three-phase training, tiled inference, and
//! PSNR/SSIM evaluation.
//!
//! The distinguishing piece is the height-consistency loss: a frozen network
//! that regresses a normalized digital surface model from RGB is applied to
//! both the super-resolved and the reference image, and the mean squared
//! difference of the two height maps is added to the generator objective.
//! Geometry the eye barely notices — roof edges, facade lines — shows up as
//! meters of error there, which steers the generator toward structurally
//! faithful detail without a perceptual network trained on ground-level
//! photos.

pub mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod patches;
pub mod perturb;
pub mod raster;
pub mod resample;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
