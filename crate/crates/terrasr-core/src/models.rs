//! The three networks and their checkpoint container.
//!
//! All models own a [`crate::nn::ParamStore`] and are built at an explicit
//! dtype: F32 for training and inference, F64 when a test wants gradients
//! tight enough to compare against finite differences. Construction is
//! deterministic in the init seed, so a (config, seed) pair plus the step
//! count pins a training run exactly.

pub mod bundle;
pub mod discriminator;
pub mod generator;
mod layers;
pub mod ndsm_net;

pub use bundle::{
    load_bundle, load_optimizer_state, save_bundle, save_optimizer_state, ModelBundle, ModelKind,
    OptimizerState, TrainingMeta, FORMAT_VERSION,
};
pub use discriminator::{build_discriminator, Discriminator, DiscriminatorConfig};
pub use generator::{build_generator, rescale_output, Generator, GeneratorConfig};
pub use ndsm_net::{build_ndsm_net, NdsmNet, NdsmNetConfig, OutputActivation};
