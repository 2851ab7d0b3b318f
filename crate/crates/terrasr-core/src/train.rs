//! The three-phase training pipeline: height-net pretraining, generator
//! MAE pretraining, then adversarial fine-tuning with the frozen height
//! net supplying the elevation-consistency term.
//!
//! Every phase checkpoints into one directory and can resume from it;
//! batches are pure functions of `(seed, phase, step)`, so a resumed run
//! retraces a fresh run exactly.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod phases;

pub use checkpoint::{CheckpointDir, CheckpointState};
pub use config::{load_config, parse_config, TrainConfig};
pub use data::{load_dataset, SceneSet};
pub use phases::{pretrain_ndsm, pretrain_sr, train_gan};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The training phases, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Ndsm,
    SrPretrain,
    Gan,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Ndsm => "ndsm",
            Phase::SrPretrain => "sr-pretrain",
            Phase::Gan => "gan",
        }
    }

    pub fn parse(s: &str) -> Result<Phase> {
        match s {
            "ndsm" => Ok(Phase::Ndsm),
            "sr-pretrain" => Ok(Phase::SrPretrain),
            "gan" => Ok(Phase::Gan),
            other => Err(Error::data(format!("unknown training phase {other:?}"))),
        }
    }

    /// Position in the pipeline, for ordering comparisons.
    pub fn order(self) -> u8 {
        match self {
            Phase::Ndsm => 0,
            Phase::SrPretrain => 1,
            Phase::Gan => 2,
        }
    }
}

/// One logged optimizer step. Phases that have no elevation or adversarial
/// term log zeros there, so `total` always recombines from the parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub phase: Phase,
    pub step: u64,
    pub content: f64,
    pub ndsm: f64,
    pub adversarial: f64,
    pub total: f64,
}

/// What one phase run produced: its per-step records plus summary numbers.
#[derive(Debug, Clone)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
    /// Validation MAE after a pretraining phase (meters for the height
    /// net, unit range for the generator). `None` for the adversarial phase.
    pub pretrain_final_mae: Option<f64>,
    pub wall_time_s: f64,
}
