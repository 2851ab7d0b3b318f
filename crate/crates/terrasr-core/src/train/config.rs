//! Training configuration and its flat key=value file format.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::models::{DiscriminatorConfig, GeneratorConfig, NdsmNetConfig, OutputActivation};
use crate::util::fnv1a64;

/// Every knob a training run needs, one flat struct. The on-disk config
/// file mirrors these field names exactly, one `key=value` per line.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Upscaling factor, 4 or 8.
    pub scale: usize,
    /// HR patch side in pixels; must divide cleanly by every network stride.
    pub patch_px: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Optimizer steps for the height-net pretraining phase.
    pub ndsm_steps: usize,
    /// Optimizer steps for the generator MAE pretraining phase.
    pub pretrain_steps: usize,
    /// Generator/discriminator update pairs for the adversarial phase.
    pub gan_steps: usize,
    /// Elevation-consistency weight in the combined objective.
    pub alpha: f64,
    /// Adversarial weight in the combined objective.
    pub adv_weight: f64,
    /// One-sided real-label smoothing for the discriminator.
    pub label_smoothing: f64,
    /// Optional Huber threshold override. When unset it is selected as
    /// twice the generator pretraining MAE.
    pub epsilon: Option<f64>,
    pub seed: u64,
    /// Persist a checkpoint every this many steps (and at phase end).
    pub checkpoint_every: usize,
    pub adam_betas: (f64, f64),
    // Network shape knobs.
    pub num_blocks: usize,
    pub rrdbs_per_block: usize,
    pub base_channels: usize,
    pub growth_channels: usize,
    pub residual_scale: f64,
    pub ndsm_depth: usize,
    pub ndsm_base_channels: usize,
    pub disc_base_channels: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scale: 4,
            patch_px: 128,
            learning_rate: 1e-4,
            batch_size: 4,
            ndsm_steps: 240,
            pretrain_steps: 360,
            gan_steps: 120,
            alpha: 0.01,
            adv_weight: 0.001,
            label_smoothing: 0.2,
            epsilon: None,
            seed: 0,
            checkpoint_every: 100,
            adam_betas: (0.9, 0.999),
            num_blocks: 2,
            rrdbs_per_block: 3,
            base_channels: 32,
            growth_channels: 16,
            residual_scale: 0.2,
            ndsm_depth: 3,
            ndsm_base_channels: 16,
            disc_base_channels: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator_config().validate()?;
        self.ndsm_config().validate()?;
        self.discriminator_config().validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage("learning_rate must be positive and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::usage("batch_size must be at least 1"));
        }
        for (name, v) in [
            ("ndsm_steps", self.ndsm_steps),
            ("pretrain_steps", self.pretrain_steps),
            ("gan_steps", self.gan_steps),
            ("checkpoint_every", self.checkpoint_every),
        ] {
            if v == 0 {
                return Err(Error::usage(format!("{name} must be at least 1")));
            }
        }
        if self.patch_px % self.scale != 0 {
            return Err(Error::usage(format!(
                "patch_px {} is not divisible by scale {}",
                self.patch_px, self.scale
            )));
        }
        if self.patch_px / self.scale < 16 {
            return Err(Error::usage(format!(
                "patch_px {} gives LR patches below the generator's 16 px minimum",
                self.patch_px
            )));
        }
        let div = self.ndsm_config().spatial_divisor();
        if self.patch_px % div != 0 {
            return Err(Error::usage(format!(
                "patch_px {} is not divisible by the height net's spatial divisor {div}",
                self.patch_px
            )));
        }
        for (name, b) in [("beta1", self.adam_betas.0), ("beta2", self.adam_betas.1)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::usage(format!("adam {name} must lie in (0, 1)")));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::usage("epsilon override must be positive and finite"));
            }
        }
        // Weight ranges are shared with the loss module; validate via a
        // stand-in epsilon when none is configured yet.
        self.loss_weights(self.epsilon.unwrap_or(1.0)).validate()?;
        Ok(())
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            scale: self.scale,
            num_blocks: self.num_blocks,
            rrdbs_per_block: self.rrdbs_per_block,
            base_channels: self.base_channels,
            growth_channels: self.growth_channels,
            residual_scale: self.residual_scale,
        }
    }

    pub fn ndsm_config(&self) -> NdsmNetConfig {
        NdsmNetConfig {
            depth: self.ndsm_depth,
            base_channels: self.ndsm_base_channels,
            output_activation: OutputActivation::NonNeg,
        }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            input_px: self.patch_px,
            base_channels: self.disc_base_channels,
        }
    }

    /// Combined-loss weights once a Huber threshold is known.
    pub fn loss_weights(&self, epsilon: f64) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            adv_weight: self.adv_weight,
            epsilon,
            label_smoothing: self.label_smoothing,
        }
    }

    /// Canonical key=value rendering; parsing it back yields an equal config.
    pub fn to_flat_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scale={}", self.scale);
        let _ = writeln!(s, "patch_px={}", self.patch_px);
        let _ = writeln!(s, "learning_rate={}", self.learning_rate);
        let _ = writeln!(s, "batch_size={}", self.batch_size);
        let _ = writeln!(s, "ndsm_steps={}", self.ndsm_steps);
        let _ = writeln!(s, "pretrain_steps={}", self.pretrain_steps);
        let _ = writeln!(s, "gan_steps={}", self.gan_steps);
        let _ = writeln!(s, "alpha={}", self.alpha);
        let _ = writeln!(s, "adv_weight={}", self.adv_weight);
        let _ = writeln!(s, "label_smoothing={}", self.label_smoothing);
        if let Some(eps) = self.epsilon {
            let _ = writeln!(s, "epsilon={eps}");
        }
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "checkpoint_every={}", self.checkpoint_every);
        let _ = writeln!(s, "adam_betas={},{}", self.adam_betas.0, self.adam_betas.1);
        let _ = writeln!(s, "num_blocks={}", self.num_blocks);
        let _ = writeln!(s, "rrdbs_per_block={}", self.rrdbs_per_block);
        let _ = writeln!(s, "base_channels={}", self.base_channels);
        let _ = writeln!(s, "growth_channels={}", self.growth_channels);
        let _ = writeln!(s, "residual_scale={}", self.residual_scale);
        let _ = writeln!(s, "ndsm_depth={}", self.ndsm_depth);
        let _ = writeln!(s, "ndsm_base_channels={}", self.ndsm_base_channels);
        let _ = writeln!(s, "disc_base_channels={}", self.disc_base_channels);
        s
    }

    /// Hash of everything that pins *what* is being trained — network
    /// shapes, data seed, loss weights — but not *how long*. Resuming with
    /// a larger step budget is legitimate; resuming with a different model
    /// or seed is not, and this hash is what the checkpoint manifest checks.
    pub fn stable_hash(&self) -> u64 {
        let skip = [
            "ndsm_steps=",
            "pretrain_steps=",
            "gan_steps=",
            "checkpoint_every=",
        ];
        let filtered: String = self
            .to_flat_string()
            .lines()
            .filter(|l| !skip.iter().any(|p| l.starts_with(p)))
            .map(|l| format!("{l}\n"))
            .collect();
        fnv1a64(filtered.as_bytes())
    }
}

fn parse_field<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::usage(format!("config key {key}: cannot parse value {raw:?}")))
}

/// Parse the flat key=value config format. Lines that are empty or start
/// with `#` are skipped. Any key that is not a `TrainConfig` field name is
/// a hard error naming the offending key — abbreviations like `lr` do not
/// silently fall through.
pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::usage(format!("config line {}: expected key=value, got {line:?}", lineno + 1))
        })?;
        let key = key.trim();
        if seen.iter().any(|k| k == key) {
            return Err(Error::usage(format!("duplicate config key {key:?}")));
        }
        seen.push(key.to_string());
        match key {
            "scale" => cfg.scale = parse_field(key, value)?,
            "patch_px" => cfg.patch_px = parse_field(key, value)?,
            "learning_rate" => cfg.learning_rate = parse_field(key, value)?,
            "batch_size" => cfg.batch_size = parse_field(key, value)?,
            "ndsm_steps" => cfg.ndsm_steps = parse_field(key, value)?,
            "pretrain_steps" => cfg.pretrain_steps = parse_field(key, value)?,
            "gan_steps" => cfg.gan_steps = parse_field(key, value)?,
            "alpha" => cfg.alpha = parse_field(key, value)?,
            "adv_weight" => cfg.adv_weight = parse_field(key, value)?,
            "label_smoothing" => cfg.label_smoothing = parse_field(key, value)?,
            "epsilon" => cfg.epsilon = Some(parse_field(key, value)?),
            "seed" => cfg.seed = parse_field(key, value)?,
            "checkpoint_every" => cfg.checkpoint_every = parse_field(key, value)?,
            "adam_betas" => {
                let (b1, b2) = value.trim().split_once(',').ok_or_else(|| {
                    Error::usage("adam_betas expects two comma-separated values, e.g. 0.9,0.999")
                })?;
                cfg.adam_betas = (parse_field(key, b1)?, parse_field(key, b2)?);
            }
            "num_blocks" => cfg.num_blocks = parse_field(key, value)?,
            "rrdbs_per_block" => cfg.rrdbs_per_block = parse_field(key, value)?,
            "base_channels" => cfg.base_channels = parse_field(key, value)?,
            "growth_channels" => cfg.growth_channels = parse_field(key, value)?,
            "residual_scale" => cfg.residual_scale = parse_field(key, value)?,
            "ndsm_depth" => cfg.ndsm_depth = parse_field(key, value)?,
            "ndsm_base_channels" => cfg.ndsm_base_channels = parse_field(key, value)?,
            "disc_base_channels" => cfg.disc_base_channels = parse_field(key, value)?,
            other => {
                return Err(Error::usage(format!(
                    "unknown config key {other:?}; keys must match TrainConfig field names"
                )))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
