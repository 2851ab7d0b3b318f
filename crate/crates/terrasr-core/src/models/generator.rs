//! Super-resolution generator.
//!
//! Topology, from input to output:
//!
//! ```text
//! rgb -> conv_in -> [block x num_blocks] -> (+ global residual) ->
//!     [x2 sub-pixel unit, conv+PReLU, conv+PReLU] x log2(scale) ->
//!     conv+PReLU, conv+PReLU -> conv_out -> tanh -> 0.5x + 0.5
//! ```
//!
//! Each block wraps a chain of residual-in-residual dense blocks (RRDBs)
//! and re-adds its own input scaled by `residual_scale`; each RRDB is a
//! five-conv densely connected unit whose output is scaled the same way
//! before the local residual add. No normalization layers anywhere: batch
//! statistics are unstable at the small batch sizes this trains with, and
//! removing them avoids range drift across tiles at inference.

use candle_core::{DType, Tensor};

use crate::error::{Error, Result};
use crate::nn::{ops, ParamStore};

use super::bundle::{self, ModelBundle, ModelKind, TrainingMeta};
use super::layers::{Conv3, ConvPrelu, Init};

/// Hyperparameters of the generator. The defaults are the desk-scale
/// values used throughout the tests and the CLI.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeneratorConfig {
    /// Upsampling factor; 4 or 8.
    pub scale: usize,
    /// Number of outer residual groups.
    pub num_blocks: usize,
    /// RRDBs chained inside each group.
    pub rrdbs_per_block: usize,
    /// Feature width of the trunk.
    pub base_channels: usize,
    /// Growth width of the dense convs inside an RRDB.
    pub growth_channels: usize,
    /// Scale applied to every local residual branch; in (0, 1].
    pub residual_scale: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            scale: 4,
            num_blocks: 2,
            rrdbs_per_block: 3,
            base_channels: 32,
            growth_channels: 16,
            residual_scale: 0.2,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale != 4 && self.scale != 8 {
            return Err(Error::usage(format!(
                "generator scale must be 4 or 8, got {}",
                self.scale
            )));
        }
        if self.num_blocks == 0 || self.rrdbs_per_block == 0 {
            return Err(Error::usage(
                "num_blocks and rrdbs_per_block must both be at least 1",
            ));
        }
        if self.base_channels == 0 || self.growth_channels == 0 {
            return Err(Error::usage(
                "base_channels and growth_channels must both be at least 1",
            ));
        }
        if !(self.residual_scale > 0.0 && self.residual_scale <= 1.0) {
            return Err(Error::usage(format!(
                "residual_scale must lie in (0, 1], got {}",
                self.residual_scale
            )));
        }
        Ok(())
    }

    /// Number of x2 sub-pixel stages needed to reach `scale`.
    pub fn upsample_units(&self) -> usize {
        (self.scale as f64).log2().round() as usize
    }
}

/// Affine map taking the tanh range [-1, 1] onto the image range [0, 1].
pub fn rescale_output(x: f64) -> f64 {
    0.5 * x + 0.5
}

/// Five-conv densely connected unit with a scaled local residual.
///
/// conv_i sees the concatenation of the unit input and all previous conv
/// outputs. The last conv projects back to `base` channels, carries no
/// activation, and is initialized 10x smaller so a fresh network starts
/// close to the identity.
pub(crate) struct Rrdb {
    convs: Vec<Conv3>,
    residual_scale: f64,
}

impl Rrdb {
    pub fn new(
        ps: &mut ParamStore,
        name: &str,
        base: usize,
        growth: usize,
        residual_scale: f64,
    ) -> Result<Self> {
        let mut convs = Vec::with_capacity(5);
        for i in 0..4 {
            convs.push(Conv3::new(
                ps,
                &format!("{name}.conv{i}"),
                base + i * growth,
                growth,
                Init::Kaiming { slope: 0.2 },
            )?);
        }
        convs.push(Conv3::new(
            ps,
            &format!("{name}.conv4"),
            base + 4 * growth,
            base,
            Init::KaimingScaled {
                slope: 0.2,
                gain: 0.1,
            },
        )?);
        Ok(Rrdb {
            convs,
            residual_scale,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut feats: Vec<Tensor> = vec![x.clone()];
        for conv in &self.convs[..4] {
            let refs: Vec<&Tensor> = feats.iter().collect();
            let cat = Tensor::cat(&refs, 1)?;
            feats.push(ops::leaky_relu(&conv.forward(&cat)?, 0.2)?);
        }
        let refs: Vec<&Tensor> = feats.iter().collect();
        let out = self.convs[4].forward(&Tensor::cat(&refs, 1)?)?;
        Ok((x + out.affine(self.residual_scale, 0.0)?)?)
    }
}

/// A chain of RRDBs with one more scaled residual around the whole chain.
struct Block {
    rrdbs: Vec<Rrdb>,
    residual_scale: f64,
}

impl Block {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        for rrdb in &self.rrdbs {
            y = rrdb.forward(&y)?;
        }
        Ok((x + y.affine(self.residual_scale, 0.0)?)?)
    }
}

/// One x2 sub-pixel stage: expand channels 4x, rearrange channel->space,
/// then two conv+PReLU layers to clean up the checkerboard pattern the
/// rearrangement leaves behind.
struct UpUnit {
    expand: Conv3,
    refine: [ConvPrelu; 2],
}

impl UpUnit {
    fn new(ps: &mut ParamStore, name: &str, base: usize) -> Result<Self> {
        let expand = Conv3::new(
            ps,
            &format!("{name}.expand"),
            base,
            4 * base,
            Init::Kaiming { slope: 0.0 },
        )?;
        let refine = [
            ConvPrelu::new(ps, &format!("{name}.refine0"), base, base)?,
            ConvPrelu::new(ps, &format!("{name}.refine1"), base, base)?,
        ];
        Ok(UpUnit { expand, refine })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = ops::pixel_shuffle(&self.expand.forward(x)?, 2)?;
        for cp in &self.refine {
            y = cp.forward(&y)?;
        }
        Ok(y)
    }
}

/// The full generator. Holds its own parameter store; the stored handles
/// alias the variables, so optimizer updates are visible to `forward`
/// without any rebuilding.
pub struct Generator {
    config: GeneratorConfig,
    store: ParamStore,
    conv_in: Conv3,
    blocks: Vec<Block>,
    ups: Vec<UpUnit>,
    post: [ConvPrelu; 2],
    conv_out: Conv3,
}

/// Builds a generator with freshly initialized parameters.
pub fn build_generator(config: &GeneratorConfig, dtype: DType, init_seed: u64) -> Result<Generator> {
    config.validate()?;
    let mut ps = ParamStore::new(dtype, init_seed);
    let base = config.base_channels;

    let conv_in = Conv3::new(&mut ps, "conv_in", 3, base, Init::Kaiming { slope: 0.0 })?;

    let mut blocks = Vec::with_capacity(config.num_blocks);
    for b in 0..config.num_blocks {
        let mut rrdbs = Vec::with_capacity(config.rrdbs_per_block);
        for r in 0..config.rrdbs_per_block {
            rrdbs.push(Rrdb::new(
                &mut ps,
                &format!("block{b}.rrdb{r}"),
                base,
                config.growth_channels,
                config.residual_scale,
            )?);
        }
        blocks.push(Block {
            rrdbs,
            residual_scale: config.residual_scale,
        });
    }

    let mut ups = Vec::with_capacity(config.upsample_units());
    for u in 0..config.upsample_units() {
        ups.push(UpUnit::new(&mut ps, &format!("up{u}"), base)?);
    }

    let post = [
        ConvPrelu::new(&mut ps, "post0", base, base)?,
        ConvPrelu::new(&mut ps, "post1", base, base)?,
    ];
    let conv_out = Conv3::new(&mut ps, "conv_out", base, 3, Init::Kaiming { slope: 0.0 })?;

    Ok(Generator {
        config: config.clone(),
        store: ps,
        conv_in,
        blocks,
        ups,
        post,
        conv_out,
    })
}

impl Generator {
    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Number of x2 stages actually built.
    pub fn upsample_units(&self) -> usize {
        self.ups.len()
    }

    /// Snapshots the generator into a serializable bundle.
    pub fn to_bundle(&self, meta: TrainingMeta) -> Result<ModelBundle> {
        let c = &self.config;
        Ok(ModelBundle {
            kind: ModelKind::Generator,
            config: vec![
                ("scale".into(), c.scale.to_string()),
                ("num_blocks".into(), c.num_blocks.to_string()),
                ("rrdbs_per_block".into(), c.rrdbs_per_block.to_string()),
                ("base_channels".into(), c.base_channels.to_string()),
                ("growth_channels".into(), c.growth_channels.to_string()),
                ("residual_scale".into(), c.residual_scale.to_string()),
            ],
            meta,
            params: bundle::snapshot_store(&self.store)?,
        })
    }

    /// Rebuilds a generator from a bundle: same topology, same weights.
    pub fn from_bundle(b: &ModelBundle) -> Result<Generator> {
        b.expect_kind(ModelKind::Generator)?;
        let config = GeneratorConfig {
            scale: b.parse_value("scale")?,
            num_blocks: b.parse_value("num_blocks")?,
            rrdbs_per_block: b.parse_value("rrdbs_per_block")?,
            base_channels: b.parse_value("base_channels")?,
            growth_channels: b.parse_value("growth_channels")?,
            residual_scale: b.parse_value("residual_scale")?,
        };
        let mut g = build_generator(&config, b.dtype()?, 0)?;
        bundle::load_into_store(&mut g.store, b)?;
        Ok(g)
    }

    /// Maps a (n, 3, h, w) batch in [0, 1] to (n, 3, h*scale, w*scale)
    /// in [0, 1]. The output range holds for any parameter values because
    /// the last ops are tanh followed by the affine [-1,1] -> [0,1] map.
    pub fn forward(&self, lr: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = lr.dims4()?;
        if c != 3 {
            return Err(Error::usage(format!(
                "generator input must have 3 channels, got {c}"
            )));
        }
        if h < 16 || w < 16 {
            return Err(Error::usage(format!(
                "generator input must be at least 16x16, got {h}x{w}"
            )));
        }
        let feat0 = self.conv_in.forward(lr)?;
        let mut x = feat0.clone();
        for block in &self.blocks {
            x = block.forward(&x)?;
        }
        let mut t = (feat0 + x)?;
        for up in &self.ups {
            t = up.forward(&t)?;
        }
        for cp in &self.post {
            t = cp.forward(&t)?;
        }
        let y = self.conv_out.forward(&t)?.tanh()?;
        Ok(y.affine(0.5, 0.5)?)
    }
}
