//! Height-estimation network: RGB in, elevation map out.
//!
//! A compact U-Net. Every conv is the 3x3 stride-1 kernel; downsampling is
//! 2x2 average pooling, upsampling is nearest-neighbor, and each decoder
//! level concatenates the matching encoder output before refining. The head
//! passes through softplus so predicted heights are never negative, which
//! keeps the consistency loss from rewarding below-ground artifacts.

use candle_core::{DType, Tensor};

use crate::error::{Error, Result};
use crate::nn::{ops, ParamStore};

use super::bundle::{self, ModelBundle, ModelKind, TrainingMeta};
use super::layers::{Conv3, ConvLrelu, Init};

/// How the head maps features to heights. Only a non-negative map is
/// defined: heights are meters above ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    NonNeg,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NdsmNetConfig {
    /// Encoder levels; the spatial extent shrinks by 2^(depth-1) at the
    /// bottleneck. Must be at least 2.
    pub depth: usize,
    /// Feature width at the first level; level i is base_channels << i.
    pub base_channels: usize,
    pub output_activation: OutputActivation,
}

impl Default for NdsmNetConfig {
    fn default() -> Self {
        NdsmNetConfig {
            depth: 3,
            base_channels: 16,
            output_activation: OutputActivation::NonNeg,
        }
    }
}

impl NdsmNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::usage(format!(
                "height net depth must be at least 2, got {}",
                self.depth
            )));
        }
        if self.base_channels == 0 {
            return Err(Error::usage("height net base_channels must be at least 1"));
        }
        Ok(())
    }

    /// Input sides must be divisible by this so pooled maps line up with
    /// the decoder's doubled maps.
    pub fn spatial_divisor(&self) -> usize {
        1 << (self.depth - 1)
    }
}

struct EncLevel {
    conv0: ConvLrelu,
    conv1: ConvLrelu,
}

struct DecLevel {
    up: ConvLrelu,
    conv0: ConvLrelu,
    conv1: ConvLrelu,
}

pub struct NdsmNet {
    config: NdsmNetConfig,
    store: ParamStore,
    encoders: Vec<EncLevel>,
    decoders: Vec<DecLevel>,
    head: Conv3,
}

/// Builds a height net with freshly initialized parameters.
pub fn build_ndsm_net(config: &NdsmNetConfig, dtype: DType, init_seed: u64) -> Result<NdsmNet> {
    config.validate()?;
    let mut ps = ParamStore::new(dtype, init_seed);
    let b = config.base_channels;
    let ch = |level: usize| b << level;

    let mut encoders = Vec::with_capacity(config.depth);
    for i in 0..config.depth {
        let cin = if i == 0 { 3 } else { ch(i - 1) };
        encoders.push(EncLevel {
            conv0: ConvLrelu::new(&mut ps, &format!("enc{i}.conv0"), cin, ch(i))?,
            conv1: ConvLrelu::new(&mut ps, &format!("enc{i}.conv1"), ch(i), ch(i))?,
        });
    }

    // Deepest decoder level first, mirroring forward's order.
    let mut decoders = Vec::with_capacity(config.depth - 1);
    for i in (0..config.depth - 1).rev() {
        decoders.push(DecLevel {
            up: ConvLrelu::new(&mut ps, &format!("dec{i}.up"), ch(i + 1), ch(i))?,
            conv0: ConvLrelu::new(&mut ps, &format!("dec{i}.conv0"), 2 * ch(i), ch(i))?,
            conv1: ConvLrelu::new(&mut ps, &format!("dec{i}.conv1"), ch(i), ch(i))?,
        });
    }

    let head = Conv3::new(&mut ps, "head", b, 1, Init::Kaiming { slope: 0.0 })?;

    Ok(NdsmNet {
        config: config.clone(),
        store: ps,
        encoders,
        decoders,
        head,
    })
}

impl NdsmNet {
    pub fn config(&self) -> &NdsmNetConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Snapshots the network into a serializable bundle.
    pub fn to_bundle(&self, meta: TrainingMeta) -> Result<ModelBundle> {
        let c = &self.config;
        Ok(ModelBundle {
            kind: ModelKind::Ndsm,
            config: vec![
                ("depth".into(), c.depth.to_string()),
                ("base_channels".into(), c.base_channels.to_string()),
                ("output_activation".into(), "nonneg".into()),
            ],
            meta,
            params: bundle::snapshot_store(&self.store)?,
        })
    }

    /// Rebuilds a height net from a bundle: same topology, same weights.
    pub fn from_bundle(b: &ModelBundle) -> Result<NdsmNet> {
        b.expect_kind(ModelKind::Ndsm)?;
        let activation = match b.config_value("output_activation")? {
            "nonneg" => OutputActivation::NonNeg,
            other => {
                return Err(Error::checkpoint(format!(
                    "unknown output_activation {other:?} in bundle"
                )))
            }
        };
        let config = NdsmNetConfig {
            depth: b.parse_value("depth")?,
            base_channels: b.parse_value("base_channels")?,
            output_activation: activation,
        };
        let mut net = build_ndsm_net(&config, b.dtype()?, 0)?;
        bundle::load_into_store(&mut net.store, b)?;
        Ok(net)
    }

    /// Maps a (n, 3, h, w) RGB batch to (n, 1, h, w) heights in meters,
    /// always >= 0. Both sides must be divisible by `spatial_divisor()`.
    pub fn forward(&self, rgb: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = rgb.dims4()?;
        if c != 3 {
            return Err(Error::usage(format!(
                "height net input must have 3 channels, got {c}"
            )));
        }
        let div = self.config.spatial_divisor();
        if h % div != 0 || w % div != 0 {
            return Err(Error::usage(format!(
                "height net input sides must be divisible by {div}, got {h}x{w}"
            )));
        }

        let mut skips: Vec<Tensor> = Vec::with_capacity(self.config.depth - 1);
        let mut x = rgb.clone();
        for (i, enc) in self.encoders.iter().enumerate() {
            x = enc.conv1.forward(&enc.conv0.forward(&x)?)?;
            if i + 1 < self.config.depth {
                skips.push(x.clone());
                x = ops::downsample_avg_x2(&x)?;
            }
        }
        for dec in &self.decoders {
            x = dec.up.forward(&ops::upsample_nearest_x2(&x)?)?;
            let skip = skips.pop().expect("one skip per decoder level");
            x = Tensor::cat(&[&skip, &x], 1)?;
            x = dec.conv1.forward(&dec.conv0.forward(&x)?)?;
        }
        Ok(ops::softplus(&self.head.forward(&x)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device, Tensor};

    fn tiny_config() -> NdsmNetConfig {
        NdsmNetConfig {
            depth: 2,
            base_channels: 4,
            output_activation: OutputActivation::NonNeg,
        }
    }

    fn rand_rgb(n: usize, h: usize, w: usize, seed: u64) -> Tensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..n * 3 * h * w).map(|_| rng.random_range(0.0..1.0)).collect();
        Tensor::from_vec(data, (n, 3, h, w), &Device::Cpu).unwrap()
    }

    #[test]
    fn maps_rgb_to_single_channel_same_dims() {
        let net = build_ndsm_net(&NdsmNetConfig::default(), DType::F32, 5).unwrap();
        let y = net.forward(&rand_rgb(2, 16, 24, 1)).unwrap();
        assert_eq!(y.dims(), &[2, 1, 16, 24]);
    }

    #[test]
    fn output_is_nonnegative_even_with_hostile_parameters() {
        let mut net = build_ndsm_net(&tiny_config(), DType::F32, 6).unwrap();
        for (i, v) in net.store_mut().vars().iter().enumerate() {
            let sign = if i % 2 == 0 { -30.0f32 } else { 30.0 };
            v.set(&Tensor::full(sign, v.shape(), &Device::Cpu).unwrap())
                .unwrap();
        }
        let y = net.forward(&rand_rgb(1, 8, 8, 2)).unwrap();
        let v = y.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(v.iter().all(|&p| p >= 0.0 && p.is_finite()));
    }

    #[test]
    fn indivisible_input_sides_are_rejected() {
        let net = build_ndsm_net(&NdsmNetConfig::default(), DType::F32, 0).unwrap();
        // depth 3 needs sides divisible by 4.
        assert!(net.forward(&rand_rgb(1, 18, 16, 3)).is_err());
        assert!(net.forward(&rand_rgb(1, 16, 18, 3)).is_err());
        assert!(net.forward(&rand_rgb(1, 16, 16, 3)).is_ok());
    }

    #[test]
    fn shallow_depth_is_rejected() {
        let mut cfg = tiny_config();
        cfg.depth = 1;
        assert!(build_ndsm_net(&cfg, DType::F32, 0).is_err());
    }

    #[test]
    fn wrong_channel_count_is_rejected() {
        let net = build_ndsm_net(&tiny_config(), DType::F32, 0).unwrap();
        let x = Tensor::zeros((1, 1, 8, 8), DType::F32, &Device::Cpu).unwrap();
        assert!(net.forward(&x).is_err());
    }

    #[test]
    fn gradients_flow_to_every_parameter() {
        let net = build_ndsm_net(&tiny_config(), DType::F32, 7).unwrap();
        let x = rand_rgb(1, 8, 8, 4);
        let target = Tensor::full(2.0f32, (1, 1, 8, 8), &Device::Cpu).unwrap();
        let pred = net.forward(&x).unwrap();
        let loss = (pred - target).unwrap().abs().unwrap().mean_all().unwrap();
        let grads = loss.backward().unwrap();
        for (name, var) in net.store().iter() {
            let grad = grads
                .get(var.as_tensor())
                .unwrap_or_else(|| panic!("no gradient for {name}"));
            let v = grad.flatten_all().unwrap().to_vec1::<f32>().unwrap();
            assert!(v.iter().all(|p| p.is_finite()), "non-finite grad in {name}");
            assert!(v.iter().any(|&p| p != 0.0), "all-zero grad in {name}");
        }
    }

    #[test]
    fn bundle_round_trip_preserves_forward_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ndsm.bundle");
        let net = build_ndsm_net(&tiny_config(), DType::F32, 23).unwrap();
        let b = net.to_bundle(TrainingMeta { step: 240, pretrain_mae: None }).unwrap();
        crate::models::bundle::save_bundle(&b, &path).unwrap();
        let net2 = NdsmNet::from_bundle(&crate::models::bundle::load_bundle(&path).unwrap()).unwrap();
        assert_eq!(net2.config(), net.config());
        let x = rand_rgb(1, 8, 8, 6);
        let ya = net.forward(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let yb = net2.forward(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(ya, yb);
    }

    #[test]
    fn same_seed_reproduces_the_network() {
        let a = build_ndsm_net(&tiny_config(), DType::F32, 11).unwrap();
        let b = build_ndsm_net(&tiny_config(), DType::F32, 11).unwrap();
        assert_eq!(a.store().checksum().unwrap(), b.store().checksum().unwrap());
        let x = rand_rgb(1, 8, 8, 5);
        let ya = a.forward(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let yb = b.forward(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(ya, yb);
    }
}
