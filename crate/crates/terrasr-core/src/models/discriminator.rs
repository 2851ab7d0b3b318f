//! Patch discriminator for adversarial training.
//!
//! A strided-conv ladder in the SRGAN style: channels double while the
//! spatial extent halves, ending in a fully connected score squashed by a
//! sigmoid. Unlike the generator and the height net this uses the backend's
//! conv2d — the ladder needs stride 2, which the custom stride-1 kernel
//! does not cover, and the discriminator is a small share of the step
//! budget anyway.

use candle_core::{DType, Tensor};

use crate::error::{Error, Result};
use crate::nn::{ops, ParamStore};

use super::bundle::{self, ModelBundle, ModelKind, TrainingMeta};

/// Product of the per-stage strides; `input_px` must be divisible by it.
pub const TOTAL_STRIDE: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DiscriminatorConfig {
    /// Side length of the (square) inputs the net is built for. The final
    /// fully connected layer is sized from it, so it is fixed per build.
    pub input_px: usize,
    /// Channel width of the first stage; later stages reach 4x this.
    pub base_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            input_px: 128,
            base_channels: 32,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_px == 0 || self.input_px % TOTAL_STRIDE != 0 {
            return Err(Error::usage(format!(
                "discriminator input_px must be a positive multiple of {TOTAL_STRIDE}, got {}",
                self.input_px
            )));
        }
        if self.base_channels == 0 {
            return Err(Error::usage("discriminator base_channels must be at least 1"));
        }
        Ok(())
    }
}

struct Stage {
    w: Tensor,
    b: Tensor,
    cout: usize,
    stride: usize,
}

pub struct Discriminator {
    config: DiscriminatorConfig,
    store: ParamStore,
    stages: Vec<Stage>,
    head_w: Tensor,
    head_b: Tensor,
}

/// Builds a discriminator for `input_px` x `input_px` RGB images.
pub fn build_discriminator(
    input_px: usize,
    base_channels: usize,
    dtype: DType,
    init_seed: u64,
) -> Result<Discriminator> {
    let config = DiscriminatorConfig {
        input_px,
        base_channels,
    };
    config.validate()?;
    let mut ps = ParamStore::new(dtype, init_seed);
    let b = base_channels;

    // (cin, cout, stride): halve the extent three times, double the width
    // on the way.
    let plan = [
        (3, b, 1),
        (b, b, 2),
        (b, 2 * b, 1),
        (2 * b, 2 * b, 2),
        (2 * b, 4 * b, 1),
        (4 * b, 4 * b, 2),
    ];
    let mut stages = Vec::with_capacity(plan.len());
    for (i, &(cin, cout, stride)) in plan.iter().enumerate() {
        let w = ps.var_kaiming(
            &format!("stage{i}.weight"),
            &[cout, cin, 3, 3],
            cin * 9,
            0.2,
        )?;
        let bias = ps.var_zeros(&format!("stage{i}.bias"), &[cout])?;
        stages.push(Stage {
            w,
            b: bias,
            cout,
            stride,
        });
    }

    let side = input_px / TOTAL_STRIDE;
    let features = 4 * b * side * side;
    let head_w = ps.var_normal("head.weight", &[1, features], (1.0 / features as f64).sqrt())?;
    let head_b = ps.var_zeros("head.bias", &[1])?;

    Ok(Discriminator {
        config,
        store: ps,
        stages,
        head_w,
        head_b,
    })
}

impl Discriminator {
    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Snapshots the discriminator into a serializable bundle.
    pub fn to_bundle(&self, meta: TrainingMeta) -> Result<ModelBundle> {
        Ok(ModelBundle {
            kind: ModelKind::Discriminator,
            config: vec![
                ("input_px".into(), self.config.input_px.to_string()),
                ("base_channels".into(), self.config.base_channels.to_string()),
            ],
            meta,
            params: bundle::snapshot_store(&self.store)?,
        })
    }

    /// Rebuilds a discriminator from a bundle: same topology, same weights.
    pub fn from_bundle(b: &ModelBundle) -> Result<Discriminator> {
        b.expect_kind(ModelKind::Discriminator)?;
        let input_px: usize = b.parse_value("input_px")?;
        let base_channels: usize = b.parse_value("base_channels")?;
        let mut d = build_discriminator(input_px, base_channels, b.dtype()?, 0)?;
        bundle::load_into_store(&mut d.store, b)?;
        Ok(d)
    }

    /// Scores a (n, 3, input_px, input_px) batch: (n,) values in (0, 1),
    /// higher meaning "looks real".
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = x.dims4()?;
        if c != 3 {
            return Err(Error::usage(format!(
                "discriminator input must have 3 channels, got {c}"
            )));
        }
        let px = self.config.input_px;
        if h != px || w != px {
            return Err(Error::usage(format!(
                "discriminator was built for {px}x{px} inputs, got {h}x{w}"
            )));
        }
        let mut t = x.clone();
        for stage in &self.stages {
            t = t.conv2d(&stage.w, 1, stage.stride, 1, 1)?;
            t = t.broadcast_add(&stage.b.reshape((1, stage.cout, 1, 1))?)?;
            t = ops::leaky_relu(&t, 0.2)?;
        }
        let flat = t.flatten_from(1)?;
        let score = flat
            .matmul(&self.head_w.t()?)?
            .broadcast_add(&self.head_b)?;
        Ok(ops::sigmoid(&score)?.squeeze(1)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device, Tensor};

    fn rand_batch(n: usize, px: usize, seed: u64) -> Tensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..n * 3 * px * px).map(|_| rng.random_range(0.0..1.0)).collect();
        Tensor::from_vec(data, (n, 3, px, px), &Device::Cpu).unwrap()
    }

    #[test]
    fn scores_are_per_image_in_unit_interval() {
        let d = build_discriminator(32, 8, DType::F32, 3).unwrap();
        let scores = d.forward(&rand_batch(4, 32, 1)).unwrap();
        assert_eq!(scores.dims(), &[4]);
        let v = scores.to_vec1::<f32>().unwrap();
        assert!(v.iter().all(|&s| s > 0.0 && s < 1.0), "scores {v:?}");
    }

    #[test]
    fn scoring_is_deterministic() {
        let d = build_discriminator(32, 8, DType::F32, 3).unwrap();
        let x = rand_batch(2, 32, 2);
        let a = d.forward(&x).unwrap().to_vec1::<f32>().unwrap();
        let b = d.forward(&x).unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indivisible_input_px_is_rejected() {
        assert!(build_discriminator(30, 8, DType::F32, 0).is_err());
        assert!(build_discriminator(0, 8, DType::F32, 0).is_err());
        assert!(build_discriminator(32, 8, DType::F32, 0).is_ok());
    }

    #[test]
    fn mismatched_input_size_is_rejected() {
        let d = build_discriminator(32, 8, DType::F32, 0).unwrap();
        assert!(d.forward(&rand_batch(1, 24, 0)).is_err());
    }

    #[test]
    fn doubling_base_channels_strictly_increases_params() {
        let small = build_discriminator(32, 8, DType::F32, 0).unwrap();
        let big = build_discriminator(32, 16, DType::F32, 0).unwrap();
        assert!(big.store().param_count() > small.store().param_count());
    }

    #[test]
    fn bundle_round_trip_preserves_scores_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("discriminator.bundle");
        let d = build_discriminator(32, 8, DType::F32, 17).unwrap();
        let b = d.to_bundle(super::super::bundle::TrainingMeta::default()).unwrap();
        crate::models::bundle::save_bundle(&b, &path).unwrap();
        let d2 = Discriminator::from_bundle(&crate::models::bundle::load_bundle(&path).unwrap())
            .unwrap();
        assert_eq!(d2.config(), d.config());
        let x = rand_batch(2, 32, 4);
        assert_eq!(
            d.forward(&x).unwrap().to_vec1::<f32>().unwrap(),
            d2.forward(&x).unwrap().to_vec1::<f32>().unwrap()
        );
    }

    #[test]
    fn gradients_flow_to_every_parameter() {
        let d = build_discriminator(32, 8, DType::F32, 5).unwrap();
        let x = rand_batch(2, 32, 3);
        let scores = d.forward(&x).unwrap();
        // -log(s) pushes scores up; any smooth scalar works here.
        let loss = scores.log().unwrap().neg().unwrap().mean_all().unwrap();
        let grads = loss.backward().unwrap();
        for (name, var) in d.store().iter() {
            let grad = grads
                .get(var.as_tensor())
                .unwrap_or_else(|| panic!("no gradient for {name}"));
            let v = grad.flatten_all().unwrap().to_vec1::<f32>().unwrap();
            assert!(v.iter().all(|p| p.is_finite()), "non-finite grad in {name}");
            assert!(v.iter().any(|&p| p != 0.0), "all-zero grad in {name}");
        }
    }
}
