//! Differentiable shape and activation ops built from backend primitives.

use candle_core::{bail, Result, Tensor};

/// Sub-pixel rearrangement: (n, c·r², h, w) → (n, c, h·r, w·r). The channel
/// block of r² maps to an r x r spatial neighborhood, so a convolution that
/// produces c·r² channels followed by this op is a learned ×r upsampler.
pub fn pixel_shuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let (n, cr2, h, w) = x.dims4()?;
    if r == 0 || cr2 % (r * r) != 0 {
        bail!("pixel_shuffle: {cr2} channels not divisible by {r}²");
    }
    let c = cr2 / (r * r);
    x.reshape((n, c, r, r, h, w))?
        .permute([0, 1, 4, 2, 5, 3])?
        .reshape((n, c, h * r, w * r))
}

/// Nearest-neighbor ×2 upsampling.
pub fn upsample_nearest_x2(x: &Tensor) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    x.upsample_nearest2d(2 * h, 2 * w)
}

/// Halve both spatial dimensions by 2x2 mean pooling.
pub fn downsample_avg_x2(x: &Tensor) -> Result<Tensor> {
    x.avg_pool2d(2)
}

/// max(x,0) + slope·min(x,0).
pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    let zeros = x.zeros_like()?;
    x.maximum(&zeros)? + x.minimum(&zeros)?.affine(slope, 0.0)?
}

/// Per-channel parametric ReLU for NCHW tensors; `slope` has shape (c,).
pub fn prelu(x: &Tensor, slope: &Tensor) -> Result<Tensor> {
    let c = x.dims4()?.1;
    if slope.dims1()? != c {
        bail!("prelu: slope has {} entries for {c} channels", slope.dims1()?);
    }
    let zeros = x.zeros_like()?;
    let s = slope.reshape((1, c, 1, 1))?;
    x.maximum(&zeros)? + x.minimum(&zeros)?.broadcast_mul(&s)?
}

/// ln(1 + eˣ), numerically stable: max(x,0) + ln(1 + e^{-|x|}).
pub fn softplus(x: &Tensor) -> Result<Tensor> {
    let zeros = x.zeros_like()?;
    let linear = x.maximum(&zeros)?;
    let decay = x.abs()?.neg()?.exp()?.affine(1.0, 1.0)?.log()?;
    linear + decay
}

/// 1 / (1 + e^{-x}), written as ½·(tanh(x/2) + 1) so it stays stable for
/// large |x| and rides on tanh's backward pass.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    x.affine(0.5, 0.0)?.tanh()?.affine(0.5, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn pixel_shuffle_matches_index_oracle() {
        // out[n][c][y][x] = in[n][c*r² + (y%r)*r + (x%r)][y/r][x/r]
        let dev = Device::Cpu;
        let (n, c, r, h, w) = (2usize, 3usize, 2usize, 3usize, 4usize);
        let x = Tensor::rand(-1f32, 1f32, (n, c * r * r, h, w), &dev).unwrap();
        let y = pixel_shuffle(&x, r).unwrap();
        assert_eq!(y.dims4().unwrap(), (n, c, h * r, w * r));
        let xv = x.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let yv = y.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        for ni in 0..n {
            for ci in 0..c {
                for yy in 0..h * r {
                    for xx in 0..w * r {
                        let src_c = ci * r * r + (yy % r) * r + (xx % r);
                        let want = xv[((ni * c * r * r + src_c) * h + yy / r) * w + xx / r];
                        let got = yv[((ni * c + ci) * h * r + yy) * w * r + xx];
                        assert_eq!(got, want, "n{ni} c{ci} y{yy} x{xx}");
                    }
                }
            }
        }
    }

    #[test]
    fn pixel_shuffle_rejects_non_divisible_channels() {
        let dev = Device::Cpu;
        let x = Tensor::zeros((1, 6, 2, 2), candle_core::DType::F32, &dev).unwrap();
        assert!(pixel_shuffle(&x, 2).is_err());
    }

    #[test]
    fn leaky_relu_values() {
        let dev = Device::Cpu;
        let x = Tensor::from_vec(vec![-2f32, -0.5, 0.0, 0.5, 2.0], (1, 1, 1, 5), &dev).unwrap();
        let y = leaky_relu(&x, 0.2).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(y, vec![-0.4, -0.1, 0.0, 0.5, 2.0]);
    }

    #[test]
    fn prelu_uses_per_channel_slopes() {
        let dev = Device::Cpu;
        let x = Tensor::from_vec(vec![-1f32, 1.0, -1.0, 1.0], (1, 2, 1, 2), &dev).unwrap();
        let s = Tensor::from_vec(vec![0.1f32, 0.5], 2, &dev).unwrap();
        let y = prelu(&x, &s).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(y, vec![-0.1, 1.0, -0.5, 1.0]);
    }

    #[test]
    fn softplus_is_stable_and_positive() {
        let dev = Device::Cpu;
        let x = Tensor::from_vec(vec![-40f32, -1.0, 0.0, 1.0, 40.0], (1, 1, 1, 5), &dev).unwrap();
        let y = softplus(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(y[0] >= 0.0 && y[0] < 1e-6);
        assert!((y[2] - (2f32).ln()).abs() < 1e-6);
        assert!((y[4] - 40.0).abs() < 1e-4);
        assert!(y.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn sigmoid_matches_reference_and_saturates_cleanly() {
        let dev = Device::Cpu;
        let xs = [-50.0f64, -3.0, -0.5, 0.0, 0.5, 3.0, 50.0];
        let x = Tensor::from_vec(xs.to_vec(), (7,), &dev).unwrap();
        let y = sigmoid(&x).unwrap().to_vec1::<f64>().unwrap();
        for (i, &v) in xs.iter().enumerate() {
            let want = 1.0 / (1.0 + (-v).exp());
            assert!((y[i] - want).abs() < 1e-12, "sigmoid({v}) = {}", y[i]);
            assert!((0.0..=1.0).contains(&y[i]));
        }
    }

    #[test]
    fn upsample_and_pool_shapes() {
        let dev = Device::Cpu;
        let x = Tensor::rand(0f32, 1f32, (1, 3, 4, 6), &dev).unwrap();
        let up = upsample_nearest_x2(&x).unwrap();
        assert_eq!(up.dims4().unwrap(), (1, 3, 8, 12));
        let down = downsample_avg_x2(&up).unwrap();
        assert_eq!(down.dims4().unwrap(), (1, 3, 4, 6));
        // Nearest-up then mean-pool is the identity.
        let diff = (down - &x).unwrap().abs().unwrap().max_all().unwrap().to_vec0::<f32>().unwrap();
        assert!(diff < 1e-6);
    }
}
