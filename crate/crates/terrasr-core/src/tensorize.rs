//! Conversions between [`RasterGrid`] (HWC, channel-interleaved) and the
//! NCHW tensors the networks consume.

use candle_core::{DType, Device, Tensor};

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

/// One grid to a (1, c, h, w) f32 tensor. Nodata is not representable on
/// the tensor side; callers reject masked grids upstream.
pub fn grid_to_tensor(g: &RasterGrid) -> Result<Tensor> {
    batch_to_tensor(std::slice::from_ref(g))
}

/// A batch of same-shaped grids to one (n, c, h, w) f32 tensor.
pub fn batch_to_tensor<G: std::borrow::Borrow<RasterGrid>>(grids: &[G]) -> Result<Tensor> {
    let first = grids
        .first()
        .ok_or_else(|| Error::usage("cannot tensorize an empty batch"))?
        .borrow();
    let (h, w, c) = (first.height, first.width, first.channels);
    let mut data = Vec::with_capacity(grids.len() * c * h * w);
    for g in grids {
        let g = g.borrow();
        if g.height != h || g.width != w || g.channels != c {
            return Err(Error::usage(format!(
                "batch grids disagree in shape: {}x{}x{} vs {h}x{w}x{c}",
                g.height, g.width, g.channels
            )));
        }
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    data.push(g.values[(y * w + x) * c + ci]);
                }
            }
        }
    }
    Ok(Tensor::from_vec(data, (grids.len(), c, h, w), &Device::Cpu)?)
}

/// A (c, h, w) or (1, c, h, w) f32/f64 tensor back to a grid (no geo).
pub fn tensor_to_grid(t: &Tensor) -> Result<RasterGrid> {
    let t = match t.dims() {
        [1, _, _, _] => t.squeeze(0)?,
        [_, _, _] => t.clone(),
        dims => {
            return Err(Error::usage(format!(
                "expected a (c,h,w) or (1,c,h,w) tensor, got {dims:?}"
            )))
        }
    };
    let (c, h, w) = t.dims3()?;
    let flat = t
        .to_dtype(DType::F32)?
        .flatten_all()?
        .to_vec1::<f32>()?;
    let mut values = vec![0.0f32; h * w * c];
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                values[(y * w + x) * c + ci] = flat[(ci * h + y) * w + x];
            }
        }
    }
    RasterGrid::new(h, w, c, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_grid(h: usize, w: usize, c: usize, seed: u64) -> RasterGrid {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f32> = (0..h * w * c).map(|_| rng.random_range(0.0..1.0)).collect();
        RasterGrid::new(h, w, c, vals).unwrap()
    }

    #[test]
    fn layout_matches_index_oracle() {
        let g = rand_grid(3, 4, 2, 1);
        let t = grid_to_tensor(&g).unwrap();
        assert_eq!(t.dims(), &[1, 2, 3, 4]);
        let flat = t.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        for c in 0..2 {
            for y in 0..3 {
                for x in 0..4 {
                    assert_eq!(flat[(c * 3 + y) * 4 + x], g.values[(y * 4 + x) * 2 + c]);
                }
            }
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let g = rand_grid(5, 7, 3, 2);
        let back = tensor_to_grid(&grid_to_tensor(&g).unwrap()).unwrap();
        assert_eq!(back.values, g.values);
        assert_eq!((back.height, back.width, back.channels), (5, 7, 3));
    }

    #[test]
    fn batching_stacks_in_order() {
        let a = rand_grid(4, 4, 1, 3);
        let b = rand_grid(4, 4, 1, 4);
        let t = batch_to_tensor(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(t.dims(), &[2, 1, 4, 4]);
        let first = tensor_to_grid(&t.narrow(0, 0, 1).unwrap()).unwrap();
        let second = tensor_to_grid(&t.narrow(0, 1, 1).unwrap()).unwrap();
        assert_eq!(first.values, a.values);
        assert_eq!(second.values, b.values);
    }

    #[test]
    fn mismatched_batch_shapes_are_rejected() {
        let a = rand_grid(4, 4, 1, 5);
        let b = rand_grid(4, 5, 1, 6);
        assert!(batch_to_tensor(&[a, b]).is_err());
        assert!(batch_to_tensor::<RasterGrid>(&[]).is_err());
    }
}
