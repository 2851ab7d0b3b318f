//! Bicubic resampling (Keys kernel, a = -0.5) with center-aligned sampling
//! and edge replication.
//!
//! Both directions evaluate the same interpolant: output pixel `i` at a
//! linear size ratio `f` (input pixels per output pixel) samples the input at
//! `s = (i + 0.5) * f - 0.5`, so pixel centers of the two grids coincide in
//! world coordinates. Downsampling is plain interpolation — no low-pass
//! widening — which keeps it the exact adjoint-free counterpart of the
//! upsampling path and matches how LR training inputs are produced.

use crate::error::{Error, Result};
use crate::raster::{GeoMeta, RasterGrid};

/// Keys cubic convolution kernel with a = -0.5.
#[inline]
fn cubic(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0)
    } else {
        0.0
    }
}

/// Taps and weights for one output index along one axis.
/// Returns the four source indices (edge-replicated) and their weights.
#[inline]
fn taps(out_idx: usize, ratio: f64, in_len: usize) -> ([usize; 4], [f64; 4]) {
    let s = (out_idx as f64 + 0.5) * ratio - 0.5;
    let base = s.floor();
    let frac = s - base;
    let base = base as isize;
    let mut idx = [0usize; 4];
    let mut w = [0f64; 4];
    for k in 0..4 {
        let src = base - 1 + k as isize;
        idx[k] = src.clamp(0, in_len as isize - 1) as usize;
        w[k] = cubic(frac - (k as f64 - 1.0));
    }
    (idx, w)
}

/// Separable bicubic resample of every channel to `out_h` x `out_w`, where
/// `ratio_*` is input pixels per output pixel along each axis.
fn resample(grid: &RasterGrid, out_h: usize, out_w: usize, ratio_y: f64, ratio_x: f64) -> RasterGrid {
    let (h, w, ch) = (grid.height, grid.width, grid.channels);

    // Horizontal pass: h x out_w, f64 intermediate per channel.
    let mut mid = vec![0f64; h * out_w * ch];
    for ox in 0..out_w {
        let (idx, wt) = taps(ox, ratio_x, w);
        for y in 0..h {
            for c in 0..ch {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += wt[k] * grid.get(y, idx[k], c) as f64;
                }
                mid[(y * out_w + ox) * ch + c] = acc;
            }
        }
    }

    // Vertical pass.
    let mut values = vec![0f32; out_h * out_w * ch];
    for oy in 0..out_h {
        let (idx, wt) = taps(oy, ratio_y, h);
        for ox in 0..out_w {
            for c in 0..ch {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += wt[k] * mid[(idx[k] * out_w + ox) * ch + c];
                }
                values[(oy * out_w + ox) * ch + c] = acc as f32;
            }
        }
    }

    // Nodata propagates through the 4x4 footprint of each output pixel.
    let nodata_mask = grid.nodata_mask.as_ref().map(|m| {
        let mut out = vec![false; out_h * out_w];
        for oy in 0..out_h {
            let (iy, _) = taps(oy, ratio_y, h);
            for ox in 0..out_w {
                let (ix, _) = taps(ox, ratio_x, w);
                out[oy * out_w + ox] = iy.iter().any(|&y| ix.iter().any(|&x| m[y * w + x]));
            }
        }
        out
    });

    RasterGrid {
        height: out_h,
        width: out_w,
        channels: ch,
        values,
        geo: None,
        nodata_mask,
    }
}

fn scaled_geo(geo: &GeoMeta, ratio: f64) -> GeoMeta {
    // Pixel centers: output pixel 0 sits at input coordinate 0.5*ratio - 0.5.
    GeoMeta {
        origin_x: geo.origin_x + (0.5 * ratio - 0.5) * geo.pixel_size_x,
        origin_y: geo.origin_y + (0.5 * ratio - 0.5) * geo.pixel_size_y,
        pixel_size_x: geo.pixel_size_x * ratio,
        pixel_size_y: geo.pixel_size_y * ratio,
        crs: geo.crs.clone(),
    }
}

/// Shrink a grid by an integer factor that must divide both dimensions.
pub fn bicubic_downsample(grid: &RasterGrid, factor: usize) -> Result<RasterGrid> {
    if !matches!(factor, 2 | 4 | 8) {
        return Err(Error::usage(format!(
            "downsample factor must be 2, 4, or 8, got {factor}"
        )));
    }
    if grid.height % factor != 0 || grid.width % factor != 0 {
        return Err(Error::usage(format!(
            "downsample factor {factor} does not divide raster {}x{}; crop first",
            grid.height, grid.width
        )));
    }
    let ratio = factor as f64;
    let mut out = resample(grid, grid.height / factor, grid.width / factor, ratio, ratio);
    out.geo = grid.geo.as_ref().map(|g| scaled_geo(g, ratio));
    Ok(out)
}

/// Enlarge a grid by an integer factor.
pub fn bicubic_upsample(grid: &RasterGrid, factor: usize) -> Result<RasterGrid> {
    if factor == 0 {
        return Err(Error::usage("upsample factor must be at least 1"));
    }
    let ratio = 1.0 / factor as f64;
    let mut out = resample(grid, grid.height * factor, grid.width * factor, ratio, ratio);
    out.geo = grid.geo.as_ref().map(|g| scaled_geo(g, ratio));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: direct 2D evaluation of the Keys interpolant
    /// (a = -0.5) at center-aligned sample points with edge replication,
    /// written as one non-separable 4x4 loop.
    fn oracle_resample_px(grid: &RasterGrid, oy: usize, ox: usize, c: usize, ratio: f64) -> f64 {
        fn k(t: f64) -> f64 {
            let t = t.abs();
            if t <= 1.0 {
                1.5 * t * t * t - 2.5 * t * t + 1.0
            } else if t < 2.0 {
                -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
            } else {
                0.0
            }
        }
        let sy = (oy as f64 + 0.5) * ratio - 0.5;
        let sx = (ox as f64 + 0.5) * ratio - 0.5;
        let by = sy.floor() as isize;
        let bx = sx.floor() as isize;
        let mut acc = 0.0;
        for dy in -1..=2isize {
            for dx in -1..=2isize {
                let y = (by + dy).clamp(0, grid.height as isize - 1) as usize;
                let x = (bx + dx).clamp(0, grid.width as isize - 1) as usize;
                acc += k(sy - (by + dy) as f64) * k(sx - (bx + dx) as f64) * grid.get(y, x, c) as f64;
            }
        }
        acc
    }

    fn pseudo_random_grid(h: usize, w: usize, ch: usize, seed: u64) -> RasterGrid {
        // Tiny deterministic LCG; values in [0,1).
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) as f32
        };
        let values = (0..h * w * ch).map(|_| next()).collect();
        RasterGrid::new(h, w, ch, values).unwrap()
    }

    #[test]
    fn downsample_matches_direct_2d_oracle() {
        let g = pseudo_random_grid(16, 20, 3, 7);
        let d = bicubic_downsample(&g, 4).unwrap();
        assert_eq!((d.height, d.width), (4, 5));
        for oy in 0..d.height {
            for ox in 0..d.width {
                for c in 0..3 {
                    let want = oracle_resample_px(&g, oy, ox, c, 4.0);
                    let got = d.get(oy, ox, c) as f64;
                    assert!(
                        (want - got).abs() < 1e-5,
                        "({oy},{ox},{c}): oracle {want}, got {got}"
                    );
                }
            }
        }
    }

    #[test]
    fn upsample_matches_direct_2d_oracle() {
        let g = pseudo_random_grid(7, 9, 1, 11);
        let u = bicubic_upsample(&g, 4).unwrap();
        assert_eq!((u.height, u.width), (28, 36));
        for oy in 0..u.height {
            for ox in 0..u.width {
                let want = oracle_resample_px(&g, oy, ox, 0, 0.25);
                let got = u.get(oy, ox, 0) as f64;
                assert!(
                    (want - got).abs() < 1e-5,
                    "({oy},{ox}): oracle {want}, got {got}"
                );
            }
        }
    }

    #[test]
    fn factor_four_downsample_weights_are_the_known_quad() {
        // At factor 4 the sample point falls exactly between the two middle
        // taps, giving the classic [-1/16, 9/16, 9/16, -1/16] weights.
        let (_, w) = taps(0, 4.0, 64);
        let expect = [-0.0625, 0.5625, 0.5625, -0.0625];
        for k in 0..4 {
            assert!((w[k] - expect[k]).abs() < 1e-12, "tap {k}: {}", w[k]);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_is_preserved_exactly() {
        let g = RasterGrid::filled(12, 12, 2, 0.37);
        for factor in [2usize, 4] {
            let d = bicubic_downsample(&g, factor).unwrap();
            assert!(d.values.iter().all(|v| (v - 0.37).abs() < 1e-6));
            let u = bicubic_upsample(&g, factor).unwrap();
            assert!(u.values.iter().all(|v| (v - 0.37).abs() < 1e-6));
        }
    }

    #[test]
    fn linear_ramp_is_reproduced_in_the_interior() {
        // Cubic interpolation reproduces degree-1 polynomials exactly where
        // no edge replication enters the footprint.
        let mut g = RasterGrid::filled(16, 16, 1, 0.0);
        for y in 0..16 {
            for x in 0..16 {
                g.set(y, x, 0, 0.1 + 0.02 * x as f32 + 0.03 * y as f32);
            }
        }
        let u = bicubic_upsample(&g, 2).unwrap();
        for oy in 8..24 {
            for ox in 8..24 {
                let sy = (oy as f64 + 0.5) * 0.5 - 0.5;
                let sx = (ox as f64 + 0.5) * 0.5 - 0.5;
                let want = 0.1 + 0.02 * sx + 0.03 * sy;
                assert!((u.get(oy, ox, 0) as f64 - want).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn downsample_requires_divisible_dims() {
        let g = RasterGrid::filled(10, 12, 1, 0.0);
        assert!(bicubic_downsample(&g, 4).is_err());
        assert!(bicubic_downsample(&g, 2).is_ok());
    }

    #[test]
    fn round_trip_geo_is_identity() {
        let g = RasterGrid::filled(16, 16, 1, 0.5).with_geo(GeoMeta {
            origin_x: 500.0,
            origin_y: 700.0,
            pixel_size_x: 0.05,
            pixel_size_y: -0.05,
            crs: "EPSG:2169".into(),
        });
        let d = bicubic_downsample(&g, 4).unwrap();
        let dg = d.geo.as_ref().unwrap();
        // Coarse pixel 0 center = mean of fine pixel centers 0..4.
        assert!((dg.origin_x - (500.0 + 1.5 * 0.05)).abs() < 1e-12);
        assert!((dg.pixel_size_x - 0.2).abs() < 1e-12);
        let u = bicubic_upsample(&d, 4).unwrap();
        let ug = u.geo.as_ref().unwrap();
        assert!((ug.origin_x - 500.0).abs() < 1e-12);
        assert!((ug.origin_y - 700.0).abs() < 1e-12);
        assert!((ug.pixel_size_x - 0.05).abs() < 1e-12);
    }

    #[test]
    fn nodata_footprint_propagates() {
        let mut g = pseudo_random_grid(8, 8, 1, 3);
        let mut mask = vec![false; 64];
        mask[3 * 8 + 3] = true;
        g.nodata_mask = Some(mask);
        let d = bicubic_downsample(&g, 2).unwrap();
        // Output (1,1) samples input rows/cols 0..4 — touches the hole.
        assert!(d.is_nodata(1, 1));
        assert!(!d.is_nodata(3, 3));
    }
}
