//! Controlled misalignment of height grids, used to probe how sensitive the
//! height-consistency loss is to registration error.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    /// (dy, dx) unit step: the direction the *content* moves.
    fn step(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }
}

/// What to do to the height grid.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbSpec {
    /// Bit-identical copy.
    Identity,
    /// Integer translation of the content by `shift_px` pixels toward
    /// `direction`; vacated border pixels are filled by edge replication.
    ConstantShift { shift_px: usize, direction: Direction },
    /// Small random affine distortion: rotation in
    /// `[-max_rotation_deg, +max_rotation_deg]` composed with a horizontal
    /// shear in `[-max_skew, +max_skew]`, both drawn from `rng_seed`,
    /// applied about the grid center with nearest-neighbor resampling.
    RandomTransform {
        max_rotation_deg: f64,
        max_skew: f64,
        rng_seed: u64,
    },
}

pub fn perturb_ndsm(ndsm: &RasterGrid, spec: &PerturbSpec) -> Result<RasterGrid> {
    match *spec {
        PerturbSpec::Identity => Ok(ndsm.clone()),
        PerturbSpec::ConstantShift { shift_px, direction } => {
            if shift_px == 0 {
                return Err(Error::usage("constant_shift requires shift_px >= 1"));
            }
            let (sy, sx) = direction.step();
            shift_replicate(ndsm, sy * shift_px as isize, sx * shift_px as isize)
        }
        PerturbSpec::RandomTransform {
            max_rotation_deg,
            max_skew,
            rng_seed,
        } => {
            if max_rotation_deg <= 0.0 && max_skew <= 0.0 {
                return Err(Error::usage(
                    "random_transform requires max_rotation_deg > 0 or max_skew > 0",
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let rot = if max_rotation_deg > 0.0 {
                rng.random_range(-max_rotation_deg..=max_rotation_deg)
            } else {
                0.0
            };
            let skew = if max_skew > 0.0 {
                rng.random_range(-max_skew..=max_skew)
            } else {
                0.0
            };
            Ok(affine_warp_nn(ndsm, rot, skew))
        }
    }
}

fn shift_replicate(grid: &RasterGrid, dy: isize, dx: isize) -> Result<RasterGrid> {
    if dy.unsigned_abs() >= grid.height || dx.unsigned_abs() >= grid.width {
        return Err(Error::usage(format!(
            "shift ({dy},{dx}) moves everything out of a {}x{} grid",
            grid.height, grid.width
        )));
    }
    let mut out = grid.clone();
    for y in 0..grid.height {
        let sy = (y as isize - dy).clamp(0, grid.height as isize - 1) as usize;
        for x in 0..grid.width {
            let sx = (x as isize - dx).clamp(0, grid.width as isize - 1) as usize;
            for c in 0..grid.channels {
                out.set(y, x, c, grid.get(sy, sx, c));
            }
        }
    }
    if let Some(mask) = &grid.nodata_mask {
        let out_mask = out.nodata_mask.as_mut().unwrap();
        for y in 0..grid.height {
            let sy = (y as isize - dy).clamp(0, grid.height as isize - 1) as usize;
            for x in 0..grid.width {
                let sx = (x as isize - dx).clamp(0, grid.width as isize - 1) as usize;
                out_mask[y * grid.width + x] = mask[sy * grid.width + sx];
            }
        }
    }
    Ok(out)
}

/// Rotation (degrees, counterclockwise in row/col space) composed with a
/// horizontal shear, about the grid center. Inverse-mapped with
/// nearest-neighbor lookups and edge clamping.
pub fn affine_warp_nn(grid: &RasterGrid, rotation_deg: f64, skew: f64) -> RasterGrid {
    let theta = rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    // Forward map: p_out = R * S * p_in (centered coordinates), with
    // S = [[1, skew], [0, 1]] acting on (x, y). Sampling inverts it:
    // inv(R*S) = inv(S) * inv(R), inv(R) rotating by -theta.
    let mut out = grid.clone();
    let cy = (grid.height as f64 - 1.0) / 2.0;
    let cx = (grid.width as f64 - 1.0) / 2.0;
    for y in 0..grid.height {
        for x in 0..grid.width {
            let xo = x as f64 - cx;
            let yo = y as f64 - cy;
            let xr = cos * xo + sin * yo;
            let yr = -sin * xo + cos * yo;
            let xs = xr - skew * yr;
            let ys = yr;
            let sx = (xs + cx).round().clamp(0.0, grid.width as f64 - 1.0) as usize;
            let sy = (ys + cy).round().clamp(0.0, grid.height as f64 - 1.0) as usize;
            for c in 0..grid.channels {
                out.set(y, x, c, grid.get(sy, sx, c));
            }
            if let Some(mask) = &grid.nodata_mask {
                out.nodata_mask.as_mut().unwrap()[y * grid.width + x] =
                    mask[sy * grid.width + sx];
            }
        }
    }
    out
}
