//! 8-bit PNG IO for previews and RGB inputs. Values map to [0,1] by 1/255.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

pub fn load_png(path: &Path) -> Result<RasterGrid> {
    let img = image::open(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let (channels, bytes, w, h) = match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            (1usize, g.into_raw(), w, h)
        }
        DynamicImage::ImageRgb8(g) => {
            let (w, h) = g.dimensions();
            (3usize, g.into_raw(), w, h)
        }
        other => {
            return Err(Error::data(format!(
                "{}: unsupported channel count ({} channels); expected 1 or 3",
                path.display(),
                other.color().channel_count()
            )))
        }
    };
    let values = bytes.iter().map(|&b| b as f32 / 255.0).collect();
    RasterGrid::new(h as usize, w as usize, channels, values)
}

/// Write a grid as 8-bit PNG; values are clamped to [0,1] and quantized.
pub fn save_png(grid: &RasterGrid, path: &Path) -> Result<()> {
    let quantize =
        |v: &f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let bytes: Vec<u8> = grid.values.iter().map(quantize).collect();
    let (w, h) = (grid.width as u32, grid.height as u32);
    let outcome = match grid.channels {
        1 => GrayImage::from_raw(w, h, bytes).unwrap().save(path),
        3 => RgbImage::from_raw(w, h, bytes).unwrap().save(path),
        n => {
            return Err(Error::usage(format!(
                "cannot encode {n}-channel grid as PNG; expected 1 or 3"
            )))
        }
    };
    outcome.map_err(|e| Error::data(format!("{}: {e}", path.display())))
}
