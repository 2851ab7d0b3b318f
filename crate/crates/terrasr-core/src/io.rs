//! Raster container IO: GeoTIFF, PNG, the raw heightmap format, and the
//! dataset manifest.

pub mod geotiff;
pub mod manifest;
pub mod ndsm;
pub mod png;

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

/// Load any supported raster container, dispatching on the file extension:
/// `.tif`/`.tiff` (GeoTIFF, 8-bit or float32, georeferencing and nodata
/// honored), `.png` (8-bit, scaled to [0,1]), `.ndsm` (raw float32
/// heightmap).
pub fn load_raster(path: &Path) -> Result<RasterGrid> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "tif" | "tiff" => geotiff::load_geotiff(path),
        "png" => png::load_png(path),
        "ndsm" => ndsm::load_ndsm(path),
        other => Err(Error::usage(format!(
            "unsupported raster container {other:?} ({}); expected .tif, .tiff, .png, or .ndsm",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn unknown_extension_is_rejected() {
        let err = load_raster(&PathBuf::from("scene.jp2")).unwrap_err();
        assert!(err.to_string().contains("unsupported raster container"));
    }
}
