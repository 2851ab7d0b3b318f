//! In-memory raster grids and their alignment/normalization rules.
//!
//! A [`RasterGrid`] is the common currency between the IO layer, the data
//! pipeline, and the tensor bridge: row-major, channel-interleaved `f32`
//! samples plus optional georeferencing and an optional per-pixel nodata
//! mask. RGB grids hold values in `[0,1]` once normalized; height grids hold
//! above-ground elevation in meters, which is non-negative by construction
//! (surface model minus terrain model).

use crate::error::{Error, Result};

/// Georeferencing for a grid: the world coordinate of the *center* of the
/// top-left pixel, signed pixel sizes in CRS units, and the CRS identifier
/// (e.g. `"EPSG:2169"`). No reprojection is ever attempted; two grids either
/// share a CRS string or cannot be compared.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoMeta {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
    pub crs: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Row-major, channel-interleaved: `values[(y*width + x)*channels + c]`.
    pub values: Vec<f32>,
    pub geo: Option<GeoMeta>,
    /// Per-pixel mask, `true` = nodata. Absent means every pixel is valid.
    pub nodata_mask: Option<Vec<bool>>,
}

impl RasterGrid {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width * channels {
            return Err(Error::data(format!(
                "raster value count {} does not match {height}x{width}x{channels}",
                values.len()
            )));
        }
        Ok(RasterGrid {
            height,
            width,
            channels,
            values,
            geo: None,
            nodata_mask: None,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        RasterGrid {
            height,
            width,
            channels,
            values: vec![value; height * width * channels],
            geo: None,
            nodata_mask: None,
        }
    }

    pub fn with_geo(mut self, geo: GeoMeta) -> Self {
        self.geo = Some(geo);
        self
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.values[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.values[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn is_nodata(&self, y: usize, x: usize) -> bool {
        self.nodata_mask
            .as_ref()
            .map(|m| m[y * self.width + x])
            .unwrap_or(false)
    }

    pub fn has_any_nodata(&self) -> bool {
        self.nodata_mask
            .as_ref()
            .map(|m| m.iter().any(|&b| b))
            .unwrap_or(false)
    }

    /// Mean over valid (non-nodata) samples of all channels.
    pub fn mean(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_nodata(y, x) {
                    continue;
                }
                for c in 0..self.channels {
                    sum += self.get(y, x, c) as f64;
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Extract a window as a new grid. Geo origin is shifted accordingly.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<RasterGrid> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::usage(format!(
                "crop {h}x{w} at ({y0},{x0}) exceeds raster {}x{}",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(h * w * self.channels);
        for y in y0..y0 + h {
            let row = &self.values[(y * self.width + x0) * self.channels..][..w * self.channels];
            values.extend_from_slice(row);
        }
        let nodata_mask = self.nodata_mask.as_ref().map(|m| {
            let mut out = Vec::with_capacity(h * w);
            for y in y0..y0 + h {
                out.extend_from_slice(&m[y * self.width + x0..][..w]);
            }
            out
        });
        let geo = self.geo.as_ref().map(|g| GeoMeta {
            origin_x: g.origin_x + x0 as f64 * g.pixel_size_x,
            origin_y: g.origin_y + y0 as f64 * g.pixel_size_y,
            ..g.clone()
        });
        Ok(RasterGrid {
            height: h,
            width: w,
            channels: self.channels,
            values,
            geo,
            nodata_mask,
        })
    }
}

/// A co-registered RGB/height pair covering the same footprint.
#[derive(Debug, Clone)]
pub struct ScenePair {
    pub id: String,
    pub rgb: RasterGrid,
    pub ndsm: RasterGrid,
}

impl ScenePair {
    pub fn new(id: impl Into<String>, rgb: RasterGrid, ndsm: RasterGrid) -> Result<Self> {
        if rgb.channels != 3 {
            return Err(Error::data("scene rgb grid must have 3 channels"));
        }
        if ndsm.channels != 1 {
            return Err(Error::data("scene height grid must have 1 channel"));
        }
        if rgb.height != ndsm.height || rgb.width != ndsm.width {
            return Err(Error::data(format!(
                "scene grids disagree on size: rgb {}x{}, heights {}x{}",
                rgb.height, rgb.width, ndsm.height, ndsm.width
            )));
        }
        if rgb.geo.is_some() && ndsm.geo.is_some() && rgb.geo != ndsm.geo {
            return Err(Error::data("scene grids carry different geo metadata"));
        }
        Ok(ScenePair {
            id: id.into(),
            rgb,
            ndsm,
        })
    }
}

/// Affine rescale of every valid sample to `[0,1]`: `(v - lo) / (hi - lo)`,
/// clipped. Nodata pixels pass through untouched.
pub fn normalize_unit(grid: &RasterGrid, lo: f32, hi: f32) -> Result<RasterGrid> {
    if hi <= lo {
        return Err(Error::usage(format!(
            "normalize range is empty: lo={lo}, hi={hi}"
        )));
    }
    let scale = 1.0 / (hi - lo);
    let mut out = grid.clone();
    for y in 0..grid.height {
        for x in 0..grid.width {
            if grid.is_nodata(y, x) {
                continue;
            }
            for c in 0..grid.channels {
                let v = ((grid.get(y, x, c) - lo) * scale).clamp(0.0, 1.0);
                out.set(y, x, c, v);
            }
        }
    }
    Ok(out)
}

/// Outcome of checking whether an RGB grid and a height grid can be treated
/// as co-registered at a given resolution ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub ok: bool,
    /// Estimated (x, y) offset of the height grid relative to the RGB grid,
    /// in RGB pixels.
    pub pixel_offset_estimate: (f64, f64),
    pub reason: Option<String>,
}

impl AlignmentReport {
    fn aligned() -> Self {
        AlignmentReport {
            ok: true,
            pixel_offset_estimate: (0.0, 0.0),
            reason: None,
        }
    }

    fn misaligned(offset: (f64, f64), reason: impl Into<String>) -> Self {
        AlignmentReport {
            ok: false,
            pixel_offset_estimate: offset,
            reason: Some(reason.into()),
        }
    }
}

/// Check that `ndsm` is registered onto `rgb` within half an RGB pixel.
///
/// `resample_ratio` is the expected linear resolution ratio between the two
/// grids (RGB pixels per height pixel), e.g. 10 for 5 cm imagery against
/// 50 cm elevation rasters, 1 for identical grids.
///
/// A CRS mismatch is a hard error: an offset estimate between different
/// reference systems would be meaningless. Origin offsets within the same CRS
/// are reported, not fatal, so callers can decide whether to proceed.
pub fn validate_alignment(
    rgb: &RasterGrid,
    ndsm: &RasterGrid,
    resample_ratio: usize,
) -> Result<AlignmentReport> {
    if resample_ratio == 0 {
        return Err(Error::usage("resample ratio must be at least 1"));
    }
    let dims_consistent = rgb.height == ndsm.height * resample_ratio
        && rgb.width == ndsm.width * resample_ratio;

    match (&rgb.geo, &ndsm.geo) {
        (None, None) => {
            if dims_consistent {
                Ok(AlignmentReport::aligned())
            } else {
                Ok(AlignmentReport::misaligned(
                    (0.0, 0.0),
                    format!(
                        "dimensions {}x{} vs {}x{} do not match ratio {resample_ratio}",
                        rgb.height, rgb.width, ndsm.height, ndsm.width
                    ),
                ))
            }
        }
        (Some(rg), Some(ng)) => {
            if rg.crs != ng.crs {
                return Err(Error::data(format!(
                    "CRS mismatch: rgb is {}, heights are {}",
                    rg.crs, ng.crs
                )));
            }
            if !dims_consistent {
                return Ok(AlignmentReport::misaligned(
                    (0.0, 0.0),
                    format!(
                        "dimensions {}x{} vs {}x{} do not match ratio {resample_ratio}",
                        rgb.height, rgb.width, ndsm.height, ndsm.width
                    ),
                ));
            }
            let off_x = (ng.origin_x - rg.origin_x) / rg.pixel_size_x;
            let off_y = (ng.origin_y - rg.origin_y) / rg.pixel_size_y;
            if off_x.abs() <= 0.5 && off_y.abs() <= 0.5 {
                Ok(AlignmentReport::aligned())
            } else {
                Ok(AlignmentReport::misaligned(
                    (off_x, off_y),
                    format!("origins differ by ({off_x:.3}, {off_y:.3}) rgb pixels"),
                ))
            }
        }
        _ => Err(Error::data(
            "one grid is georeferenced and the other is not; cannot verify alignment",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(ox: f64, oy: f64, px: f64, crs: &str) -> GeoMeta {
        GeoMeta {
            origin_x: ox,
            origin_y: oy,
            pixel_size_x: px,
            pixel_size_y: px,
            crs: crs.to_string(),
        }
    }

    #[test]
    fn normalize_unit_maps_endpoints_and_clips() {
        let g = RasterGrid::new(1, 3, 1, vec![0.0, 255.0, 300.0]).unwrap();
        let n = normalize_unit(&g, 0.0, 255.0).unwrap();
        assert_eq!(n.values, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn normalize_unit_rejects_empty_range() {
        let g = RasterGrid::filled(2, 2, 1, 0.5);
        assert!(normalize_unit(&g, 1.0, 1.0).is_err());
        assert!(normalize_unit(&g, 2.0, 1.0).is_err());
    }

    #[test]
    fn normalize_unit_preserves_nodata() {
        let mut g = RasterGrid::new(1, 2, 1, vec![-9999.0, 128.0]).unwrap();
        g.nodata_mask = Some(vec![true, false]);
        let n = normalize_unit(&g, 0.0, 255.0).unwrap();
        assert_eq!(n.values[0], -9999.0);
        assert!((n.values[1] - 128.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn alignment_self_pair_is_ok() {
        let g = RasterGrid::filled(8, 8, 3, 0.1).with_geo(geo(100.0, 200.0, 0.05, "EPSG:2169"));
        let h = RasterGrid::filled(8, 8, 1, 2.0).with_geo(geo(100.0, 200.0, 0.05, "EPSG:2169"));
        let rep = validate_alignment(&g, &h, 1).unwrap();
        assert!(rep.ok);
        assert_eq!(rep.pixel_offset_estimate, (0.0, 0.0));
    }

    #[test]
    fn alignment_detects_two_pixel_shift() {
        let g = RasterGrid::filled(8, 8, 3, 0.1).with_geo(geo(100.0, 200.0, 0.05, "EPSG:2169"));
        let h =
            RasterGrid::filled(8, 8, 1, 2.0).with_geo(geo(100.0 + 2.0 * 0.05, 200.0, 0.05, "EPSG:2169"));
        let rep = validate_alignment(&g, &h, 1).unwrap();
        assert!(!rep.ok);
        assert!((rep.pixel_offset_estimate.0 - 2.0).abs() < 1e-9);
        assert!((rep.pixel_offset_estimate.1 - 0.0).abs() < 1e-9);
    }

    #[test]
    fn alignment_crs_mismatch_is_hard_error() {
        let g = RasterGrid::filled(8, 8, 3, 0.1).with_geo(geo(0.0, 0.0, 0.05, "EPSG:2169"));
        let h = RasterGrid::filled(8, 8, 1, 2.0).with_geo(geo(0.0, 0.0, 0.05, "EPSG:4326"));
        assert!(validate_alignment(&g, &h, 1).is_err());
    }

    #[test]
    fn alignment_checks_resolution_ratio_dimensions() {
        let g = RasterGrid::filled(80, 80, 3, 0.1);
        let h = RasterGrid::filled(8, 8, 1, 2.0);
        assert!(validate_alignment(&g, &h, 10).unwrap().ok);
        assert!(!validate_alignment(&g, &h, 4).unwrap().ok);
    }

    #[test]
    fn crop_shifts_geo_origin() {
        let g = RasterGrid::new(4, 4, 1, (0..16).map(|v| v as f32).collect())
            .unwrap()
            .with_geo(geo(10.0, 20.0, 0.5, "EPSG:32632"));
        let c = g.crop(1, 2, 2, 2).unwrap();
        assert_eq!(c.get(0, 0, 0), 6.0);
        let cg = c.geo.unwrap();
        assert!((cg.origin_x - 11.0).abs() < 1e-12);
        assert!((cg.origin_y - 20.5).abs() < 1e-12);
    }

    #[test]
    fn scene_pair_rejects_mismatched_sizes() {
        let rgb = RasterGrid::filled(8, 8, 3, 0.1);
        let ndsm = RasterGrid::filled(8, 9, 1, 2.0);
        assert!(ScenePair::new("s", rgb, ndsm).is_err());
    }
}
