//! GeoTIFF IO: 8-bit RGB and float32 single-band rasters with pixel scale,
//! tiepoint, CRS geokey, and nodata metadata.
//!
//! Conventions: the tiepoint maps raster (0,0,0) to the world coordinate of
//! the *center* of the top-left pixel, declared via `GTRasterType =
//! PixelIsPoint`; the pixel scale's Y entry is stored as `-pixel_size_y`
//! (positive for the usual north-up raster whose rows step south).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::tags::Tag;
use tiff::ColorType;

use crate::error::{Error, Result};
use crate::raster::{GeoMeta, RasterGrid};

const NODATA_FILL: f32 = -9999.0;

fn epsg_code(crs: &str) -> Result<u16> {
    crs.strip_prefix("EPSG:")
        .and_then(|c| c.parse::<u16>().ok())
        .ok_or_else(|| {
            Error::usage(format!(
                "cannot encode CRS {crs:?} into a GeoTIFF geokey; expected \"EPSG:<code>\""
            ))
        })
}

/// GeoKeyDirectory: header (version 1, revision 1.0, key count), then
/// model type = projected, raster type = pixel-is-point, projected CRS.
fn geokey_directory(epsg: u16) -> [u16; 16] {
    [
        1, 1, 0, 3, // header
        1024, 0, 1, 1, // GTModelType = projected
        1025, 0, 1, 2, // GTRasterType = PixelIsPoint
        3072, 0, 1, epsg, // ProjectedCSType
    ]
}

fn parse_geokeys(dir: &[u16]) -> Option<String> {
    if dir.len() < 4 {
        return None;
    }
    let n = dir[3] as usize;
    let mut projected = None;
    let mut geographic = None;
    for i in 0..n {
        let e = 4 + 4 * i;
        if e + 3 >= dir.len() {
            break;
        }
        let (key, loc, _count, value) = (dir[e], dir[e + 1], dir[e + 2], dir[e + 3]);
        if loc != 0 {
            continue;
        }
        match key {
            3072 => projected = Some(value),
            2048 => geographic = Some(value),
            _ => {}
        }
    }
    projected.or(geographic).map(|code| format!("EPSG:{code}"))
}

pub fn load_geotiff(path: &Path) -> Result<RasterGrid> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let fail = |e: tiff::TiffError| Error::data(format!("{}: {e}", path.display()));

    let (w, h) = dec.dimensions().map_err(fail)?;
    let channels = match dec.colortype().map_err(fail)? {
        ColorType::Gray(_) => 1usize,
        ColorType::RGB(_) => 3usize,
        other => {
            return Err(Error::data(format!(
                "{}: unsupported channel count ({other:?}); expected 1-band or 3-band",
                path.display()
            )))
        }
    };
    let values: Vec<f32> = match dec.read_image().map_err(fail)? {
        DecodingResult::U8(v) => v.iter().map(|&x| x as f32 / 255.0).collect(),
        DecodingResult::U16(v) => v.iter().map(|&x| x as f32 / 65535.0).collect(),
        DecodingResult::F32(v) => v,
        DecodingResult::F64(v) => v.iter().map(|&x| x as f32).collect(),
        other => {
            return Err(Error::data(format!(
                "{}: unsupported sample format {other:?}",
                path.display()
            )))
        }
    };

    let mut grid = RasterGrid::new(h as usize, w as usize, channels, values)?;

    // Georeferencing, if present.
    let scale = dec
        .find_tag(Tag::ModelPixelScaleTag)
        .ok()
        .flatten()
        .and_then(|v| v.into_f64_vec().ok());
    let tiepoint = dec
        .find_tag(Tag::ModelTiepointTag)
        .ok()
        .flatten()
        .and_then(|v| v.into_f64_vec().ok());
    if let (Some(scale), Some(tie)) = (scale, tiepoint) {
        if scale.len() >= 2 && tie.len() >= 5 {
            let crs = dec
                .find_tag(Tag::GeoKeyDirectoryTag)
                .ok()
                .flatten()
                .and_then(|v| v.into_u16_vec().ok())
                .and_then(|dir| parse_geokeys(&dir))
                .unwrap_or_else(|| "unknown".to_string());
            grid.geo = Some(GeoMeta {
                origin_x: tie[3],
                origin_y: tie[4],
                pixel_size_x: scale[0],
                pixel_size_y: -scale[1],
                crs,
            });
        }
    }

    // Nodata declaration masks matching samples (any-channel match).
    if let Some(nodata) = dec
        .find_tag(Tag::GdalNodata)
        .ok()
        .flatten()
        .and_then(|v| v.into_string().ok())
        .and_then(|s| s.trim().trim_end_matches('\0').parse::<f32>().ok())
    {
        let mut mask = vec![false; grid.height * grid.width];
        for (i, m) in mask.iter_mut().enumerate() {
            *m = (0..grid.channels).any(|c| {
                let v = grid.values[i * grid.channels + c];
                v == nodata || (nodata.is_nan() && v.is_nan())
            });
        }
        if mask.iter().any(|&b| b) {
            grid.nodata_mask = Some(mask);
        }
    }

    // Anything non-finite that survived masking has no declared meaning.
    for y in 0..grid.height {
        for x in 0..grid.width {
            if grid.is_nodata(y, x) {
                continue;
            }
            for c in 0..grid.channels {
                if !grid.get(y, x, c).is_finite() {
                    return Err(Error::data(format!(
                        "{}: non-finite value at ({y},{x}) without a nodata declaration",
                        path.display()
                    )));
                }
            }
        }
    }
    Ok(grid)
}

/// Write a 3-channel [0,1] grid as 8-bit RGB GeoTIFF.
pub fn save_geotiff_rgb8(grid: &RasterGrid, path: &Path) -> Result<()> {
    if grid.channels != 3 {
        return Err(Error::usage("rgb GeoTIFF writer needs a 3-channel grid"));
    }
    if grid.has_any_nodata() {
        return Err(Error::usage(
            "8-bit rgb GeoTIFF cannot represent a nodata mask",
        ));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let fail = |e: tiff::TiffError| Error::data(format!("{}: {e}", path.display()));
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(fail)?;
    let mut img = enc
        .new_image::<colortype::RGB8>(grid.width as u32, grid.height as u32)
        .map_err(fail)?;
    write_geo_tags(img.encoder(), grid, path)?;
    let bytes: Vec<u8> = grid
        .values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    img.write_data(&bytes).map_err(fail)
}

/// Write a single-channel grid as float32 GeoTIFF; masked pixels are filled
/// with -9999 and declared via the nodata tag.
pub fn save_geotiff_f32(grid: &RasterGrid, path: &Path) -> Result<()> {
    if grid.channels != 1 {
        return Err(Error::usage("float GeoTIFF writer needs a 1-channel grid"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let fail = |e: tiff::TiffError| Error::data(format!("{}: {e}", path.display()));
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(fail)?;
    let mut img = enc
        .new_image::<colortype::Gray32Float>(grid.width as u32, grid.height as u32)
        .map_err(fail)?;
    write_geo_tags(img.encoder(), grid, path)?;
    let has_mask = grid.has_any_nodata();
    if has_mask {
        img.encoder()
            .write_tag(Tag::GdalNodata, format!("{NODATA_FILL}").as_str())
            .map_err(fail)?;
    }
    let values: Vec<f32> = if has_mask {
        (0..grid.height * grid.width)
            .map(|i| {
                if grid.nodata_mask.as_ref().unwrap()[i] {
                    NODATA_FILL
                } else {
                    grid.values[i]
                }
            })
            .collect()
    } else {
        grid.values.clone()
    };
    img.write_data(&values).map_err(fail)
}

fn write_geo_tags<W, K>(
    enc: &mut tiff::encoder::DirectoryEncoder<W, K>,
    grid: &RasterGrid,
    path: &Path,
) -> Result<()>
where
    W: std::io::Write + std::io::Seek,
    K: tiff::encoder::TiffKind,
{
    let Some(geo) = &grid.geo else { return Ok(()) };
    let fail = |e: tiff::TiffError| Error::data(format!("{}: {e}", path.display()));
    let code = epsg_code(&geo.crs)?;
    enc.write_tag(
        Tag::ModelPixelScaleTag,
        &[geo.pixel_size_x, -geo.pixel_size_y, 0.0][..],
    )
    .map_err(fail)?;
    enc.write_tag(
        Tag::ModelTiepointTag,
        &[0.0, 0.0, 0.0, geo.origin_x, geo.origin_y, 0.0][..],
    )
    .map_err(fail)?;
    enc.write_tag(Tag::GeoKeyDirectoryTag, &geokey_directory(code)[..])
        .map_err(fail)
}
