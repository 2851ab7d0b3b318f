//! Raw heightmap files: a 16-byte header (magic `NDSM`, u32 height, u32
//! width, u32 reserved, all little-endian) followed by row-major float32
//! little-endian samples. The format carries no georeferencing and no
//! nodata declaration, so non-finite samples are rejected on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

const MAGIC: &[u8; 4] = b"NDSM";

pub fn load_ndsm(path: &Path) -> Result<RasterGrid> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    if &header[0..4] != MAGIC {
        return Err(Error::data(format!(
            "{}: not a raw heightmap (bad magic)",
            path.display()
        )));
    }
    let height = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; height * width * 4];
    r.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::data(format!(
            "{}: non-finite height at pixel {bad} and the format declares no nodata",
            path.display()
        )));
    }
    RasterGrid::new(height, width, 1, values)
}

pub fn save_ndsm(grid: &RasterGrid, path: &Path) -> Result<()> {
    if grid.channels != 1 {
        return Err(Error::usage("raw heightmap files are single-channel"));
    }
    if grid.has_any_nodata() {
        return Err(Error::usage(
            "raw heightmap files cannot carry a nodata mask; fill or crop first",
        ));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(16);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&(grid.height as u32).to_le_bytes());
    header.extend_from_slice(&(grid.width as u32).to_le_bytes());
    header.extend_from_slice(&0u32.to_le_bytes());
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    for v in &grid.values {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.ndsm");
        let grid = RasterGrid::new(3, 5, 1, (0..15).map(|i| i as f32 * 1.37).collect()).unwrap();
        save_ndsm(&grid, &path).unwrap();
        let back = load_ndsm(&path).unwrap();
        assert_eq!(back.values, grid.values);
        assert_eq!((back.height, back.width, back.channels), (3, 5, 1));
    }

    #[test]
    fn non_finite_values_are_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.ndsm");
        let mut grid = RasterGrid::filled(2, 2, 1, 1.0);
        grid.values[3] = f32::NAN;
        save_ndsm(&grid, &path).unwrap();
        let err = load_ndsm(&path).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.ndsm");
        std::fs::write(&path, b"PNG\0____________then some").unwrap();
        assert!(load_ndsm(&path).is_err());
    }
}
