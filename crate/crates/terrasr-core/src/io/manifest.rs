//! The dataset manifest: one JSON record per line mapping a scene id to its
//! rgb raster, its height raster, and its split.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patches::Split;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    /// Paths are stored as written (normally relative to the manifest).
    pub rgb: String,
    pub ndsm: String,
    pub split: String,
}

impl ManifestEntry {
    pub fn split(&self) -> Result<Split> {
        Split::parse(&self.split)
    }

    /// Resolve a stored path against the manifest's directory.
    pub fn resolve(base: &Path, stored: &str) -> PathBuf {
        let p = Path::new(stored);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for entry in entries {
        let line = serde_json::to_string(entry)
            .map_err(|e| Error::data(format!("manifest encode: {e}")))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| {
            Error::data(format!(
                "{}:{}: bad manifest record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        entry.split()?; // reject unknown split names early
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(Error::data(format!(
            "{}: manifest contains no records",
            path.display()
        )));
    }
    Ok(entries)
}
