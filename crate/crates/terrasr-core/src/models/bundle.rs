//! Binary checkpoint containers.
//!
//! A model bundle ("TSRB") holds one network: its kind, the config needed
//! to rebuild the exact topology, training metadata, and every named
//! parameter tensor in creation order. Optimizer state ("TSRO") mirrors the
//! parameter list with Adam's two moment tensors per slot. Both formats are
//! little-endian throughout and end in an FNV-1a64 checksum of everything
//! before it, so truncation and bit rot surface as load errors instead of
//! silently wrong weights.
//!
//! ```text
//! TSRB | version u32 | kind u8 | config kv | meta kv | params | fnv64
//!   kv:     count u32, then (len u16, bytes) key and value pairs
//!   param:  name (len u16, bytes), dtype u8, ndims u8, dims u32 each,
//!           payload (f32/f64 LE)
//! TSRO | version u32 | step u64 | count u32 | (m, v) tensor pairs | fnv64
//! ```

use std::path::Path;

use candle_core::{DType, Device, Tensor};

use crate::error::{Error, Result};
use crate::util::fnv1a64;

pub const FORMAT_VERSION: u32 = 1;
const BUNDLE_MAGIC: &[u8; 4] = b"TSRB";
const OPT_MAGIC: &[u8; 4] = b"TSRO";

/// Which network a bundle holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Generator,
    Discriminator,
    Ndsm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Generator => "generator",
            ModelKind::Discriminator => "discriminator",
            ModelKind::Ndsm => "ndsm",
        }
    }

    fn code(self) -> u8 {
        match self {
            ModelKind::Generator => 0,
            ModelKind::Discriminator => 1,
            ModelKind::Ndsm => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ModelKind::Generator),
            1 => Ok(ModelKind::Discriminator),
            2 => Ok(ModelKind::Ndsm),
            other => Err(Error::checkpoint(format!(
                "unknown model kind code {other} in bundle"
            ))),
        }
    }
}

/// Where the contained network was in its training run when saved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingMeta {
    /// Optimizer steps taken on this network.
    pub step: u64,
    /// Validation MAE recorded at the end of generator pretraining; feeds
    /// the content-loss threshold selection.
    pub pretrain_mae: Option<f64>,
}

impl TrainingMeta {
    fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = vec![("step".to_string(), self.step.to_string())];
        if let Some(mae) = self.pretrain_mae {
            kv.push(("pretrain_mae".to_string(), mae.to_string()));
        }
        kv
    }

    fn from_kv(kv: &[(String, String)]) -> Result<Self> {
        let mut meta = TrainingMeta::default();
        for (k, v) in kv {
            match k.as_str() {
                "step" => {
                    meta.step = v
                        .parse()
                        .map_err(|_| Error::checkpoint(format!("bad step value {v:?}")))?
                }
                "pretrain_mae" => {
                    meta.pretrain_mae = Some(v.parse().map_err(|_| {
                        Error::checkpoint(format!("bad pretrain_mae value {v:?}"))
                    })?)
                }
                other => {
                    return Err(Error::checkpoint(format!(
                        "unknown metadata key {other:?} in bundle"
                    )))
                }
            }
        }
        Ok(meta)
    }
}

/// One serializable network snapshot.
#[derive(Debug)]
pub struct ModelBundle {
    pub kind: ModelKind,
    /// Flat key=value description of the architecture.
    pub config: Vec<(String, String)>,
    pub meta: TrainingMeta,
    /// Named parameters in creation order; values are snapshots, not
    /// aliases of live variables.
    pub params: Vec<(String, Tensor)>,
}

impl ModelBundle {
    /// Fails with a checkpoint error when the bundle holds another kind.
    pub fn expect_kind(&self, want: ModelKind) -> Result<()> {
        if self.kind != want {
            return Err(Error::checkpoint(format!(
                "bundle holds a {}, expected a {}",
                self.kind.as_str(),
                want.as_str()
            )));
        }
        Ok(())
    }

    /// Looks up one config value.
    pub fn config_value(&self, key: &str) -> Result<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::checkpoint(format!("bundle config misses key {key:?}")))
    }

    /// The dtype the parameters were saved at.
    pub fn dtype(&self) -> Result<DType> {
        let (_, first) = self
            .params
            .first()
            .ok_or_else(|| Error::checkpoint("bundle holds no parameters"))?;
        Ok(first.dtype())
    }

    /// Parses one config value into the requested type.
    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.config_value(key)?;
        raw.parse().map_err(|_| {
            Error::checkpoint(format!("bundle config key {key:?} has bad value {raw:?}"))
        })
    }
}

/// Copies a bundle's parameters into a freshly built model's store,
/// validating that names line up entry for entry. Count and shape checks
/// happen inside the ordered load.
pub(crate) fn load_into_store(
    store: &mut crate::nn::ParamStore,
    bundle: &ModelBundle,
) -> Result<()> {
    if store.len() != bundle.params.len() {
        return Err(Error::checkpoint(format!(
            "bundle holds {} parameters, the rebuilt model has {}",
            bundle.params.len(),
            store.len()
        )));
    }
    for ((have, _), (want, _)) in store.iter().zip(&bundle.params) {
        if have != want {
            return Err(Error::checkpoint(format!(
                "bundle parameter {want:?} does not match the rebuilt model's {have:?}"
            )));
        }
    }
    let values: Vec<Tensor> = bundle.params.iter().map(|(_, t)| t.clone()).collect();
    store.load_ordered(&values)
}

/// Snapshots a store's parameters as (name, value) pairs in creation order.
pub(crate) fn snapshot_store(store: &crate::nn::ParamStore) -> Result<Vec<(String, Tensor)>> {
    let mut params = Vec::with_capacity(store.len());
    for (name, var) in store.iter() {
        params.push((name.to_string(), var.as_tensor().copy()?));
    }
    Ok(params)
}

/// Adam's serializable state: step count plus first/second moments, one
/// pair per parameter in creation order.
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

// ---------------------------------------------------------------- writing

fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    if bytes.len() > u16::MAX as usize {
        return Err(Error::usage(format!("string too long for bundle: {s:.32}…")));
    }
    put_u16(buf, bytes.len() as u16);
    buf.extend_from_slice(bytes);
    Ok(())
}

fn put_kv(buf: &mut Vec<u8>, kv: &[(String, String)]) -> Result<()> {
    put_u32(buf, kv.len() as u32);
    for (k, v) in kv {
        put_str(buf, k)?;
        put_str(buf, v)?;
    }
    Ok(())
}

fn put_tensor(buf: &mut Vec<u8>, t: &Tensor) -> Result<()> {
    let dims = t.dims();
    if dims.len() > u8::MAX as usize {
        return Err(Error::usage("tensor rank too large for bundle"));
    }
    match t.dtype() {
        DType::F32 => buf.push(0),
        DType::F64 => buf.push(1),
        other => {
            return Err(Error::usage(format!(
                "bundles store f32 or f64 tensors, not {other:?}"
            )))
        }
    }
    buf.push(dims.len() as u8);
    for &d in dims {
        put_u32(buf, d as u32);
    }
    match t.dtype() {
        DType::F32 => {
            for v in t.flatten_all()?.to_vec1::<f32>()? {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        _ => {
            for v in t.flatten_all()?.to_vec1::<f64>()? {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(())
}

fn write_checksummed(path: &Path, mut body: Vec<u8>) -> Result<()> {
    let sum = fnv1a64(&body);
    body.extend_from_slice(&sum.to_le_bytes());
    std::fs::write(path, &body).map_err(|e| Error::io(path, e))
}

/// Serializes a bundle to `path`, overwriting any existing file.
pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(BUNDLE_MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    buf.push(bundle.kind.code());
    put_kv(&mut buf, &bundle.config)?;
    put_kv(&mut buf, &bundle.meta.to_kv())?;
    put_u32(&mut buf, bundle.params.len() as u32);
    for (name, t) in &bundle.params {
        put_str(&mut buf, name)?;
        put_tensor(&mut buf, t)?;
    }
    write_checksummed(path, buf)
}

/// Serializes optimizer state to `path`.
pub fn save_optimizer_state(state: &OptimizerState, path: &Path) -> Result<()> {
    if state.m.len() != state.v.len() {
        return Err(Error::usage("optimizer moment lists differ in length"));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(OPT_MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    buf.extend_from_slice(&state.step.to_le_bytes());
    put_u32(&mut buf, state.m.len() as u32);
    for (m, v) in state.m.iter().zip(&state.v) {
        put_tensor(&mut buf, m)?;
        put_tensor(&mut buf, v)?;
    }
    write_checksummed(path, buf)
}

// ---------------------------------------------------------------- reading

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::checkpoint("checkpoint file is truncated"));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn take_u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn take_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn take_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn take_str(&mut self) -> Result<String> {
        let len = self.take_u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::checkpoint("non-UTF-8 string in checkpoint"))
    }

    fn take_kv(&mut self) -> Result<Vec<(String, String)>> {
        let count = self.take_u32()? as usize;
        let mut kv = Vec::with_capacity(count);
        for _ in 0..count {
            let k = self.take_str()?;
            let v = self.take_str()?;
            kv.push((k, v));
        }
        Ok(kv)
    }

    fn take_tensor(&mut self) -> Result<Tensor> {
        let dtype = match self.take_u8()? {
            0 => DType::F32,
            1 => DType::F64,
            other => {
                return Err(Error::checkpoint(format!(
                    "unknown tensor dtype code {other} in checkpoint"
                )))
            }
        };
        let ndims = self.take_u8()? as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(self.take_u32()? as usize);
        }
        let count: usize = dims.iter().product();
        let t = match dtype {
            DType::F32 => {
                let raw = self.take(count * 4)?;
                let vals: Vec<f32> = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::from_vec(vals, dims, &Device::Cpu)?
            }
            _ => {
                let raw = self.take(count * 8)?;
                let vals: Vec<f64> = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::from_vec(vals, dims, &Device::Cpu)?
            }
        };
        Ok(t)
    }
}

fn read_checksummed(path: &Path, magic: &[u8; 4]) -> Result<Vec<u8>> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if data.len() < magic.len() + 8 {
        return Err(Error::checkpoint("checkpoint file is truncated"));
    }
    let (body, tail) = data.split_at(data.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a64(body) != stored {
        return Err(Error::checkpoint(
            "checkpoint checksum mismatch: file is corrupt or truncated",
        ));
    }
    if &body[..4] != magic {
        return Err(Error::checkpoint(format!(
            "bad magic: not a {} file",
            std::str::from_utf8(magic).unwrap_or("?")
        )));
    }
    Ok(body[4..].to_vec())
}

/// Reads a bundle back, verifying checksum, magic, and version.
pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let body = read_checksummed(path, BUNDLE_MAGIC)?;
    let mut r = Reader {
        data: &body,
        pos: 0,
    };
    let version = r.take_u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::checkpoint(format!(
            "unsupported bundle format_version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    let kind = ModelKind::from_code(r.take_u8()?)?;
    let config = r.take_kv()?;
    let meta = TrainingMeta::from_kv(&r.take_kv()?)?;
    let count = r.take_u32()? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.take_str()?;
        let t = r.take_tensor()?;
        params.push((name, t));
    }
    Ok(ModelBundle {
        kind,
        config,
        meta,
        params,
    })
}

/// Reads optimizer state back, verifying checksum, magic, and version.
pub fn load_optimizer_state(path: &Path) -> Result<OptimizerState> {
    let body = read_checksummed(path, OPT_MAGIC)?;
    let mut r = Reader {
        data: &body,
        pos: 0,
    };
    let version = r.take_u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::checkpoint(format!(
            "unsupported optimizer format_version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    let step = r.take_u64()?;
    let count = r.take_u32()? as usize;
    let mut m = Vec::with_capacity(count);
    let mut v = Vec::with_capacity(count);
    for _ in 0..count {
        m.push(r.take_tensor()?);
        v.push(r.take_tensor()?);
    }
    Ok(OptimizerState { step, m, v })
}
