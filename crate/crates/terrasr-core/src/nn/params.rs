//! Ordered, named parameter storage.
//!
//! Insertion order is part of the contract: optimizer slots, bundle files,
//! and checksums all walk the parameters in creation order, so loading a
//! bundle into a freshly built model of the same configuration lines up
//! one-to-one. (A name-keyed map would leave iteration order — and thus
//! file layout and checksums — unspecified.)

use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util::Fnv1a64;

pub struct ParamStore {
    dtype: DType,
    rng: ChaCha8Rng,
    entries: Vec<(String, Var)>,
}

impl ParamStore {
    pub fn new(dtype: DType, init_seed: u64) -> Self {
        ParamStore {
            dtype,
            rng: ChaCha8Rng::seed_from_u64(init_seed),
            entries: Vec::new(),
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    fn register(&mut self, name: &str, values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::usage(format!("duplicate parameter name {name:?}")));
        }
        let t = Tensor::from_vec(values, shape, &Device::Cpu)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let handle = var.as_tensor().clone();
        self.entries.push((name.to_string(), var));
        Ok(handle)
    }

    /// Gaussian init (Box-Muller over the store's own seeded stream).
    pub fn var_normal(&mut self, name: &str, shape: &[usize], std: f64) -> Result<Tensor> {
        let count = shape.iter().product::<usize>();
        let mut values = Vec::with_capacity(count);
        while values.len() < count {
            let u1: f64 = self.rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = self.rng.random_range(0.0..1.0);
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            values.push(r * c * std);
            if values.len() < count {
                values.push(r * s * std);
            }
        }
        self.register(name, values, shape)
    }

    /// He-style init for a conv feeding a leaky rectifier:
    /// std = √(2 / ((1 + slope²) · fan_in)).
    pub fn var_kaiming(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        slope: f64,
    ) -> Result<Tensor> {
        let std = (2.0 / ((1.0 + slope * slope) * fan_in as f64)).sqrt();
        self.var_normal(name, shape, std)
    }

    pub fn var_const(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        let count = shape.iter().product::<usize>();
        self.register(name, vec![value; count], shape)
    }

    pub fn var_zeros(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        self.var_const(name, shape, 0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Cheap clones (tensor handles) in creation order, for the optimizer
    /// and the backward pass.
    pub fn vars(&self) -> Vec<Var> {
        self.entries.iter().map(|(_, v)| v.clone()).collect()
    }

    /// Total scalar count across all parameters.
    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// Order-sensitive digest over names, shapes, and little-endian payload
    /// bytes. Two stores agree iff they hold the same parameters in the
    /// same order with bit-identical values (after f32 round-tripping).
    pub fn checksum(&self) -> Result<u64> {
        let mut hash = Fnv1a64::new();
        for (name, var) in &self.entries {
            hash.update(name.as_bytes());
            hash.update(&(var.dims().len() as u32).to_le_bytes());
            for d in var.dims() {
                hash.update(&(*d as u32).to_le_bytes());
            }
            let flat = var.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
            for v in flat {
                hash.update(&v.to_le_bytes());
            }
        }
        Ok(hash.finish())
    }

    /// Overwrite parameter values in order; shapes must match exactly.
    /// Used when loading a bundle into a freshly built model.
    pub fn load_ordered(&mut self, values: &[Tensor]) -> Result<()> {
        if values.len() != self.entries.len() {
            return Err(Error::checkpoint(format!(
                "parameter count mismatch: model has {}, file has {}",
                self.entries.len(),
                values.len()
            )));
        }
        for ((name, var), t) in self.entries.iter().zip(values) {
            if var.dims() != t.dims() {
                return Err(Error::checkpoint(format!(
                    "shape mismatch for {name}: model {:?}, file {:?}",
                    var.dims(),
                    t.dims()
                )));
            }
            var.set(&t.to_dtype(self.dtype)?)?;
        }
        Ok(())
    }
}
