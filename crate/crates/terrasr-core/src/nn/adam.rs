//! Adam with first/second-moment state that can be exported and restored,
//! so a resumed run continues the exact optimizer trajectory. (The backend
//! ships an AdamW whose moments are private; bit-faithful resume needs them
//! on disk, hence this implementation.)

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub struct Adam {
    cfg: AdamConfig,
    params: Vec<Var>,
    /// First and second moment per parameter, same order as `params`.
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    /// Number of completed steps (the `t` in the bias correction).
    t: u64,
}

impl Adam {
    pub fn new(params: Vec<Var>, cfg: AdamConfig) -> Result<Self> {
        let m = params
            .iter()
            .map(|p| Tensor::zeros(p.shape(), p.dtype(), p.device()))
            .collect::<candle_core::Result<Vec<_>>>()?;
        let v = m.clone();
        Ok(Adam { cfg, params, m, v, t: 0 })
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// One update from a computed gradient store. Parameters without a
    /// gradient (e.g. unused by this loss) are left untouched, and their
    /// moments do not decay.
    pub fn step(&mut self, grads: &GradStore) -> Result<()> {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for (i, p) in self.params.iter().enumerate() {
            let Some(g) = grads.get(p) else { continue };
            let m = ((&self.m[i] * b1)? + (g * (1.0 - b1))?)?;
            let v = ((&self.v[i] * b2)? + (g.sqr()? * (1.0 - b2))?)?;
            let m_hat = (&m / bc1)?;
            let v_hat = (&v / bc2)?;
            let delta = (m_hat * self.cfg.lr)?.div(&v_hat.sqrt()?.affine(1.0, self.cfg.eps)?)?;
            p.set(&p.sub(&delta)?)?;
            self.m[i] = m;
            self.v[i] = v;
        }
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Moment tensors in parameter order, for checkpointing.
    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    /// Restore a checkpointed trajectory.
    pub fn restore(&mut self, t: u64, m: Vec<Tensor>, v: Vec<Tensor>) -> Result<()> {
        if m.len() != self.params.len() || v.len() != self.params.len() {
            return Err(Error::checkpoint(format!(
                "optimizer state holds {} moment pairs for {} parameters",
                m.len(),
                self.params.len()
            )));
        }
        for ((p, mi), vi) in self.params.iter().zip(&m).zip(&v) {
            if p.dims() != mi.dims() || p.dims() != vi.dims() {
                return Err(Error::checkpoint(
                    "optimizer moment shape does not match its parameter",
                ));
            }
        }
        self.m = m;
        self.v = v;
        self.t = t;
        Ok(())
    }
}
