//! Shared layer builders on top of the parameter store.

use candle_core::Tensor;

use crate::error::Result;
use crate::nn::{conv3x3, ops, ParamStore};

/// Weight initialization flavors used across the models.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Init {
    /// Fan-in scaled Gaussian for a conv feeding a (leaky) rectifier.
    Kaiming { slope: f64 },
    /// Kaiming additionally multiplied by `gain` (the residual-branch
    /// damping convention).
    KaimingScaled { slope: f64, gain: f64 },
}

/// 3x3 stride-1 pad-1 convolution with bias, backed by the custom kernel.
pub(crate) struct Conv3 {
    w: Tensor,
    b: Tensor,
    cout: usize,
}

impl Conv3 {
    pub fn new(
        ps: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        init: Init,
    ) -> Result<Self> {
        let fan_in = cin * 9;
        let w = match init {
            Init::Kaiming { slope } => {
                ps.var_kaiming(&format!("{name}.weight"), &[cout, cin, 3, 3], fan_in, slope)?
            }
            Init::KaimingScaled { slope, gain } => {
                let std = gain * (2.0 / ((1.0 + slope * slope) * fan_in as f64)).sqrt();
                ps.var_normal(&format!("{name}.weight"), &[cout, cin, 3, 3], std)?
            }
        };
        let b = ps.var_zeros(&format!("{name}.bias"), &[cout])?;
        Ok(Conv3 { w, b, cout })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = conv3x3(x, &self.w)?;
        Ok(y.broadcast_add(&self.b.reshape((1, self.cout, 1, 1))?)?)
    }
}

/// Conv3 followed by a per-channel PReLU (slopes start at 0.25).
pub(crate) struct ConvPrelu {
    conv: Conv3,
    slope: Tensor,
}

impl ConvPrelu {
    pub fn new(ps: &mut ParamStore, name: &str, cin: usize, cout: usize) -> Result<Self> {
        let conv = Conv3::new(ps, name, cin, cout, Init::Kaiming { slope: 0.25 })?;
        let slope = ps.var_const(&format!("{name}.prelu"), &[cout], 0.25)?;
        Ok(ConvPrelu { conv, slope })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(ops::prelu(&self.conv.forward(x)?, &self.slope)?)
    }
}

/// Conv3 followed by LeakyReLU(0.2).
pub(crate) struct ConvLrelu {
    conv: Conv3,
}

impl ConvLrelu {
    pub fn new(ps: &mut ParamStore, name: &str, cin: usize, cout: usize) -> Result<Self> {
        let conv = Conv3::new(ps, name, cin, cout, Init::Kaiming { slope: 0.2 })?;
        Ok(ConvLrelu { conv })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(ops::leaky_relu(&self.conv.forward(x)?, 0.2)?)
    }
}
