//! The 3x3 stride-1 pad-1 convolution as a backend custom op, wired to the
//! hand-written kernels with analytic gradients for both input and weights.
//!
//! This is the only convolution shape the generator and the height network
//! use; resolution changes go through pooling and pixel shuffles instead of
//! strided convolutions, precisely so that every convolution hits this op.

use candle_core::{bail, CpuStorage, CustomOp2, Layout, Result, Shape, Tensor};

use super::kernels;

fn contiguous_range(l: &Layout, what: &str) -> Result<std::ops::Range<usize>> {
    match l.contiguous_offsets() {
        Some((a, b)) => Ok(a..b),
        None => bail!("conv3x3: {what} storage must be contiguous"),
    }
}

/// y[n,o,·,·] = Σ_c x[n,c,·,·] ⋆ w[o,c,·,·], stride 1, zero padding 1.
struct Conv3x3Fwd;

impl CustomOp2 for Conv3x3Fwd {
    fn name(&self) -> &'static str {
        "conv3x3s1p1"
    }

    fn cpu_fwd(
        &self,
        s1: &CpuStorage,
        l1: &Layout,
        s2: &CpuStorage,
        l2: &Layout,
    ) -> Result<(CpuStorage, Shape)> {
        let (n, c, h, w) = l1.shape().dims4()?;
        let (o, c2, kh, kw) = l2.shape().dims4()?;
        if c2 != c || kh != 3 || kw != 3 {
            bail!("conv3x3: weight shape ({o},{c2},{kh},{kw}) does not fit input channels {c}");
        }
        let rx = contiguous_range(l1, "input")?;
        let rw = contiguous_range(l2, "weight")?;
        let shape = Shape::from((n, o, h, w));
        match (s1, s2) {
            (CpuStorage::F32(xs), CpuStorage::F32(ws)) => {
                let out = kernels::conv3x3_f32(&xs[rx], &ws[rw], n, c, o, h, w);
                Ok((CpuStorage::F32(out), shape))
            }
            (CpuStorage::F64(xs), CpuStorage::F64(ws)) => {
                let out = kernels::conv3x3_f64(&xs[rx], &ws[rw], n, c, o, h, w);
                Ok((CpuStorage::F64(out), shape))
            }
            _ => bail!("conv3x3: input and weight must both be f32 or both f64"),
        }
    }

    fn bwd(
        &self,
        x: &Tensor,
        w: &Tensor,
        _y: &Tensor,
        gy: &Tensor,
    ) -> Result<(Option<Tensor>, Option<Tensor>)> {
        let gy = gy.contiguous()?;
        let gx = gy.apply_op2(w, Conv3x3GradX)?;
        let gw = x.apply_op2(&gy, Conv3x3GradW)?;
        Ok((Some(gx), Some(gw)))
    }
}

/// Input gradient: gx = pad(gy) ⋆ rot180(w)ᵀ. Backward of a backward is
/// never taken, so this op (and GradW below) lean on the default `bwd`.
struct Conv3x3GradX;

impl CustomOp2 for Conv3x3GradX {
    fn name(&self) -> &'static str {
        "conv3x3s1p1_grad_x"
    }

    fn cpu_fwd(
        &self,
        s1: &CpuStorage,
        l1: &Layout,
        s2: &CpuStorage,
        l2: &Layout,
    ) -> Result<(CpuStorage, Shape)> {
        let (n, o, h, w) = l1.shape().dims4()?;
        let (o2, c, _, _) = l2.shape().dims4()?;
        if o2 != o {
            bail!("conv3x3 grad_x: gradient channels {o} vs weight output channels {o2}");
        }
        let rg = contiguous_range(l1, "output gradient")?;
        let rw = contiguous_range(l2, "weight")?;
        let shape = Shape::from((n, c, h, w));
        match (s1, s2) {
            (CpuStorage::F32(gs), CpuStorage::F32(ws)) => {
                let out = kernels::conv3x3_grad_x_f32(&gs[rg], &ws[rw], n, c, o, h, w);
                Ok((CpuStorage::F32(out), shape))
            }
            (CpuStorage::F64(gs), CpuStorage::F64(ws)) => {
                let out = kernels::conv3x3_grad_x_f64(&gs[rg], &ws[rw], n, c, o, h, w);
                Ok((CpuStorage::F64(out), shape))
            }
            _ => bail!("conv3x3 grad_x: mixed dtypes"),
        }
    }
}

/// Weight gradient: gw[o,c,·,·] = Σ_n pad(x)[n,c] ⋆ gy[n,o].
struct Conv3x3GradW;

impl CustomOp2 for Conv3x3GradW {
    fn name(&self) -> &'static str {
        "conv3x3s1p1_grad_w"
    }

    fn cpu_fwd(
        &self,
        s1: &CpuStorage,
        l1: &Layout,
        s2: &CpuStorage,
        l2: &Layout,
    ) -> Result<(CpuStorage, Shape)> {
        let (n, c, h, w) = l1.shape().dims4()?;
        let (n2, o, h2, w2) = l2.shape().dims4()?;
        if n2 != n || h2 != h || w2 != w {
            bail!("conv3x3 grad_w: input {n}x{c}x{h}x{w} vs gradient {n2}x{o}x{h2}x{w2}");
        }
        let rx = contiguous_range(l1, "input")?;
        let rg = contiguous_range(l2, "output gradient")?;
        let shape = Shape::from((o, c, 3, 3));
        match (s1, s2) {
            (CpuStorage::F32(xs), CpuStorage::F32(gs)) => {
                let out = kernels::conv3x3_grad_w_f32(&xs[rx], &gs[rg], n, c, o, h, w);
                Ok((CpuStorage::F32(out), shape))
            }
            (CpuStorage::F64(xs), CpuStorage::F64(gs)) => {
                let out = kernels::conv3x3_grad_w_f64(&xs[rx], &gs[rg], n, c, o, h, w);
                Ok((CpuStorage::F64(out), shape))
            }
            _ => bail!("conv3x3 grad_w: mixed dtypes"),
        }
    }
}

/// 3x3 convolution, stride 1, zero padding 1: (n,c,h,w) ⊗ (o,c,3,3) →
/// (n,o,h,w). Differentiable with respect to both arguments.
pub fn conv3x3(x: &Tensor, w: &Tensor) -> Result<Tensor> {
    x.contiguous()?.apply_op2(&w.contiguous()?, Conv3x3Fwd)
}
