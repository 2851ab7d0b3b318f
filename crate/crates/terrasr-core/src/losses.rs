//! Training objectives.
//!
//! The generator trains against three terms: a Huber pixel loss between the
//! super-resolved and reference images, a height-consistency loss comparing
//! the elevation maps a frozen height net infers from both images, and a
//! non-saturating adversarial term. The total is
//!
//! ```text
//! total = alpha * ndsm + content + adv_weight * adversarial
//! ```
//!
//! All tensor-valued losses reduce by mean over batch and pixels so the
//! weights keep their meaning across patch sizes, and every op returns a
//! scalar tensor that stays on the autodiff graph.

use candle_core::Tensor;

use crate::error::{Error, Result};

/// Floor applied to discriminator scores before any logarithm. Keeps early
/// training finite when the discriminator saturates.
pub const SCORE_CLAMP: f64 = 1e-7;

/// Weighting of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    /// Height-consistency weight (alpha).
    pub alpha: f64,
    /// Adversarial weight (beta).
    pub adv_weight: f64,
    /// Huber transition point; selected as twice the pretraining MAE.
    pub epsilon: f64,
    /// One-sided label smoothing applied to the discriminator's real
    /// targets; in [0, 0.5).
    pub label_smoothing: f64,
}

impl LossWeights {
    /// Published defaults with the Huber transition point filled in.
    pub fn with_epsilon(epsilon: f64) -> Self {
        LossWeights {
            alpha: 0.01,
            adv_weight: 0.001,
            epsilon,
            label_smoothing: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::usage(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.adv_weight < 0.0 || !self.adv_weight.is_finite() {
            return Err(Error::usage(format!(
                "adv_weight must be >= 0, got {}",
                self.adv_weight
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::usage(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return Err(Error::usage(format!(
                "label_smoothing must lie in [0, 0.5), got {}",
                self.label_smoothing
            )));
        }
        Ok(())
    }
}

/// Per-component values of one evaluation of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub content: f64,
    pub ndsm: f64,
    pub adversarial: f64,
    pub total: f64,
}

/// How the height-map discrepancy reduces to a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NdsmNorm {
    /// Mean of squared differences (default; weight-stable across sizes).
    MeanSquare,
    /// Sum of squared differences: the unnormalized reading of the
    /// Euclidean-distance form, kept for fidelity experiments. Both
    /// variants square the distance — an exact root has no gradient at
    /// zero discrepancy.
    SumSquare,
}

fn require_same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::usage(format!(
            "{what}: shape mismatch {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Huber pixel loss between image batches, mean-reduced.
///
/// Per element with a = sr − hr:  ½a² where |a| ≤ ε, else ε·|a| − ½ε².
/// The linear branch carries the −½ε² correction that makes value and
/// gradient continuous at |a| = ε; with both branches agreeing there, the
/// branch mask can be detached without bending any gradient.
pub fn huber_content(sr: &Tensor, hr: &Tensor, epsilon: f64) -> Result<Tensor> {
    require_same_shape(sr, hr, "huber_content")?;
    if !(epsilon > 0.0) {
        return Err(Error::usage(format!("epsilon must be > 0, got {epsilon}")));
    }
    let a = (sr - hr)?;
    let abs_a = a.abs()?;
    let quad = a.sqr()?.affine(0.5, 0.0)?;
    let lin = abs_a.affine(epsilon, -0.5 * epsilon * epsilon)?;
    let mask = abs_a.detach().le(epsilon)?.to_dtype(a.dtype())?;
    let anti = mask.affine(-1.0, 1.0)?;
    let per_element = ((quad * &mask)? + (lin * anti)?)?;
    Ok(per_element.mean_all()?)
}

/// Height-consistency loss: squared discrepancy between the elevation maps
/// the frozen height net infers from the super-resolved and reference
/// images.
///
/// `height_map` is the frozen net's forward pass (or a stub in tests). The
/// reference side is detached, so gradients reach `sr` only; the height
/// net itself is frozen by never handing its parameters to an optimizer.
pub fn ndsm_loss<F>(sr: &Tensor, hr: &Tensor, height_map: F, norm: NdsmNorm) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    require_same_shape(sr, hr, "ndsm_loss")?;
    let h_sr = height_map(sr)?;
    let h_hr = height_map(&hr.detach())?.detach();
    let sq = (h_sr - h_hr)?.sqr()?;
    Ok(match norm {
        NdsmNorm::MeanSquare => sq.mean_all()?,
        NdsmNorm::SumSquare => sq.sum_all()?,
    })
}

/// Non-saturating generator objective: mean over the batch of −log(score),
/// scores clamped below at [`SCORE_CLAMP`].
pub fn adversarial_g_loss(fake_scores: &Tensor) -> Result<Tensor> {
    let clamped = fake_scores.maximum(SCORE_CLAMP)?;
    Ok(clamped.log()?.neg()?.mean_all()?)
}

/// Discriminator objective: binary cross-entropy with the real targets
/// smoothed down to 1 − `label_smoothing` and fake targets left at 0
/// (one-sided smoothing). Each batch reduces by mean; the two terms add.
pub fn discriminator_loss(
    real_scores: &Tensor,
    fake_scores: &Tensor,
    label_smoothing: f64,
) -> Result<Tensor> {
    if !(0.0..0.5).contains(&label_smoothing) {
        return Err(Error::usage(format!(
            "label_smoothing must lie in [0, 0.5), got {label_smoothing}"
        )));
    }
    let target = 1.0 - label_smoothing;
    let real = real_scores.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)?;
    let fake = fake_scores.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)?;

    // BCE(target t, score p) = −t·log p − (1−t)·log(1−p)
    let real_term = (real.log()?.affine(-target, 0.0)?
        - real.affine(-1.0, 1.0)?.log()?.affine(1.0 - target, 0.0)?)?
    .mean_all()?;
    let fake_term = fake.affine(-1.0, 1.0)?.log()?.neg()?.mean_all()?;
    Ok((real_term + fake_term)?)
}

/// Combines already-reduced component values per the weighted objective.
pub fn combined_loss(
    content: f64,
    ndsm: f64,
    adversarial: f64,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    weights.validate()?;
    Ok(LossBreakdown {
        content,
        ndsm,
        adversarial,
        total: weights.alpha * ndsm + content + weights.adv_weight * adversarial,
    })
}

/// Tensor-valued combination used inside the training step so the total
/// stays differentiable. Agrees with [`combined_loss`] on values.
pub fn combined_loss_tensor(
    content: &Tensor,
    ndsm: &Tensor,
    adversarial: &Tensor,
    weights: &LossWeights,
) -> Result<Tensor> {
    weights.validate()?;
    Ok((ndsm.affine(weights.alpha, 0.0)?
        + (content + adversarial.affine(weights.adv_weight, 0.0)?)?)?)
}

/// The Huber transition point used for GAN training: exactly twice the
/// content MAE the pretrained generator reached.
pub fn select_epsilon(pretrain_mae: f64) -> Result<f64> {
    if !(pretrain_mae > 0.0) {
        return Err(Error::data(format!(
            "pretraining MAE must be > 0 to derive a Huber transition point, got {pretrain_mae}; \
             pretraining looks degenerate"
        )));
    }
    Ok(2.0 * pretrain_mae)
}
