//! Reference loss and metric definitions over plain arrays.
//!
//! Everything here is written in minimized form: the adversarial terms are
//! negated log-likelihoods and the segmentation term is the full binary
//! cross-entropy. Probabilities are clamped to `[EPS, 1 - EPS]` before any
//! logarithm, so every loss is finite.

mod contrastive;
mod metrics;

pub use contrastive::{
    cmcl, partition_mask, partition_pixels, sample_keys, KeyCaps, KeySets, PartitionSets, PixelSource,
    SampledIndices,
};
pub use metrics::{auc, confusion, metrics, Confusion, Metrics};

use ndarray::{ArrayView2, Zip};

use crate::error::{Error, Result};

pub const EPS: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

fn check_non_empty(name: &'static str, a: &ArrayView2<'_, f64>) -> Result<()> {
    if a.is_empty() {
        return Err(Error::param(name, "empty input"));
    }
    Ok(())
}

fn check_same_dim<A, B>(a: &ArrayView2<'_, A>, b: &ArrayView2<'_, B>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Discriminator objective, synthetic predictions labeled 1 and target
/// predictions labeled 0: `-(mean ln D(syn) + mean ln(1 - D(tgt)))`.
pub fn discriminator_loss(d_syn: ArrayView2<'_, f64>, d_tgt: ArrayView2<'_, f64>) -> Result<f64> {
    check_same_dim(&d_syn, &d_tgt)?;
    check_non_empty("d_syn", &d_syn)?;
    let n = d_syn.len() as f64;
    let real: f64 = d_syn.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / n;
    let fake: f64 = d_tgt.iter().map(|&p| (1.0 - clamp_prob(p)).ln()).sum::<f64>() / n;
    Ok(-(real + fake))
}

/// Adversarial term for the segmenter: `-mean ln D(tgt)`, pushing target
/// predictions to look synthetic.
pub fn psal(d_tgt: ArrayView2<'_, f64>) -> Result<f64> {
    check_non_empty("d_tgt", &d_tgt)?;
    Ok(-d_tgt.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / d_tgt.len() as f64)
}

/// Binary cross-entropy of predictions `y` against mask `g`.
pub fn seg_loss(g: ArrayView2<'_, bool>, y: ArrayView2<'_, f64>) -> Result<f64> {
    check_same_dim(&g, &y)?;
    check_non_empty("y", &y)?;
    let mut acc = 0.0;
    Zip::from(&g).and(&y).for_each(|&g, &y| {
        let y = clamp_prob(y);
        acc += if g { y.ln() } else { (1.0 - y).ln() };
    });
    Ok(-acc / y.len() as f64)
}

pub fn total_loss(l_seg: f64, l_psal: f64, l_cmcl: f64, lambda: f64) -> f64 {
    l_seg + l_psal + lambda * l_cmcl
}
