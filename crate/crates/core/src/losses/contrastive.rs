//! Pixel partitioning, key sampling and the mask contrastive loss.

use ndarray::{Array1, Array2, ArrayView2, ArrayView3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelSource {
    /// Labels are the ground-truth mask.
    Synthetic,
    /// Labels are thresholded prediction probabilities.
    Target,
}

/// Foreground and background pixel sets as flat row-major indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSets {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    pub source: PixelSource,
}

/// Splits pixels by label.
///
/// Synthetic: `value >= 0.5` is foreground, the rest background. Target:
/// `y >= 1 - alpha` foreground, `y <= alpha` background, the band between
/// is ignored.
pub fn partition_pixels(values: ArrayView2<'_, f64>, mode: PixelSource, alpha: f64) -> Result<PartitionSets> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::param("alpha", format!("{alpha} not in (0, 0.5)")));
    }
    let mut sets = PartitionSets {
        positive: Vec::new(),
        negative: Vec::new(),
        source: mode,
    };
    for (index, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ValueOutOfRange { index, value: v });
        }
        match mode {
            PixelSource::Synthetic if v >= 0.5 => sets.positive.push(index),
            PixelSource::Synthetic => sets.negative.push(index),
            PixelSource::Target if v >= 1.0 - alpha => sets.positive.push(index),
            PixelSource::Target if v <= alpha => sets.negative.push(index),
            PixelSource::Target => {}
        }
    }
    Ok(sets)
}

/// Synthetic partition straight from a binary mask.
pub fn partition_mask(mask: ArrayView2<'_, bool>) -> PartitionSets {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (i, &m) in mask.iter().enumerate() {
        if m {
            positive.push(i);
        } else {
            negative.push(i);
        }
    }
    PartitionSets {
        positive,
        negative,
        source: PixelSource::Synthetic,
    }
}

/// Upper bounds on the number of sampled keys per batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyCaps {
    pub query: usize,
    pub positive: usize,
    /// Shared by synthetic and target background keys.
    pub negative: usize,
}

impl Default for KeyCaps {
    fn default() -> Self {
        KeyCaps {
            query: 500,
            positive: 500,
            negative: 1000,
        }
    }
}

impl KeyCaps {
    pub const UNLIMITED: KeyCaps = KeyCaps {
        query: usize::MAX,
        positive: usize::MAX,
        negative: usize::MAX,
    };
}

/// Which pixels were drawn, for reproducibility checks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampledIndices {
    pub query: Vec<usize>,
    pub positive: Vec<usize>,
    pub negative_syn: Vec<usize>,
    pub negative_tgt: Vec<usize>,
}

/// L2-normalized feature rows (`n x C`).
#[derive(Debug, Clone, PartialEq)]
pub struct KeySets {
    pub queries: Array2<f64>,
    pub positives: Array2<f64>,
    /// Synthetic background keys followed by target background keys.
    pub negatives: Array2<f64>,
    pub indices: SampledIndices,
}

fn sample_count(n: usize, sigma: f64) -> usize {
    ((sigma * n as f64).ceil() as usize).min(n)
}

fn draw<R: Rng + ?Sized>(rng: &mut R, set: &[usize], amount: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, set.len(), amount)
        .into_iter()
        .map(|i| set[i])
        .collect()
}

/// Gathers rows of an `(H, W, C)` map at flat pixel indices, normalized.
fn gather(features: &ArrayView3<'_, f64>, idx: &[usize]) -> Array2<f64> {
    let (_, w, c) = features.dim();
    let mut out = Array2::zeros((idx.len(), c));
    for (mut row, &i) in out.axis_iter_mut(Axis(0)).zip(idx) {
        row.assign(&features.slice(ndarray::s![i / w, i % w, ..]));
        let norm = row.dot(&row).sqrt().max(1e-12);
        row.mapv_inplace(|v| v / norm);
    }
    out
}

/// Draws `ceil(sigma * |set|)` pixels without replacement from each set,
/// applies the caps, and gathers their normalized features.
///
/// The negative cap is split evenly between synthetic and target
/// background; a side with fewer keys than its half cedes the rest.
pub fn sample_keys<R: Rng + ?Sized>(
    features_syn: ArrayView3<'_, f64>,
    features_tgt: ArrayView3<'_, f64>,
    parts_syn: &PartitionSets,
    parts_tgt: &PartitionSets,
    sigma: f64,
    caps: KeyCaps,
    rng: &mut R,
) -> Result<KeySets> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::param("sigma", format!("{sigma} not in (0, 1]")));
    }
    let pixels = |f: &ArrayView3<'_, f64>| f.dim().0 * f.dim().1;
    for (f, p) in [(&features_syn, parts_syn), (&features_tgt, parts_tgt)] {
        let n = pixels(f);
        if let Some(&bad) = p.positive.iter().chain(&p.negative).find(|&&i| i >= n) {
            return Err(Error::param("partition", format!("pixel index {bad} outside a map of {n} pixels")));
        }
    }
    if features_syn.dim().2 != features_tgt.dim().2 {
        return Err(Error::param("features", "synthetic and target channel counts differ"));
    }
    if parts_syn.positive.is_empty() {
        return Err(Error::NoAnchorPixels);
    }
    if parts_tgt.positive.is_empty() {
        return Err(Error::DegenerateBatch("no confident target foreground"));
    }

    let n_query = sample_count(parts_syn.positive.len(), sigma).min(caps.query);
    let n_pos = sample_count(parts_tgt.positive.len(), sigma).min(caps.positive);
    let want_syn = sample_count(parts_syn.negative.len(), sigma);
    let want_tgt = sample_count(parts_tgt.negative.len(), sigma);
    let n_neg_syn = want_syn.min((caps.negative / 2).max(caps.negative.saturating_sub(want_tgt)));
    let n_neg_tgt = want_tgt.min(caps.negative - n_neg_syn);

    let indices = SampledIndices {
        query: draw(rng, &parts_syn.positive, n_query),
        positive: draw(rng, &parts_tgt.positive, n_pos),
        negative_syn: draw(rng, &parts_syn.negative, n_neg_syn),
        negative_tgt: draw(rng, &parts_tgt.negative, n_neg_tgt),
    };
    let neg_syn = gather(&features_syn, &indices.negative_syn);
    let neg_tgt = gather(&features_tgt, &indices.negative_tgt);
    let negatives = ndarray::concatenate(Axis(0), &[neg_syn.view(), neg_tgt.view()]).expect("same width");
    Ok(KeySets {
        queries: gather(&features_syn, &indices.query),
        positives: gather(&features_tgt, &indices.positive),
        negatives,
        indices,
    })
}

/// InfoNCE of each synthetic foreground query against the normalized mean
/// target foreground key (positive) and every background key (negatives),
/// averaged over queries.
pub fn cmcl(keys: &KeySets, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("{tau} is not positive")));
    }
    if keys.queries.nrows() == 0 {
        return Err(Error::DegenerateBatch("no synthetic foreground queries"));
    }
    if keys.positives.nrows() == 0 {
        return Err(Error::DegenerateBatch("no target foreground keys"));
    }
    let mean: Array1<f64> = keys.positives.sum_axis(Axis(0));
    let norm = mean.dot(&mean).sqrt();
    let anchor = if norm > 0.0 { mean / norm } else { mean };

    let pos_logits = keys.queries.dot(&anchor) / tau;
    let neg_logits = keys.queries.dot(&keys.negatives.t()) / tau;
    let total: f64 = pos_logits
        .iter()
        .zip(neg_logits.axis_iter(Axis(0)))
        .map(|(&p, negs)| {
            let max = negs.iter().copied().fold(p, f64::max);
            let sum: f64 = (p - max).exp() + negs.iter().map(|&n| (n - max).exp()).sum::<f64>();
            max + sum.ln() - p
        })
        .sum();
    Ok(total / keys.queries.nrows() as f64)
}
