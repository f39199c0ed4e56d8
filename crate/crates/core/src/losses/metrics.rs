//! Confusion-matrix segmentation metrics and ROC AUC.

use ndarray::{ArrayView2, Zip};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Ratios are `None` where their denominator is zero, except Jaccard and
/// Dice, which are 1 when prediction and ground truth are both empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub jaccard: f64,
    pub dice: f64,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
}

fn same_dim<A, B>(a: &ArrayView2<'_, A>, b: &ArrayView2<'_, B>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

pub fn confusion(pred: ArrayView2<'_, bool>, gt: ArrayView2<'_, bool>) -> Result<Confusion> {
    same_dim(&pred, &gt)?;
    let mut c = Confusion::default();
    Zip::from(&pred).and(&gt).for_each(|&p, &g| match (p, g) {
        (true, true) => c.tp += 1,
        (true, false) => c.fp += 1,
        (false, false) => c.tn += 1,
        (false, true) => c.fn_ += 1,
    });
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(
    pred: ArrayView2<'_, bool>,
    gt: ArrayView2<'_, bool>,
    scores: Option<ArrayView2<'_, f64>>,
) -> Result<Metrics> {
    let c = confusion(pred, gt)?;
    if c.total() == 0 {
        return Err(Error::param("pred", "empty input"));
    }
    let auc = match scores {
        Some(s) => {
            same_dim(&gt, &s)?;
            auc(s, gt)?
        }
        None => None,
    };
    Ok(Metrics {
        confusion: c,
        jaccard: ratio(c.tp, c.tp + c.fp + c.fn_).unwrap_or(1.0),
        dice: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_).unwrap_or(1.0),
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        auc,
    })
}

/// Area under the ROC curve by trapezoidal integration over every distinct
/// score threshold. Tied scores move the curve diagonally. `None` when the
/// ground truth has only one class.
pub fn auc(scores: ArrayView2<'_, f64>, gt: ArrayView2<'_, bool>) -> Result<Option<f64>> {
    same_dim(&scores, &gt)?;
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(scores.len());
    for (index, (&s, &g)) in scores.iter().zip(gt.iter()).enumerate() {
        if !s.is_finite() {
            return Err(Error::ValueOutOfRange { index, value: s });
        }
        pairs.push((s, g));
    }
    let pos = pairs.iter().filter(|p| p.1).count() as f64;
    let neg = pairs.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Ok(None);
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (mut tp, mut fp) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let (prev_tp, prev_fp) = (tp, fp);
        let threshold = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
    }
    Ok(Some(area / (pos * neg)))
}
