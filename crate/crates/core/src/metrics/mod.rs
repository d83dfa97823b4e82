//! Saliency-map and scanpath evaluation metrics.
//!
//! Map metrics operate on plain slices so that raw network scores, ground
//! truth distributions and arbitrary real vectors (for example an
//! anti-correlated `-p`) can all be compared without conversion.

mod io;
mod multimatch;

pub use io::{
    read_fixations, read_saliency, read_scanpath, write_fixations, write_saliency_binary,
    write_saliency_text, write_scanpath,
};
pub use multimatch::{multimatch, Fixation, MultiMatchScore, Scanpath};

use std::collections::BTreeSet;
use thiserror::Error;

/// Added to the predicted probability inside the KL logarithm.
pub const KL_EPS: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("map has zero variance")]
    ZeroVariance,
    #[error("map has zero total mass and cannot be normalized")]
    ZeroMass,
    #[error("every vertex is fixated; no negatives for ROC")]
    AllFixated,
    #[error("fixation set is empty")]
    NoFixations,
    #[error("fixation index {0} out of range for {1} vertices")]
    IndexOutOfRange(usize, usize),
    #[error("scanpath needs at least 2 fixations")]
    TooShort,
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

pub type MetricResult<T> = Result<T, MetricError>;

/// Per-vertex nonnegative saliency scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(values: Vec<f64>) -> MetricResult<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(MetricError::InvalidValue(format!("value {v} at vertex {i}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        (self.values.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }

    pub fn normalized(&self) -> MetricResult<Self> {
        Ok(Self { values: normalize(&self.values)? })
    }

    /// Index of the largest value; ties resolve to the smaller index.
    pub fn argmax(&self) -> Option<usize> {
        argmax(&self.values)
    }
}

pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Vertex indices of recorded fixations; repeats are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    indices: Vec<usize>,
}

impl FixationSet {
    pub fn new(indices: Vec<usize>, n_vertices: usize) -> MetricResult<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= n_vertices) {
            return Err(MetricError::IndexOutOfRange(i, n_vertices));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn normalize(values: &[f64]) -> MetricResult<Vec<f64>> {
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(MetricError::ZeroMass);
    }
    Ok(values.iter().map(|v| v / sum).collect())
}

fn same_len(a: &[f64], b: &[f64]) -> MetricResult<()> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// KL divergence of the prediction from the ground truth, natural log.
///
/// Both inputs are normalized to unit mass first. Zero ground-truth entries
/// contribute nothing.
pub fn kl_div(gt: &[f64], pred: &[f64]) -> MetricResult<f64> {
    same_len(gt, pred)?;
    let y = normalize(gt)?;
    let p = normalize(pred)?;
    Ok(y.iter()
        .zip(&p)
        .filter(|(yi, _)| **yi > 0.0)
        .map(|(yi, pi)| yi * (yi / (pi + KL_EPS)).ln())
        .sum())
}

/// Pearson correlation on raw values. Fails with `ZeroVariance` if either
/// input is constant.
pub fn cc(gt: &[f64], pred: &[f64]) -> MetricResult<f64> {
    same_len(gt, pred)?;
    if gt.len() < 2 || is_constant(gt) || is_constant(pred) {
        return Err(MetricError::ZeroVariance);
    }
    let (mg, mp) = (mean(gt), mean(pred));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (g, p) in gt.iter().zip(pred) {
        let (a, b) = (g - mg, p - mp);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// [`cc`] with the degenerate case mapped to `0.0`; the flag reports whether
/// that happened.
pub fn cc_or_zero(gt: &[f64], pred: &[f64]) -> MetricResult<(f64, bool)> {
    match cc(gt, pred) {
        Ok(v) => Ok((v, false)),
        Err(MetricError::ZeroVariance) => Ok((0.0, true)),
        Err(e) => Err(e),
    }
}

/// Normalized scanpath saliency with population standard deviation.
pub fn nss(pred: &[f64], fix: &FixationSet) -> MetricResult<f64> {
    if fix.is_empty() {
        return Err(MetricError::NoFixations);
    }
    check_fixations(pred, fix)?;
    if is_constant(pred) {
        return Err(MetricError::ZeroVariance);
    }
    let mu = mean(pred);
    let sigma = (pred.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / pred.len() as f64).sqrt();
    Ok(fix.indices().iter().map(|&f| (pred[f] - mu) / sigma).sum::<f64>() / fix.len() as f64)
}

fn check_fixations(pred: &[f64], fix: &FixationSet) -> MetricResult<()> {
    match fix.indices().iter().find(|&&i| i >= pred.len()) {
        Some(&i) => Err(MetricError::IndexOutOfRange(i, pred.len())),
        None => Ok(()),
    }
}

/// ROC area separating fixated from non-fixated vertices.
///
/// Positives are the distinct fixated vertices, negatives every other
/// vertex. Thresholds are the distinct predicted values at fixated vertices;
/// the curve is closed with `(0,0)` and `(1,1)` and integrated with the
/// trapezoid rule, so ties earn fractional credit.
pub fn auc_judd(pred: &[f64], fix: &FixationSet) -> MetricResult<f64> {
    if fix.is_empty() {
        return Err(MetricError::NoFixations);
    }
    check_fixations(pred, fix)?;
    let fixated: BTreeSet<usize> = fix.indices().iter().copied().collect();
    let n_pos = fixated.len();
    let n_neg = pred.len() - n_pos;
    if n_neg == 0 {
        return Err(MetricError::AllFixated);
    }
    let desc = |a: &f64, b: &f64| b.total_cmp(a);
    let mut pos: Vec<f64> = fixated.iter().map(|&i| pred[i]).collect();
    let mut neg: Vec<f64> = (0..pred.len()).filter(|i| !fixated.contains(i)).map(|i| pred[i]).collect();
    pos.sort_by(desc);
    neg.sort_by(desc);

    let (mut area, mut prev_tp, mut prev_fp) = (0.0, 0.0, 0.0);
    let (mut ip, mut ineg) = (0usize, 0usize);
    while ip < n_pos {
        let t = pos[ip];
        while ip < n_pos && pos[ip] >= t {
            ip += 1;
        }
        while ineg < n_neg && neg[ineg] >= t {
            ineg += 1;
        }
        let (tp, fp) = (ip as f64 / n_pos as f64, ineg as f64 / n_neg as f64);
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    area += (1.0 - prev_fp) * (1.0 + prev_tp) / 2.0;
    Ok(area)
}

/// Mean squared per-vertex difference on raw values.
pub fn mse(gt: &[f64], pred: &[f64]) -> MetricResult<f64> {
    same_len(gt, pred)?;
    if gt.is_empty() {
        return Ok(0.0);
    }
    Ok(gt.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / gt.len() as f64)
}
