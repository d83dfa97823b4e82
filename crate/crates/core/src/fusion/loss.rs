use super::{FusionError, FusionResult};
use crate::metrics::KL_EPS;

/// Weights of the distribution-matching and correlation terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub kl: f64,
    pub cc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { kl: 10.0, cc: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub kl: f64,
    pub cc: f64,
}

/// `kl_w * KL(gt || pred / sum pred) - cc_w * CC(gt, pred)` and its gradient
/// with respect to the raw prediction.
///
/// The ground truth is used as given (it should already sum to one); the
/// prediction is normalized only inside the KL term.
pub fn hybrid_loss(pred: &[f64], gt: &[f64], w: LossWeights) -> FusionResult<(LossValue, Vec<f64>)> {
    let n = pred.len();
    if gt.len() != n {
        return Err(FusionError::Shape(format!("prediction {n} vs ground truth {}", gt.len())));
    }
    let total: f64 = pred.iter().sum();
    if !(total > 0.0) {
        return Err(FusionError::Numeric("prediction has no mass".into()));
    }

    let mut kl = 0.0;
    let mut g = vec![0.0; n];
    let mut weighted = 0.0;
    for i in 0..n {
        let q = pred[i] / total;
        if gt[i] > 0.0 {
            kl += gt[i] * (gt[i] / (q + KL_EPS)).ln();
            g[i] = -gt[i] / (q + KL_EPS);
            weighted += g[i] * q;
        }
    }
    let dkl: Vec<f64> = g.iter().map(|gi| (gi - weighted) / total).collect();

    let gm = gt.iter().sum::<f64>() / n as f64;
    let pm = total / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (gt[i] - gm, pred[i] - pm);
        sab += a * b;
        saa += a * a;
        sbb += b * b;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(FusionError::Numeric("zero variance in correlation".into()));
    }
    let (na, nb) = (saa.sqrt(), sbb.sqrt());
    let cc = sab / (na * nb);
    let grad = (0..n)
        .map(|j| {
            let dcc = (gt[j] - gm) / (na * nb) - cc * (pred[j] - pm) / sbb;
            w.kl * dkl[j] - w.cc * dcc
        })
        .collect();
    Ok((LossValue { loss: w.kl * kl - w.cc * cc, kl, cc }, grad))
}
