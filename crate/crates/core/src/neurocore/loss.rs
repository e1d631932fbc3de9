//! Focal and L1 losses with analytic gradients.

use crate::error::{Error, Result};
use crate::neurocore::tensor::Tensor2;

pub const FOCAL_ALPHA: f64 = 0.25;
pub const FOCAL_GAMMA: f64 = 2.0;

/// Elementwise logistic map.
pub fn logistic(z: &Tensor2) -> Tensor2 {
    Tensor2::from_fn(z.rows(), z.cols(), |r, c| 1.0 / (1.0 + (-z.get(r, c)).exp()))
}

/// Binary focal loss over probabilities `p` (Nx1, obtained from logits via
/// the logistic map) against targets `y` in {0, 1}.
///
/// Returns the mean loss and its gradient w.r.t. the *logits*, so the caller
/// can chain it directly behind a logistic head.
pub fn focal_loss(p: &Tensor2, y: &Tensor2, alpha: f64, gamma: f64) -> Result<(f64, Tensor2)> {
    if p.rows() != y.rows() || p.cols() != 1 || y.cols() != 1 {
        return Err(Error::shape("focal loss expects matching Nx1 inputs"));
    }
    if p.rows() == 0 {
        return Err(Error::invalid("focal loss over empty batch"));
    }
    let n = p.rows() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor2::zeros(p.rows(), 1);
    for r in 0..p.rows() {
        let pv = p.get(r, 0);
        if !(0.0..=1.0).contains(&pv) || pv == 0.0 || pv == 1.0 {
            return Err(Error::invalid(format!("probability {pv} outside (0,1)")));
        }
        let yv = y.get(r, 0);
        if yv != 0.0 && yv != 1.0 {
            return Err(Error::invalid(format!("target {yv} not binary")));
        }
        let (l, dz) = if yv == 1.0 {
            let l = -alpha * (1.0 - pv).powf(gamma) * pv.ln();
            let dz = alpha * gamma * pv * (1.0 - pv).powf(gamma) * pv.ln()
                - alpha * (1.0 - pv).powf(gamma + 1.0);
            (l, dz)
        } else {
            let l = -(1.0 - alpha) * pv.powf(gamma) * (1.0 - pv).ln();
            let dz = -(1.0 - alpha) * gamma * pv.powf(gamma) * (1.0 - pv) * (1.0 - pv).ln()
                + (1.0 - alpha) * pv.powf(gamma + 1.0);
            (l, dz)
        };
        loss += l;
        grad.set(r, 0, dz / n);
    }
    Ok((loss / n, grad))
}

/// Mean absolute error with its subgradient w.r.t. `pred` (zero at ties).
pub fn l1_loss(pred: &Tensor2, target: &Tensor2) -> Result<(f64, Tensor2)> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::shape("l1 loss expects matching shapes"));
    }
    let count = (pred.rows() * pred.cols()) as f64;
    if count == 0.0 {
        return Err(Error::invalid("l1 loss over empty tensors"));
    }
    let mut loss = 0.0;
    let grad = Tensor2::from_fn(pred.rows(), pred.cols(), |r, c| {
        let d = pred.get(r, c) - target.get(r, c);
        loss += d.abs();
        if d > 0.0 {
            1.0 / count
        } else if d < 0.0 {
            -1.0 / count
        } else {
            0.0
        }
    });
    Ok((loss / count, grad))
}
