//! Information-preservation-weighted SSIM + MSE loss.

use alloc::vec;
use alloc::vec::Vec;

use super::pyramid::PreservationWeights;
use super::ssim::ssim;
use crate::{Error, ImageF, Result};

/// Loss value split into its two terms, with the gradient of each with
/// respect to the fused image.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms {
    /// `ω_i(1 − S_fi) + ω_j(1 − S_fj)`.
    pub ssim_term: f64,
    /// `ω_i·MSE_fi + ω_j·MSE_fj`, not yet multiplied by α.
    pub mse_term: f64,
    pub alpha: f64,
    pub ssim_gradient: Vec<f64>,
    pub mse_gradient: Vec<f64>,
}

impl LossTerms {
    pub fn value(&self) -> f64 {
        self.ssim_term + self.alpha * self.mse_term
    }

    /// Gradient of the full loss with respect to the fused image.
    pub fn gradient(&self) -> Vec<f64> {
        self.ssim_gradient
            .iter()
            .zip(&self.mse_gradient)
            .map(|(s, m)| s + self.alpha * m)
            .collect()
    }
}

/// MSE over pixels valid in both images, with its gradient in `f`.
fn mse(f: &ImageF, s: &ImageF) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; f.data().len()];
    let mut sum = 0.0;
    let mut n = 0usize;
    for (k, (a, b)) in f.data().iter().zip(s.data()).enumerate() {
        if f.mask()[k] && s.mask()[k] {
            let d = a - b;
            sum += d * d;
            grad[k] = 2.0 * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("no valid pixels for mse"));
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((sum * inv, grad))
}

pub fn loss_terms(f: &ImageF, i: &ImageF, j: &ImageF, w: &PreservationWeights, alpha: f64) -> Result<LossTerms> {
    for s in [i, j] {
        if s.size() != f.size() || s.channels() != f.channels() {
            return Err(Error::SizeMismatch {
                expected: f.size(),
                found: s.size(),
            });
        }
    }
    if !(alpha >= 0.0) {
        return Err(Error::param("alpha must be nonnegative"));
    }
    let (si, gi) = ssim(f, i)?;
    let (sj, gj) = ssim(f, j)?;
    let (mi, hi) = mse(f, i)?;
    let (mj, hj) = mse(f, j)?;
    let (wi, wj) = (w.first, w.second);
    Ok(LossTerms {
        ssim_term: wi * (1.0 - si) + wj * (1.0 - sj),
        mse_term: wi * mi + wj * mj,
        alpha,
        ssim_gradient: gi.data().iter().zip(gj.data()).map(|(a, b)| -(wi * a + wj * b)).collect(),
        mse_gradient: hi.iter().zip(&hj).map(|(a, b)| wi * a + wj * b).collect(),
    })
}

/// Loss value and its gradient with respect to `f`.
pub fn loss(f: &ImageF, i: &ImageF, j: &ImageF, w: &PreservationWeights, alpha: f64) -> Result<(f64, ImageF)> {
    let t = loss_terms(f, i, j, w, alpha)?;
    let (h, wd) = f.size();
    Ok((t.value(), ImageF::from_data(h, wd, 1, t.gradient())?))
}
