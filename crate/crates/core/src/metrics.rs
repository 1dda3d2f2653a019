//! No-reference quality metrics (information entropy, local contrast) and an
//! optional SSIM against a reference. All metrics read valid pixels only.

use alloc::vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;

use crate::fusion::ssim;
use crate::image::to_grayscale;
use crate::{Error, ImageF, Result};

pub const DEFAULT_LC_WINDOW: usize = 8;
const LC_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Information entropy, bits.
    pub ie: f64,
    pub lc: f64,
    pub ssim_vs_reference: Option<f64>,
    pub valid_pixel_fraction: f64,
}

/// Shannon entropy of the 256-bin histogram of valid pixels, binned as
/// `round(clamp(v) · 255)`.
pub fn information_entropy(image: &ImageF) -> Result<f64> {
    let gray = to_grayscale(image);
    let mut hist = [0u64; 256];
    let mut total = 0u64;
    for (v, &m) in gray.data().iter().zip(gray.mask()) {
        if m {
            hist[(v.clamp(0.0, 1.0) * 255.0).round() as usize] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric("no valid pixels for entropy"));
    }
    let n = total as f64;
    Ok(hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Mean of `(max − min) / (max + min + ε)` over non-overlapping
/// `window × window` tiles that are entirely valid.
pub fn local_contrast(image: &ImageF, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::param("local contrast window must be positive"));
    }
    let gray = to_grayscale(image);
    let (h, w) = gray.size();
    let mut sum = 0.0;
    let mut tiles = 0usize;
    for ty in 0..h / window {
        'tile: for tx in 0..w / window {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for y in ty * window..(ty + 1) * window {
                for x in tx * window..(tx + 1) * window {
                    if !gray.is_valid(y, x) {
                        continue 'tile;
                    }
                    let v = gray.get(y, x, 0);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            sum += (hi - lo) / (hi + lo + LC_EPS);
            tiles += 1;
        }
    }
    if tiles == 0 {
        return Err(Error::UndefinedMetric("no fully valid local-contrast tile"));
    }
    Ok(sum / tiles as f64)
}

/// Entropy, local contrast, and (with a reference) SSIM on luminance.
pub fn evaluate(image: &ImageF, reference: Option<&ImageF>) -> Result<MetricsReport> {
    let ie = information_entropy(image)?;
    let lc = local_contrast(image, DEFAULT_LC_WINDOW)?;
    let ssim_vs_reference = match reference {
        Some(r) => {
            if r.size() != image.size() {
                return Err(Error::SizeMismatch {
                    expected: image.size(),
                    found: r.size(),
                });
            }
            Some(ssim::ssim_score(&to_grayscale(image), &to_grayscale(r))?)
        }
        None => None,
    };
    Ok(MetricsReport {
        ie,
        lc,
        ssim_vs_reference,
        valid_pixel_fraction: image.valid_fraction(),
    })
}

/// Restricts `image` to pixels valid in `mask` as well as its own mask.
pub fn restrict(image: &ImageF, mask: &[bool]) -> ImageF {
    let combined = image.mask().iter().zip(mask).map(|(&a, &b)| a && b).collect();
    image.clone().with_mask(combined).expect("mask length matches")
}

/// Intersection of several masks of equal length.
pub fn intersect_masks<'a>(masks: impl IntoIterator<Item = &'a [bool]>) -> alloc::vec::Vec<bool> {
    let mut it = masks.into_iter();
    let Some(first) = it.next() else {
        return vec![];
    };
    let mut out = first.to_vec();
    for m in it {
        out.iter_mut().zip(m).for_each(|(a, &b)| *a = *a && b);
    }
    out
}
