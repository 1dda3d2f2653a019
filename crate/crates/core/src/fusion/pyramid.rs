//! Multi-scale feature pyramid, the Laplacian information measure computed
//! on it, and the softmax information-preservation weights.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;

use crate::image::{convolve2d, decimate2, gaussian_blur, Kernel2D};
use crate::{Error, ImageF, Result};

pub const PYRAMID_LEVELS: usize = 5;
pub const BANK_SIZE: usize = 8;
/// Smallest input side that keeps the coarsest level at 3 pixels or more.
pub const MIN_FEATURE_SIZE: usize = 48;

/// Eight filters applied at every pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    kernels: Vec<Kernel2D>,
}

fn gauss(y: f64, x: f64, sigma: f64) -> f64 {
    (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
}

impl FilterBank {
    /// The fixed bank: first derivatives of a σ=1 Gaussian at 0°, 45°, 90°
    /// and 135°; Laplacians of Gaussian at σ=1 and σ=2; a σ=1 Gaussian; and a
    /// σ=1 minus σ=2 centre-surround. All but the Gaussian have zero DC gain.
    pub fn standard() -> Self {
        let deriv = |theta: f64| {
            let (c, s) = (theta.cos(), theta.sin());
            Kernel2D::from_fn(3, move |y, x| -(c * x + s * y) * gauss(y, x, 1.0))
        };
        // Unit response to a unit-slope ramp along the filter direction.
        let ramp_gain: f64 = {
            let k = deriv(0.0);
            let r = k.radius() as f64;
            k.taps()
                .iter()
                .enumerate()
                .map(|(i, t)| t * ((i % k.size()) as f64 - r))
                .sum()
        };
        let scaled = |k: Kernel2D, gain: f64| {
            let size = k.size();
            Kernel2D::new(size, k.taps().iter().map(|t| t / gain).collect()).expect("odd kernel")
        };
        let log = |sigma: f64, radius: usize| {
            let k = Kernel2D::from_fn(radius, move |y, x| {
                let r2 = x * x + y * y;
                (r2 - 2.0 * sigma * sigma) / (sigma * sigma) * gauss(y, x, sigma)
            })
            .zero_mean();
            let norm: f64 = k.taps().iter().map(|t| t.abs()).sum();
            scaled(k, norm / 2.0)
        };
        let g1 = Kernel2D::from_fn(3, |y, x| gauss(y, x, 1.0)).normalized();
        let surround = {
            let inner = Kernel2D::from_fn(6, |y, x| gauss(y, x, 1.0)).normalized();
            let outer = Kernel2D::from_fn(6, |y, x| gauss(y, x, 2.0)).normalized();
            let taps = inner.taps().iter().zip(outer.taps()).map(|(a, b)| a - b).collect();
            Kernel2D::new(13, taps).expect("odd kernel").zero_mean()
        };
        let quarter = core::f64::consts::FRAC_PI_4;
        FilterBank {
            kernels: alloc::vec![
                scaled(deriv(0.0), ramp_gain),
                scaled(deriv(quarter), ramp_gain),
                scaled(deriv(2.0 * quarter), ramp_gain),
                scaled(deriv(3.0 * quarter), ramp_gain),
                log(1.0, 3),
                log(2.0, 6),
                g1,
                surround,
            ],
        }
    }

    /// Substitute filters (for example learned ones) of the same count.
    pub fn from_kernels(kernels: Vec<Kernel2D>) -> Result<Self> {
        if kernels.len() != BANK_SIZE {
            return Err(Error::param("filter bank must hold exactly 8 kernels"));
        }
        Ok(FilterBank { kernels })
    }

    pub fn kernels(&self) -> &[Kernel2D] {
        &self.kernels
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        FilterBank::standard()
    }
}

/// Five levels of channel maps; level `p` holds `D_p` maps of `H_p × W_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    levels: Vec<Vec<ImageF>>,
}

impl FeaturePyramid {
    pub fn from_levels(levels: Vec<Vec<ImageF>>) -> Result<Self> {
        if levels.len() != PYRAMID_LEVELS {
            return Err(Error::param("feature pyramid must have exactly 5 levels"));
        }
        for level in &levels {
            let Some(first) = level.first() else {
                return Err(Error::param("pyramid level without channels"));
            };
            let (h, w) = first.size();
            if h < 3 || w < 3 {
                return Err(Error::param("pyramid levels must be at least 3x3"));
            }
            if level.iter().any(|m| m.size() != (h, w) || m.channels() != 1) {
                return Err(Error::param("channel maps of a level must share one size"));
            }
        }
        Ok(FeaturePyramid { levels })
    }

    pub fn levels(&self) -> &[Vec<ImageF>] {
        &self.levels
    }

    /// Multiplies every feature value by `a`.
    pub fn scaled(&self, a: f64) -> FeaturePyramid {
        FeaturePyramid {
            levels: self.levels.iter().map(|l| l.iter().map(|m| m.map(|v| a * v)).collect()).collect(),
        }
    }
}

pub fn extract_features(image: &ImageF) -> Result<FeaturePyramid> {
    extract_features_with(image, &FilterBank::standard())
}

/// Level 1 applies the bank to the image; each further level applies it to
/// the σ=1-prefiltered, 2× decimated channel mean of the previous level.
pub fn extract_features_with(image: &ImageF, bank: &FilterBank) -> Result<FeaturePyramid> {
    if image.channels() != 1 {
        return Err(Error::param("feature extraction expects a 1-channel image"));
    }
    let (h, w) = image.size();
    if h.min(w) < MIN_FEATURE_SIZE {
        return Err(Error::ImageTooSmall {
            min: MIN_FEATURE_SIZE,
            height: h,
            width: w,
        });
    }
    let mut levels = Vec::with_capacity(PYRAMID_LEVELS);
    let mut input = image.clone();
    for p in 0..PYRAMID_LEVELS {
        let maps: Vec<ImageF> = bank.kernels.iter().map(|k| convolve2d(&input, k)).collect();
        if p + 1 < PYRAMID_LEVELS {
            let (lh, lw) = input.size();
            let mut mean = ImageF::new(lh, lw, 1);
            let inv = 1.0 / maps.len() as f64;
            for m in &maps {
                mean.data_mut().iter_mut().zip(m.data()).for_each(|(a, b)| *a += inv * b);
            }
            input = decimate2(&gaussian_blur(&mean, 1.0));
        }
        levels.push(maps);
    }
    FeaturePyramid::from_levels(levels)
}

/// `(1/5) Σ_p (1/(H_p W_p D_p)) Σ_k ‖∇² φ_p^k‖_F²` with the 5-point Laplacian
/// (replicate borders).
pub fn information_measure(pyramid: &FeaturePyramid) -> f64 {
    let lap = Kernel2D::laplacian();
    let mut total = 0.0;
    for level in &pyramid.levels {
        let (h, w) = level[0].size();
        let energy: f64 = level
            .iter()
            .map(|m| convolve2d(m, &lap).data().iter().map(|v| v * v).sum::<f64>())
            .sum();
        total += energy / (h * w * level.len()) as f64;
    }
    total / pyramid.levels.len() as f64
}

/// Softmax weights for the two fusion sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreservationWeights {
    pub first: f64,
    pub second: f64,
    pub temperature: f64,
}

impl PreservationWeights {
    /// Fixed weights (for tests and hand-built losses).
    pub fn fixed(first: f64, second: f64) -> Self {
        PreservationWeights {
            first,
            second,
            temperature: 1.0,
        }
    }
}

/// `softmax([h_i / c, h_j / c])`, evaluated with the maximum subtracted.
pub fn preservation_degrees(h_i: f64, h_j: f64, c: f64) -> Result<PreservationWeights> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("softmax temperature must be positive"));
    }
    if !h_i.is_finite() || !h_j.is_finite() {
        return Err(Error::param("information measures must be finite"));
    }
    let (a, b) = (h_i / c, h_j / c);
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    let s = ea + eb;
    Ok(PreservationWeights {
        first: ea / s,
        second: eb / s,
        temperature: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture_image;
    use alloc::vec;
    use proptest::prelude::*;

    fn zero_pyramid(base: usize) -> Vec<Vec<ImageF>> {
        (0..PYRAMID_LEVELS)
            .map(|p| {
                let s = base >> p;
                (0..BANK_SIZE).map(|_| ImageF::new(s, s, 1)).collect()
            })
            .collect()
    }

    #[test]
    fn constant_image_features() {
        let img = ImageF::from_fn(64, 64, |_, _| 0.6);
        let pyr = extract_features(&img).unwrap();
        for level in pyr.levels() {
            for (k, m) in level.iter().enumerate() {
                if k == 6 {
                    let v0 = m.data()[0];
                    assert!(m.data().iter().all(|v| (v - v0).abs() < 1e-12));
                } else {
                    assert!(m.data().iter().all(|v| v.abs() < 1e-6), "channel {k}");
                }
            }
        }
    }

    #[test]
    fn pyramid_sizes_and_determinism() {
        let img = texture_image(96, 96, 1);
        let pyr = extract_features(&img).unwrap();
        let sides: Vec<usize> = pyr.levels().iter().map(|l| l[0].height()).collect();
        assert_eq!(sides, vec![96, 48, 24, 12, 6]);
        assert_eq!(pyr, extract_features(&img).unwrap());
        assert!(matches!(extract_features(&texture_image(47, 96, 1)), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn impulse_measure_matches_direct_laplacian() {
        assert_eq!(information_measure(&FeaturePyramid::from_levels(zero_pyramid(48)).unwrap()), 0.0);
        let mut levels = zero_pyramid(48);
        levels[0][3].set(20, 17, 0, 1.0);
        // Oracle: the Laplacian of an interior impulse is -4 at the centre and
        // 1 at the four neighbours, so its squared norm is 16 + 4.
        let lap_energy = 16.0 + 4.0;
        let expected = lap_energy / (48.0 * 48.0 * 8.0) / 5.0;
        let got = information_measure(&FeaturePyramid::from_levels(levels).unwrap());
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn softmax_examples() {
        let w = preservation_degrees(0.7, 0.7, 2.0).unwrap();
        assert_eq!((w.first, w.second), (0.5, 0.5));
        let c = 0.37;
        let w = preservation_degrees(1.0 + c * 3f64.ln(), 1.0, c).unwrap();
        assert!((w.first - 0.75).abs() < 1e-9 && (w.second - 0.25).abs() < 1e-9);
        assert!(preservation_degrees(1.0, 1.0, 0.0).is_err());
        let w = preservation_degrees(1e6, 0.0, 1e-3).unwrap();
        assert!(w.first.is_finite() && (w.first + w.second - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blur_never_increases_information() {
        for seed in 0..20 {
            let tex = texture_image(64, 64, seed);
            let values: Vec<f64> = [0.0, 1.0, 2.0, 4.0]
                .iter()
                .map(|&s| information_measure(&extract_features(&crate::image::gaussian_blur(&tex, s)).unwrap()))
                .collect();
            assert!(values.windows(2).all(|p| p[1] <= p[0]), "seed {seed}: {values:?}");
        }
    }

    proptest! {
        #[test]
        fn measure_is_quadratic(seed in 0u64..1000, a in 0.1f64..5.0) {
            let pyr = extract_features(&texture_image(48, 48, seed)).unwrap();
            let h = information_measure(&pyr);
            let ha = information_measure(&pyr.scaled(a));
            prop_assert!((ha - a * a * h).abs() <= 1e-6 * (a * a * h));
        }

        #[test]
        fn weights_sum_to_one_and_are_shift_invariant(
            hi in 0.0f64..100.0, hj in 0.0f64..100.0, c in 0.01f64..50.0, shift in 0.0f64..100.0,
        ) {
            let w = preservation_degrees(hi, hj, c).unwrap();
            prop_assert!((w.first + w.second - 1.0).abs() < 1e-9);
            let s = preservation_degrees(hi + shift, hj + shift, c).unwrap();
            prop_assert!((s.first - w.first).abs() < 1e-9);
            if hi > hj { prop_assert!(w.first > w.second); }
            let up = preservation_degrees(hi + 0.5, hj, c).unwrap();
            prop_assert!(up.first >= w.first);
        }
    }
}
