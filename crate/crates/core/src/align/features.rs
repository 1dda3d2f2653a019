//! Determinant-of-Hessian keypoints on integral images, upright 64-value
//! Haar descriptors, and ratio-test matching with a mutual cross-check.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;

use crate::{Error, ImageF, Result};

pub const DESCRIPTOR_LEN: usize = 64;
pub const MIN_DETECT_SIZE: usize = 32;

/// Box-filter side lengths per octave, and the sampling step of each octave.
const OCTAVES: [([usize; 4], usize); 3] = [([9, 15, 21, 27], 1), ([15, 27, 39, 51], 2), ([27, 51, 75, 99], 4)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Scale in pixels (1.2 × filter side / 9).
    pub scale: f64,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub vector: [f64; DESCRIPTOR_LEN],
}

impl Descriptor {
    /// Flat patches produce the zero vector, which never matches.
    pub fn is_matchable(&self) -> bool {
        self.vector.iter().any(|&v| v != 0.0)
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.vector
            .iter()
            .zip(&other.vector)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub keypoint: Keypoint,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: f64,
    /// Best over second-best distance.
    pub ratio: f64,
}

/// Summed-area table with a zero first row and column.
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(image: &ImageF) -> Self {
        assert_eq!(image.channels(), 1);
        let (h, w) = image.size();
        let stride = w + 1;
        let mut sums = vec![0.0; (h + 1) * stride];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += image.get(y, x, 0);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        IntegralImage {
            width: w,
            height: h,
            sums,
        }
    }

    /// Sum over rows `y0..=y1` and columns `x0..=x1`, clipped to the image.
    #[inline]
    pub fn box_sum(&self, y0: isize, x0: isize, y1: isize, x1: isize) -> f64 {
        let y0 = y0.max(0) as usize;
        let x0 = x0.max(0) as usize;
        let y1 = y1.min(self.height as isize - 1);
        let x1 = x1.min(self.width as isize - 1);
        if y1 < y0 as isize || x1 < x0 as isize {
            return 0.0;
        }
        let (y1, x1) = (y1 as usize + 1, x1 as usize + 1);
        let s = self.width + 1;
        self.sums[y1 * s + x1] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0] + self.sums[y0 * s + x0]
    }
}

/// Approximated Hessian determinant for filter side `size` at `(y, x)`.
fn hessian_response(ii: &IntegralImage, y: isize, x: isize, size: usize) -> f64 {
    let l = (size / 3) as isize;
    let half = (size as isize - 1) / 2;
    let b = l - 1;
    let mid = (l - 1) / 2;
    let dyy = ii.box_sum(y - half, x - b, y + half, x + b) - 3.0 * ii.box_sum(y - mid, x - b, y + mid, x + b);
    let dxx = ii.box_sum(y - b, x - half, y + b, x + half) - 3.0 * ii.box_sum(y - b, x - mid, y + b, x + mid);
    let dxy = ii.box_sum(y - l, x - l, y - 1, x - 1) + ii.box_sum(y + 1, x + 1, y + l, x + l)
        - ii.box_sum(y - l, x + 1, y - 1, x + l)
        - ii.box_sum(y + 1, x - l, y + l, x - 1);
    let area = (size * size) as f64;
    let (dxx, dyy, dxy) = (dxx / area, dyy / area, dxy / area);
    dxx * dyy - (0.9 * dxy) * (0.9 * dxy)
}

/// Fits a parabola through three samples; offset of its extremum in `[-1, 1]`.
fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let denom = left - 2.0 * centre + right;
    if denom.abs() < 1e-18 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-1.0, 1.0)
    }
}

/// Keypoints at local maxima (3×3×3 over position and scale) of the box-filter
/// Hessian determinant, above `threshold`, strongest first, at most
/// `max_points`.
pub fn detect_features(image: &ImageF, threshold: f64, max_points: usize) -> Result<Vec<Keypoint>> {
    if image.channels() != 1 {
        return Err(Error::param("feature detection expects a 1-channel image"));
    }
    let (h, w) = image.size();
    if h.min(w) < MIN_DETECT_SIZE {
        return Err(Error::ImageTooSmall {
            min: MIN_DETECT_SIZE,
            height: h,
            width: w,
        });
    }
    let ii = IntegralImage::new(image);
    let mut found = Vec::new();

    for (sizes, step) in OCTAVES {
        let margin = sizes[3] / 2 + 1;
        if 2 * margin + 3 * step > h.min(w) {
            continue;
        }
        let gh = (h - 2 * margin) / step;
        let gw = (w - 2 * margin) / step;
        let layers: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&size| {
                let mut r = vec![0.0; gh * gw];
                for gy in 0..gh {
                    for gx in 0..gw {
                        let y = (margin + gy * step) as isize;
                        let x = (margin + gx * step) as isize;
                        r[gy * gw + gx] = hessian_response(&ii, y, x, size);
                    }
                }
                r
            })
            .collect();

        for li in 1..3 {
            let layer = &layers[li];
            for gy in 1..gh.saturating_sub(1) {
                for gx in 1..gw.saturating_sub(1) {
                    let v = layer[gy * gw + gx];
                    if v <= threshold {
                        continue;
                    }
                    let is_max = (li - 1..=li + 1).all(|l| {
                        (gy - 1..=gy + 1).all(|yy| {
                            (gx - 1..=gx + 1).all(|xx| {
                                (l == li && yy == gy && xx == gx) || layers[l][yy * gw + xx] < v
                            })
                        })
                    });
                    if !is_max {
                        continue;
                    }
                    let ox = parabolic_offset(layer[gy * gw + gx - 1], v, layer[gy * gw + gx + 1]);
                    let oy = parabolic_offset(layer[(gy - 1) * gw + gx], v, layer[(gy + 1) * gw + gx]);
                    let os = parabolic_offset(layers[li - 1][gy * gw + gx], v, layers[li + 1][gy * gw + gx]);
                    let size = if os >= 0.0 {
                        sizes[li] as f64 + os * (sizes[li + 1] - sizes[li]) as f64
                    } else {
                        sizes[li] as f64 + os * (sizes[li] - sizes[li - 1]) as f64
                    };
                    found.push(Keypoint {
                        x: (margin + gx * step) as f64 + ox * step as f64,
                        y: (margin + gy * step) as f64 + oy * step as f64,
                        scale: 1.2 * size / 9.0,
                        response: v,
                    });
                }
            }
        }
    }

    found.sort_by(|a, b| {
        b.response
            .partial_cmp(&a.response)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.y.partial_cmp(&b.y).unwrap_or(core::cmp::Ordering::Equal))
            .then(a.x.partial_cmp(&b.x).unwrap_or(core::cmp::Ordering::Equal))
    });
    found.truncate(max_points);
    Ok(found)
}

/// Upright descriptors: a 20s-wide window split into 4×4 cells, each cell
/// summarising 5×5 Gaussian-weighted Haar responses as
/// `(Σdx, Σdy, Σ|dx|, Σ|dy|)`. Keypoints whose window leaves the image are
/// dropped.
pub fn compute_descriptors(image: &ImageF, keypoints: &[Keypoint]) -> Vec<Feature> {
    assert_eq!(image.channels(), 1);
    let ii = IntegralImage::new(image);
    let (h, w) = image.size();
    let mut out = Vec::with_capacity(keypoints.len());

    for kp in keypoints {
        let s = kp.scale;
        let haar = (s.round() as isize).max(1);
        let reach = 10.0 * s + haar as f64 + 1.0;
        if kp.x - reach < 0.0 || kp.y - reach < 0.0 || kp.x + reach > (w - 1) as f64 || kp.y + reach > (h - 1) as f64 {
            continue;
        }
        let sigma = 3.3 * s;
        let mut vector = [0.0; DESCRIPTOR_LEN];
        for cy in 0..4 {
            for cx in 0..4 {
                let mut acc = [0.0; 4];
                for sy in 0..5 {
                    for sx in 0..5 {
                        let oy = (cy as f64 * 5.0 + sy as f64 - 9.5) * s;
                        let ox = (cx as f64 * 5.0 + sx as f64 - 9.5) * s;
                        let py = (kp.y + oy).round() as isize;
                        let px = (kp.x + ox).round() as isize;
                        let g = (-(ox * ox + oy * oy) / (2.0 * sigma * sigma)).exp();
                        let dx = ii.box_sum(py - haar, px, py + haar - 1, px + haar - 1)
                            - ii.box_sum(py - haar, px - haar, py + haar - 1, px - 1);
                        let dy = ii.box_sum(py, px - haar, py + haar - 1, px + haar - 1)
                            - ii.box_sum(py - haar, px - haar, py - 1, px + haar - 1);
                        let (dx, dy) = (g * dx, g * dy);
                        acc[0] += dx;
                        acc[1] += dy;
                        acc[2] += dx.abs();
                        acc[3] += dy.abs();
                    }
                }
                let base = (cy * 4 + cx) * 4;
                vector[base..base + 4].copy_from_slice(&acc);
            }
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        // Below this the patch is flat up to rounding in the box sums.
        if norm > 1e-9 {
            vector.iter_mut().for_each(|v| *v /= norm);
        } else {
            vector = [0.0; DESCRIPTOR_LEN];
        }
        out.push(Feature {
            keypoint: *kp,
            descriptor: Descriptor { vector },
        });
    }
    out
}

/// Squared distance, abandoned once it reaches `bound`.
fn squared_distance_below(a: &Descriptor, b: &Descriptor, bound: f64) -> Option<f64> {
    let mut sum = 0.0;
    for (ca, cb) in a.vector.chunks_exact(8).zip(b.vector.chunks_exact(8)) {
        sum += ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        if sum >= bound {
            return None;
        }
    }
    Some(sum)
}

fn nearest_two(query: &Descriptor, set: &[Descriptor]) -> Option<(usize, f64, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (j, d) in set.iter().enumerate() {
        if !d.is_matchable() {
            continue;
        }
        let Some(dist) = squared_distance_below(query, d, second) else {
            continue;
        };
        if dist < best.1 {
            second = best.1;
            best = (j, dist);
        } else {
            second = dist;
        }
    }
    (best.0 != usize::MAX).then(|| (best.0, best.1.sqrt(), second.sqrt()))
}

/// Nearest-neighbour matches from `desc_a` into `desc_b` passing the ratio
/// test (`best < ratio_threshold · second`) and the mutual-best check.
pub fn match_features(desc_a: &[Descriptor], desc_b: &[Descriptor], ratio_threshold: f64) -> Vec<Match> {
    if desc_b.iter().filter(|d| d.is_matchable()).count() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut reverse: Vec<Option<Option<usize>>> = vec![None; desc_b.len()];
    for (i, a) in desc_a.iter().enumerate() {
        if !a.is_matchable() {
            continue;
        }
        let Some((j, best, second)) = nearest_two(a, desc_b) else {
            continue;
        };
        if !(best < ratio_threshold * second) {
            continue;
        }
        let back = *reverse[j].get_or_insert_with(|| nearest_two(&desc_b[j], desc_a).map(|(k, _, _)| k));
        if back != Some(i) {
            continue;
        }
        out.push(Match {
            index_a: i,
            index_b: j,
            distance: best,
            ratio: if second > 0.0 { best / second } else { 0.0 },
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize, seed: u64) -> ImageF {
        crate::synth::texture_image(h, w, seed)
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let img = ImageF::from_fn(64, 64, |_, _| 0.4);
        assert!(detect_features(&img, 1e-6, 100).unwrap().is_empty());
    }

    #[test]
    fn too_small_is_rejected() {
        let img = ImageF::from_fn(31, 64, |_, _| 0.4);
        assert!(matches!(detect_features(&img, 1e-6, 10), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn bright_blob_is_localized() {
        let img = ImageF::from_fn(64, 64, |y, x| {
            let (dy, dx) = (y as f64 - 32.0, x as f64 - 32.0);
            (-(dx * dx + dy * dy) / 18.0).exp()
        });
        let kps = detect_features(&img, 1e-6, 10).unwrap();
        assert!(!kps.is_empty());
        assert!(kps.iter().any(|k| (k.x - 32.0).abs() <= 2.0 && (k.y - 32.0).abs() <= 2.0), "{kps:?}");
    }

    #[test]
    fn keypoints_sorted_and_capped() {
        let img = textured(128, 128, 3);
        let kps = detect_features(&img, 1e-5, 25).unwrap();
        assert!(kps.len() <= 25 && !kps.is_empty());
        assert!(kps.windows(2).all(|p| p[0].response >= p[1].response));
    }

    #[test]
    fn descriptors_are_unit_and_offset_invariant() {
        let img = textured(128, 128, 5).map(|v| 0.1 + 0.6 * v);
        let kps = detect_features(&img, 1e-5, 40).unwrap();
        let a = compute_descriptors(&img, &kps);
        assert!(!a.is_empty());
        for f in &a {
            let n = f.descriptor.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-5);
        }
        assert_eq!(a, compute_descriptors(&img, &kps));
        let brighter = img.map(|v| v + 0.2);
        let b = compute_descriptors(&brighter, &kps);
        assert_eq!(a.len(), b.len());
        for (fa, fb) in a.iter().zip(&b) {
            let diff = fa.descriptor.distance(&fb.descriptor);
            assert!(diff < 1e-9, "{diff}");
        }
    }

    #[test]
    fn orthonormal_descriptors_match_themselves() {
        let set: Vec<Descriptor> = (0..8)
            .map(|i| {
                let mut vector = [0.0; DESCRIPTOR_LEN];
                vector[i] = 1.0;
                Descriptor { vector }
            })
            .collect();
        let m = match_features(&set, &set, 0.75);
        assert_eq!(m.len(), 8);
        assert!(m.iter().all(|m| m.index_a == m.index_b && m.distance == 0.0));
        assert!(match_features(&set, &set[..1], 0.75).is_empty());
    }
}
