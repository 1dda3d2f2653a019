//! Float rasters with validity masks, and the filtering and resampling
//! primitives shared by every stage.
//!
//! Pixels are `f64` in `[0, 1]`, stored row-major with interleaved channels.
//! The validity mask marks pixels that carry scene content; warping sets it to
//! `false` on canvas that no source pixel reaches, and filters propagate it by
//! AND over their footprint. Borders are replicate-padded everywhere.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;

use crate::{Error, Result};

/// Luma weights used by [`to_grayscale`].
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Offsets within this distance of an integer are sampled as that integer.
const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageF {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
}

impl ImageF {
    /// A zero image, fully valid.
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        ImageF {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
            mask: vec![true; height * width],
        }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::param("channels must be 1 or 3"));
        }
        if data.len() != height * width * channels {
            return Err(Error::param("data length does not match height x width x channels"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("pixel values must be finite"));
        }
        Ok(ImageF {
            height,
            width,
            channels,
            data,
            mask: vec![true; height * width],
        })
    }

    /// Single-channel image from a `(row, col) -> value` function.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        ImageF {
            height,
            width,
            channels: 1,
            data,
            mask: vec![true; height * width],
        }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.height * self.width {
            return Err(Error::param("mask length does not match height x width"));
        }
        self.mask = mask;
        Ok(self)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn size(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<bool>) {
        (self.data, self.mask)
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn is_valid(&self, y: usize, x: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn all_valid(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    /// Copy of the `h × w` window whose top-left pixel is `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> ImageF {
        assert!(y0 + h <= self.height && x0 + w <= self.width, "crop out of bounds");
        let c = self.channels;
        let mut data = Vec::with_capacity(h * w * c);
        let mut mask = Vec::with_capacity(h * w);
        for y in y0..y0 + h {
            let row = (y * self.width + x0) * c;
            data.extend_from_slice(&self.data[row..row + w * c]);
            let mrow = y * self.width + x0;
            mask.extend_from_slice(&self.mask[mrow..mrow + w]);
        }
        ImageF {
            height: h,
            width: w,
            channels: c,
            data,
            mask,
        }
    }

    /// Writes `src` (data and mask) with its top-left pixel at `(y0, x0)`.
    pub fn paste(&mut self, src: &ImageF, y0: usize, x0: usize) {
        assert_eq!(src.channels, self.channels, "channel mismatch");
        assert!(y0 + src.height <= self.height && x0 + src.width <= self.width, "paste out of bounds");
        let c = self.channels;
        for y in 0..src.height {
            let dst = ((y0 + y) * self.width + x0) * c;
            let s = y * src.width * c;
            self.data[dst..dst + src.width * c].copy_from_slice(&src.data[s..s + src.width * c]);
            let md = (y0 + y) * self.width + x0;
            let ms = y * src.width;
            self.mask[md..md + src.width].copy_from_slice(&src.mask[ms..ms + src.width]);
        }
    }

    /// Single channel `c` as a 1-channel image sharing this image's mask.
    pub fn channel(&self, c: usize) -> ImageF {
        assert!(c < self.channels);
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        ImageF {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
            mask: self.mask.clone(),
        }
    }

    /// Elementwise map over the data, mask unchanged.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageF {
        ImageF {
            data: self.data.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
            ..*self
        }
    }

    pub fn clamp01(&self) -> ImageF {
        self.map(|v| v.clamp(0.0, 1.0))
    }
}

/// Square filter kernel with an odd side so that it has a centre tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel2D {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::param("kernel size must be odd and at least 1"));
        }
        if taps.len() != size * size {
            return Err(Error::param("kernel taps must hold size x size values"));
        }
        Ok(Kernel2D { size, taps })
    }

    pub fn identity() -> Self {
        Kernel2D {
            size: 1,
            taps: vec![1.0],
        }
    }

    /// Discrete 5-point Laplacian.
    pub fn laplacian() -> Self {
        Kernel2D {
            size: 3,
            taps: vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
        }
    }

    pub fn box_filter(size: usize) -> Result<Self> {
        let v = 1.0 / (size * size) as f64;
        Kernel2D::new(size, vec![v; size * size])
    }

    /// Builds a kernel by sampling `f(dy, dx)` on offsets in `-r..=r`.
    pub fn from_fn(radius: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let size = 2 * radius + 1;
        let r = radius as f64;
        let mut taps = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                taps.push(f(i as f64 - r, j as f64 - r));
            }
        }
        Kernel2D { size, taps }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.size / 2
    }

    #[inline]
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Subtracts the mean tap so the kernel annihilates constants.
    pub fn zero_mean(mut self) -> Self {
        let m = self.sum() / self.taps.len() as f64;
        self.taps.iter_mut().for_each(|t| *t -= m);
        self
    }

    pub fn normalized(mut self) -> Self {
        let s = self.sum();
        self.taps.iter_mut().for_each(|t| *t /= s);
        self
    }
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Filters a 1-channel image with `kernel` (correlation form: the kernel is
/// not flipped), replicate borders, same-size output. An output pixel is valid
/// only if every pixel under the kernel footprint is.
pub fn convolve2d(image: &ImageF, kernel: &Kernel2D) -> ImageF {
    assert_eq!(image.channels, 1, "convolve2d expects a 1-channel image");
    let (h, w) = image.size();
    let k = kernel.size;
    let r = kernel.radius() as isize;
    let mut out = vec![0.0; h * w];

    // Row-sliced accumulation: for each tap, add a shifted copy of the source.
    let mut shifted = vec![0.0; w];
    for (y, out_row) in out.chunks_exact_mut(w).enumerate() {
        for ky in 0..k {
            let sy = clamp_index(y as isize + ky as isize - r, h);
            let src = &image.data[sy * w..(sy + 1) * w];
            for kx in 0..k {
                let tap = kernel.taps[ky * k + kx];
                if tap == 0.0 {
                    continue;
                }
                let dx = kx as isize - r;
                for (x, s) in shifted.iter_mut().enumerate() {
                    *s = src[clamp_index(x as isize + dx, w)];
                }
                for (o, s) in out_row.iter_mut().zip(&shifted) {
                    *o += tap * s;
                }
            }
        }
    }

    let mask = if image.all_valid() {
        vec![true; h * w]
    } else {
        footprint_and(&image.mask, h, w, kernel.radius(), kernel.radius())
    };
    ImageF {
        height: h,
        width: w,
        channels: 1,
        data: out,
        mask,
    }
}

/// AND of `mask` over a `(2ry+1) × (2rx+1)` clamped window around each pixel.
fn footprint_and(mask: &[bool], h: usize, w: usize, ry: usize, rx: usize) -> Vec<bool> {
    let mut rows = vec![true; h * w];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(rx);
            let hi = (x + rx).min(w - 1);
            rows[y * w + x] = mask[y * w + lo..=y * w + hi].iter().all(|&m| m);
        }
    }
    let mut out = vec![true; h * w];
    for y in 0..h {
        let lo = y.saturating_sub(ry);
        let hi = (y + ry).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).all(|yy| rows[yy * w + x]);
        }
    }
    out
}

/// Normalized 1-D Gaussian with radius `ceil(3σ)`.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| {
            let d = i as f64;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable filter: `kernel_x` along rows, then `kernel_y` along columns.
/// Both kernels must have odd length. Works on any channel count.
pub fn separable_filter(image: &ImageF, kernel_x: &[f64], kernel_y: &[f64]) -> ImageF {
    let (h, w, c) = (image.height, image.width, image.channels);
    let rx = (kernel_x.len() / 2) as isize;
    let ry = (kernel_y.len() / 2) as isize;

    let mut tmp = vec![0.0; h * w * c];
    for y in 0..h {
        let row = &image.data[y * w * c..(y + 1) * w * c];
        let dst = &mut tmp[y * w * c..(y + 1) * w * c];
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, &t) in kernel_x.iter().enumerate() {
                    let sx = clamp_index(x as isize + i as isize - rx, w);
                    acc += t * row[sx * c + ch];
                }
                dst[x * c + ch] = acc;
            }
        }
    }

    let mut out = vec![0.0; h * w * c];
    let stride = w * c;
    for y in 0..h {
        let dst = &mut out[y * stride..(y + 1) * stride];
        for (i, &t) in kernel_y.iter().enumerate() {
            let sy = clamp_index(y as isize + i as isize - ry, h);
            let src = &tmp[sy * stride..(sy + 1) * stride];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += t * s;
            }
        }
    }

    let mask = if image.all_valid() {
        vec![true; h * w]
    } else {
        footprint_and(&image.mask, h, w, ry as usize, rx as usize)
    };
    ImageF {
        height: h,
        width: w,
        channels: c,
        data: out,
        mask,
    }
}

/// Gaussian blur with standard deviation `sigma` pixels; `sigma <= 0` copies.
pub fn gaussian_blur(image: &ImageF, sigma: f64) -> ImageF {
    if sigma <= 0.0 {
        return image.clone();
    }
    let k = gaussian_kernel_1d(sigma);
    separable_filter(image, &k, &k)
}

/// Result of [`bilinear_sample`]. Only the first `channels` entries of
/// `value` are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: [f64; 3],
    pub valid: bool,
}

/// Bilinear interpolation at continuous pixel coordinates (pixel centres at
/// integers). The result is invalid when any contributing neighbour lies
/// outside the image or is masked out; out-of-image samples read as zero.
/// A coordinate with zero fractional part only uses its own row/column, so
/// integer positions on the last row or column stay valid.
pub fn bilinear_sample(image: &ImageF, x: f64, y: f64) -> Sample {
    let mut value = [0.0; 3];
    if !x.is_finite() || !y.is_finite() {
        return Sample { value, valid: false };
    }
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < SNAP_EPS {
            r
        } else {
            v
        }
    };
    let (x, y) = (snap(x), snap(y));
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (w, h) = (image.width as isize, image.height as isize);
    let (xi, yi) = (x0 as isize, y0 as isize);

    let mut valid = true;
    let taps = [
        (0isize, 0isize, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ];
    for (dx, dy, wgt) in taps {
        if (dx == 1 && fx == 0.0) || (dy == 1 && fy == 0.0) {
            continue;
        }
        let (sx, sy) = (xi + dx, yi + dy);
        if sx < 0 || sy < 0 || sx >= w || sy >= h {
            valid = false;
            continue;
        }
        let (sx, sy) = (sx as usize, sy as usize);
        if !image.mask[sy * image.width + sx] {
            valid = false;
        }
        let base = (sy * image.width + sx) * image.channels;
        for (c, v) in value.iter_mut().enumerate().take(image.channels) {
            *v += wgt * image.data[base + c];
        }
    }
    Sample { value, valid }
}

/// Luminance via [`LUMA`]; 1-channel input is returned unchanged.
pub fn to_grayscale(image: &ImageF) -> ImageF {
    if image.channels == 1 {
        return image.clone();
    }
    let data = image
        .data
        .chunks_exact(3)
        .map(|p| LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2])
        .collect();
    ImageF {
        height: image.height,
        width: image.width,
        channels: 1,
        data,
        mask: image.mask.clone(),
    }
}

/// Keeps every other pixel in both directions; output is `⌊h/2⌋ × ⌊w/2⌋`.
pub fn decimate2(image: &ImageF) -> ImageF {
    let (h, w, c) = (image.height / 2, image.width / 2, image.channels);
    let mut data = Vec::with_capacity(h * w * c);
    let mut mask = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let base = ((2 * y) * image.width + 2 * x) * c;
            data.extend_from_slice(&image.data[base..base + c]);
            mask.push(image.mask[(2 * y) * image.width + 2 * x]);
        }
    }
    ImageF {
        height: h,
        width: w,
        channels: c,
        data,
        mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn impulse(h: usize, w: usize, y: usize, x: usize) -> ImageF {
        ImageF::from_fn(h, w, |yy, xx| if yy == y && xx == x { 1.0 } else { 0.0 })
    }

    #[test]
    fn identity_kernel_is_identity() {
        let img = ImageF::from_fn(7, 9, |y, x| ((y * 9 + x) % 5) as f64 / 4.0);
        assert_eq!(convolve2d(&img, &Kernel2D::identity()).data(), img.data());
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let img = ImageF::from_fn(6, 6, |_, _| 0.37);
        let out = convolve2d(&img, &Kernel2D::laplacian());
        assert!(out.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn box_kernel_spreads_an_impulse() {
        let img = impulse(7, 7, 3, 3);
        let out = convolve2d(&img, &Kernel2D::box_filter(3).unwrap());
        for y in 0..7 {
            for x in 0..7 {
                let expect = if (2..=4).contains(&y) && (2..=4).contains(&x) { 1.0 / 9.0 } else { 0.0 };
                assert!((out.get(y, x, 0) - expect).abs() < 1e-15, "({y},{x})");
            }
        }
    }

    #[test]
    fn kernel_rejects_even_size() {
        assert!(Kernel2D::new(2, vec![0.0; 4]).is_err());
        assert!(Kernel2D::new(3, vec![0.0; 4]).is_err());
    }

    #[test]
    fn mask_propagates_over_footprint() {
        let mut mask = vec![true; 25];
        mask[12] = false;
        let img = ImageF::from_fn(5, 5, |_, _| 0.5).with_mask(mask).unwrap();
        let out = convolve2d(&img, &Kernel2D::laplacian());
        for y in 0..5usize {
            for x in 0..5usize {
                let near = y.abs_diff(2) <= 1 && x.abs_diff(2) <= 1;
                assert_eq!(out.is_valid(y, x), !near);
            }
        }
        let mut mask = vec![true; 49];
        mask[24] = false;
        let img = ImageF::from_fn(7, 7, |_, _| 0.5).with_mask(mask).unwrap();
        let blurred = gaussian_blur(&img, 0.5);
        assert!(!blurred.is_valid(3, 5));
        assert!(blurred.is_valid(0, 0));
    }

    #[test]
    fn bilinear_integer_and_midpoint() {
        let img = ImageF::from_fn(2, 2, |y, x| (y * 2 + x) as f64 / 3.0);
        let s = bilinear_sample(&img, 1.0, 1.0);
        assert!(s.valid);
        assert_eq!(s.value[0], 1.0);
        let edge = ImageF::from_fn(1, 2, |_, x| x as f64);
        let mid = bilinear_sample(&edge, 0.5, 0.0);
        assert!(mid.valid);
        assert!((mid.value[0] - 0.5).abs() < 1e-15);
        assert!(!bilinear_sample(&img, -1.0, -1.0).valid);
        assert!(!bilinear_sample(&img, 1.5, 0.0).valid);
    }

    #[test]
    fn bilinear_respects_mask() {
        let img = ImageF::from_fn(2, 2, |_, _| 1.0)
            .with_mask(vec![true, false, true, true])
            .unwrap();
        assert!(!bilinear_sample(&img, 0.5, 0.5).valid);
        assert!(bilinear_sample(&img, 0.0, 0.5).valid);
    }

    #[test]
    fn grayscale_weights() {
        let img = ImageF::from_data(1, 2, 3, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let g = to_grayscale(&img);
        assert!((g.get(0, 0, 0) - 1.0).abs() < 1e-12);
        assert!((g.get(0, 1, 0) - 0.299).abs() < 1e-12);
        let gray = ImageF::from_fn(3, 3, |y, x| (y + x) as f64 / 4.0);
        assert_eq!(to_grayscale(&gray), gray);
    }

    #[test]
    fn crop_paste_round_trip() {
        let img = ImageF::from_fn(6, 8, |y, x| (y * 8 + x) as f64 / 48.0);
        let mut canvas = ImageF::new(6, 8, 1);
        canvas.paste(&img.crop(2, 3, 3, 4), 2, 3);
        assert_eq!(canvas.get(3, 4, 0), img.get(3, 4, 0));
        assert_eq!(canvas.get(0, 0, 0), 0.0);
    }

    proptest! {
        #[test]
        fn convolution_is_linear(
            xs in proptest::collection::vec(0.0f64..1.0, 30),
            ys in proptest::collection::vec(0.0f64..1.0, 30),
            taps in proptest::collection::vec(-1.0f64..1.0, 9),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let k = Kernel2D::new(3, taps).unwrap();
            let x = ImageF::from_data(5, 6, 1, xs).unwrap();
            let y = ImageF::from_data(5, 6, 1, ys).unwrap();
            let combo = ImageF::from_data(
                5, 6, 1,
                x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect(),
            ).unwrap();
            let lhs = convolve2d(&combo, &k);
            let cx = convolve2d(&x, &k);
            let cy = convolve2d(&y, &k);
            for i in 0..30 {
                let rhs = a * cx.data()[i] + b * cy.data()[i];
                prop_assert!((lhs.data()[i] - rhs).abs() < 1e-6);
            }
        }

        #[test]
        fn delta_kernel_is_identity(xs in proptest::collection::vec(0.0f64..1.0, 20)) {
            let mut taps = vec![0.0; 9];
            taps[4] = 1.0;
            let k = Kernel2D::new(3, taps).unwrap();
            let x = ImageF::from_data(4, 5, 1, xs).unwrap();
            let out = convolve2d(&x, &k);
            prop_assert_eq!(out.data(), x.data());
        }
    }
}
