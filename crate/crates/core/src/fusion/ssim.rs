//! Gaussian-windowed SSIM over valid window positions, with the analytic
//! gradient of the mean score with respect to the first image.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;

use crate::{Error, ImageF, Result};

pub const WINDOW: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

/// Normalized 11-tap Gaussian; the 2-D window is its outer product.
pub fn window_taps() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let r = (WINDOW / 2) as f64;
    for (i, t) in g.iter_mut().enumerate() {
        let d = i as f64 - r;
        *t = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|t| *t /= s);
    g
}

/// Valid-mode separable filtering of an `h × w` plane.
fn filter_valid(src: &[f64], h: usize, w: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (hm, wm) = (h + 1 - WINDOW, w + 1 - WINDOW);
    let mut rows = vec![0.0; h * wm];
    for y in 0..h {
        let s = &src[y * w..(y + 1) * w];
        let out = &mut rows[y * wm..(y + 1) * wm];
        for (v, &gv) in g.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(&s[v..v + wm]) {
                *o += gv * x;
            }
        }
    }
    let mut out = vec![0.0; hm * wm];
    for i in 0..hm {
        let o = &mut out[i * wm..(i + 1) * wm];
        for (u, &gu) in g.iter().enumerate() {
            for (a, &b) in o.iter_mut().zip(&rows[(i + u) * wm..(i + u + 1) * wm]) {
                *a += gu * b;
            }
        }
    }
    out
}

/// Transpose of [`filter_valid`]: scatters per-window values back onto the
/// `h × w` pixel grid.
fn filter_full(win: &[f64], h: usize, w: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (hm, wm) = (h + 1 - WINDOW, w + 1 - WINDOW);
    let mut rows = vec![0.0; hm * w];
    for i in 0..hm {
        let s = &win[i * wm..(i + 1) * wm];
        let out = &mut rows[i * w..(i + 1) * w];
        for (v, &gv) in g.iter().enumerate() {
            for (o, &x) in out[v..v + wm].iter_mut().zip(s) {
                *o += gv * x;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for i in 0..hm {
        let s = &rows[i * w..(i + 1) * w];
        for (u, &gu) in g.iter().enumerate() {
            for (a, &b) in out[(i + u) * w..(i + u + 1) * w].iter_mut().zip(s) {
                *a += gu * b;
            }
        }
    }
    out
}

/// Windows whose footprint is valid in both images.
fn valid_windows(x: &ImageF, y: &ImageF) -> Vec<bool> {
    let (h, w) = x.size();
    let (hm, wm) = (h + 1 - WINDOW, w + 1 - WINDOW);
    if x.all_valid() && y.all_valid() {
        return vec![true; hm * wm];
    }
    let mut integral = vec![0u32; (h + 1) * (w + 1)];
    for r in 0..h {
        for c in 0..w {
            let bad = !(x.mask()[r * w + c] && y.mask()[r * w + c]) as u32;
            integral[(r + 1) * (w + 1) + c + 1] =
                bad + integral[r * (w + 1) + c + 1] + integral[(r + 1) * (w + 1) + c] - integral[r * (w + 1) + c];
        }
    }
    let mut out = vec![false; hm * wm];
    for i in 0..hm {
        for j in 0..wm {
            let at = |r: usize, c: usize| integral[r * (w + 1) + c];
            let bad = at(i + WINDOW, j + WINDOW) + at(i, j) - at(i, j + WINDOW) - at(i + WINDOW, j);
            out[i * wm + j] = bad == 0;
        }
    }
    out
}

fn check(x: &ImageF, y: &ImageF) -> Result<()> {
    if x.channels() != 1 || y.channels() != 1 {
        return Err(Error::param("ssim expects 1-channel images"));
    }
    if x.size() != y.size() {
        return Err(Error::SizeMismatch {
            expected: x.size(),
            found: y.size(),
        });
    }
    let (h, w) = x.size();
    if h < WINDOW || w < WINDOW {
        return Err(Error::ImageTooSmall {
            min: WINDOW,
            height: h,
            width: w,
        });
    }
    Ok(())
}

fn compute(x: &ImageF, y: &ImageF, want_gradient: bool) -> Result<(f64, Option<ImageF>)> {
    check(x, y)?;
    let (h, w) = x.size();
    let g = window_taps();
    let (xd, yd) = (x.data(), y.data());
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let mx = filter_valid(xd, h, w, &g);
    let my = filter_valid(yd, h, w, &g);
    let exx = filter_valid(&sq(xd, xd), h, w, &g);
    let eyy = filter_valid(&sq(yd, yd), h, w, &g);
    let exy = filter_valid(&sq(xd, yd), h, w, &g);
    let valid = valid_windows(x, y);
    let count = valid.iter().filter(|&&v| v).count();
    if count == 0 {
        return Err(Error::NoValidWindow);
    }
    let n = valid.len();
    let (mut da, mut db, mut dc) = if want_gradient {
        (vec![0.0; n], vec![0.0; n], vec![0.0; n])
    } else {
        (vec![], vec![], vec![])
    };
    let inv_m = 1.0 / count as f64;
    let mut total = 0.0;
    for k in 0..n {
        if !valid[k] {
            continue;
        }
        let (ux, uy) = (mx[k], my[k]);
        let num1 = 2.0 * ux * uy + C1;
        let num2 = 2.0 * (exy[k] - ux * uy) + C2;
        let den1 = ux * ux + uy * uy + C1;
        let den2 = (exx[k] - ux * ux) + (eyy[k] - uy * uy) + C2;
        let d = den1 * den2;
        let s = num1 * num2 / d;
        total += s;
        if want_gradient {
            let dn = 2.0 * uy * (num2 - num1);
            let dd = 2.0 * ux * (den2 - den1);
            da[k] = inv_m * (dn - s * dd) / d;
            db[k] = -inv_m * s / den2;
            dc[k] = inv_m * 2.0 * num1 / d;
        }
    }
    let score = total * inv_m;
    if !want_gradient {
        return Ok((score, None));
    }
    let ga = filter_full(&da, h, w, &g);
    let gb = filter_full(&db, h, w, &g);
    let gc = filter_full(&dc, h, w, &g);
    let grad: Vec<f64> = (0..h * w).map(|p| ga[p] + 2.0 * xd[p] * gb[p] + yd[p] * gc[p]).collect();
    Ok((score, Some(ImageF::from_data(h, w, 1, grad)?)))
}

/// Mean SSIM over valid windows and its gradient with respect to `x`.
pub fn ssim(x: &ImageF, y: &ImageF) -> Result<(f64, ImageF)> {
    let (s, g) = compute(x, y, true)?;
    Ok((s, g.expect("gradient requested")))
}

/// Mean SSIM only.
pub fn ssim_score(x: &ImageF, y: &ImageF) -> Result<f64> {
    compute(x, y, false).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture_image;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct per-window evaluation with the 2-D weights.
    fn brute_force(x: &ImageF, y: &ImageF) -> f64 {
        let g = window_taps();
        let (h, w) = x.size();
        let mut total = 0.0;
        let mut count = 0;
        for i in 0..=h - WINDOW {
            for j in 0..=w - WINDOW {
                let (mut ux, mut uy, mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for u in 0..WINDOW {
                    for v in 0..WINDOW {
                        let wt = g[u] * g[v];
                        ux += wt * x.get(i + u, j + v, 0);
                        uy += wt * y.get(i + u, j + v, 0);
                    }
                }
                for u in 0..WINDOW {
                    for v in 0..WINDOW {
                        let wt = g[u] * g[v];
                        let (a, b) = (x.get(i + u, j + v, 0) - ux, y.get(i + u, j + v, 0) - uy);
                        vx += wt * a * a;
                        vy += wt * b * b;
                        cxy += wt * a * b;
                    }
                }
                total += (2.0 * ux * uy + C1) * (2.0 * cxy + C2) / ((ux * ux + uy * uy + C1) * (vx + vy + C2));
                count += 1;
            }
        }
        total / count as f64
    }

    fn random_image(rng: &mut ChaCha8Rng, n: usize) -> ImageF {
        ImageF::from_fn(n, n, |_, _| rng.gen::<f64>())
    }

    #[test]
    fn self_similarity_is_one() {
        for seed in 0..5 {
            let x = texture_image(32, 40, seed);
            assert!((ssim_score(&x, &x).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn inverted_halves_are_anticorrelated() {
        let x = ImageF::from_fn(32, 32, |_, c| if c < 16 { 0.0 } else { 1.0 });
        let y = x.map(|v| 1.0 - v);
        let s = ssim_score(&x, &y).unwrap();
        assert!(s < 0.0);
        assert!((s - brute_force(&x, &y)).abs() < 1e-6);
    }

    #[test]
    fn matches_brute_force_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = random_image(&mut rng, 32);
            let noise = random_image(&mut rng, 32);
            let y = ImageF::from_fn(32, 32, |r, c| 0.5 * x.get(r, c, 0) + 0.5 * noise.get(r, c, 0));
            assert!((ssim_score(&x, &y).unwrap() - brute_force(&x, &y)).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_image(&mut rng, 32);
        let y = ImageF::from_fn(32, 32, |r, c| 0.6 * x.get(r, c, 0) + 0.4 * rng.gen::<f64>());
        let (_, grad) = ssim(&x, &y).unwrap();
        let h = 1e-4;
        for _ in 0..20 {
            let (r, c) = (rng.gen_range(0..32), rng.gen_range(0..32));
            let mut xp = x.clone();
            xp.set(r, c, 0, x.get(r, c, 0) + h);
            let mut xm = x.clone();
            xm.set(r, c, 0, x.get(r, c, 0) - h);
            let fd = (ssim_score(&xp, &y).unwrap() - ssim_score(&xm, &y).unwrap()) / (2.0 * h);
            let an = grad.get(r, c, 0);
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-4, "pixel ({r},{c}): analytic {an} numeric {fd}");
        }
    }

    #[test]
    fn masked_windows_and_errors() {
        let x = texture_image(24, 24, 1);
        let mut mask = vec![true; 24 * 24];
        mask[0] = false;
        let xm = x.clone().with_mask(mask).unwrap();
        let s = ssim_score(&xm, &x.map(|v| 0.9 * v)).unwrap();
        assert!(s.is_finite());
        let dead = x.clone().with_mask(vec![false; 24 * 24]).unwrap();
        assert_eq!(ssim_score(&dead, &x), Err(Error::NoValidWindow));
        assert!(matches!(ssim_score(&texture_image(10, 30, 1), &texture_image(10, 30, 2)), Err(Error::ImageTooSmall { .. })));
        let zero = ImageF::new(16, 16, 1);
        let (s, g) = ssim(&zero, &zero).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && g.data().iter().all(|v| v.is_finite()));
    }
}
