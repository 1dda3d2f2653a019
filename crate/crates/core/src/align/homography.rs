//! Planar homographies: normalized DLT, RANSAC, and the canvas-preserving
//! modification that keeps warped content at nonnegative coordinates.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::smallest_eigenvector;
use crate::{Error, Result};

const NORMALIZE_EPS: f64 = 1e-12;
/// Corners this close to zero (numerical noise on near-identity estimates)
/// do not grow the canvas by a pixel.
const OFFSET_EPS: f64 = 1e-6;

pub type Point = (f64, f64);

/// 3×3 projective transform acting on column vectors `(x, y, 1)`.
/// Stored normalized so that `m[2][2] == 1` whenever `|m[2][2]| > 1e-12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("homography entries must be finite"));
        }
        let h = Homography { m }.normalized();
        if h.determinant().abs() < 1e-300 || h.determinant() == 0.0 {
            return Err(Error::NotInvertible);
        }
        Ok(h)
    }

    pub fn from_row_major(v: [f64; 9]) -> Result<Self> {
        Homography::new([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn identity() -> Self {
        Homography {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    fn normalized(mut self) -> Self {
        let s = self.m[2][2];
        if s.abs() > NORMALIZE_EPS && s != 1.0 {
            for row in &mut self.m {
                for v in row {
                    *v /= s;
                }
            }
        }
        self
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Homogeneous image `(x', y', w)` of `(x, y, 1)`.
    #[inline]
    pub fn project(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let m = &self.m;
        (
            m[0][0] * x + m[0][1] * y + m[0][2],
            m[1][0] * x + m[1][1] * y + m[1][2],
            m[2][0] * x + m[2][1] * y + m[2][2],
        )
    }

    /// Maps a point; `None` when it lands on the plane at infinity.
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> Option<Point> {
        let (u, v, w) = self.project(x, y);
        if w.abs() < NORMALIZE_EPS {
            None
        } else {
            Some((u / w, v / w))
        }
    }

    pub fn inverse(&self) -> Result<Homography> {
        let m = &self.m;
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NotInvertible);
        }
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        let mut inv = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                inv[i][j] = adj[i][j] / det;
            }
        }
        Ok(Homography { m: inv }.normalized())
    }

    /// `self · other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Homography {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Homography { m: out }.normalized()
    }

    /// Largest absolute entry difference after normalization.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Pixel-centre corners of an `h × w` frame.
pub fn frame_corners((h, w): (usize, usize)) -> [Point; 4] {
    let (x1, y1) = (w as f64 - 1.0, h as f64 - 1.0);
    [(0.0, 0.0), (x1, 0.0), (0.0, y1), (x1, y1)]
}

/// Mean distance between the images of the frame corners under two
/// homographies. Infinite if either maps a corner to infinity.
pub fn corner_reprojection_error(estimated: &Homography, reference: &Homography, size: (usize, usize)) -> f64 {
    let corners = frame_corners(size);
    let mut total = 0.0;
    for (x, y) in corners {
        match (estimated.apply(x, y), reference.apply(x, y)) {
            (Some(a), Some(b)) => total += ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
            _ => return f64::INFINITY,
        }
    }
    total / 4.0
}

/// Similarity taking the points to zero centroid and mean distance √2.
fn normalizing_transform(points: &[Point]) -> Result<Homography> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist < 1e-12 {
        return Err(Error::param("degenerate point configuration"));
    }
    let s = core::f64::consts::SQRT_2 / mean_dist;
    Ok(Homography {
        m: [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]],
    })
}

/// Normalized direct linear transform: the homography mapping `src[i]` to
/// `dst[i]` in the algebraic least-squares sense. Needs at least 4 pairs.
pub fn dlt(src: &[Point], dst: &[Point]) -> Result<Homography> {
    if src.len() != dst.len() {
        return Err(Error::param("correspondence lists differ in length"));
    }
    if src.len() < 4 {
        return Err(Error::param("at least 4 correspondences are required"));
    }
    let t_src = normalizing_transform(src)?;
    let t_dst = normalizing_transform(dst)?;

    // Accumulate AᵀA directly; A has two rows per correspondence.
    let mut ata = [0.0; 81];
    let mut accumulate = |row: &[f64; 9]| {
        for i in 0..9 {
            if row[i] == 0.0 {
                continue;
            }
            for j in 0..9 {
                ata[i * 9 + j] += row[i] * row[j];
            }
        }
    };
    for (p, q) in src.iter().zip(dst) {
        let (x, y) = apply_affine(&t_src, *p);
        let (u, v) = apply_affine(&t_dst, *q);
        accumulate(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        accumulate(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let h = smallest_eigenvector(&ata, 9);
    let hn = Homography {
        m: [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]],
    };
    let full = t_dst.inverse()?.compose(&hn).compose(&t_src);
    Homography::new(full.m)
}

#[inline]
fn apply_affine(h: &Homography, p: Point) -> Point {
    let m = &h.m;
    (m[0][0] * p.0 + m[0][1] * p.1 + m[0][2], m[1][0] * p.0 + m[1][1] * p.1 + m[1][2])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Symmetric transfer error bound for inliers, pixels.
    pub inlier_threshold: f64,
    /// Target probability of drawing at least one all-inlier sample. A value
    /// of 1 disables adaptive termination.
    pub confidence: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            inlier_threshold: 3.0,
            confidence: 0.995,
            max_iterations: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomographyEstimate {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    pub iterations: usize,
}

/// `sqrt(|H a − b|² + |H⁻¹ b − a|²)`, infinite at the plane at infinity.
pub fn symmetric_transfer_error(h: &Homography, h_inv: &Homography, a: Point, b: Point) -> f64 {
    match (h.apply(a.0, a.1), h_inv.apply(b.0, b.1)) {
        (Some(fa), Some(ib)) => {
            ((fa.0 - b.0).powi(2) + (fa.1 - b.1).powi(2) + (ib.0 - a.0).powi(2) + (ib.1 - a.1).powi(2)).sqrt()
        }
        _ => f64::INFINITY,
    }
}

fn score(h: &Homography, a: &[Point], b: &[Point], threshold: f64) -> Option<(usize, f64, Vec<bool>)> {
    let h_inv = h.inverse().ok()?;
    let mut mask = vec![false; a.len()];
    let mut count = 0;
    let mut err_sum = 0.0;
    for (i, (&p, &q)) in a.iter().zip(b).enumerate() {
        let e = symmetric_transfer_error(h, &h_inv, p, q);
        if e < threshold {
            mask[i] = true;
            count += 1;
            err_sum += e;
        }
    }
    Some((count, err_sum, mask))
}

fn collinear(p: Point, q: Point, r: Point) -> bool {
    let cross = (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0);
    let scale = ((q.0 - p.0).abs() + (q.1 - p.1).abs()) * ((r.0 - p.0).abs() + (r.1 - p.1).abs());
    cross.abs() <= 1e-9 * scale.max(1e-12)
}

fn degenerate_sample(pts: &[Point; 4]) -> bool {
    (0..4).any(|skip| {
        let idx: Vec<usize> = (0..4).filter(|&i| i != skip).collect();
        collinear(pts[idx[0]], pts[idx[1]], pts[idx[2]])
    })
}

/// RANSAC over 4-point samples with normalized-DLT hypotheses, adaptive
/// iteration count, and a final least-squares refit on the inliers.
/// The model maps `points_a` onto `points_b`.
pub fn estimate_homography(points_a: &[Point], points_b: &[Point], params: &RansacParams) -> Result<HomographyEstimate> {
    let n = points_a.len();
    if n != points_b.len() {
        return Err(Error::param("correspondence lists differ in length"));
    }
    if n < 4 {
        return Err(Error::param("at least 4 correspondences are required"));
    }
    if params.inlier_threshold <= 0.0 || !(0.0..=1.0).contains(&params.confidence) {
        return Err(Error::param("RANSAC threshold must be positive and confidence in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, f64, Homography)> = None;
    let mut needed = params.max_iterations as f64;
    let mut iterations = 0;

    while (iterations as f64) < needed.min(params.max_iterations as f64) {
        iterations += 1;
        let mut idx = [0usize; 4];
        let mut k = 0;
        while k < 4 {
            let c = rng.gen_range(0..n);
            if !idx[..k].contains(&c) {
                idx[k] = c;
                k += 1;
            }
        }
        let sa = idx.map(|i| points_a[i]);
        let sb = idx.map(|i| points_b[i]);
        if degenerate_sample(&sa) || degenerate_sample(&sb) {
            continue;
        }
        let Ok(h) = dlt(&sa, &sb) else { continue };
        let Some((count, err, _)) = score(&h, points_a, points_b, params.inlier_threshold) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((bc, be, _)) => count > *bc || (count == *bc && err < *be),
        };
        if better {
            best = Some((count, err, h));
            let w = count as f64 / n as f64;
            let denom = (1.0 - w.powi(4)).ln();
            needed = if params.confidence >= 1.0 || denom >= 0.0 {
                params.max_iterations as f64
            } else if denom == f64::NEG_INFINITY {
                0.0
            } else {
                ((1.0 - params.confidence).ln() / denom).ceil()
            };
        }
    }

    let Some((best_count, _, mut h)) = best.filter(|b| b.0 >= 4) else {
        return Err(Error::EstimationFailed {
            correspondences: n,
            best_inliers: best.map_or(0, |b| b.0),
        });
    };
    let (_, _, mut mask) = score(&h, points_a, points_b, params.inlier_threshold).ok_or(Error::NotInvertible)?;
    let mut count = best_count;

    for _ in 0..5 {
        let sa: Vec<Point> = points_a.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
        let sb: Vec<Point> = points_b.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
        let Ok(refit) = dlt(&sa, &sb) else { break };
        let Some((c, _, m)) = score(&refit, points_a, points_b, params.inlier_threshold) else {
            break;
        };
        if c < count {
            break;
        }
        let changed = m != mask;
        h = refit;
        mask = m;
        count = c;
        if !changed {
            break;
        }
    }

    Ok(HomographyEstimate {
        homography: h,
        inliers: mask,
        inlier_count: count,
        iterations,
    })
}

/// Outcome of [`modify_homography`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedHomography {
    pub homography: Homography,
    /// Translation `(dx, dy)` prepended to the input homography.
    pub offset: (usize, usize),
    /// `(height, width)` of a canvas enclosing the warped source and the
    /// translated reference frame.
    pub canvas_size: (usize, usize),
}

/// Prepends the smallest integer translation that moves every warped source
/// corner to nonnegative coordinates, and sizes a canvas that also holds the
/// reference frame (same size as the source) after the same translation.
pub fn modify_homography(h: &Homography, source_size: (usize, usize)) -> Result<ModifiedHomography> {
    if h.determinant() == 0.0 {
        return Err(Error::NotInvertible);
    }
    let mut warped = [(0.0, 0.0); 4];
    for (slot, (x, y)) in warped.iter_mut().zip(frame_corners(source_size)) {
        let (u, v, w) = h.project(x, y);
        if w <= NORMALIZE_EPS {
            return Err(Error::DegenerateHomography);
        }
        *slot = (u / w, v / w);
    }
    let min_x = warped.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let min_y = warped.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_x = warped.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let max_y = warped.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    let shift = |min: f64| -> usize {
        if -min <= OFFSET_EPS {
            0
        } else {
            (-min).ceil() as usize
        }
    };
    let mut dx = shift(min_x);
    let mut dy = shift(min_y);
    let mut modified = Homography::translation(dx as f64, dy as f64).compose(h);
    // Guard the nonnegativity contract against rounding in the product.
    for _ in 0..2 {
        let mut bump = (false, false);
        for (x, y) in frame_corners(source_size) {
            if let Some((u, v)) = modified.apply(x, y) {
                bump.0 |= dx > 0 && u < 0.0;
                bump.1 |= dy > 0 && v < 0.0;
            }
        }
        if !bump.0 && !bump.1 {
            break;
        }
        dx += bump.0 as usize;
        dy += bump.1 as usize;
        modified = Homography::translation(dx as f64, dy as f64).compose(h);
    }

    let (sh, sw) = source_size;
    let extent = |max: f64, offset: usize, frame: usize| -> usize {
        let content = (max + offset as f64 - OFFSET_EPS).ceil().max(0.0) as usize + 1;
        content.max(frame + offset)
    };
    let width = extent(max_x, dx, sw);
    let height = extent(max_y, dy, sh);
    Ok(ModifiedHomography {
        homography: modified,
        offset: (dx, dy),
        canvas_size: (height, width),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid_points(n: usize) -> Vec<Point> {
        (0..n).map(|i| ((i % 5) as f64 * 97.0 + 13.0, (i / 5) as f64 * 83.0 + 29.0 + (i % 3) as f64 * 7.0)).collect()
    }

    fn planted() -> Homography {
        Homography::new([[1.02, 0.03, 12.0], [-0.02, 0.98, -7.0], [2e-5, -1.5e-5, 1.0]]).unwrap()
    }

    /// Least-squares oracle for a pure translation: the mean displacement.
    fn translation_oracle(a: &[Point], b: &[Point]) -> (f64, f64) {
        let n = a.len() as f64;
        (
            a.iter().zip(b).map(|(p, q)| q.0 - p.0).sum::<f64>() / n,
            a.iter().zip(b).map(|(p, q)| q.1 - p.1).sum::<f64>() / n,
        )
    }

    #[test]
    fn identity_from_four_points() {
        let a = [(0.0, 0.0), (100.0, 0.0), (0.0, 50.0), (100.0, 50.0)];
        let est = estimate_homography(&a, &a, &RansacParams::default()).unwrap();
        assert!(est.homography.max_abs_diff(&Homography::identity()) < 1e-9);
    }

    #[test]
    fn translation_matches_least_squares_oracle() {
        let a = grid_points(20);
        let b: Vec<Point> = a.iter().map(|p| (p.0 + 7.0, p.1 - 3.0)).collect();
        let (tx, ty) = translation_oracle(&a, &b);
        let est = estimate_homography(&a, &b, &RansacParams::default()).unwrap();
        assert!(est.homography.max_abs_diff(&Homography::translation(tx, ty)) < 1e-6);
        assert!((tx - 7.0).abs() < 1e-12 && (ty + 3.0).abs() < 1e-12);
        assert_eq!(est.inlier_count, 20);
    }

    #[test]
    fn recovers_planted_homography_with_outliers() {
        let h = planted();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a: Vec<Point> = (0..20).map(|_| (rng.gen_range(0.0..511.0), rng.gen_range(0.0..511.0))).collect();
        let mut b: Vec<Point> = a.iter().map(|p| h.apply(p.0, p.1).unwrap()).collect();
        for _ in 0..10 {
            a.push((rng.gen_range(0.0..511.0), rng.gen_range(0.0..511.0)));
            b.push((rng.gen_range(0.0..511.0), rng.gen_range(0.0..511.0)));
        }
        let est = estimate_homography(&a, &b, &RansacParams::default()).unwrap();
        let err = corner_reprojection_error(&est.homography, &h, (512, 512));
        assert!(err < 0.5, "corner error {err}");
        assert!(est.inliers[..20].iter().all(|&m| m));
    }

    #[test]
    fn too_few_points_and_failure() {
        let a = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        assert!(matches!(
            estimate_homography(&a, &a, &RansacParams::default()),
            Err(Error::InvalidParameter(_))
        ));
        // Four collinear points never yield a hypothesis.
        let line = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        assert!(matches!(
            estimate_homography(&line, &line, &RansacParams::default()),
            Err(Error::EstimationFailed { .. })
        ));
    }

    #[test]
    fn modify_identity_and_translation() {
        let m = modify_homography(&Homography::identity(), (480, 640)).unwrap();
        assert_eq!(m.offset, (0, 0));
        assert_eq!(m.canvas_size, (480, 640));
        let m = modify_homography(&Homography::translation(-10.0, -5.0), (480, 640)).unwrap();
        assert_eq!(m.offset, (10, 5));
        assert_eq!(m.homography, Homography::identity());
        assert_eq!(m.canvas_size, (485, 650));
    }

    #[test]
    fn modify_rejects_points_at_infinity() {
        let h = Homography::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-0.01, 0.0, 1.0]]).unwrap();
        assert_eq!(modify_homography(&h, (200, 200)), Err(Error::DegenerateHomography));
    }

    proptest! {
        #[test]
        fn dlt_is_exact_on_noise_free_points(
            a in -0.2f64..0.2, b in -0.2f64..0.2, c in -0.2f64..0.2, d in -0.2f64..0.2,
            tx in -50.0f64..50.0, ty in -50.0f64..50.0,
            g in -3e-4f64..3e-4, k in -3e-4f64..3e-4,
        ) {
            let h = Homography::new([[1.0 + a, b, tx], [c, 1.0 + d, ty], [g, k, 1.0]]).unwrap();
            let src = grid_points(12);
            let dst: Vec<Point> = src.iter().map(|p| h.apply(p.0, p.1).unwrap()).collect();
            let est = dlt(&src, &dst).unwrap();
            let m = est.matrix();
            let t = h.matrix();
            let frob = (0..3).flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| (m[i][j] - t[i][j]).powi(2)).sum::<f64>().sqrt();
            prop_assert!(frob < 1e-6, "frobenius {}", frob);
        }

        #[test]
        fn adding_exact_inliers_never_loses_inliers(seed in 0u64..1000, extra in 1usize..10) {
            let h = planted();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a: Vec<Point> = Vec::new();
            let mut b: Vec<Point> = Vec::new();
            for i in 0..24 {
                let p = (rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0));
                a.push(p);
                if i % 3 == 2 {
                    b.push((rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0)));
                } else {
                    b.push(h.apply(p.0, p.1).unwrap());
                }
            }
            let params = RansacParams { confidence: 1.0, max_iterations: 300, ..Default::default() };
            let base = estimate_homography(&a, &b, &params).unwrap().inlier_count;
            for _ in 0..extra {
                let p = (rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0));
                a.push(p);
                b.push(h.apply(p.0, p.1).unwrap());
            }
            let more = estimate_homography(&a, &b, &params).unwrap().inlier_count;
            prop_assert!(more >= base, "{} < {}", more, base);
        }

        #[test]
        fn modified_corners_are_nonnegative(
            a in -0.3f64..0.3, b in -0.3f64..0.3, c in -0.3f64..0.3, d in -0.3f64..0.3,
            tx in -300.0f64..300.0, ty in -300.0f64..300.0,
            g in -4e-4f64..4e-4, k in -4e-4f64..4e-4,
        ) {
            let h = Homography::new([[1.0 + a, b, tx], [c, 1.0 + d, ty], [g, k, 1.0]]).unwrap();
            let m = modify_homography(&h, (512, 512)).unwrap();
            for (x, y) in frame_corners((512, 512)) {
                let (u, v) = m.homography.apply(x, y).unwrap();
                prop_assert!(u >= 0.0 && v >= 0.0, "({}, {})", u, v);
                prop_assert!(u <= m.canvas_size.1 as f64 - 1.0 + 1e-6);
                prop_assert!(v <= m.canvas_size.0 as f64 - 1.0 + 1e-6);
            }
        }
    }
}
