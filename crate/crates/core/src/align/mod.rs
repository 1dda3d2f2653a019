//! Registration of every view into the benchmark view's frame.
//!
//! Each non-benchmark view goes through detect → describe → match → RANSAC;
//! the estimated homography is then modified with an integer translation so
//! that no warped content lands at negative coordinates, and all views are
//! warped onto one shared canvas so block positions correspond across views.

mod features;
mod homography;

use alloc::boxed::Box;
use alloc::vec::Vec;

pub use features::{
    compute_descriptors, detect_features, match_features, Descriptor, Feature, IntegralImage, Keypoint, Match,
    DESCRIPTOR_LEN, MIN_DETECT_SIZE,
};
pub use homography::{
    corner_reprojection_error, dlt, estimate_homography, frame_corners, modify_homography,
    symmetric_transfer_error, Homography, HomographyEstimate, ModifiedHomography, Point, RansacParams,
};

use crate::grid::ViewGrid;
use crate::image::{bilinear_sample, to_grayscale};
use crate::{Error, Executor, ImageF, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignParams {
    /// Minimum Hessian-determinant response for a keypoint.
    pub detect_threshold: f64,
    pub max_points: usize,
    pub ratio_threshold: f64,
    /// RANSAC settings; view `v` uses seed `ransac.seed + v`.
    pub ransac: RansacParams,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            detect_threshold: 2e-5,
            max_points: 1500,
            ratio_threshold: 0.75,
            ransac: RansacParams::default(),
        }
    }
}

/// Inverse-mapping warp onto a `canvas_size` canvas: each canvas pixel is
/// pulled through `h⁻¹` and bilinearly sampled. Pixels that fall outside the
/// source are zero and invalid.
pub fn warp_image(image: &ImageF, h: &Homography, canvas_size: (usize, usize)) -> Result<ImageF> {
    let inv = h.inverse()?;
    let (ch, cw) = canvas_size;
    let c = image.channels();
    let mut out = ImageF::new(ch, cw, c);
    for v in 0..ch {
        for u in 0..cw {
            let (x, y, w) = inv.project(u as f64, v as f64);
            let idx = v * cw + u;
            let sample = if w > 1e-12 {
                bilinear_sample(image, x / w, y / w)
            } else {
                crate::image::Sample {
                    value: [0.0; 3],
                    valid: false,
                }
            };
            if sample.valid {
                out.data_mut()[idx * c..(idx + 1) * c].copy_from_slice(&sample.value[..c]);
            }
            out.mask_mut()[idx] = sample.valid;
        }
    }
    Ok(out)
}

/// Features of one (grayscale) image.
pub fn extract(image: &ImageF, params: &AlignParams) -> Result<Vec<Feature>> {
    let gray = to_grayscale(image);
    let kps = detect_features(&gray, params.detect_threshold, params.max_points)?;
    Ok(compute_descriptors(&gray, &kps))
}

/// Homography from one view into the benchmark frame, with match statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewRegistration {
    pub view_index: usize,
    /// Maps view pixel coordinates to benchmark pixel coordinates.
    pub homography: Homography,
    pub match_count: usize,
    pub inlier_count: usize,
}

/// Estimates the view → benchmark homography from feature matches.
pub fn register_pair(
    view: &[Feature],
    benchmark: &[Feature],
    params: &AlignParams,
    seed: u64,
) -> Result<(Homography, usize, usize)> {
    let da: Vec<Descriptor> = view.iter().map(|f| f.descriptor.clone()).collect();
    let db: Vec<Descriptor> = benchmark.iter().map(|f| f.descriptor.clone()).collect();
    let matches = match_features(&da, &db, params.ratio_threshold);
    let pa: Vec<Point> = matches.iter().map(|m| (view[m.index_a].keypoint.x, view[m.index_a].keypoint.y)).collect();
    let pb: Vec<Point> = matches
        .iter()
        .map(|m| (benchmark[m.index_b].keypoint.x, benchmark[m.index_b].keypoint.y))
        .collect();
    if pa.len() < 4 {
        return Err(Error::EstimationFailed {
            correspondences: pa.len(),
            best_inliers: 0,
        });
    }
    let ransac = RansacParams { seed, ..params.ransac };
    let est = estimate_homography(&pa, &pb, &ransac)?;
    Ok((est.homography, matches.len(), est.inlier_count))
}

/// Registers every view against the benchmark. The benchmark itself gets
/// the identity. Failures are reported per view.
pub fn register_grid<E: Executor>(
    grid: &ViewGrid,
    benchmark_index: usize,
    params: &AlignParams,
    exec: &E,
) -> Result<Vec<Result<ViewRegistration>>> {
    if benchmark_index >= grid.len() {
        return Err(Error::param("benchmark index out of range"));
    }
    let bench = extract(&grid.view(benchmark_index).image, params)?;
    Ok(exec.map(grid.len(), |i| {
        if i == benchmark_index {
            return Ok(ViewRegistration {
                view_index: i,
                homography: Homography::identity(),
                match_count: bench.len(),
                inlier_count: bench.len(),
            });
        }
        let seed = params.ransac.seed.wrapping_add(i as u64);
        extract(&grid.view(i).image, params)
            .and_then(|f| register_pair(&f, &bench, params, seed))
            .map(|(homography, match_count, inlier_count)| ViewRegistration {
                view_index: i,
                homography,
                match_count,
                inlier_count,
            })
            .map_err(|e| Error::ViewAlignment {
                view: i,
                source: Box::new(e),
            })
    }))
}

/// A view warped onto the shared canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedView {
    pub view_index: usize,
    pub image: ImageF,
    /// Canvas position `(dx, dy)` of the benchmark frame origin.
    pub offset: (usize, usize),
    /// Estimated view → benchmark homography, before modification.
    pub homography: Homography,
    /// `T(dx, dy) · homography`: view → canvas.
    pub homography_total: Homography,
    pub match_count: usize,
    pub inlier_count: usize,
}

/// Shared canvas for a set of registrations: offset of the benchmark frame
/// and canvas `(height, width)`.
pub fn union_canvas(registrations: &[ViewRegistration], size: (usize, usize)) -> Result<((usize, usize), (usize, usize))> {
    let mut mods = Vec::with_capacity(registrations.len());
    for r in registrations {
        mods.push(modify_homography(&r.homography, size).map_err(|e| Error::ViewAlignment {
            view: r.view_index,
            source: Box::new(e),
        })?);
    }
    let dx = mods.iter().map(|m| m.offset.0).max().unwrap_or(0);
    let dy = mods.iter().map(|m| m.offset.1).max().unwrap_or(0);
    let w = mods.iter().map(|m| m.canvas_size.1 + dx - m.offset.0).max().unwrap_or(size.1);
    let h = mods.iter().map(|m| m.canvas_size.0 + dy - m.offset.1).max().unwrap_or(size.0);
    Ok(((dx, dy), (h, w)))
}

/// Warps every registered view onto the union canvas.
pub fn warp_registered<E: Executor>(
    grid: &ViewGrid,
    registrations: &[ViewRegistration],
    exec: &E,
) -> Result<Vec<AlignedView>> {
    let (offset, canvas) = union_canvas(registrations, grid.view_size())?;
    let shift = Homography::translation(offset.0 as f64, offset.1 as f64);
    exec.map(registrations.len(), |k| {
        let r = &registrations[k];
        let total = shift.compose(&r.homography);
        let image = warp_image(&grid.view(r.view_index).image, &total, canvas)?;
        Ok(AlignedView {
            view_index: r.view_index,
            image,
            offset,
            homography: r.homography,
            homography_total: total,
            match_count: r.match_count,
            inlier_count: r.inlier_count,
        })
    })
    .into_iter()
    .collect()
}

/// Full alignment of a grid into the frame of `benchmark_index`. The first
/// view that fails estimation aborts with [`Error::ViewAlignment`].
pub fn align_grid<E: Executor>(
    grid: &ViewGrid,
    benchmark_index: usize,
    params: &AlignParams,
    exec: &E,
) -> Result<Vec<AlignedView>> {
    let regs = register_grid(grid, benchmark_index, params, exec)?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    warp_registered(grid, &regs, exec)
}

/// Views passed through unregistered (identity homographies, source-size
/// canvas). This is the no-alignment ablation.
pub fn unaligned(grid: &ViewGrid) -> Vec<AlignedView> {
    grid.views()
        .iter()
        .enumerate()
        .map(|(i, v)| AlignedView {
            view_index: i,
            image: v.image.clone(),
            offset: (0, 0),
            homography: Homography::identity(),
            homography_total: Homography::identity(),
            match_count: 0,
            inlier_count: 0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::View;
    use crate::Sequential;
    use alloc::vec;

    #[test]
    fn identity_warp_is_exact() {
        let img = crate::synth::texture_image(40, 50, 1);
        let out = warp_image(&img, &Homography::identity(), (40, 50)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn integer_translation_shifts_exactly() {
        let img = crate::synth::texture_image(40, 50, 2);
        let out = warp_image(&img, &Homography::translation(3.0, 5.0), (45, 53)).unwrap();
        for y in 0..40 {
            for x in 0..50 {
                assert_eq!(out.get(y + 5, x + 3, 0), img.get(y, x, 0));
                assert!(out.is_valid(y + 5, x + 3));
            }
        }
        assert!(!out.is_valid(0, 0));
        assert_eq!(out.get(0, 0, 0), 0.0);
    }

    #[test]
    fn warp_stays_in_range() {
        let img = crate::synth::texture_image(60, 60, 3);
        let h = Homography::new([[0.97, 0.05, 4.3], [-0.03, 1.02, -2.7], [1e-4, -2e-4, 1.0]]).unwrap();
        let out = warp_image(&img, &h, (64, 64)).unwrap();
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn identical_views_align_to_identity() {
        let img = crate::synth::texture_image(128, 128, 4);
        let views = (0..9)
            .map(|i| View {
                image: img.clone(),
                row: i / 3,
                col: i % 3,
                focus_depth: None,
            })
            .collect();
        let grid = ViewGrid::new(3, 3, views).unwrap();
        let aligned = align_grid(&grid, 4, &AlignParams::default(), &Sequential).unwrap();
        for a in &aligned {
            assert!(a.homography.max_abs_diff(&Homography::identity()) < 1e-6);
            assert_eq!(a.image.size(), (128, 128));
            assert_eq!(a.offset, (0, 0));
        }
        assert_eq!(aligned[4].image, img);
    }

    #[test]
    fn unaligned_passthrough() {
        let img = crate::synth::texture_image(32, 32, 4);
        let views = vec![
            View { image: img.clone(), row: 0, col: 0, focus_depth: None },
            View { image: img.clone(), row: 0, col: 1, focus_depth: None },
        ];
        let grid = ViewGrid::new(1, 2, views).unwrap();
        let u = unaligned(&grid);
        assert_eq!(u.len(), 2);
        assert_eq!(u[1].image, img);
    }
}
