//! Block-wise fusion of aligned views and splicing of the fused blocks.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::net::FusionNet;
use super::train::TrainingPair;
use crate::align::AlignedView;
use crate::blocks::{score_block, select_sharpest_pair, split_blocks, BlockGrid, DEFAULT_COVERAGE_THRESHOLD};
use crate::image::{to_grayscale, LUMA};
use crate::{Error, Executor, ImageF, Result};

/// Which views feed the network in each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// The two sharpest eligible views.
    Sharpest,
    /// Every eligible view, folded pairwise in index order (no sharpness
    /// ranking).
    AllViewsInOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub block_rows: usize,
    pub block_cols: usize,
    pub coverage_threshold: f64,
    pub mode: SelectionMode,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            block_rows: 3,
            block_cols: 3,
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
            mode: SelectionMode::Sharpest,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockSource {
    /// Views fused, in fusion order; the first one donates chroma.
    Fused(Vec<usize>),
    /// Too few eligible views; this view was copied through.
    Fallback(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub position: (usize, usize),
    pub source: BlockSource,
    pub scores: Vec<f64>,
    pub coverage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub image: ImageF,
    pub grid: BlockGrid,
    pub blocks: Vec<BlockReport>,
    /// Fused sub-image per block, in row-major block order.
    pub fused_blocks: Vec<((usize, usize), ImageF)>,
}

/// Places each sub-image at its cell. Every cell must be supplied exactly
/// once with the cell's size.
pub fn splice_blocks(fused: &[((usize, usize), ImageF)], grid: &BlockGrid) -> Result<ImageF> {
    let channels = fused.first().map(|(_, b)| b.channels()).unwrap_or(1);
    let (h, w) = grid.canvas_size();
    let mut out = ImageF::new(h, w, channels);
    let mut seen = vec![false; grid.rows * grid.cols];
    for (pos, block) in fused {
        let position = *pos;
        if position.0 >= grid.rows || position.1 >= grid.cols {
            return Err(Error::Splice {
                position,
                reason: "position outside the block grid",
            });
        }
        let k = position.0 * grid.cols + position.1;
        if seen[k] {
            return Err(Error::Splice {
                position,
                reason: "block supplied twice",
            });
        }
        seen[k] = true;
        let cell = grid.cell(position);
        if block.size() != (cell.height, cell.width) || block.channels() != channels {
            return Err(Error::Splice {
                position,
                reason: "block size does not match its cell",
            });
        }
        out.paste(block, cell.y, cell.x);
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Splice {
            position: (k / grid.cols, k % grid.cols),
            reason: "missing block",
        });
    }
    Ok(out)
}

/// Fills pixels invalid in `a` with `b` where `b` is valid, and vice versa.
/// Returns the filled pair; their masks are the union of the inputs'.
pub fn complete_pair(a: &ImageF, b: &ImageF) -> (ImageF, ImageF) {
    let mut fa = a.clone();
    let mut fb = b.clone();
    for k in 0..a.mask().len() {
        let (va, vb) = (a.mask()[k], b.mask()[k]);
        if !va && vb {
            fa.data_mut()[k] = b.data()[k];
        } else if va && !vb {
            fb.data_mut()[k] = a.data()[k];
        }
        let any = va || vb;
        fa.mask_mut()[k] = any;
        fb.mask_mut()[k] = any;
    }
    (fa, fb)
}

/// Fuses two 1-channel sources after cross-filling their invalid pixels.
fn fuse_luma(net: &FusionNet, a: &ImageF, b: &ImageF) -> Result<ImageF> {
    let (fa, fb) = complete_pair(a, b);
    let mut out = net.fuse(&fa, &fb)?;
    out.mask_mut().copy_from_slice(fa.mask());
    for (v, &m) in out.data_mut().iter_mut().zip(fa.mask()) {
        if !m {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// Replaces the luminance of `primary` by `luma`, keeping its chroma.
fn transfer_chroma(primary: &ImageF, luma: &ImageF) -> ImageF {
    if primary.channels() == 1 {
        return luma.clone();
    }
    let (h, w) = luma.size();
    let mut out = ImageF::new(h, w, 3);
    for k in 0..h * w {
        let p = &primary.data()[k * 3..k * 3 + 3];
        let y = LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2];
        let f = luma.data()[k];
        for (c, &pc) in p.iter().enumerate() {
            out.data_mut()[k * 3 + c] = if luma.mask()[k] {
                let v = if primary.mask()[k] { pc + f - y } else { f };
                v.clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    out.mask_mut().copy_from_slice(luma.mask());
    out
}

fn best_coverage(coverage: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in coverage.iter().enumerate() {
        if c > coverage[best] {
            best = i;
        }
    }
    best
}

fn fuse_block(
    views: &[ImageF],
    net: &FusionNet,
    grid: &BlockGrid,
    position: (usize, usize),
    params: &FusionParams,
) -> Result<(BlockReport, ImageF)> {
    let order = match params.mode {
        SelectionMode::Sharpest => match select_sharpest_pair(views, grid, position, params.coverage_threshold) {
            Ok(sel) => Ok((vec![sel.primary_view, sel.secondary_view], sel.scores, sel.coverage)),
            Err(Error::Selection { .. }) => {
                let (scores, coverage) = score_block(views, grid, position);
                Err((scores, coverage))
            }
            Err(e) => return Err(e),
        },
        SelectionMode::AllViewsInOrder => {
            let (scores, coverage) = score_block(views, grid, position);
            let eligible: Vec<usize> = (0..views.len()).filter(|&i| coverage[i] >= params.coverage_threshold).collect();
            if eligible.len() >= 2 {
                Ok((eligible, scores, coverage))
            } else {
                Err((scores, coverage))
            }
        }
    };
    match order {
        Ok((order, scores, coverage)) => {
            let crops: Vec<ImageF> = order.iter().map(|&v| grid.crop(&views[v], position)).collect();
            let mut acc = to_grayscale(&crops[0]);
            for c in &crops[1..] {
                acc = fuse_luma(net, &acc, &to_grayscale(c))?;
            }
            let image = transfer_chroma(&crops[0], &acc);
            Ok((
                BlockReport {
                    position,
                    source: BlockSource::Fused(order),
                    scores,
                    coverage,
                },
                image,
            ))
        }
        Err((scores, coverage)) => {
            let v = best_coverage(&coverage);
            Ok((
                BlockReport {
                    position,
                    source: BlockSource::Fallback(v),
                    scores,
                    coverage,
                },
                grid.crop(&views[v], position),
            ))
        }
    }
}

/// Splits the canvas into blocks, fuses each block's selected views with
/// `net`, and splices the results. Colour inputs keep the chroma of the
/// first fused view of each block.
pub fn fuse_views<E: Executor>(views: &[ImageF], net: &FusionNet, params: &FusionParams, exec: &E) -> Result<FusionOutput> {
    if views.len() < 2 {
        return Err(Error::param("fusion needs at least two views"));
    }
    let size = views[0].size();
    let channels = views[0].channels();
    if channels != 1 && channels != 3 {
        return Err(Error::param("views must have 1 or 3 channels"));
    }
    if views.iter().any(|v| v.size() != size || v.channels() != channels) {
        return Err(Error::param("views must share size and channel count"));
    }
    let grid = split_blocks(size, params.block_rows, params.block_cols)?;
    let positions: Vec<(usize, usize)> = grid.positions().collect();
    let results = exec.map(positions.len(), |k| {
        let position = positions[k];
        fuse_block(views, net, &grid, position, params).map_err(|e| Error::Block {
            position,
            source: Box::new(e),
        })
    });
    let mut blocks = Vec::with_capacity(positions.len());
    let mut fused_blocks = Vec::with_capacity(positions.len());
    for r in results {
        let (report, image) = r?;
        fused_blocks.push((report.position, image));
        blocks.push(report);
    }
    let image = splice_blocks(&fused_blocks, &grid)?;
    Ok(FusionOutput {
        image,
        grid,
        blocks,
        fused_blocks,
    })
}

/// [`fuse_views`] on aligned views.
pub fn fuse_pipeline<E: Executor>(
    aligned: &[AlignedView],
    net: &FusionNet,
    params: &FusionParams,
    exec: &E,
) -> Result<FusionOutput> {
    let views: Vec<ImageF> = aligned.iter().map(|a| a.image.clone()).collect();
    fuse_views(&views, net, params, exec)
}

/// Luminance of the sharpest pair of every block that has one, cross-filled
/// like at inference time. These are the network's training pairs.
pub fn block_pairs(views: &[ImageF], params: &FusionParams) -> Result<Vec<TrainingPair>> {
    if views.is_empty() {
        return Ok(Vec::new());
    }
    let grid = split_blocks(views[0].size(), params.block_rows, params.block_cols)?;
    let mut pairs = Vec::new();
    for position in grid.positions() {
        let Ok(sel) = select_sharpest_pair(views, &grid, position, params.coverage_threshold) else {
            continue;
        };
        let a = to_grayscale(&grid.crop(&views[sel.primary_view], position));
        let b = to_grayscale(&grid.crop(&views[sel.secondary_view], position));
        let (first, second) = complete_pair(&a, &b);
        pairs.push(TrainingPair { first, second });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::ssim::ssim_score;
    use crate::synth::texture_image;
    use crate::Sequential;

    fn split_all(img: &ImageF, grid: &BlockGrid) -> Vec<((usize, usize), ImageF)> {
        grid.positions().map(|p| (p, grid.crop(img, p))).collect()
    }

    #[test]
    fn splice_round_trip_and_errors() {
        let img = texture_image(50, 41, 3);
        let grid = split_blocks((50, 41), 3, 3).unwrap();
        let parts = split_all(&img, &grid);
        assert_eq!(splice_blocks(&parts, &grid).unwrap(), img);

        let zeros: Vec<_> = parts.iter().map(|(p, b)| (*p, ImageF::new(b.height(), b.width(), 1))).collect();
        assert!(splice_blocks(&zeros, &grid).unwrap().data().iter().all(|&v| v == 0.0));

        assert_eq!(
            splice_blocks(&parts[1..], &grid).unwrap_err(),
            Error::Splice { position: (0, 0), reason: "missing block" }
        );
        let mut wrong = parts.clone();
        wrong[4].1 = ImageF::new(3, 3, 1);
        assert!(matches!(splice_blocks(&wrong, &grid), Err(Error::Splice { position: (1, 1), .. })));
    }

    #[test]
    fn swapping_entries_changes_only_those_cells() {
        let img = texture_image(30, 30, 4);
        let grid = split_blocks((30, 30), 3, 3).unwrap();
        let mut parts = split_all(&img, &grid);
        let (a, b) = (parts[0].1.clone(), parts[8].1.clone());
        parts[0].1 = b;
        parts[8].1 = a;
        let out = splice_blocks(&parts, &grid).unwrap();
        for y in 0..30 {
            for x in 0..30 {
                let inside = (y < 10 && x < 10) || (y >= 20 && x >= 20);
                if !inside {
                    assert_eq!(out.get(y, x, 0), img.get(y, x, 0));
                }
            }
        }
        assert_ne!(out, img);
    }

    #[test]
    fn fallback_copies_best_view() {
        let net = FusionNet::new(0);
        let a = texture_image(60, 60, 1);
        let b = texture_image(60, 60, 2);
        let dead = b.clone().with_mask(vec![false; 3600]).unwrap();
        let out = fuse_views(&[a.clone(), dead], &net, &FusionParams::default(), &Sequential).unwrap();
        assert_eq!(out.image, a);
        assert!(out.blocks.iter().all(|r| r.source == BlockSource::Fallback(0)));
    }

    #[test]
    fn colour_blocks_keep_chroma() {
        let net = FusionNet::new(1);
        let g = texture_image(60, 60, 5);
        let rgb = |img: &ImageF| {
            let data = img.data().iter().flat_map(|&v| [v, 0.5 * v, 0.25]).collect();
            ImageF::from_data(60, 60, 3, data).unwrap()
        };
        let out = fuse_views(&[rgb(&g), rgb(&g)], &net, &FusionParams::default(), &Sequential).unwrap();
        assert_eq!(out.image.channels(), 3);
        let fused_y = to_grayscale(&out.image);
        assert!(out.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        // Unclamped pixels keep the primary view's channel differences.
        let p = &out.image.data()[..3];
        let src = [g.data()[0], 0.5 * g.data()[0], 0.25];
        if p.iter().all(|&v| v > 0.0 && v < 1.0) {
            assert!(((p[0] - p[1]) - (src[0] - src[1])).abs() < 1e-12);
        }
        assert!(fused_y.all_valid());
    }

    #[test]
    fn modes_select_expected_views() {
        let net = FusionNet::new(2);
        let views: Vec<ImageF> = (0..4).map(|i| crate::image::gaussian_blur(&texture_image(60, 60, 7), (3 - i) as f64)).collect();
        let out = fuse_views(&views, &net, &FusionParams::default(), &Sequential).unwrap();
        assert!(out.blocks.iter().all(|r| r.source == BlockSource::Fused(vec![3, 2])));
        let params = FusionParams {
            mode: SelectionMode::AllViewsInOrder,
            ..FusionParams::default()
        };
        let out = fuse_views(&views, &net, &params, &Sequential).unwrap();
        assert!(out.blocks.iter().all(|r| r.source == BlockSource::Fused(vec![0, 1, 2, 3])));
        assert!(ssim_score(&out.image, &out.image).unwrap() > 0.99);
    }

    #[test]
    fn cross_fill_unions_masks() {
        let a = ImageF::from_fn(2, 2, |_, _| 0.2).with_mask(vec![true, false, true, false]).unwrap();
        let b = ImageF::from_fn(2, 2, |_, _| 0.8).with_mask(vec![true, true, false, false]).unwrap();
        let (fa, fb) = complete_pair(&a, &b);
        assert_eq!(fa.data(), &[0.2, 0.8, 0.2, 0.2]);
        assert_eq!(fb.data(), &[0.8, 0.8, 0.2, 0.8]);
        assert_eq!(fa.mask(), &[true, true, true, false]);
    }
}
