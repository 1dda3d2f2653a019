//! Block grids over the shared canvas, mean-gradient sharpness, and
//! selection of the two sharpest views per block.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;

use crate::image::to_grayscale;
use crate::{Error, ImageF, Result};

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.5;

/// Cell boundaries: `row_bounds[r]..row_bounds[r + 1]` are the pixel rows of
/// block row `r`, and likewise for columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    pub rows: usize,
    pub cols: usize,
    pub row_bounds: Vec<usize>,
    pub col_bounds: Vec<usize>,
}

/// A block's pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub y: usize,
    pub x: usize,
    pub height: usize,
    pub width: usize,
}

impl BlockGrid {
    pub fn canvas_size(&self) -> (usize, usize) {
        (self.row_bounds[self.rows], self.col_bounds[self.cols])
    }

    pub fn cell(&self, (r, c): (usize, usize)) -> Cell {
        Cell {
            y: self.row_bounds[r],
            x: self.col_bounds[c],
            height: self.row_bounds[r + 1] - self.row_bounds[r],
            width: self.col_bounds[c + 1] - self.col_bounds[c],
        }
    }

    /// Block positions in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
    }

    pub fn crop(&self, image: &ImageF, position: (usize, usize)) -> ImageF {
        let cell = self.cell(position);
        image.crop(cell.y, cell.x, cell.height, cell.width)
    }
}

fn bounds(n: usize, parts: usize) -> Vec<usize> {
    let step = n / parts;
    let mut b: Vec<usize> = (0..parts).map(|i| i * step).collect();
    b.push(n);
    b
}

/// Equal cells of `⌊h/rows⌋ × ⌊w/cols⌋`; the last row and column absorb the
/// remainder.
pub fn split_blocks(canvas_size: (usize, usize), rows: usize, cols: usize) -> Result<BlockGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::param("block grid needs at least one row and one column"));
    }
    let (h, w) = canvas_size;
    if h < rows || w < cols {
        return Err(Error::param("canvas is smaller than the block grid"));
    }
    Ok(BlockGrid {
        rows,
        cols,
        row_bounds: bounds(h, rows),
        col_bounds: bounds(w, cols),
    })
}

/// Mean-gradient score of a sub-image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sharpness {
    pub value: f64,
    /// Number of difference pairs that contributed.
    pub pairs: usize,
}

impl Sharpness {
    /// False when no valid difference pair existed (value is then 0).
    pub fn has_content(&self) -> bool {
        self.pairs > 0
    }
}

/// `Σ √((dx² + dy²)/2)` over pixels whose forward differences stay within
/// valid pixels, divided by the number of such pixels (`(H−1)(W−1)` for a
/// fully valid image). Colour input is converted to luminance.
pub fn mean_gradient(sub: &ImageF) -> Sharpness {
    let gray;
    let img = if sub.channels() == 1 {
        sub
    } else {
        gray = to_grayscale(sub);
        &gray
    };
    let (h, w) = img.size();
    if h < 2 || w < 2 {
        return Sharpness { value: 0.0, pairs: 0 };
    }
    let data = img.data();
    let mask = img.mask();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let i = y * w + x;
            if !(mask[i] && mask[i + 1] && mask[i + w]) {
                continue;
            }
            let dx = data[i + 1] - data[i];
            let dy = data[i + w] - data[i];
            sum += ((dx * dx + dy * dy) / 2.0).sqrt();
            pairs += 1;
        }
    }
    Sharpness {
        value: if pairs > 0 { sum / pairs as f64 } else { 0.0 },
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSelection {
    pub position: (usize, usize),
    pub primary_view: usize,
    pub secondary_view: usize,
    /// Mean gradient per view, in input order.
    pub scores: Vec<f64>,
    /// Valid-pixel fraction per view, in input order.
    pub coverage: Vec<f64>,
}

/// Per-view scores and coverage of one block.
pub fn score_block(views: &[ImageF], grid: &BlockGrid, position: (usize, usize)) -> (Vec<f64>, Vec<f64>) {
    views
        .iter()
        .map(|v| {
            let sub = grid.crop(v, position);
            (mean_gradient(&sub).value, sub.valid_fraction())
        })
        .unzip()
}

/// Ranks views with coverage ≥ `coverage_threshold` by mean gradient
/// (descending, ties to the lower index) and returns the top two.
pub fn select_sharpest_pair(
    views: &[ImageF],
    grid: &BlockGrid,
    position: (usize, usize),
    coverage_threshold: f64,
) -> Result<BlockSelection> {
    let (scores, coverage) = score_block(views, grid, position);
    let mut eligible: Vec<usize> = (0..views.len()).filter(|&i| coverage[i] >= coverage_threshold).collect();
    if eligible.len() < 2 {
        return Err(Error::Selection {
            position,
            eligible: eligible.len(),
        });
    }
    eligible.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(BlockSelection {
        position,
        primary_view: eligible[0],
        secondary_view: eligible[1],
        scores,
        coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::gaussian_blur;
    use crate::synth::texture_image;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn split_sizes() {
        let g = split_blocks((9, 9), 3, 3).unwrap();
        assert!(g.positions().all(|p| g.cell(p).height == 3 && g.cell(p).width == 3));
        let g = split_blocks((10, 10), 3, 3).unwrap();
        assert_eq!(g.row_bounds, vec![0, 3, 6, 10]);
        assert_eq!(g.cell((2, 2)).height, 4);
        let g = split_blocks((7, 5), 1, 1).unwrap();
        assert_eq!(g.cell((0, 0)), Cell { y: 0, x: 0, height: 7, width: 5 });
        assert!(split_blocks((7, 5), 0, 1).is_err());
    }

    #[test]
    fn mean_gradient_basics() {
        let flat = ImageF::from_fn(8, 8, |_, _| 0.3);
        assert_eq!(mean_gradient(&flat).value, 0.0);
        let s = 0.05;
        let ramp = ImageF::from_fn(8, 8, |_, x| s * x as f64);
        assert!((mean_gradient(&ramp).value - s / 2f64.sqrt()).abs() < 1e-12);
        let empty = flat.clone().with_mask(vec![false; 64]).unwrap();
        assert!(!mean_gradient(&empty).has_content());
    }

    #[test]
    fn blur_lowers_mean_gradient() {
        for seed in 0..5 {
            let tex = texture_image(64, 64, seed);
            assert!(mean_gradient(&tex).value > mean_gradient(&gaussian_blur(&tex, 2.0)).value);
        }
    }

    #[test]
    fn selection_tie_break_and_eligibility() {
        let tex = texture_image(30, 30, 1);
        let views = vec![tex.clone(), tex.clone(), tex.clone()];
        let grid = split_blocks((30, 30), 3, 3).unwrap();
        let sel = select_sharpest_pair(&views, &grid, (1, 1), 0.5).unwrap();
        assert_eq!((sel.primary_view, sel.secondary_view), (0, 1));

        let mut sharp = vec![gaussian_blur(&tex, 2.0); 9];
        sharp[6] = tex.clone();
        let sel = select_sharpest_pair(&sharp, &grid, (0, 0), 0.5).unwrap();
        assert_eq!(sel.primary_view, 6);

        let mut masked = views.clone();
        masked[0] = tex.clone().with_mask(vec![false; 900]).unwrap();
        let sel = select_sharpest_pair(&masked, &grid, (0, 0), 0.5).unwrap();
        assert_eq!((sel.primary_view, sel.secondary_view), (1, 2));
        assert_eq!(sel.coverage[0], 0.0);

        let err = select_sharpest_pair(&masked[..2], &grid, (2, 1), 0.5).unwrap_err();
        assert_eq!(err, Error::Selection { position: (2, 1), eligible: 1 });
    }

    proptest! {
        #[test]
        fn mean_gradient_offset_and_scale(seed in 0u64..500, c in 0.0f64..0.3, a in 0.05f64..1.0) {
            let tex = texture_image(24, 24, seed).map(|v| 0.6 * v);
            let base = mean_gradient(&tex).value;
            let shifted = mean_gradient(&tex.map(|v| v + c)).value;
            prop_assert!((base - shifted).abs() < 1e-9);
            let scaled = mean_gradient(&tex.map(|v| a * v)).value;
            prop_assert!((scaled - a * base).abs() < 1e-9);
        }

        #[test]
        fn selection_permutes_with_views(seed in 0u64..200, rot in 1usize..5) {
            let views: Vec<ImageF> = (0..5).map(|i| gaussian_blur(&texture_image(30, 30, seed), i as f64 * 0.7)).collect();
            let grid = split_blocks((30, 30), 2, 2).unwrap();
            let sel = select_sharpest_pair(&views, &grid, (1, 0), 0.5).unwrap();
            let perm: Vec<usize> = (0..5).map(|i| (i + rot) % 5).collect();
            let permuted: Vec<ImageF> = perm.iter().map(|&p| views[p].clone()).collect();
            let sel2 = select_sharpest_pair(&permuted, &grid, (1, 0), 0.5).unwrap();
            prop_assert_eq!(perm[sel2.primary_view], sel.primary_view);
            prop_assert_eq!(perm[sel2.secondary_view], sel.secondary_view);
        }
    }
}
