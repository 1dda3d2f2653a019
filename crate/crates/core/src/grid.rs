//! Source view grids.

use alloc::vec::Vec;

use crate::{Error, ImageF, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub image: ImageF,
    pub row: usize,
    pub col: usize,
    /// Focus depth in scene units, when known.
    pub focus_depth: Option<f64>,
}

/// A `rows × cols` set of simultaneous views, stored row-major
/// (view index = `row * cols + col`).
#[derive(Debug, Clone, PartialEq)]
pub struct ViewGrid {
    rows: usize,
    cols: usize,
    views: Vec<View>,
}

impl ViewGrid {
    pub fn new(rows: usize, cols: usize, mut views: Vec<View>) -> Result<Self> {
        if rows == 0 || cols == 0 || views.len() != rows * cols {
            return Err(Error::param("view grid needs exactly rows x cols views"));
        }
        views.sort_by_key(|v| (v.row, v.col));
        for (i, v) in views.iter().enumerate() {
            if v.row != i / cols || v.col != i % cols {
                return Err(Error::param("view grid positions must be unique and in range"));
            }
        }
        let size = views[0].image.size();
        if views.iter().any(|v| v.image.size() != size) {
            return Err(Error::param("all views must share one size"));
        }
        Ok(ViewGrid { rows, cols, views })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn view(&self, index: usize) -> &View {
        &self.views[index]
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Index of the centre view (row `rows/2`, column `cols/2`).
    pub fn center_index(&self) -> usize {
        self.index(self.rows / 2, self.cols / 2)
    }

    /// Height and width shared by all views.
    pub fn view_size(&self) -> (usize, usize) {
        self.views[0].image.size()
    }
}
