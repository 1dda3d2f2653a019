//! Extended depth of field for varifocal multiview image grids.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic stage of
//! the pipeline:
//!
//! - [`image`]: float rasters with validity masks, convolution, resampling.
//! - [`synth`]: seeded synthetic 3×3 varifocal grids with ground truth.
//! - [`align`]: Hessian keypoints, Haar descriptors, RANSAC homographies,
//!   canvas-preserving homography modification and warping.
//! - [`blocks`]: block splitting, mean-gradient sharpness, sharpest-pair
//!   selection.
//! - [`fusion`]: feature pyramid, information measure, preservation weights,
//!   the dense fusion network, SSIM/MSE loss, training and splicing.
//! - [`metrics`]: information entropy, local contrast, evaluation reports.
//!
//! File formats, the CLI and thread pools live in the `edof` crate.
#![no_std]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod align;
pub mod blocks;
mod error;
pub mod exec;
pub mod fusion;
pub mod grid;
pub mod image;
mod linalg;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use image::{ImageF, Kernel2D};
