use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument is out of its documented domain.
    InvalidParameter(String),
    SizeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    ImageTooSmall {
        min: usize,
        height: usize,
        width: usize,
    },
    NotInvertible,
    /// A point was mapped onto (or behind) the plane at infinity.
    DegenerateHomography,
    EstimationFailed {
        correspondences: usize,
        best_inliers: usize,
    },
    /// Alignment of one view failed; `view` is its grid index.
    ViewAlignment { view: usize, source: Box<Error> },
    Selection {
        position: (usize, usize),
        eligible: usize,
    },
    Splice {
        position: (usize, usize),
        reason: &'static str,
    },
    Block {
        position: (usize, usize),
        source: Box<Error>,
    },
    TrainingDiverged { epoch: usize, batch: usize },
    NoValidWindow,
    UndefinedMetric(&'static str),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::SizeMismatch { expected, found } => write!(
                f,
                "size mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::ImageTooSmall { min, height, width } => write!(
                f,
                "image {height}x{width} is too small (minimum dimension {min})"
            ),
            Error::NotInvertible => write!(f, "homography is not invertible"),
            Error::DegenerateHomography => {
                write!(f, "homography maps a corner to the plane at infinity")
            }
            Error::EstimationFailed {
                correspondences,
                best_inliers,
            } => write!(
                f,
                "homography estimation failed: {best_inliers} inliers out of {correspondences} correspondences"
            ),
            Error::ViewAlignment { view, source } => {
                write!(f, "alignment of view {view} failed: {source}")
            }
            Error::Selection { position, eligible } => write!(
                f,
                "block ({}, {}) has {eligible} eligible views, need 2",
                position.0, position.1
            ),
            Error::Splice { position, reason } => {
                write!(f, "cannot splice block ({}, {}): {reason}", position.0, position.1)
            }
            Error::Block { position, source } => {
                write!(f, "block ({}, {}): {source}", position.0, position.1)
            }
            Error::TrainingDiverged { epoch, batch } => {
                write!(f, "training diverged at epoch {epoch}, batch {batch}")
            }
            Error::NoValidWindow => write!(f, "no fully valid SSIM window"),
            Error::UndefinedMetric(what) => write!(f, "metric undefined: {what}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::ViewAlignment { source, .. } | Error::Block { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
