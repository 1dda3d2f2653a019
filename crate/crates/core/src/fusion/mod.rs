//! Block fusion: information measure on a multi-scale feature pyramid,
//! softmax preservation weights, the dense fusion network with its
//! SSIM + MSE loss, training, and block splicing.

pub mod loss;
pub mod net;
pub mod pipeline;
pub mod pyramid;
pub mod ssim;
pub mod train;

pub use loss::{loss, loss_terms, LossTerms};
pub use net::{architecture, FusionNet, LayerShape, NetDescription};
pub use pipeline::{
    block_pairs, complete_pair, fuse_pipeline, fuse_views, splice_blocks, BlockReport, BlockSource, FusionOutput,
    FusionParams, SelectionMode,
};
pub use pyramid::{
    extract_features, extract_features_with, information_measure, preservation_degrees, FeaturePyramid, FilterBank,
    PreservationWeights,
};
pub use ssim::{ssim, ssim_score};
pub use train::{gradient_check, parameter_gradients, train, TrainConfig, TrainOutcome, TrainingPair};
