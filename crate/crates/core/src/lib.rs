//! Slice-based convolutional dictionary learning.
//!
//! The global convolutional sparse coding problem
//! `min 1/2 ||X - D Gamma||^2 + lambda ||Gamma||_1` is split into per-position
//! slices `s_i = D_L a_i` and solved by ADMM using only patch-sized
//! operations: a LASSO per slice, a closed-form slice update, and a K-SVD
//! update of the local dictionary `D_L`.

pub mod dictionary;
pub mod engine;
pub mod error;
pub mod image;
pub mod pursuit;
pub mod separation;
pub mod synthetic;

pub use dictionary::{dictionary_update, init_dictionary, LocalDictionary};
pub use engine::{
    inpaint, train, MetricsRow, MetricsSink, SliceField, TrainConfig, TrainOutput,
};
pub use error::{Error, Result};
pub use image::{preprocess, psnr, Image, PatchGeometry, Patches, PreprocessStatus};
pub use pursuit::{gram, lasso_solve, Gram, Needle, PursuitConfig};
pub use separation::{enhance, separate, tv_denoise, SeparationConfig, SeparationOutput};
