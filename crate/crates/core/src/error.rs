use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("image must be at least 1x1, got {height}x{width}")]
    EmptyImage { height: usize, width: usize },

    #[error("sample buffer has {got} values, expected {expected}")]
    SampleCount { expected: usize, got: usize },

    #[error("image contains non-finite samples")]
    NonFinite,

    #[error("slice index {index} out of range for {count} slices")]
    SliceIndex { index: usize, count: usize },

    #[error("expected {expected} slices, got {got}")]
    SliceCount { expected: usize, got: usize },

    #[error("patch has length {got}, expected {expected}")]
    PatchLength { expected: usize, got: usize },

    #[error("dimension mismatch: {left_h}x{left_w} vs {right_h}x{right_w}")]
    DimensionMismatch {
        left_h: usize,
        left_w: usize,
        right_h: usize,
        right_w: usize,
    },

    #[error("image {height}x{width} is smaller than the {filter}x{filter} filter")]
    ImageSmallerThanFilter {
        height: usize,
        width: usize,
        filter: usize,
    },

    #[error("mask entries must be 0 or 1")]
    NonBinaryMask,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("atom {atom} has norm {norm}, expected 1")]
    AtomNorm { atom: usize, norm: f64 },

    #[error("dictionary update needs at least one target")]
    NoTargets,

    #[error("dictionary has patch dimension {dict}, geometry expects {geometry}")]
    DictionaryShape { dict: usize, geometry: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
