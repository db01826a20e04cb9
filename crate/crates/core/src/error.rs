use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weight vector has length {got}, grid has {expected} points")]
    WrongLength { expected: usize, got: usize },

    #[error("weights sum to {sum}, outside the renormalization band around 1")]
    NotNormalized { sum: f64 },

    #[error("negative entry {value} in a nonnegative matrix")]
    NegativeEntry { value: f64 },

    #[error("input sequence is empty")]
    EmptyInput,

    #[error("vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("matrix is {got_rows}x{got_cols}, expected {rows}x{cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },

    #[error("operation requires a square 2D grid, got {rows}x{cols} points")]
    NotSquareGrid { rows: usize, cols: usize },

    #[error("theta = {value} is outside [0, 1]")]
    ThetaOutOfRange { value: f64 },

    #[error("invalid solver configuration: {reason}")]
    ConfigInvalid { reason: String },

    #[error("cost matrix contains a non-finite entry")]
    NonFiniteCost,

    #[error("numerical overflow in plain-domain Sinkhorn scaling; use log-domain stabilization")]
    NumericalOverflow,

    #[error("dense materialization of {points} points exceeds the guard of {guard}; pass force to override")]
    TooLargeToMaterialize { points: usize, guard: usize },

    #[error("naive mode requested for {points} points, above the materialization guard of {guard}")]
    NaiveTooLarge { points: usize, guard: usize },

    #[error("hump supports overlap or leave [0, 1]")]
    OverlappingHumps,

    #[error("series of {n} samples is too short to place the humps")]
    SeriesTooShort { n: usize },

    #[error("file not found: {path}")]
    FileNotFound { path: String },

    #[error("unsupported input format: {reason}")]
    UnsupportedFormat { reason: String },

    #[error("image has zero total mass after subsampling")]
    ZeroMassImage,

    #[error("parse error in {path} at line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name, used by the CLI error JSON and exit-code mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NegativeWeight { .. } => "NegativeWeight",
            Error::WrongLength { .. } => "WrongLength",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::EmptyInput => "EmptyInput",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotSquareGrid { .. } => "NotSquareGrid",
            Error::ThetaOutOfRange { .. } => "ThetaOutOfRange",
            Error::ConfigInvalid { .. } => "ConfigInvalid",
            Error::NonFiniteCost => "NonFiniteCost",
            Error::NumericalOverflow => "NumericalOverflow",
            Error::TooLargeToMaterialize { .. } => "TooLargeToMaterialize",
            Error::NaiveTooLarge { .. } => "NaiveTooLarge",
            Error::OverlappingHumps => "OverlappingHumps",
            Error::SeriesTooShort { .. } => "SeriesTooShort",
            Error::FileNotFound { .. } => "FileNotFound",
            Error::UnsupportedFormat { .. } => "UnsupportedFormat",
            Error::ZeroMassImage => "ZeroMassImage",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
        }
    }
}
