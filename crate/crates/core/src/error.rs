use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Format { file: String, line: usize, message: String },

    #[error("{file}:{line}: non-numeric cell {value:?} in column {column:?}")]
    NonNumericCell { file: String, line: usize, column: String, value: String },

    #[error("{file}:{line}: missing value in column {column:?}")]
    MissingValue { file: String, line: usize, column: String },

    #[error("sample {sample:?} is present in {present_in} but absent from {absent_from}")]
    MissingSample { sample: String, present_in: String, absent_from: String },

    #[error("count phenotype {phenotype:?} holds {value}, which is not a nonnegative integer")]
    KindViolation { phenotype: String, value: f64 },

    #[error("{0} phenotypes exceed the supported maximum of 15")]
    TooManyPhenotypes(usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("pooled null is degenerate (sd = 0) for weight mask {mask:#b}")]
    DegenerateNull { mask: u32 },

    #[error("bootstrap replicate {replicate} kept producing a constant covariate after {attempts} draws")]
    DegenerateBootstrap { replicate: usize, attempts: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad inputs rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Format { .. }
                | Error::NonNumericCell { .. }
                | Error::MissingValue { .. }
                | Error::MissingSample { .. }
                | Error::KindViolation { .. }
                | Error::TooManyPhenotypes(_)
                | Error::InvalidDataset(_)
                | Error::Shape(_)
        )
    }
}
