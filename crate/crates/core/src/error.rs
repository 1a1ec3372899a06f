use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing required columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("unknown polymer '{name}' (available: {})", .available.join(", "))]
    UnknownPolymer { name: String, available: Vec<String> },

    #[error("polymer '{polymer}' has {found} distinct studies; at least 2 are required")]
    InsufficientStudies { polymer: String, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("all candidate features have zero variance")]
    AllZeroVariance,

    #[error("missing feature '{0}'")]
    MissingFeature(String),

    #[error("{learner} did not converge within {iterations} iterations")]
    NonConvergence { learner: &'static str, iterations: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("sample size {n} outside the supported range [{min}, {max}]")]
    SampleSize { n: usize, min: usize, max: usize },

    #[error("sample has zero variance")]
    ZeroVariance,

    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<Error> },

    #[error("stage '{stage}': {source}")]
    Stage { stage: &'static str, source: Box<Error> },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("archive error: {0}")]
    Archive(#[from] zip::result::ZipError),
}

impl Error {
    /// Stable machine-readable code, used by the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io_error",
            Error::Csv(_) => "csv_error",
            Error::MissingColumns(_) => "missing_columns",
            Error::UnknownPolymer { .. } => "unknown_polymer",
            Error::InsufficientStudies { .. } => "insufficient_studies",
            Error::InvalidInput(_) => "invalid_input",
            Error::AllZeroVariance => "all_zero_variance",
            Error::MissingFeature(_) => "missing_feature",
            Error::NonConvergence { .. } => "non_convergence",
            Error::EmptySample => "empty_sample",
            Error::SampleSize { .. } => "sample_size",
            Error::ZeroVariance => "zero_variance",
            Error::Fold { source, .. } | Error::Stage { source, .. } => source.code(),
            Error::Serialization(_) => "serialization_error",
            Error::Archive(_) => "archive_error",
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Error {
        Error::Fold { fold, source: Box::new(self) }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
