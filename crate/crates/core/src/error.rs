use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numeric,
    DegenerateEvaluation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid gene identifier {0:?}")]
    InvalidGeneId(String),
    #[error("duplicate gene identifier {0:?}")]
    DuplicateGene(String),
    #[error("unknown gene {0:?}")]
    UnknownGene(String),
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is asymmetric at ({row}, {col}): |{a} - {b}| exceeds tolerance")]
    AsymmetricMatrix { row: usize, col: usize, a: f64, b: f64 },
    #[error("entry ({row}, {col}) = {value} lies outside [0, 1]")]
    OutOfRangeEntry { row: usize, col: usize, value: f64 },
    #[error("diagonal entry {index} = {value}, expected 1")]
    BadDiagonal { index: usize, value: f64 },
    #[error("sequence lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("profile has zero variance{}", gene.as_ref().map(|g| format!(" (gene {g})")).unwrap_or_default())]
    ConstantProfile { gene: Option<String> },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("prior cluster {0:?} has fewer than two genes present in the matrix")]
    EmptyPriorCluster(String),
    #[error("prior cluster {0:?} has zero maximum off-diagonal correlation")]
    DegeneratePriorBlock(String),
    #[error("eigenvalue {0} of the working matrix equals -1; unscaled deconvolution is singular")]
    SingularShift(f64),
    #[error("symmetric eigendecomposition did not converge")]
    NonConvergentEigensolve,
    #[error("spectral radius {0} is not below 1")]
    SpectralRadiusTooLarge(f64),
    #[error("evaluation universe has fewer than two genes")]
    EmptyUniverse,
    #[error("gold standard has no {0} pairs within the evaluation universe")]
    DegenerateGold(&'static str),
    #[error("curve needs at least three points, got {0}")]
    TooFewPoints(usize),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SingularShift(_)
            | Error::NonConvergentEigensolve
            | Error::SpectralRadiusTooLarge(_)
            | Error::DegeneratePriorBlock(_)
            | Error::ConstantProfile { .. } => ErrorKind::Numeric,
            Error::EmptyUniverse | Error::DegenerateGold(_) | Error::TooFewPoints(_) => ErrorKind::DegenerateEvaluation,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Input,
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Numeric => 3,
            ErrorKind::DegenerateEvaluation => 4,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
