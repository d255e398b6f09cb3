use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed or non-finite data.
    InvalidData(String),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// A column with a single distinct value cannot be standardized.
    ConstantInput {
        index: usize,
    },
    ConstantOutput,
    /// Correlation parameter outside `theta >= 0`, `0 < p <= 2`, `tau >= 0`.
    ParameterDomain(String),
    /// The correlation matrix could not be factorized even after adding
    /// `jitter` to its diagonal.
    IllConditioned {
        jitter: f64,
    },
    /// Regression basis columns (0 = intercept) that are linearly dependent
    /// on the preceding ones.
    RankDeficient {
        columns: Vec<usize>,
    },
    /// The profiled process variance is zero.
    DegenerateFit,
    /// `n - m1 - m2 - 2 <= 0`: the AICC penalty is undefined.
    SampleTooSmall {
        n: usize,
        m1: usize,
        m2: usize,
    },
    InvalidSearchSpec(String),
    /// Q2 is undefined when the reference outputs are constant.
    UndefinedQ2,
    FoldFailed {
        fold: usize,
        source: Box<Error>,
    },
    /// Every (covariance, regression) cell failed for this covariance size.
    NoValidCell {
        cov_size: usize,
    },
    NoValidQ2,
    /// Failure inside a numbered step of the selection pipeline.
    Step {
        step: u8,
        source: Box<Error>,
    },
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn at_step(self, step: u8) -> Self {
        match self {
            Error::Step { .. } => self,
            other => Error::Step {
                step,
                source: Box::new(other),
            },
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::ConstantInput { index } => {
                write!(f, "constant input: column {index} has a single distinct value")
            }
            Error::ConstantOutput => write!(f, "constant output"),
            Error::ParameterDomain(msg) => write!(f, "parameter out of domain: {msg}"),
            Error::IllConditioned { jitter } => write!(
                f,
                "ill-conditioned covariance: factorization failed with diagonal jitter {jitter:e}"
            ),
            Error::RankDeficient { columns } => {
                write!(f, "regression basis is rank deficient at columns {columns:?}")
            }
            Error::DegenerateFit => write!(f, "degenerate fit: estimated variance is zero"),
            Error::SampleTooSmall { n, m1, m2 } => write!(
                f,
                "sample too small for AICC: n = {n}, m1 = {m1}, m2 = {m2} (need n - m1 - m2 - 2 > 0)"
            ),
            Error::InvalidSearchSpec(msg) => write!(f, "invalid search spec: {msg}"),
            Error::UndefinedQ2 => write!(f, "Q2 undefined: reference outputs are constant"),
            Error::FoldFailed { fold, source } => write!(f, "fold {fold} failed: {source}"),
            Error::NoValidCell { cov_size } => write!(
                f,
                "no regression model could be fitted with {cov_size} covariance input(s)"
            ),
            Error::NoValidQ2 => write!(f, "no covariance prefix produced a Q2 value"),
            Error::Step { step, source } => write!(f, "step {step}: {source}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::FoldFailed { source, .. } | Error::Step { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
