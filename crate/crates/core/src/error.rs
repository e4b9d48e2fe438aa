use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the numerical core.
///
/// Variants fall into three categories (see [`Error::category`]) that the
/// command-line front end maps onto distinct exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("layer {layer}: expected input dimension {expected}, got {got}")]
    LayerDimension { layer: usize, expected: usize, got: usize },
    #[error("batch normalization needs at least 2 samples per channel, got {0}")]
    DegenerateBatch(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is singular or ill-conditioned (condition number {0:e})")]
    Singular(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
}

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) => Category::Config,
            Error::Dataset(_) | Error::Evaluation(_) => Category::Data,
            Error::Dimension { .. }
            | Error::LayerDimension { .. }
            | Error::DegenerateBatch(_)
            | Error::NonFinite(_)
            | Error::Singular(_) => Category::Numeric,
        }
    }

    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}
