use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {detail}")]
    Dimension { context: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid band [{lo}, {hi}]: require 0 <= lo < hi")]
    InvalidBand { lo: f64, hi: f64 },

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("matrix has eigenvalue {re:+.3e}{im:+.3e}i on the branch cut of the principal logarithm")]
    BranchCut { re: f64, im: f64 },

    #[error("matrix is not Hurwitz (max real part of spectrum {max_real:.3e}) in {context}")]
    NotHurwitz { context: &'static str, max_real: f64 },

    #[error("Sylvester operator is singular: spectra of the drift matrices overlap")]
    SpectraOverlap,

    #[error("vectorized operator of order {order} is numerically singular")]
    SingularOperator { order: usize },

    #[error("direct solve needs a {order}x{order} operator, over the cap of {cap} entries")]
    SizeCap { order: usize, cap: usize },

    #[error("Schur decomposition did not converge for a {0}x{0} matrix")]
    SchurFailure(usize),

    #[error("matrix function did not converge: {0}")]
    MatFun(String),

    #[error("imaginary residue {residue:.3e} exceeds tolerance {tol:.1e} in a real-valued matrix function")]
    ComplexResidue { residue: f64, tol: f64 },

    #[error("degenerate subspace: basis has numerical rank {rank} < {wanted}")]
    DegenerateSubspace { rank: usize, wanted: usize },

    #[error("oblique projection failed: V^T W is numerically singular")]
    ObliqueProjection,

    #[error("requested order {r} exceeds numerical rank {rank}")]
    RankExceeded { r: usize, rank: usize },

    #[error("gramian is indefinite beyond clipping tolerance (min eigenvalue {min_eig:.3e}, max {max_eig:.3e})")]
    IndefiniteGramian { min_eig: f64, max_eig: f64 },

    #[error("stability guard exhausted after {events} reflections")]
    GuardExhausted { events: usize },

    #[error("pseudo-optimal normalization is ill-posed: reduced {which} gramian is singular")]
    IllPosedNormalization { which: &'static str },

    #[error("simulation diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature cost {evaluations} evaluations exceeds cap {cap}")]
    CostCap { evaluations: u128, cap: u128 },

    #[error("schema error in {path}: {detail}")]
    Schema { path: PathBuf, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            context,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::InvalidArgument(_)
                | Error::InvalidBand { .. }
                | Error::NonFinite(_)
                | Error::Unsupported(_)
                | Error::Schema { .. }
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::CostCap { .. }
                | Error::SizeCap { .. }
        )
    }
}
