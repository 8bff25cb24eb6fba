//! Dense solvers for Sylvester and generalized (bilinear) Lyapunov/Sylvester
//! equations. Every matrix equation in the crate goes through
//! [`solve_generalized`].

mod generalized;
mod sylvester;

pub use generalized::{
    solve_direct, solve_generalized, DriftSide, GeneralizedLyapunovProblem, GeneralizedSolution,
    ProductTerm, SolveMode, AUTO_DIRECT_MAX_DIM, DEFAULT_DIRECT_CAP,
};
pub use sylvester::{solve_sylvester, Drift};
