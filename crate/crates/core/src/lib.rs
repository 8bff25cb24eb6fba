//! Time- and frequency-limited H2 model order reduction for bilinear
//! control systems.

pub mod error;
pub mod examples;
pub mod gramians;
pub mod io;
pub mod linalg;
pub mod matfun;
pub mod norms;
pub mod optimality;
pub mod quadrature;
pub mod reduce;
pub mod solvers;
pub mod system;

pub use error::{Error, Result};
pub use gramians::{GramianKind, GramianSet};
pub use linalg::{CMat, Mat};
pub use matfun::FreqBand;
pub use optimality::{GradientBundle, ResidualReport};
pub use reduce::{run_algorithm, Algorithm, IterationConfig, ReductionOutcome};
pub use solvers::SolveMode;
pub use system::{BilinearSystem, TimeBand, Trajectory};
