use std::sync::Arc;

use super::sylvester::{sylvester_with_schur, Drift};
use crate::error::{Error, Result};
use crate::linalg::{check_finite, kron, Mat};

/// Entry cap on the dense vectorized operator of a direct solve.
pub const DEFAULT_DIRECT_CAP: usize = 1_000_000;

/// Largest drift dimension for which `SolveMode::Auto` picks a direct solve.
pub const AUTO_DIRECT_MAX_DIM: usize = 60;

/// A drift matrix or its transpose, backed by a shared [`Drift`].
#[derive(Debug, Clone)]
pub struct DriftSide {
    drift: Arc<Drift>,
    transposed: bool,
}

impl DriftSide {
    pub fn plain(drift: &Arc<Drift>) -> Self {
        Self {
            drift: Arc::clone(drift),
            transposed: false,
        }
    }

    pub fn transposed(drift: &Arc<Drift>) -> Self {
        Self {
            drift: Arc::clone(drift),
            transposed: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn matrix(&self) -> Mat {
        if self.transposed {
            self.drift.matrix().transpose()
        } else {
            self.drift.matrix().clone()
        }
    }
}

/// `sign · L · X · R^T` inside a generalized equation.
#[derive(Debug, Clone)]
pub struct ProductTerm {
    pub left: Mat,
    pub right: Mat,
    pub sign: f64,
}

impl ProductTerm {
    pub fn new(left: Mat, right: Mat, sign: f64) -> Self {
        Self { left, right, sign }
    }

    fn apply(&self, x: &Mat) -> Mat {
        (&self.left * x * self.right.transpose()) * self.sign
    }
}

/// The matrix equation
/// `L X + X R^T + Σ sign_i L_i X R_i^T + constant = 0`
/// with `L = left_drift` (`n1×n1`), `R = right_drift` (`n2×n2`) and
/// `X` of size `n1×n2`.
#[derive(Debug, Clone)]
pub struct GeneralizedLyapunovProblem {
    pub left_drift: DriftSide,
    pub right_drift: DriftSide,
    pub product_terms: Vec<ProductTerm>,
    pub constant: Mat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode {
    /// Dense solve of the vectorized (Kronecker) system.
    Direct,
    /// Drift-only Sylvester solve followed by up to `max_sweeps` sweeps,
    /// each re-solving with the product terms evaluated at the previous
    /// iterate. After `k` sweeps the iterate holds the kernel levels
    /// `1..=k+1`. Stops early when the relative change falls below
    /// `residual_tol`.
    FixedPoint { max_sweeps: usize, residual_tol: f64 },
    /// `Direct` when both dimensions are at most 60 and the operator fits
    /// the cap, otherwise `FixedPoint` run to convergence.
    Auto,
}

impl SolveMode {
    /// Exactly `sweeps` sweeps, never stopping early.
    pub fn truncated(sweeps: usize) -> Self {
        SolveMode::FixedPoint {
            max_sweeps: sweeps,
            residual_tol: 0.0,
        }
    }

    pub fn converged() -> Self {
        SolveMode::FixedPoint {
            max_sweeps: 500,
            residual_tol: 1e-14,
        }
    }

    pub fn resolve(self, n1: usize, n2: usize) -> SolveMode {
        match self {
            SolveMode::Auto => {
                let order = n1 * n2;
                if n1.max(n2) <= AUTO_DIRECT_MAX_DIM
                    && order.saturating_mul(order) <= DEFAULT_DIRECT_CAP
                {
                    SolveMode::Direct
                } else {
                    SolveMode::converged()
                }
            }
            other => other,
        }
    }
}

impl std::fmt::Display for SolveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveMode::Direct => write!(f, "direct"),
            SolveMode::FixedPoint {
                max_sweeps,
                residual_tol,
            } => write!(f, "fixed-point(sweeps={max_sweeps},tol={residual_tol:e})"),
            SolveMode::Auto => write!(f, "auto"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizedSolution {
    pub x: Mat,
    /// Mode actually used (`Auto` resolved).
    pub mode: SolveMode,
    /// Fixed-point sweeps after the initial drift-only solve; 0 for direct
    /// solves.
    pub sweeps: usize,
    /// Relative change of the last fixed-point sweep, if more than one ran.
    pub last_rel_change: Option<f64>,
}

impl GeneralizedLyapunovProblem {
    pub fn new(
        left_drift: DriftSide,
        right_drift: DriftSide,
        product_terms: Vec<ProductTerm>,
        constant: Mat,
    ) -> Result<Self> {
        let (n1, n2) = (left_drift.dim(), right_drift.dim());
        if constant.shape() != (n1, n2) {
            return Err(Error::dim(
                "generalized equation",
                format!(
                    "constant is {}x{}, expected {n1}x{n2}",
                    constant.nrows(),
                    constant.ncols()
                ),
            ));
        }
        for (i, t) in product_terms.iter().enumerate() {
            if t.left.shape() != (n1, n1) || t.right.shape() != (n2, n2) {
                return Err(Error::dim(
                    "generalized equation",
                    format!(
                        "product term {i} has factors {:?} and {:?}, expected ({n1}, {n1}) and ({n2}, {n2})",
                        t.left.shape(),
                        t.right.shape()
                    ),
                ));
            }
            if !t.sign.is_finite() {
                return Err(Error::NonFinite("product term sign"));
            }
        }
        check_finite(&constant, "generalized equation constant")?;
        Ok(Self {
            left_drift,
            right_drift,
            product_terms,
            constant,
        })
    }

    /// Convenience constructor from plain matrices.
    pub fn from_matrices(
        left_drift: Mat,
        right_drift: Mat,
        product_terms: Vec<ProductTerm>,
        constant: Mat,
    ) -> Result<Self> {
        crate::linalg::check_square(&left_drift, "left drift")?;
        crate::linalg::check_square(&right_drift, "right drift")?;
        Self::new(
            DriftSide::plain(&Drift::new(left_drift)),
            DriftSide::plain(&Drift::new(right_drift)),
            product_terms,
            constant,
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.left_drift.dim(), self.right_drift.dim())
    }

    /// Left-hand side evaluated at `x`.
    pub fn residual(&self, x: &Mat) -> Mat {
        let l = self.left_drift.matrix();
        let r = self.right_drift.matrix();
        let mut res = &l * x + x * r.transpose() + &self.constant;
        for t in &self.product_terms {
            res += t.apply(x);
        }
        res
    }

    /// `I ⊗ L + R ⊗ I + Σ sign·(R_i ⊗ L_i)`, the matrix of the equation
    /// acting on `vec(X)`.
    pub fn vectorized_operator(&self) -> Mat {
        let (n1, n2) = self.shape();
        let l = self.left_drift.matrix();
        let r = self.right_drift.matrix();
        let mut op = kron(&Mat::identity(n2, n2), &l) + kron(&r, &Mat::identity(n1, n1));
        for t in &self.product_terms {
            op += kron(&t.right, &t.left) * t.sign;
        }
        op
    }

    fn residual_scale(&self, x: &Mat) -> f64 {
        let mut s = self.left_drift.matrix().norm() + self.right_drift.matrix().norm();
        for t in &self.product_terms {
            s += t.left.norm() * t.right.norm();
        }
        s * x.norm() + self.constant.norm()
    }

    fn drift_scale(&self) -> f64 {
        self.left_drift.matrix().norm() + self.right_drift.matrix().norm()
    }

    /// Drift-only Sylvester solve `L X + X R^T + c = 0` on cached Schur forms.
    fn drift_solve(&self, c: &Mat) -> Result<Mat> {
        let s1 = self
            .left_drift
            .drift
            .schur_of(self.left_drift.transposed)?;
        let s2 = self
            .right_drift
            .drift
            .schur_of(!self.right_drift.transposed)?;
        sylvester_with_schur(s1, s2, c, self.drift_scale())
    }
}

pub fn solve_generalized(
    problem: &GeneralizedLyapunovProblem,
    mode: SolveMode,
) -> Result<GeneralizedSolution> {
    let (n1, n2) = problem.shape();
    match mode.resolve(n1, n2) {
        SolveMode::Direct => solve_direct(problem, DEFAULT_DIRECT_CAP),
        SolveMode::FixedPoint {
            max_sweeps,
            residual_tol,
        } => solve_fixed_point(problem, max_sweeps, residual_tol),
        SolveMode::Auto => unreachable!("resolved above"),
    }
}

/// Direct solve with an explicit cap on the operator entry count.
pub fn solve_direct(problem: &GeneralizedLyapunovProblem, cap: usize) -> Result<GeneralizedSolution> {
    let (n1, n2) = problem.shape();
    let order = n1 * n2;
    if order.saturating_mul(order) > cap {
        return Err(Error::SizeCap { order, cap });
    }
    let op = problem.vectorized_operator();
    let rhs = -Mat::from_column_slice(order, 1, problem.constant.as_slice());
    let lu = op.lu();
    let u = lu.u();
    let umax = u.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let umin = (0..order).fold(f64::INFINITY, |a, i| a.min(u[(i, i)].abs()));
    if order > 0 && !(umin > 1e-14 * umax) {
        return Err(Error::SingularOperator { order });
    }
    let v = lu.solve(&rhs).ok_or(Error::SingularOperator { order })?;
    let x = Mat::from_column_slice(n1, n2, v.as_slice());
    check_finite(&x, "direct solution")?;
    let res = problem.residual(&x).norm();
    if res > 1e-8 * problem.residual_scale(&x).max(f64::MIN_POSITIVE) {
        return Err(Error::SingularOperator { order });
    }
    Ok(GeneralizedSolution {
        x,
        mode: SolveMode::Direct,
        sweeps: 0,
        last_rel_change: None,
    })
}

fn solve_fixed_point(
    problem: &GeneralizedLyapunovProblem,
    max_sweeps: usize,
    residual_tol: f64,
) -> Result<GeneralizedSolution> {
    if max_sweeps == 0 {
        return Err(Error::InvalidArgument(
            "fixed-point solve needs at least one sweep".into(),
        ));
    }
    let mut x = problem.drift_solve(&problem.constant)?;
    let mut sweeps = 0;
    let mut last = None;
    while sweeps < max_sweeps {
        let mut c = problem.constant.clone();
        for t in &problem.product_terms {
            c += t.apply(&x);
        }
        let next = problem.drift_solve(&c)?;
        let denom = next.norm();
        let change = if denom > 0.0 {
            (&next - &x).norm() / denom
        } else {
            (&next - &x).norm()
        };
        x = next;
        sweeps += 1;
        last = Some(change);
        if change < residual_tol {
            break;
        }
    }
    Ok(GeneralizedSolution {
        x,
        mode: SolveMode::FixedPoint {
            max_sweeps,
            residual_tol,
        },
        sweeps,
        last_rel_change: last,
    })
}
