//! H2-type norms of bilinear systems and error systems, and a quadrature
//! oracle that evaluates the Volterra-kernel definition directly.

use crate::error::{Error, Result};
use crate::gramians::{
    cross_gramians_from_ops, gramians_from_ops, GramianKind, SystemOperators,
};
use crate::linalg::{check_finite, Mat};
use crate::matfun::{expm, FreqBand};
use crate::quadrature::gauss_legendre;
use crate::solvers::SolveMode;
use crate::system::{BilinearSystem, TimeBand};

/// Relative agreement required between the trace decomposition and the
/// monolithic error-system route in [`error_norm`].
pub const ERROR_ROUTE_TOL: f64 = 1e-8;

/// Cap on kernel evaluations of the quadrature oracle.
pub const ORACLE_COST_CAP: u128 = 50_000_000;

fn trace_cpc(c: &Mat, p: &Mat) -> f64 {
    (c * p * c.transpose()).trace()
}

/// Squared norm `trace(C P C^T)` of the given kind.
pub fn norm_squared(sys: &BilinearSystem, kind: GramianKind, mode: SolveMode) -> Result<f64> {
    let ops = SystemOperators::auto(sys, kind)?;
    let g = gramians_from_ops(&ops, mode)?;
    Ok(trace_cpc(&sys.c, &g.p))
}

fn root(sq: f64) -> f64 {
    sq.max(0.0).sqrt()
}

pub fn h2_norm(sys: &BilinearSystem, mode: SolveMode) -> Result<f64> {
    Ok(root(norm_squared(sys, GramianKind::Infinite, mode)?))
}

pub fn h2_time_limited(sys: &BilinearSystem, band: TimeBand, mode: SolveMode) -> Result<f64> {
    Ok(root(norm_squared(sys, GramianKind::Time(band), mode)?))
}

pub fn h2_freq_limited(sys: &BilinearSystem, band: FreqBand, mode: SolveMode) -> Result<f64> {
    Ok(root(norm_squared(sys, GramianKind::Freq(band), mode)?))
}

/// The three traces of the error decomposition
/// `‖Σ − Σ̃‖² = tr(C P C^T) − 2 tr(C P̂ C̃^T) + tr(C̃ P̃ C̃^T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    pub full: f64,
    pub cross: f64,
    pub rom: f64,
}

impl ErrorDecomposition {
    pub fn squared(&self) -> f64 {
        self.full - 2.0 * self.cross + self.rom
    }
}

pub fn error_decomposition(
    full: &SystemOperators,
    rom: &SystemOperators,
    mode: SolveMode,
) -> Result<ErrorDecomposition> {
    let gf = gramians_from_ops(full, mode)?;
    let gr = gramians_from_ops(rom, mode)?;
    let x = cross_gramians_from_ops(full, rom, mode)?;
    Ok(ErrorDecomposition {
        full: trace_cpc(&full.sys.c, &gf.p),
        cross: (&full.sys.c * &x.phat * rom.sys.c.transpose()).trace(),
        rom: trace_cpc(&rom.sys.c, &gr.p),
    })
}

/// `‖Σ − Σ̃‖` in the norm of `kind`. Computed from the trace decomposition
/// and cross-checked against the gramian of the assembled error system.
pub fn error_norm(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    kind: GramianKind,
    mode: SolveMode,
) -> Result<f64> {
    let full_ops = SystemOperators::auto(full, kind)?;
    error_norm_with(&full_ops, rom, mode)
}

/// [`error_norm`] reusing the operators of the full model.
pub fn error_norm_with(
    full: &SystemOperators,
    rom: &BilinearSystem,
    mode: SolveMode,
) -> Result<f64> {
    let kind = full.kind;
    let rom_ops = SystemOperators::new(rom, kind)?;
    let d = error_decomposition(full, &rom_ops, mode)?;
    let decomposed = d.squared();

    let e_ops = full.error_operators(&rom_ops)?;
    let ge = gramians_from_ops(&e_ops, mode)?;
    let monolithic = trace_cpc(&e_ops.sys.c, &ge.p);

    let scale = d.full.abs().max(d.rom.abs()).max(f64::MIN_POSITIVE);
    if (decomposed - monolithic).abs() > ERROR_ROUTE_TOL * scale {
        return Err(Error::Consistency(format!(
            "error norm routes disagree: decomposition {decomposed:.6e}, error system {monolithic:.6e}"
        )));
    }
    Ok(root(decomposed))
}

/// Direct evaluation of the Volterra-kernel definition of the norm over a
/// time window: `Σ_{i ≤ max_level} ∫…∫ ‖h_i(t_1, …, t_i)‖_F² dt`, every
/// variable ranging over `[lo, hi]`, by tensor Gauss–Legendre quadrature.
/// Returns the square root. Never touches the gramian equations.
pub fn volterra_quadrature_oracle(
    sys: &BilinearSystem,
    band: TimeBand,
    max_level: usize,
    nodes_per_dim: usize,
) -> Result<f64> {
    let levels: Vec<usize> = vec![nodes_per_dim; max_level];
    volterra_quadrature_oracle_levels(sys, band, &levels)
}

/// Like [`volterra_quadrature_oracle`] with a separate node count for each
/// level (`nodes[i-1]` nodes per dimension at level `i`).
pub fn volterra_quadrature_oracle_levels(
    sys: &BilinearSystem,
    band: TimeBand,
    nodes: &[usize],
) -> Result<f64> {
    sys.validate()?;
    band.validate()?;
    if !band.hi.is_finite() {
        return Err(Error::Unsupported(
            "quadrature oracle needs a bounded time window".into(),
        ));
    }
    if nodes.is_empty() || nodes.contains(&0) {
        return Err(Error::InvalidArgument(
            "quadrature oracle needs at least one level and one node".into(),
        ));
    }
    let mut cost: u128 = 0;
    for (i, &q) in nodes.iter().enumerate() {
        cost = cost.saturating_add((q as u128).saturating_pow(i as u32 + 1));
    }
    if cost > ORACLE_COST_CAP {
        return Err(Error::CostCap {
            evaluations: cost,
            cap: ORACLE_COST_CAP,
        });
    }

    let mut total = 0.0;
    for (idx, &q) in nodes.iter().enumerate() {
        let level = idx + 1;
        let (t, w) = gauss_legendre(q, band.lo, band.hi);
        let exps: Vec<Mat> = t
            .iter()
            .map(|&ti| expm(&sys.a, ti))
            .collect::<Result<_>>()?;
        total += level_integral(sys, &exps, &w, level, &sys.b.clone(), 1.0, 1);
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("quadrature oracle"));
    }
    Ok(total.max(0.0).sqrt())
}

/// Recursive tensor quadrature: `x` holds the kernel columns accumulated so
/// far, `weight` the product of quadrature weights.
fn level_integral(
    sys: &BilinearSystem,
    exps: &[Mat],
    w: &[f64],
    level: usize,
    x: &Mat,
    weight: f64,
    depth: usize,
) -> f64 {
    let mut sum = 0.0;
    for (e, &wi) in exps.iter().zip(w) {
        let y = e * x;
        if depth == level {
            let h = &sys.c * &y;
            sum += weight * wi * h.norm_squared();
        } else {
            let mut next = Mat::zeros(y.nrows(), y.ncols() * sys.inputs());
            for (k, nk) in sys.n.iter().enumerate() {
                next.columns_mut(k * y.ncols(), y.ncols()).copy_from(&(nk * &y));
            }
            sum += level_integral(sys, exps, w, level, &next, weight * wi, depth + 1);
        }
    }
    sum
}

/// `h_1(t) = C e^{At} B` at the given times; a convenience for plots and
/// tests of the linear part.
pub fn first_kernel(sys: &BilinearSystem, times: &[f64]) -> Result<Vec<Mat>> {
    times
        .iter()
        .map(|&t| {
            let h = &sys.c * expm(&sys.a, t)? * &sys.b;
            check_finite(&h, "first kernel")?;
            Ok(h)
        })
        .collect()
}
