//! Gramian-type equations of bilinear systems: infinite, time-limited and
//! frequency-limited gramians, cross gramians between a full model and a
//! reduced model, and the adjoint (R, S) equations used by the optimality
//! conditions.
//!
//! Every equation is assembled as a [`GeneralizedLyapunovProblem`] from two
//! [`SystemOperators`] values, one per side of the equation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, require_hurwitz, sym_eig_desc, symmetric_part, vstack, Mat};
use crate::matfun::{expm, freq_indicator, freq_indicator_bounded, FreqBand};
use crate::solvers::{
    solve_generalized, Drift, DriftSide, GeneralizedLyapunovProblem, ProductTerm, SolveMode,
};
use crate::system::{error_system, BilinearSystem, TimeBand};

/// Above this order the weighted products are approximated by projection
/// instead of being formed densely.
pub const EXACT_PRODUCT_MAX_ORDER: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GramianKind {
    Infinite,
    Time(TimeBand),
    Freq(FreqBand),
}

impl GramianKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            GramianKind::Infinite => Ok(()),
            GramianKind::Time(b) => b.validate(),
            GramianKind::Freq(b) => b.validate(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GramianKind::Infinite => "infinite",
            GramianKind::Time(_) => "time",
            GramianKind::Freq(_) => "freq",
        }
    }
}

/// Products of a weight matrix `M` (a matrix exponential or a frequency
/// indicator) with the system matrices: `M N_k`, `M B`, `M^T N_k^T`,
/// `M^T C^T`.
#[derive(Debug, Clone)]
pub struct WeightProducts {
    pub mn: Vec<Mat>,
    pub mb: Mat,
    pub mtnt: Vec<Mat>,
    pub mtct: Mat,
}

impl WeightProducts {
    pub fn exact(sys: &BilinearSystem, m: &Mat) -> Self {
        let mt = m.transpose();
        Self {
            mn: sys.n.iter().map(|nk| m * nk).collect(),
            mb: m * &sys.b,
            mtnt: sys.n.iter().map(|nk| &mt * nk.transpose()).collect(),
            mtct: &mt * sys.c.transpose(),
        }
    }
}

#[derive(Debug, Clone)]
enum Weights {
    /// Endpoint weights of a time window; `first = None` is the identity
    /// (window starts at 0) and `last = None` means the window is unbounded.
    Time {
        first: Option<WeightProducts>,
        last: Option<WeightProducts>,
    },
    Freq(WeightProducts),
}

/// A system together with everything its side of a gramian-type equation
/// needs: the shared drift factorization and the band-weighted products.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub sys: BilinearSystem,
    pub kind: GramianKind,
    drift: Arc<Drift>,
    weights: Weights,
}

fn plain_products(sys: &BilinearSystem) -> WeightProducts {
    WeightProducts {
        mn: sys.n.clone(),
        mb: sys.b.clone(),
        mtnt: sys.n.iter().map(|n| n.transpose()).collect(),
        mtct: sys.c.transpose(),
    }
}

impl SystemOperators {
    /// Operators with exactly computed weights.
    pub fn new(sys: &BilinearSystem, kind: GramianKind) -> Result<Self> {
        Self::build(sys, kind, false)
    }

    /// Like [`SystemOperators::new`] but without the Hurwitz requirement
    /// where the equations stay well defined: unbounded windows and bounded
    /// frequency bands of an unstable matrix. Used for reduced-order
    /// iterates of unguarded reductions.
    pub fn new_relaxed(sys: &BilinearSystem, kind: GramianKind) -> Result<Self> {
        Self::build(sys, kind, true)
    }

    fn build(sys: &BilinearSystem, kind: GramianKind, relaxed: bool) -> Result<Self> {
        sys.validate()?;
        kind.validate()?;
        let weights = match kind {
            GramianKind::Infinite => {
                if !relaxed {
                    require_hurwitz(&sys.a, "infinite-horizon gramian")?;
                }
                Weights::Time {
                    first: None,
                    last: None,
                }
            }
            GramianKind::Time(band) => {
                if !band.hi.is_finite() && !relaxed {
                    require_hurwitz(&sys.a, "unbounded time window")?;
                }
                let first = if band.lo > 0.0 {
                    Some(WeightProducts::exact(sys, &expm(&sys.a, band.lo)?))
                } else {
                    None
                };
                let last = if band.hi.is_finite() {
                    Some(WeightProducts::exact(sys, &expm(&sys.a, band.hi)?))
                } else {
                    None
                };
                Weights::Time { first, last }
            }
            GramianKind::Freq(band) => {
                let f = if relaxed {
                    freq_indicator_bounded(&sys.a, &band)?
                } else {
                    freq_indicator(&sys.a, &band)?
                };
                Weights::Freq(WeightProducts::exact(sys, &f))
            }
        };
        Ok(Self {
            sys: sys.clone(),
            kind,
            drift: Drift::new(sys.a.clone()),
            weights,
        })
    }

    /// Operators with caller-supplied weighted products, e.g. projection
    /// approximations for large systems. For a time window `first` must be
    /// given iff `lo > 0` and `last` iff `hi` is finite; for a frequency
    /// window `first` carries the indicator products and `last` is unused.
    pub fn with_products(
        sys: &BilinearSystem,
        kind: GramianKind,
        first: Option<WeightProducts>,
        last: Option<WeightProducts>,
    ) -> Result<Self> {
        sys.validate()?;
        kind.validate()?;
        let weights = match kind {
            GramianKind::Infinite => Weights::Time {
                first: None,
                last: None,
            },
            GramianKind::Time(band) => {
                if first.is_some() != (band.lo > 0.0) || last.is_some() != band.hi.is_finite() {
                    return Err(Error::InvalidArgument(
                        "weighted products do not match the time window".into(),
                    ));
                }
                Weights::Time { first, last }
            }
            GramianKind::Freq(_) => Weights::Freq(first.ok_or_else(|| {
                Error::InvalidArgument("frequency window needs indicator products".into())
            })?),
        };
        Ok(Self {
            sys: sys.clone(),
            kind,
            drift: Drift::new(sys.a.clone()),
            weights,
        })
    }

    /// Exact operators up to [`EXACT_PRODUCT_MAX_ORDER`], projection
    /// approximations above it.
    pub fn auto(sys: &BilinearSystem, kind: GramianKind) -> Result<Self> {
        if sys.order() <= EXACT_PRODUCT_MAX_ORDER || kind == GramianKind::Infinite {
            Self::new(sys, kind)
        } else {
            crate::reduce::approximate_operators(sys, kind)
        }
    }

    pub fn drift(&self) -> &Arc<Drift> {
        &self.drift
    }

    /// Endpoint products with their signs: `(products or identity, sign)`.
    fn time_endpoints(&self) -> Vec<(Option<&WeightProducts>, f64)> {
        match &self.weights {
            Weights::Time { first, last } => {
                let mut v = vec![(first.as_ref(), 1.0)];
                if let Some(l) = last {
                    v.push((Some(l), -1.0));
                }
                v
            }
            Weights::Freq(_) => Vec::new(),
        }
    }

    fn freq_products(&self) -> Option<&WeightProducts> {
        match &self.weights {
            Weights::Freq(p) => Some(p),
            Weights::Time { .. } => None,
        }
    }

    /// `M_start N_k` and friends, or the plain matrices when the weight is
    /// the identity.
    fn products_or_plain(p: Option<&WeightProducts>, sys: &BilinearSystem) -> WeightProducts {
        match p {
            Some(p) => p.clone(),
            None => plain_products(sys),
        }
    }

    /// Dense weight products of the last time endpoint, if any.
    pub fn last_time_products(&self) -> Option<&WeightProducts> {
        match &self.weights {
            Weights::Time { last, .. } => last.as_ref(),
            Weights::Freq(_) => None,
        }
    }

    pub fn freq_weight_products(&self) -> Option<&WeightProducts> {
        self.freq_products()
    }

    /// Operators of the error system `Σ − Σ̃` assembled block-wise from the
    /// operators of both systems, so approximated products carry over.
    pub fn error_operators(&self, rom: &SystemOperators) -> Result<SystemOperators> {
        check_pair(self, rom)?;
        let e = error_system(&self.sys, &rom.sys)?;
        let stack = |x: &WeightProducts, y: &WeightProducts| WeightProducts {
            mn: x.mn.iter().zip(&y.mn).map(|(a, b)| block_diag(a, b)).collect(),
            mb: vstack(&x.mb, &y.mb),
            mtnt: x.mtnt.iter().zip(&y.mtnt).map(|(a, b)| block_diag(a, b)).collect(),
            mtct: vstack(&x.mtct, &(-&y.mtct)),
        };
        let weights = match (&self.weights, &rom.weights) {
            (Weights::Freq(x), Weights::Freq(y)) => Weights::Freq(stack(x, y)),
            (
                Weights::Time { first: f1, last: l1 },
                Weights::Time { first: f2, last: l2 },
            ) => {
                let pair = |a: &Option<WeightProducts>, b: &Option<WeightProducts>| match (a, b) {
                    (Some(a), Some(b)) => Ok(Some(stack(a, b))),
                    (None, None) => Ok(None),
                    _ => Err(Error::Consistency("time weights of the two systems differ".into())),
                };
                Weights::Time {
                    first: pair(f1, f2)?,
                    last: pair(l1, l2)?,
                }
            }
            _ => return Err(Error::Consistency("weights of the two systems differ".into())),
        };
        Ok(SystemOperators {
            drift: Drift::new(e.a.clone()),
            sys: e,
            kind: self.kind,
            weights,
        })
    }
}

fn check_pair(x: &SystemOperators, y: &SystemOperators) -> Result<()> {
    x.sys.same_io(&y.sys)?;
    let same_kind = match (x.kind, y.kind) {
        (GramianKind::Infinite, GramianKind::Infinite) => true,
        (GramianKind::Time(a), GramianKind::Time(b)) => a == b,
        (GramianKind::Freq(a), GramianKind::Freq(b)) => a == b,
        _ => false,
    };
    if !same_kind {
        return Err(Error::InvalidArgument(
            "both sides of a gramian equation need the same window".into(),
        ));
    }
    Ok(())
}

/// Reachability-type equation for `X` (`n_x × n_y`):
/// `A_x X + X A_y^T + Σ ± (M N_x) X (M N_y)^T + Σ ± (M B_x)(M B_y)^T = 0`
/// (time windows) or the indicator-weighted analogue (frequency windows).
/// `P`, `P̃`, and `P̂` are all instances.
pub fn reach_problem(
    x: &SystemOperators,
    y: &SystemOperators,
    constant: Option<Mat>,
) -> Result<GeneralizedLyapunovProblem> {
    check_pair(x, y)?;
    let mut terms = Vec::new();
    let mut c = Mat::zeros(x.sys.order(), y.sys.order());
    if let (Some(fx), Some(fy)) = (x.freq_products(), y.freq_products()) {
        for k in 0..x.sys.inputs() {
            terms.push(ProductTerm::new(fx.mn[k].clone(), y.sys.n[k].clone(), 1.0));
            terms.push(ProductTerm::new(x.sys.n[k].clone(), fy.mn[k].clone(), 1.0));
        }
        c += &fx.mb * y.sys.b.transpose() + &x.sys.b * fy.mb.transpose();
    } else {
        for ((px, sign), (py, _)) in x.time_endpoints().into_iter().zip(y.time_endpoints()) {
            let px = SystemOperators::products_or_plain(px, &x.sys);
            let py = SystemOperators::products_or_plain(py, &y.sys);
            for k in 0..x.sys.inputs() {
                terms.push(ProductTerm::new(px.mn[k].clone(), py.mn[k].clone(), sign));
            }
            c += (&px.mb * py.mb.transpose()) * sign;
        }
    }
    GeneralizedLyapunovProblem::new(
        DriftSide::plain(&x.drift),
        DriftSide::plain(&y.drift),
        terms,
        constant.unwrap_or(c),
    )
}

/// Observability-type equation for `X` (`n_x × n_y`):
/// `A_x^T X + X A_y + Σ ± (M^T N_x^T) X (M^T N_y^T)^T + σ Σ ± (M^T C_x^T)(M^T C_y^T)^T = 0`
/// and its frequency analogue. `σ = +1` gives `Q`, `Q̃`; `σ = −1` gives `Q̂`.
pub fn obs_problem(
    x: &SystemOperators,
    y: &SystemOperators,
    sigma: f64,
) -> Result<GeneralizedLyapunovProblem> {
    check_pair(x, y)?;
    let mut terms = Vec::new();
    let mut c = Mat::zeros(x.sys.order(), y.sys.order());
    if let (Some(fx), Some(fy)) = (x.freq_products(), y.freq_products()) {
        for k in 0..x.sys.inputs() {
            terms.push(ProductTerm::new(
                fx.mtnt[k].clone(),
                y.sys.n[k].transpose(),
                1.0,
            ));
            terms.push(ProductTerm::new(
                x.sys.n[k].transpose(),
                fy.mtnt[k].clone(),
                1.0,
            ));
        }
        c += &fx.mtct * &y.sys.c + x.sys.c.transpose() * fy.mtct.transpose();
    } else {
        for ((px, sign), (py, _)) in x.time_endpoints().into_iter().zip(y.time_endpoints()) {
            let px = SystemOperators::products_or_plain(px, &x.sys);
            let py = SystemOperators::products_or_plain(py, &y.sys);
            for k in 0..x.sys.inputs() {
                terms.push(ProductTerm::new(px.mtnt[k].clone(), py.mtnt[k].clone(), sign));
            }
            c += (&px.mtct * py.mtct.transpose()) * sign;
        }
    }
    GeneralizedLyapunovProblem::new(
        DriftSide::transposed(&x.drift),
        DriftSide::transposed(&y.drift),
        terms,
        c * sigma,
    )
}

/// Adjoint of the reachability operator of the pair `(x, y)`: every product
/// term `L X R^T` becomes `L^T X R`, the drifts are transposed. With
/// `constant = −C_x^T C_y` and `(x, y) = (full, rom)` this is the `R`
/// equation; with `(rom, rom)` and `+C̃^T C̃` it is the `S` equation.
pub fn adjoint_problem(
    x: &SystemOperators,
    y: &SystemOperators,
    constant: Mat,
) -> Result<GeneralizedLyapunovProblem> {
    let reach = reach_problem(x, y, Some(Mat::zeros(x.sys.order(), y.sys.order())))?;
    let terms = reach
        .product_terms
        .into_iter()
        .map(|t| ProductTerm::new(t.left.transpose(), t.right.transpose(), t.sign))
        .collect();
    GeneralizedLyapunovProblem::new(
        DriftSide::transposed(&x.drift),
        DriftSide::transposed(&y.drift),
        terms,
        constant,
    )
}

#[derive(Debug, Clone)]
pub struct GramianSet {
    pub p: Mat,
    pub q: Mat,
    pub kind: GramianKind,
    pub mode: SolveMode,
    /// Fixed-point sweeps used for `P` and `Q`.
    pub sweeps: (usize, usize),
}

impl GramianSet {
    /// Smallest eigenvalues of `P` and `Q`, relative to their largest.
    pub fn eigen_floor(&self) -> (f64, f64) {
        let floor = |m: &Mat| {
            let (vals, _) = sym_eig_desc(m);
            let max = vals.iter().cloned().fold(0.0_f64, |a, x| a.max(x.abs()));
            if max == 0.0 {
                0.0
            } else {
                vals.iter().cloned().fold(f64::INFINITY, f64::min) / max
            }
        };
        (floor(&self.p), floor(&self.q))
    }
}

pub fn gramians_from_ops(ops: &SystemOperators, mode: SolveMode) -> Result<GramianSet> {
    let p = solve_generalized(&reach_problem(ops, ops, None)?, mode)?;
    let q = solve_generalized(&obs_problem(ops, ops, 1.0)?, mode)?;
    Ok(GramianSet {
        p: symmetric_part(&p.x),
        q: symmetric_part(&q.x),
        kind: ops.kind,
        mode: p.mode,
        sweeps: (p.sweeps, q.sweeps),
    })
}

pub fn gramians(sys: &BilinearSystem, kind: GramianKind, mode: SolveMode) -> Result<GramianSet> {
    gramians_from_ops(&SystemOperators::auto(sys, kind)?, mode)
}

pub fn gramians_infinite(sys: &BilinearSystem, mode: SolveMode) -> Result<GramianSet> {
    gramians(sys, GramianKind::Infinite, mode)
}

pub fn gramians_time_limited(
    sys: &BilinearSystem,
    band: TimeBand,
    mode: SolveMode,
) -> Result<GramianSet> {
    gramians(sys, GramianKind::Time(band), mode)
}

pub fn gramians_freq_limited(
    sys: &BilinearSystem,
    band: FreqBand,
    mode: SolveMode,
) -> Result<GramianSet> {
    gramians(sys, GramianKind::Freq(band), mode)
}

/// `P̂` (`n×r`) and `Q̂` (`n×r`) between a full model and a reduced model.
#[derive(Debug, Clone)]
pub struct CrossGramianPair {
    pub phat: Mat,
    pub qhat: Mat,
    pub kind: GramianKind,
}

pub fn cross_gramians_from_ops(
    full: &SystemOperators,
    rom: &SystemOperators,
    mode: SolveMode,
) -> Result<CrossGramianPair> {
    let phat = solve_generalized(&reach_problem(full, rom, None)?, mode)?.x;
    let qhat = solve_generalized(&obs_problem(full, rom, -1.0)?, mode)?.x;
    Ok(CrossGramianPair {
        phat,
        qhat,
        kind: full.kind,
    })
}

pub fn cross_gramians_time(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    band: TimeBand,
    mode: SolveMode,
) -> Result<CrossGramianPair> {
    let kind = GramianKind::Time(band);
    cross_gramians_from_ops(
        &SystemOperators::auto(full, kind)?,
        &SystemOperators::new(rom, kind)?,
        mode,
    )
}

pub fn cross_gramians_freq(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    band: FreqBand,
    mode: SolveMode,
) -> Result<CrossGramianPair> {
    let kind = GramianKind::Freq(band);
    cross_gramians_from_ops(
        &SystemOperators::auto(full, kind)?,
        &SystemOperators::new(rom, kind)?,
        mode,
    )
}

/// `R` (`n×r`) and `S` (`r×r`) of the optimality conditions.
#[derive(Debug, Clone)]
pub struct RSMatrices {
    pub r: Mat,
    pub s: Mat,
    pub kind: GramianKind,
}

pub fn rs_from_ops(
    full: &SystemOperators,
    rom: &SystemOperators,
    mode: SolveMode,
) -> Result<RSMatrices> {
    let r_const = -(full.sys.c.transpose() * &rom.sys.c);
    let s_const = rom.sys.c.transpose() * &rom.sys.c;
    let r = solve_generalized(&adjoint_problem(full, rom, r_const)?, mode)?.x;
    let s = solve_generalized(&adjoint_problem(rom, rom, s_const)?, mode)?.x;
    Ok(RSMatrices {
        r,
        s: symmetric_part(&s),
        kind: full.kind,
    })
}

pub fn rs_matrices_time(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    band: TimeBand,
    mode: SolveMode,
) -> Result<RSMatrices> {
    let kind = GramianKind::Time(band);
    rs_from_ops(
        &SystemOperators::auto(full, kind)?,
        &SystemOperators::new(rom, kind)?,
        mode,
    )
}

pub fn rs_matrices_freq(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    band: FreqBand,
    mode: SolveMode,
) -> Result<RSMatrices> {
    let kind = GramianKind::Freq(band);
    rs_from_ops(
        &SystemOperators::auto(full, kind)?,
        &SystemOperators::new(rom, kind)?,
        mode,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, n: f64, b: f64, c: f64) -> BilinearSystem {
        BilinearSystem::new(
            Mat::from_element(1, 1, a),
            vec![Mat::from_element(1, 1, n)],
            Mat::from_element(1, 1, b),
            Mat::from_element(1, 1, c),
        )
        .unwrap()
    }

    #[test]
    fn scalar_infinite() {
        let g = gramians_infinite(&scalar(-1.0, 0.0, 1.0, 1.0), SolveMode::Direct).unwrap();
        assert!((g.p[(0, 0)] - 0.5).abs() < 1e-15);
        let g = gramians_infinite(&scalar(-2.0, 1.0, 3f64.sqrt(), 1.0), SolveMode::Direct).unwrap();
        assert!((g.p[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_time_limited() {
        let band = TimeBand::up_to(2f64.ln());
        let g = gramians_time_limited(&scalar(-1.0, 0.0, 1.0, 1.0), band, SolveMode::Direct)
            .unwrap();
        assert!((g.p[(0, 0)] - 0.375).abs() < 1e-14);
    }

    #[test]
    fn scalar_freq_limited() {
        let g = gramians_freq_limited(
            &scalar(-1.0, 0.0, 1.0, 1.0),
            FreqBand::up_to(1.0),
            SolveMode::Direct,
        )
        .unwrap();
        assert!((g.p[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scalar_cross_gramian() {
        let full = scalar(-1.0, 0.0, 1.0, 1.0);
        let rom = scalar(-2.0, 0.0, 1.0, 1.0);
        let x = cross_gramians_time(&full, &rom, TimeBand::infinite(), SolveMode::Direct).unwrap();
        assert!((x.phat[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x.qhat[(0, 0)] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unstable_drift_rejected_for_unbounded_windows() {
        let s = scalar(0.5, 0.0, 1.0, 1.0);
        assert!(matches!(
            gramians_infinite(&s, SolveMode::Direct),
            Err(Error::NotHurwitz { .. })
        ));
        // finite windows are fine
        let g = gramians_time_limited(&s, TimeBand::up_to(1.0), SolveMode::Direct).unwrap();
        let want = ((2.0 * 0.5f64).exp() - 1.0) / (2.0 * 0.5);
        assert!((g.p[(0, 0)] - want).abs() < 1e-13);
    }
}
