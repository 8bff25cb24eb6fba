//! Reduction algorithms: balanced truncation (infinite, time-limited,
//! frequency-limited), the interpolation-type fixed-point iterations
//! (HOMORA and its time/frequency-limited variants), the pseudo-optimal
//! refinements, and the projection approximation of weighted products for
//! large models.

use std::fmt;
use std::str::FromStr;

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::gramians::{
    gramians_from_ops, obs_problem, reach_problem, GramianKind, SystemOperators, WeightProducts,
};
use crate::linalg::{
    inverse, orth, rcond, sorted_eigenvalues, spectral_abscissa, sym_eig_desc, Mat, RealSchur,
};
use crate::matfun::{expm, freq_indicator, FreqBand};
use crate::optimality::{residuals, ResidualReport};
use crate::solvers::{solve_generalized, GeneralizedLyapunovProblem, SolveMode};
use crate::system::{biorthonormalize, project, BilinearSystem, TimeBand};

/// Eigenvalues of a factored gramian below this fraction of the largest are
/// dropped.
pub const CLIP_RATIO: f64 = 1e-12;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_RATIO: f64 = 1e-12;
/// Eigenvalues below `-INDEFINITE_RATIO · λ_max` are an error.
pub const INDEFINITE_RATIO: f64 = 1e-10;
/// Maximum number of eigenvalue reflections per run.
pub const MAX_GUARD_EVENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Bt,
    Tlbt,
    Flbt,
    Homora,
    Tlhmora,
    Flhmora,
    Flphmora,
    Tlphmora,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Bt,
        Algorithm::Tlbt,
        Algorithm::Flbt,
        Algorithm::Homora,
        Algorithm::Tlhmora,
        Algorithm::Flhmora,
        Algorithm::Flphmora,
        Algorithm::Tlphmora,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::Bt => "bt",
            Algorithm::Tlbt => "tlbt",
            Algorithm::Flbt => "flbt",
            Algorithm::Homora => "homora",
            Algorithm::Tlhmora => "tlhmora",
            Algorithm::Flhmora => "flhmora",
            Algorithm::Flphmora => "flphmora",
            Algorithm::Tlphmora => "tlphmora",
        }
    }

    /// Display name used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Bt => "BT",
            Algorithm::Tlbt => "TLBT",
            Algorithm::Flbt => "FLBT",
            Algorithm::Homora => "HOMORA",
            Algorithm::Tlhmora => "TLHMORA",
            Algorithm::Flhmora => "FLHMORA",
            Algorithm::Flphmora => "FLPHMORA",
            Algorithm::Tlphmora => "TLPHMORA",
        }
    }

    pub fn needs_time_band(&self) -> bool {
        matches!(self, Algorithm::Tlbt | Algorithm::Tlhmora | Algorithm::Tlphmora)
    }

    pub fn needs_freq_band(&self) -> bool {
        matches!(self, Algorithm::Flbt | Algorithm::Flhmora | Algorithm::Flphmora)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub solve_mode: SolveMode,
    /// Reflect unstable eigenvalues of iterates instead of carrying on with
    /// them.
    pub stability_guard: bool,
    /// Tolerance on the relative change of `(B̄, C̄)` in the pseudo-optimal
    /// loops.
    pub pseudo_tol: f64,
    pub pseudo_max_iter: usize,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 200,
            solve_mode: SolveMode::Auto,
            stability_guard: true,
            pseudo_tol: 1e-12,
            pseudo_max_iter: 500,
        }
    }
}

impl IterationConfig {
    /// Settings that reproduce the reference experiments: gramian-type
    /// equations truncated after `truncation` fixed-point sweeps, at most
    /// ten outer iterations, no eigenvalue reflection.
    pub fn reproduction(truncation: usize) -> Self {
        Self {
            tol: 1e-5,
            max_iter: 10,
            solve_mode: SolveMode::truncated(truncation),
            stability_guard: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.pseudo_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.pseudo_max_iter == 0 {
            return Err(Error::InvalidArgument(
                "iteration limits must be at least 1".into(),
            ));
        }
        if let SolveMode::FixedPoint { max_sweeps: 0, .. } = self.solve_mode {
            return Err(Error::InvalidArgument(
                "fixed-point mode needs at least one sweep".into(),
            ));
        }
        Ok(())
    }
}

/// How much of each gramian was clipped during square-root factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipReport {
    /// Smallest eigenvalue over the largest, before clipping.
    pub p_min_ratio: f64,
    pub q_min_ratio: f64,
    pub clipped_p: usize,
    pub clipped_q: usize,
}

#[derive(Debug, Clone)]
pub struct ReductionOutcome {
    pub algorithm: Algorithm,
    pub kind: GramianKind,
    pub rom: BilinearSystem,
    pub iterations: usize,
    pub converged: bool,
    /// Change measure after every iteration.
    pub convergence_history: Vec<f64>,
    /// Leading Hankel-type singular values (balanced truncation only).
    pub hankel_values: Option<Vec<f64>>,
    pub clip: Option<ClipReport>,
    pub guard_events: usize,
    pub optimality_residuals: Option<ResidualReport>,
    /// The run whose `Ã`, `Ñ` a pseudo-optimal refinement started from.
    pub upstream: Option<Box<ReductionOutcome>>,
}

impl ReductionOutcome {
    fn direct(algorithm: Algorithm, kind: GramianKind, rom: BilinearSystem) -> Self {
        Self {
            algorithm,
            kind,
            rom,
            iterations: 0,
            converged: true,
            convergence_history: Vec::new(),
            hankel_values: None,
            clip: None,
            guard_events: 0,
            optimality_residuals: None,
            upstream: None,
        }
    }

    /// Fill `optimality_residuals` for the outcome's own window.
    pub fn attach_residuals(&mut self, full: &BilinearSystem, mode: SolveMode) -> Result<()> {
        self.optimality_residuals = Some(residuals(full, &self.rom, self.kind, mode)?);
        Ok(())
    }
}

fn check_order(sys: &BilinearSystem, r: usize) -> Result<()> {
    sys.validate()?;
    if r == 0 || r > sys.order() {
        return Err(Error::InvalidArgument(format!(
            "reduced order {r} must lie in 1..={}",
            sys.order()
        )));
    }
    Ok(())
}

/// Square-root factor `Z` with `M ≈ Z Z^T`; returns the factor, the clipped
/// count, and `λ_min / λ_max`.
fn psd_factor(m: &Mat) -> Result<(Mat, usize, f64)> {
    let (vals, vecs) = sym_eig_desc(m);
    let max = vals[0];
    let min = vals[vals.len() - 1];
    if !(max > 0.0) {
        return Err(Error::IndefiniteGramian {
            min_eig: min,
            max_eig: max,
        });
    }
    if min < -INDEFINITE_RATIO * max {
        return Err(Error::IndefiniteGramian {
            min_eig: min,
            max_eig: max,
        });
    }
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > CLIP_RATIO * max).collect();
    let mut z = Mat::zeros(m.nrows(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        z.set_column(j, &(vecs.column(i) * vals[i].sqrt()));
    }
    Ok((z, vals.len() - keep.len(), min / max))
}

fn bt_algorithm(kind: GramianKind) -> Algorithm {
    match kind {
        GramianKind::Infinite => Algorithm::Bt,
        GramianKind::Time(_) => Algorithm::Tlbt,
        GramianKind::Freq(_) => Algorithm::Flbt,
    }
}

/// Square-root balanced truncation with the gramians of `kind`.
pub fn balanced_truncation(
    sys: &BilinearSystem,
    r: usize,
    kind: GramianKind,
    mode: SolveMode,
) -> Result<ReductionOutcome> {
    check_order(sys, r)?;
    let ops = SystemOperators::auto(sys, kind)?;
    balanced_truncation_with(&ops, r, mode)
}

pub fn balanced_truncation_with(
    ops: &SystemOperators,
    r: usize,
    mode: SolveMode,
) -> Result<ReductionOutcome> {
    check_order(&ops.sys, r)?;
    let g = gramians_from_ops(ops, mode)?;
    let (zp, clipped_p, p_min_ratio) = psd_factor(&g.p)?;
    let (zq, clipped_q, q_min_ratio) = psd_factor(&g.q)?;
    let svd = (zq.transpose() * &zp).svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Consistency("SVD without U".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Consistency("SVD without V".into()))?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let top = sv[order[0]];
    let rank = order
        .iter()
        .filter(|&&i| sv[i] > RANK_RATIO * top && top > 0.0)
        .count();
    if r > rank {
        return Err(Error::RankExceeded { r, rank });
    }
    let n = ops.sys.order();
    let mut v = Mat::zeros(n, r);
    let mut w = Mat::zeros(n, r);
    let mut hankel = Vec::with_capacity(r);
    for (j, &i) in order.iter().take(r).enumerate() {
        let s = sv[i];
        v.set_column(j, &(&zp * vt.row(i).transpose() / s.sqrt()));
        w.set_column(j, &(&zq * u.column(i) / s.sqrt()));
        hankel.push(s);
    }
    let rom = project(&ops.sys, &v, &w)?;
    if clipped_p + clipped_q > 0 {
        debug!("balanced truncation clipped {clipped_p} (P) and {clipped_q} (Q) eigenvalues");
    }
    let mut out = ReductionOutcome::direct(bt_algorithm(ops.kind), ops.kind, rom);
    out.hankel_values = Some(hankel);
    out.clip = Some(ClipReport {
        p_min_ratio,
        q_min_ratio,
        clipped_p,
        clipped_q,
    });
    Ok(out)
}

/// Relative change of the sorted spectra of two drift matrices.
pub fn spectral_change(previous: &Mat, current: &Mat) -> Result<f64> {
    let a = sorted_eigenvalues(previous)?;
    let b = sorted_eigenvalues(current)?;
    let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    Ok(if den > 0.0 { num / den } else { num })
}

/// Mirror eigenvalues with non-negative real part into the open left
/// half-plane, working on the real Schur form.
pub fn reflect_unstable(a: &Mat) -> Result<Mat> {
    let s = RealSchur::new(a)?;
    let mut t = s.t.clone();
    let floor = 1e-8 * a.norm().max(f64::MIN_POSITIVE);
    for &(i, size) in &s.blocks {
        let re = if size == 1 {
            t[(i, i)]
        } else {
            0.5 * (t[(i, i)] + t[(i + 1, i + 1)])
        };
        if re >= 0.0 {
            let shift = -re.max(floor) - re;
            for k in i..i + size {
                t[(k, k)] += shift;
            }
        }
    }
    Ok(&s.q * t * s.q.transpose())
}

struct Guard {
    enabled: bool,
    events: usize,
}

impl Guard {
    fn new(enabled: bool) -> Self {
        Self { enabled, events: 0 }
    }

    /// Returns the (possibly repaired) system.
    fn check(&mut self, sys: BilinearSystem) -> Result<BilinearSystem> {
        if !self.enabled || spectral_abscissa(&sys.a)? < 0.0 {
            return Ok(sys);
        }
        self.events += 1;
        if self.events > MAX_GUARD_EVENTS {
            return Err(Error::GuardExhausted {
                events: MAX_GUARD_EVENTS,
            });
        }
        warn!(
            "reduced drift matrix is unstable; reflecting its spectrum (event {})",
            self.events
        );
        let mut sys = sys;
        sys.a = reflect_unstable(&sys.a)?;
        Ok(sys)
    }
}

fn rom_operators(rom: &BilinearSystem, kind: GramianKind, guarded: bool) -> Result<SystemOperators> {
    if guarded {
        SystemOperators::new(rom, kind)
    } else {
        SystemOperators::new_relaxed(rom, kind)
    }
}

/// The pair of generalized Sylvester equations solved in one step of the
/// interpolation iteration: the reachability-type equation for `V` and the
/// observability-type equation for `W`.
pub fn iteration_problems(
    full: &SystemOperators,
    rom: &SystemOperators,
) -> Result<(GeneralizedLyapunovProblem, GeneralizedLyapunovProblem)> {
    Ok((reach_problem(full, rom, None)?, obs_problem(full, rom, -1.0)?))
}

fn iterative_algorithm(kind: GramianKind) -> Algorithm {
    match kind {
        GramianKind::Infinite => Algorithm::Homora,
        GramianKind::Time(_) => Algorithm::Tlhmora,
        GramianKind::Freq(_) => Algorithm::Flhmora,
    }
}

/// Interpolation-type fixed-point iteration on the operators of `full`,
/// started from `init`.
pub fn interpolation_iteration(
    full: &SystemOperators,
    init: &BilinearSystem,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    cfg.validate()?;
    let r = init.order();
    check_order(&full.sys, r)?;
    init.validate()?;
    full.sys.same_io(init)?;
    let kind = full.kind;
    let mut guard = Guard::new(cfg.stability_guard);
    let mut rom = guard.check(init.clone())?;
    let mut history = Vec::new();
    let mut converged = false;
    for it in 1..=cfg.max_iter {
        let rom_ops = rom_operators(&rom, kind, cfg.stability_guard)?;
        let (pv, pw) = iteration_problems(full, &rom_ops)?;
        let v = solve_generalized(&pv, cfg.solve_mode)?.x;
        let w = solve_generalized(&pw, cfg.solve_mode)?.x;
        let (v, w) = biorthonormalize(&v, &w)?;
        let next = guard.check(project(&full.sys, &v, &w)?)?;
        let change = spectral_change(&rom.a, &next.a)?;
        debug!("{} iteration {it}: change {change:.3e}", iterative_algorithm(kind));
        history.push(change);
        rom = next;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        info!(
            "{} stopped after {} iterations without reaching tol {:e}",
            iterative_algorithm(kind),
            history.len(),
            cfg.tol
        );
    }
    Ok(ReductionOutcome {
        algorithm: iterative_algorithm(kind),
        kind,
        rom,
        iterations: history.len(),
        converged,
        convergence_history: history,
        hankel_values: None,
        clip: None,
        guard_events: guard.events,
        optimality_residuals: None,
        upstream: None,
    })
}

pub fn homora(
    sys: &BilinearSystem,
    r: usize,
    init: &BilinearSystem,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    check_order(sys, r)?;
    check_init(init, r)?;
    interpolation_iteration(&SystemOperators::auto(sys, GramianKind::Infinite)?, init, cfg)
}

pub fn tlhmora(
    sys: &BilinearSystem,
    r: usize,
    band: TimeBand,
    init: &BilinearSystem,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    check_order(sys, r)?;
    check_init(init, r)?;
    interpolation_iteration(&SystemOperators::auto(sys, GramianKind::Time(band))?, init, cfg)
}

pub fn flhmora(
    sys: &BilinearSystem,
    r: usize,
    band: FreqBand,
    init: &BilinearSystem,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    check_order(sys, r)?;
    check_init(init, r)?;
    interpolation_iteration(&SystemOperators::auto(sys, GramianKind::Freq(band))?, init, cfg)
}

fn check_init(init: &BilinearSystem, r: usize) -> Result<()> {
    init.validate()?;
    if init.order() != r {
        return Err(Error::InvalidArgument(format!(
            "initial reduced model has order {}, expected {r}",
            init.order()
        )));
    }
    Ok(())
}

/// Outcome of the pseudo-optimal `(B̄, C̄)` loop.
struct PseudoRun {
    rom: BilinearSystem,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    guard_events: usize,
}

fn pseudo_loop(
    full: &SystemOperators,
    start: &BilinearSystem,
    cfg: &IterationConfig,
) -> Result<PseudoRun> {
    let kind = full.kind;
    let mut guard = Guard::new(cfg.stability_guard);
    let start = guard.check(start.clone())?;
    if !cfg.stability_guard {
        // the equations below need a stable reduced drift either way
        crate::linalg::require_hurwitz(&start.a, "pseudo-optimal refinement")?;
    }
    let (a_bar, n_bar) = (start.a.clone(), start.n.clone());
    let mut b_bar = start.b.clone();
    let mut c_bar = start.c.clone();
    let mut history = Vec::new();
    let mut converged = false;
    let with = |b: &Mat, c: &Mat| BilinearSystem {
        a: a_bar.clone(),
        n: n_bar.clone(),
        b: b.clone(),
        c: c.clone(),
    };
    for _ in 0..cfg.pseudo_max_iter {
        let ops = SystemOperators::new(&with(&b_bar, &c_bar), kind)?;
        let q_bar = solve_generalized(&obs_problem(&ops, &ops, 1.0)?, cfg.solve_mode)?.x;
        let q_hat = solve_generalized(&obs_problem(full, &ops, -1.0)?, cfg.solve_mode)?.x;
        if rcond(&q_bar) < 1e-13 {
            return Err(Error::IllPosedNormalization {
                which: "observability",
            });
        }
        let b_new = -(inverse(&q_bar, "pseudo-optimal B")? * q_hat.transpose() * &full.sys.b);

        let ops = SystemOperators::new(&with(&b_new, &c_bar), kind)?;
        let p_bar = solve_generalized(&reach_problem(&ops, &ops, None)?, cfg.solve_mode)?.x;
        let p_hat = solve_generalized(&reach_problem(full, &ops, None)?, cfg.solve_mode)?.x;
        if rcond(&p_bar) < 1e-13 {
            return Err(Error::IllPosedNormalization {
                which: "reachability",
            });
        }
        let c_new = &full.sys.c * p_hat * inverse(&p_bar, "pseudo-optimal C")?;

        let change = ((&b_new - &b_bar).norm() + (&c_new - &c_bar).norm())
            / (b_new.norm() + c_new.norm()).max(f64::MIN_POSITIVE);
        history.push(change);
        b_bar = b_new;
        c_bar = c_new;
        if change < cfg.pseudo_tol {
            converged = true;
            break;
        }
    }
    Ok(PseudoRun {
        rom: with(&b_bar, &c_bar),
        iterations: history.len(),
        converged,
        history,
        guard_events: guard.events,
    })
}

/// Pseudo-optimal refinement of `start`: `Ã`, `Ñ_k` are kept, `B̃` and `C̃`
/// are chosen so that the optimality conditions on them hold.
pub fn pseudo_optimal(
    full: &SystemOperators,
    start: &BilinearSystem,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    cfg.validate()?;
    full.sys.same_io(start)?;
    let algorithm = match full.kind {
        GramianKind::Time(_) => Algorithm::Tlphmora,
        GramianKind::Freq(_) => Algorithm::Flphmora,
        GramianKind::Infinite => {
            return Err(Error::Unsupported(
                "pseudo-optimal refinement needs a time or frequency window".into(),
            ))
        }
    };
    let run = pseudo_loop(full, start, cfg)?;
    Ok(ReductionOutcome {
        algorithm,
        kind: full.kind,
        rom: run.rom,
        iterations: run.iterations,
        converged: run.converged,
        convergence_history: run.history,
        hankel_values: None,
        clip: None,
        guard_events: run.guard_events,
        optimality_residuals: None,
        upstream: None,
    })
}

/// Frequency-limited pseudo-optimal reduction: FLHMORA from the FLBT model,
/// then the pseudo-optimal loop on its `Ã`, `Ñ_k`.
pub fn flphmora(
    sys: &BilinearSystem,
    r: usize,
    band: FreqBand,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    limited_pseudo(sys, r, GramianKind::Freq(band), cfg)
}

/// Time-limited pseudo-optimal reduction: TLHMORA from the TLBT model,
/// then the pseudo-optimal loop.
pub fn tlphmora(
    sys: &BilinearSystem,
    r: usize,
    band: TimeBand,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    limited_pseudo(sys, r, GramianKind::Time(band), cfg)
}

fn limited_pseudo(
    sys: &BilinearSystem,
    r: usize,
    kind: GramianKind,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    check_order(sys, r)?;
    cfg.validate()?;
    let full = SystemOperators::auto(sys, kind)?;
    let init = balanced_truncation_with(&full, r, cfg.solve_mode)?.rom;
    let upstream = interpolation_iteration(&full, &init, cfg)?;
    let mut out = pseudo_optimal(&full, &upstream.rom, cfg)?;
    out.guard_events += upstream.guard_events;
    out.upstream = Some(Box::new(upstream));
    Ok(out)
}

/// Run any algorithm with its default initialization (balanced truncation
/// of the matching kind for the iterative ones).
pub fn run_algorithm(
    sys: &BilinearSystem,
    algorithm: Algorithm,
    r: usize,
    time: Option<TimeBand>,
    freq: Option<FreqBand>,
    cfg: &IterationConfig,
) -> Result<ReductionOutcome> {
    cfg.validate()?;
    let time_kind = || {
        time.map(GramianKind::Time)
            .ok_or_else(|| Error::InvalidArgument(format!("{algorithm} needs a time band")))
    };
    let freq_kind = || {
        freq.map(GramianKind::Freq)
            .ok_or_else(|| Error::InvalidArgument(format!("{algorithm} needs a frequency band")))
    };
    let kind = match algorithm {
        Algorithm::Bt | Algorithm::Homora => GramianKind::Infinite,
        Algorithm::Tlbt | Algorithm::Tlhmora | Algorithm::Tlphmora => time_kind()?,
        Algorithm::Flbt | Algorithm::Flhmora | Algorithm::Flphmora => freq_kind()?,
    };
    check_order(sys, r)?;
    match algorithm {
        Algorithm::Bt | Algorithm::Tlbt | Algorithm::Flbt => {
            balanced_truncation(sys, r, kind, cfg.solve_mode)
        }
        Algorithm::Homora | Algorithm::Tlhmora | Algorithm::Flhmora => {
            let full = SystemOperators::auto(sys, kind)?;
            let init = balanced_truncation_with(&full, r, cfg.solve_mode)?.rom;
            interpolation_iteration(&full, &init, cfg)
        }
        Algorithm::Flphmora | Algorithm::Tlphmora => limited_pseudo(sys, r, kind, cfg),
    }
}

/// Projection approximations of the band-weighted products of a large
/// model, from a HOMORA-type iteration (`e^{Aτ}B ≈ V e^{Ãτ} B̃` and so on).
#[derive(Debug, Clone)]
pub struct ProductApproximation {
    pub v: Mat,
    pub w: Mat,
    pub rom: BilinearSystem,
    /// `(τ, products of e^{Aτ})` for every requested time point.
    pub time: Vec<(f64, WeightProducts)>,
    pub freq: Option<WeightProducts>,
    pub iterations: usize,
    pub converged: bool,
}

fn lifted_products(
    v: &Mat,
    w: &Mat,
    rom: &BilinearSystem,
    m: &Mat,
) -> WeightProducts {
    let mt = m.transpose();
    WeightProducts {
        mn: rom.n.iter().map(|nk| v * (m * nk) * w.transpose()).collect(),
        mb: v * (m * &rom.b),
        mtnt: rom.n.iter().map(|nk| w * (&mt * nk.transpose()) * v.transpose()).collect(),
        mtct: w * (&mt * rom.c.transpose()),
    }
}

fn products_distance(a: &WeightProducts, b: &WeightProducts) -> f64 {
    let rel = |x: &Mat, y: &Mat| {
        let d = y.norm();
        if d > 0.0 {
            (x - y).norm() / d
        } else {
            (x - y).norm()
        }
    };
    let mut worst = rel(&a.mb, &b.mb).max(rel(&a.mtct, &b.mtct));
    for (x, y) in a.mn.iter().zip(&b.mn) {
        worst = worst.max(rel(x, y));
    }
    for (x, y) in a.mtnt.iter().zip(&b.mtnt) {
        worst = worst.max(rel(x, y));
    }
    worst
}

/// Orthonormal basis of a rational Krylov-type space spanned by `A^{-1}B`,
/// `A^{-1}N_k` images and so on, used as a starting subspace.
fn krylov_start(sys: &BilinearSystem, r: usize) -> Result<Mat> {
    let n = sys.order();
    let lu = sys.a.clone().lu();
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut queue: std::collections::VecDeque<nalgebra::DVector<f64>> =
        sys.b.column_iter().map(|c| c.into_owned()).collect();
    let mut guard = 0;
    while basis.len() < r {
        guard += 1;
        if guard > 50 * r + 50 {
            break;
        }
        let Some(raw) = queue.pop_front() else { break };
        let Some(mut x) = lu.solve(&raw) else {
            return Err(Error::Consistency("starting subspace: singular A".into()));
        };
        let norm0 = x.norm();
        for _ in 0..2 {
            for q in &basis {
                let h = q.dot(&x);
                x.axpy(-h, q, 1.0);
            }
        }
        let nx = x.norm();
        if nx > 1e-10 * norm0 && nx > 0.0 {
            let q = x / nx;
            queue.push_back(q.clone());
            for nk in &sys.n {
                queue.push_back(nk * &q);
            }
            basis.push(q);
        }
    }
    if basis.len() < r {
        return Err(Error::DegenerateSubspace {
            rank: basis.len(),
            wanted: r,
        });
    }
    let mut v = Mat::zeros(n, r);
    for (j, q) in basis.iter().enumerate() {
        v.set_column(j, q);
    }
    orth(&v, r)
}

/// Product approximations for the requested time points and frequency
/// band. Iterates until all tracked lifted products change by less than
/// `cfg.tol` (relative Frobenius norm) or `cfg.max_iter` is hit.
pub fn approx_products(
    sys: &BilinearSystem,
    r: usize,
    times: &[f64],
    freq: Option<FreqBand>,
    cfg: &IterationConfig,
) -> Result<ProductApproximation> {
    check_order(sys, r)?;
    cfg.validate()?;
    for &t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid time point {t}")));
        }
    }
    let full = SystemOperators::new_relaxed(sys, GramianKind::Infinite)?;
    let v0 = krylov_start(sys, r)?;
    let mut rom = project(sys, &v0, &v0)?;
    let mut guard = Guard::new(cfg.stability_guard);
    rom = guard.check(rom)?;
    let mut prev: Option<Vec<WeightProducts>> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut result = None;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let rom_ops = rom_operators(&rom, GramianKind::Infinite, cfg.stability_guard)?;
        let (pv, pw) = iteration_problems(&full, &rom_ops)?;
        let v = solve_generalized(&pv, cfg.solve_mode)?.x;
        let w = solve_generalized(&pw, cfg.solve_mode)?.x;
        let (v, w) = biorthonormalize(&v, &w)?;
        rom = guard.check(project(sys, &v, &w)?)?;

        let mut current = Vec::new();
        for &t in times {
            current.push(lifted_products(&v, &w, &rom, &expm(&rom.a, t)?));
        }
        if let Some(band) = freq {
            current.push(lifted_products(&v, &w, &rom, &freq_indicator(&rom.a, &band)?));
        }
        let change = match &prev {
            Some(p) => p
                .iter()
                .zip(&current)
                .map(|(a, b)| products_distance(a, b))
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        debug!("product approximation iteration {iterations}: change {change:.3e}");
        prev = Some(current.clone());
        result = Some((v, w, current));
        if change < cfg.tol || current_is_empty(times, freq) {
            converged = true;
            break;
        }
    }
    let (v, w, current) = result.expect("at least one iteration");
    let mut it = current.into_iter();
    let time = times.iter().map(|&t| (t, it.next().expect("time products"))).collect();
    let freq = freq.map(|_| it.next().expect("frequency products"));
    Ok(ProductApproximation {
        v,
        w,
        rom,
        time,
        freq,
        iterations,
        converged,
    })
}

fn current_is_empty(times: &[f64], freq: Option<FreqBand>) -> bool {
    times.is_empty() && freq.is_none()
}

/// Default subspace dimension for approximated operators.
pub const APPROX_ORDER: usize = 20;

/// Operators of a large model with projection-approximated weights.
pub fn approximate_operators(sys: &BilinearSystem, kind: GramianKind) -> Result<SystemOperators> {
    let r = APPROX_ORDER.min(sys.order());
    let cfg = IterationConfig::default();
    match kind {
        GramianKind::Infinite => SystemOperators::new(sys, kind),
        GramianKind::Time(band) => {
            let mut times = Vec::new();
            if band.lo > 0.0 {
                times.push(band.lo);
            }
            if band.hi.is_finite() {
                times.push(band.hi);
            }
            let approx = approx_products(sys, r, &times, None, &cfg)?;
            let mut it = approx.time.into_iter().map(|(_, p)| p);
            let first = if band.lo > 0.0 { it.next() } else { None };
            let last = if band.hi.is_finite() { it.next() } else { None };
            SystemOperators::with_products(sys, kind, first, last)
        }
        GramianKind::Freq(band) => {
            let approx = approx_products(sys, r, &[], Some(band), &cfg)?;
            SystemOperators::with_products(sys, kind, approx.freq, None)
        }
    }
}
