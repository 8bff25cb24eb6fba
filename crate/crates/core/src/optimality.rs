//! Gradients of the time-limited H2 cost, first-order optimality residuals
//! for the time- and frequency-limited problems, and the trace identity
//! between the two generalized equations of the gradient derivation.

use crate::error::{Error, Result};
use crate::gramians::{
    adjoint_problem, gramians_from_ops, obs_problem, reach_problem, rs_from_ops, GramianKind,
    SystemOperators,
};
use crate::linalg::{require_hurwitz, Mat};
use crate::matfun::{expm, expm_frechet, freq_indicator, freq_log_frechet_weight};
use crate::solvers::{
    solve_generalized, DriftSide, GeneralizedLyapunovProblem, ProductTerm, SolveMode,
};
use crate::system::{BilinearSystem, TimeBand};

/// Partial derivatives of `J = ‖Σ − Σ̃‖²` (time-limited norm) with respect
/// to the reduced matrices.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub d_a: Mat,
    pub d_n: Vec<Mat>,
    pub d_b: Mat,
    pub d_c: Mat,
    /// Exponential-derivative term of `d_a`.
    pub y: Mat,
    /// Exponential terms of `d_n`, one per input.
    pub z: Vec<Mat>,
}

/// Frobenius norms of the first-order optimality conditions. `cond_a` and
/// `cond_n` are `None` where the conditions are not available (time windows
/// not starting at 0).
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub cond_a: Option<f64>,
    pub cond_n: Option<f64>,
    pub cond_b: f64,
    pub cond_c: f64,
    /// `max(1, ‖C‖_F ‖P̂‖_F)`.
    pub scale: f64,
    /// `Q̂^T B + Q̃ B̃` (`r × m`).
    pub b_residual: Mat,
    /// `C P̂ − C̃ P̃` (`p × r`).
    pub c_residual: Mat,
}

impl ResidualReport {
    /// The four residuals divided by `scale`.
    pub fn normalized(&self) -> [Option<f64>; 4] {
        [
            self.cond_a.map(|v| v / self.scale),
            self.cond_n.map(|v| v / self.scale),
            Some(self.cond_b / self.scale),
            Some(self.cond_c / self.scale),
        ]
    }
}

/// Solutions of all equations entering the optimality conditions.
struct Quantities {
    phat: Mat,
    ptil: Mat,
    qhat: Mat,
    qtil: Mat,
    r: Mat,
    s: Mat,
}

fn quantities(full: &SystemOperators, rom: &SystemOperators, mode: SolveMode) -> Result<Quantities> {
    let phat = solve_generalized(&reach_problem(full, rom, None)?, mode)?.x;
    let qhat = solve_generalized(&obs_problem(full, rom, -1.0)?, mode)?.x;
    let g = gramians_from_ops(rom, mode)?;
    let rs = rs_from_ops(full, rom, mode)?;
    Ok(Quantities {
        phat,
        ptil: g.p,
        qhat,
        qtil: g.q,
        r: rs.r,
        s: rs.s,
    })
}

fn b_c_residuals(full: &BilinearSystem, rom: &BilinearSystem, q: &Quantities) -> (Mat, Mat) {
    let b = q.qhat.transpose() * &full.b + &q.qtil * &rom.b;
    let c = &full.c * &q.phat - &rom.c * &q.ptil;
    (b, c)
}

fn scale_of(full: &BilinearSystem, q: &Quantities) -> f64 {
    (full.c.norm() * q.phat.norm()).max(1.0)
}

fn time_band_of(kind: GramianKind) -> Option<TimeBand> {
    match kind {
        GramianKind::Infinite => Some(TimeBand::infinite()),
        GramianKind::Time(b) => Some(b),
        GramianKind::Freq(_) => None,
    }
}

/// `(Y, Z_k)` of the gradient for a window `[0, τ]`; zero for `τ = ∞`.
fn exponential_terms(
    full: &SystemOperators,
    rom: &BilinearSystem,
    tau: f64,
    q: &Quantities,
) -> Result<(Mat, Vec<Mat>)> {
    let r = rom.order();
    if !tau.is_finite() {
        return Ok((Mat::zeros(r, r), vec![Mat::zeros(r, r); rom.inputs()]));
    }
    let prod = full
        .last_time_products()
        .ok_or_else(|| Error::Consistency("missing exponential products".into()))?;
    let e_rom = expm(&rom.a, tau)?;
    let rt = q.r.transpose();
    // X̂ = B B̃^T + Σ N_k P̂ Ñ_k^T, X̃ = B̃ B̃^T + Σ Ñ_k P̃ Ñ_k^T, premultiplied
    // by the exponentials
    let mut ex_hat = &prod.mb * rom.b.transpose();
    let mut x_til = &rom.b * rom.b.transpose();
    for k in 0..rom.inputs() {
        ex_hat += &prod.mn[k] * &q.phat * rom.n[k].transpose();
        x_til += &rom.n[k] * &q.ptil * rom.n[k].transpose();
    }
    let g = &rt * ex_hat + &q.s * &e_rom * x_til;
    let y = expm_frechet(&(rom.a.transpose() * tau), &g)? * tau;
    let et = e_rom.transpose();
    let z = (0..rom.inputs())
        .map(|k| {
            &et * &rt * &prod.mn[k] * &q.phat + &et * &q.s * &e_rom * &rom.n[k] * &q.ptil
        })
        .collect();
    Ok((y, z))
}

fn check_gradient_band(band: &TimeBand) -> Result<()> {
    band.validate()?;
    if band.lo != 0.0 {
        return Err(Error::Unsupported(
            "gradients are available for windows [0, τ] only".into(),
        ));
    }
    Ok(())
}

/// Gradients of the squared time-limited error norm over `[0, τ]`.
pub fn gradient_h2tau(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    band: TimeBand,
    mode: SolveMode,
) -> Result<GradientBundle> {
    check_gradient_band(&band)?;
    require_hurwitz(&full.a, "gradient (full model)")?;
    require_hurwitz(&rom.a, "gradient (reduced model)")?;
    let kind = GramianKind::Time(band);
    let full_ops = SystemOperators::auto(full, kind)?;
    let rom_ops = SystemOperators::new(rom, kind)?;
    let q = quantities(&full_ops, &rom_ops, mode)?;
    let (y, z) = exponential_terms(&full_ops, rom, band.hi, &q)?;
    let rt = q.r.transpose();
    let d_a = (&rt * &q.phat + &q.s * &q.ptil - &y) * 2.0;
    let d_n = (0..rom.inputs())
        .map(|k| (&rt * &full.n[k] * &q.phat + &q.s * &rom.n[k] * &q.ptil - &z[k]) * 2.0)
        .collect();
    let (b_res, c_res) = b_c_residuals(full, rom, &q);
    Ok(GradientBundle {
        d_a,
        d_n,
        d_b: b_res * 2.0,
        d_c: -c_res * 2.0,
        y,
        z,
    })
}

/// Optimality residuals of the time-limited problem.
pub fn residuals_time(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    band: TimeBand,
    mode: SolveMode,
) -> Result<ResidualReport> {
    band.validate()?;
    let kind = GramianKind::Time(band);
    let full_ops = SystemOperators::auto(full, kind)?;
    let rom_ops = SystemOperators::new(rom, kind)?;
    let q = quantities(&full_ops, &rom_ops, mode)?;
    let (b_residual, c_residual) = b_c_residuals(full, rom, &q);
    let (cond_a, cond_n) = if band.lo == 0.0 {
        let (y, z) = exponential_terms(&full_ops, rom, band.hi, &q)?;
        let rt = q.r.transpose();
        let a = (&rt * &q.phat + &q.s * &q.ptil - &y).norm();
        let mut n_sum = Mat::zeros(rom.order(), rom.order());
        for k in 0..rom.inputs() {
            n_sum += &rt * &full.n[k] * &q.phat + &q.s * &rom.n[k] * &q.ptil - &z[k];
        }
        (Some(a), Some(n_sum.norm()))
    } else {
        (None, None)
    };
    Ok(ResidualReport {
        cond_a,
        cond_n,
        cond_b: b_residual.norm(),
        cond_c: c_residual.norm(),
        scale: scale_of(full, &q),
        b_residual,
        c_residual,
    })
}

/// Optimality residuals of the frequency-limited problem.
pub fn residuals_freq(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    band: crate::matfun::FreqBand,
    mode: SolveMode,
) -> Result<ResidualReport> {
    band.validate()?;
    let kind = GramianKind::Freq(band);
    let full_ops = SystemOperators::auto(full, kind)?;
    let rom_ops = SystemOperators::new(rom, kind)?;
    let q = quantities(&full_ops, &rom_ops, mode)?;
    let (b_residual, c_residual) = b_c_residuals(full, rom, &q);
    let rt = q.r.transpose();

    let mut s1 = &rom.b * rom.b.transpose() * &q.s;
    let mut s2 = &rom.b * full.b.transpose() * &q.r;
    for k in 0..rom.inputs() {
        s1 += &rom.n[k] * &q.ptil * rom.n[k].transpose() * &q.s;
        s2 += &rom.n[k] * q.phat.transpose() * full.n[k].transpose() * &q.r;
    }
    let w1 = freq_log_frechet_weight(&rom.a, &band, &s1)?;
    let w2 = freq_log_frechet_weight(&rom.a, &band, &s2)?;
    let cond_a = (&rt * &q.phat + &q.s * &q.ptil - w1.transpose() - w2.transpose()).norm();

    let f_full = full_ops
        .freq_weight_products()
        .ok_or_else(|| Error::Consistency("missing frequency products".into()))?;
    let f_rom = freq_indicator(&rom.a, &band)?;
    let f_rom_t = f_rom.transpose();
    let mut n_sum = Mat::zeros(rom.order(), rom.order());
    for k in 0..rom.inputs() {
        n_sum += &rt * &f_full.mn[k] * &q.phat
            + &f_rom_t * &rt * &full.n[k] * &q.phat
            + (&f_rom_t * &q.s + &q.s * &f_rom) * &rom.n[k] * &q.ptil;
    }
    Ok(ResidualReport {
        cond_a: Some(cond_a),
        cond_n: Some(n_sum.norm()),
        cond_b: b_residual.norm(),
        cond_c: c_residual.norm(),
        scale: scale_of(full, &q),
        b_residual,
        c_residual,
    })
}

/// Residuals for any window kind (infinite windows use the time-limited
/// conditions over `[0, ∞)`).
pub fn residuals(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    kind: GramianKind,
    mode: SolveMode,
) -> Result<ResidualReport> {
    match kind {
        GramianKind::Freq(band) => residuals_freq(full, rom, band, mode),
        _ => residuals_time(full, rom, time_band_of(kind).expect("time-like kind"), mode),
    }
}

/// Solve the pair of equations
///
/// `A L + L Ã^T + Σ (N_k L Ñ_k^T − e^{Aτ} N_k L Ñ_k^T e^{Ã^Tτ}) + O₁ = 0`,
/// `Ã^T Z + Z A + Σ (Ñ_k^T Z N_k − Ñ_k^T e^{Ã^Tτ} Z e^{Aτ} N_k) + O₂ = 0`
///
/// and return `(trace(O₁ Z), trace(O₂ L))`, which agree.
pub fn trace_identity_check(
    a: &Mat,
    a_til: &Mat,
    n: &[Mat],
    n_til: &[Mat],
    tau: f64,
    o1: &Mat,
    o2: &Mat,
    mode: SolveMode,
) -> Result<(f64, f64)> {
    let n1 = crate::linalg::check_square(a, "trace_identity_check (A)")?;
    let n2 = crate::linalg::check_square(a_til, "trace_identity_check (Ã)")?;
    if n.len() != n_til.len() {
        return Err(Error::dim("trace_identity_check", "different numbers of product matrices"));
    }
    if o1.shape() != (n1, n2) || o2.shape() != (n2, n1) {
        return Err(Error::dim(
            "trace_identity_check",
            format!("O1 must be {n1}x{n2} and O2 {n2}x{n1}"),
        ));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("τ must be positive".into()));
    }
    let e = if tau.is_finite() { Some(expm(a, tau)?) } else { None };
    let et = if tau.is_finite() { Some(expm(a_til, tau)?) } else { None };
    let mut l_terms = Vec::new();
    let mut z_terms = Vec::new();
    for (nk, ntk) in n.iter().zip(n_til) {
        l_terms.push(ProductTerm::new(nk.clone(), ntk.clone(), 1.0));
        z_terms.push(ProductTerm::new(ntk.transpose(), nk.transpose(), 1.0));
        if let (Some(e), Some(et)) = (&e, &et) {
            l_terms.push(ProductTerm::new(e * nk, et * ntk, -1.0));
            z_terms.push(ProductTerm::new(
                ntk.transpose() * et.transpose(),
                nk.transpose() * e.transpose(),
                -1.0,
            ));
        }
    }
    let da = crate::solvers::Drift::new(a.clone());
    let dat = crate::solvers::Drift::new(a_til.clone());
    let lp = GeneralizedLyapunovProblem::new(
        DriftSide::plain(&da),
        DriftSide::plain(&dat),
        l_terms,
        o1.clone(),
    )?;
    let zp = GeneralizedLyapunovProblem::new(
        DriftSide::transposed(&dat),
        DriftSide::transposed(&da),
        z_terms,
        o2.clone(),
    )?;
    let l = solve_generalized(&lp, mode)?.x;
    let z = solve_generalized(&zp, mode)?.x;
    Ok(((o1 * z).trace(), (o2 * l).trace()))
}

/// Adjoint problem of the pair `(x, y)` with a given constant; re-exported
/// for property tests of the gramian module.
pub fn adjoint_equation(
    x: &SystemOperators,
    y: &SystemOperators,
    constant: Mat,
) -> Result<GeneralizedLyapunovProblem> {
    adjoint_problem(x, y, constant)
}
