//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured values, then asserts.
//!
//! Run with `cargo test -p bimor-core --test acceptance -- --nocapture`.

mod common;

use bimor_core::examples::{heat_transfer, illustrative_7};
use bimor_core::gramians::{gramians, SystemOperators, WeightProducts};
use bimor_core::matfun::expm;
use bimor_core::norms::{
    error_decomposition, error_norm, h2_time_limited, norm_squared,
    volterra_quadrature_oracle_levels,
};
use bimor_core::optimality::{gradient_h2tau, trace_identity_check, residuals};
use bimor_core::reduce::{approx_products, balanced_truncation, iteration_problems};
use bimor_core::solvers::GeneralizedLyapunovProblem;
use bimor_core::{
    run_algorithm, Algorithm, BilinearSystem, FreqBand, GramianKind, IterationConfig, Mat,
    SolveMode, TimeBand,
};
use common::{random_mat, random_system, rel_err, rel_mat, rng, stable_drift};

/// Fixed-point sweeps used for every gramian-type equation in the
/// reproduction protocol.
const TRUNCATION: usize = 3;

const TOL_DETERMINISTIC: f64 = 0.05;
const TOL_ITERATIVE: f64 = 0.15;
const TOL_PSEUDO_RESIDUAL: f64 = 1e-8;
const TOL_ENERGY: f64 = 1e-6;
const TOL_ORACLE: f64 = 1e-3;
const TOL_GRADIENT: f64 = 1e-5;
const TOL_TRACE_IDENTITY: f64 = 1e-10;
const TOL_LIMIT_GRAMIAN: f64 = 1e-8;
const TOL_LIMIT_OPERATOR: f64 = 1e-10;
const TOL_DUALITY: f64 = 1e-10;
const TOL_PRODUCTS: f64 = 1e-2;
const TOL_FLHMORA_RESIDUAL: f64 = 0.20;
const TOL_TLHMORA_RESIDUAL: f64 = 0.50;

fn verdict(id: u32, name: &str, ok: bool, detail: &str) -> bool {
    use std::io::Write;
    let status = if ok { "PASS" } else { "FAIL" };
    // straight to the process stdout so the line survives output capture
    let line = format!("criterion {id}: {status} {name} ({detail})\n");
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    ok
}

fn freq_band() -> FreqBand {
    FreqBand::new(4.0, 6.0).unwrap()
}

fn time_band() -> TimeBand {
    TimeBand::up_to(0.5)
}

fn reproduction() -> IterationConfig {
    IterationConfig::reproduction(TRUNCATION)
}

/// Error of `alg` on the illustrative example in the norm matching its
/// table.
fn table_cell(alg: Algorithm, r: usize, kind: GramianKind) -> f64 {
    let sys = illustrative_7();
    let cfg = reproduction();
    let out = run_algorithm(&sys, alg, r, Some(time_band()), Some(freq_band()), &cfg).unwrap();
    error_norm(&sys, &out.rom, kind, cfg.solve_mode).unwrap()
}

#[test]
fn criterion_01_balanced_truncation_table_cells() {
    let fk = GramianKind::Freq(freq_band());
    let tk = GramianKind::Time(time_band());
    let cells = [
        ("BT H2w r=1", table_cell(Algorithm::Bt, 1, fk), 1.1995),
        ("FLBT H2w r=1", table_cell(Algorithm::Flbt, 1, fk), 1.1893),
        ("BT H2t r=3", table_cell(Algorithm::Bt, 3, tk), 0.0850),
        ("TLBT H2t r=3", table_cell(Algorithm::Tlbt, 3, tk), 0.0135),
    ];
    let ok = cells.iter().all(|&(_, got, want)| rel_err(got, want) <= TOL_DETERMINISTIC);
    let detail = cells
        .iter()
        .map(|(name, got, want)| format!("{name} {got:.4} vs {want}"))
        .collect::<Vec<_>>()
        .join(", ");
    assert!(verdict(1, "balanced-truncation table cells within 5%", ok, &detail));
}

#[test]
fn criterion_02_iterative_table_cells_and_ordering() {
    let fk = GramianKind::Freq(freq_band());
    let tk = GramianKind::Time(time_band());
    let homora_w = table_cell(Algorithm::Homora, 1, fk);
    let flhmora = table_cell(Algorithm::Flhmora, 1, fk);
    let flphmora = table_cell(Algorithm::Flphmora, 1, fk);
    let homora_t = table_cell(Algorithm::Homora, 3, tk);
    let tlhmora = table_cell(Algorithm::Tlhmora, 3, tk);
    let tlphmora = table_cell(Algorithm::Tlphmora, 3, tk);
    let cells = [
        ("HOMORA H2w", homora_w, 1.0302),
        ("FLHMORA", flhmora, 1.0318),
        ("FLPHMORA", flphmora, 0.8640),
        ("HOMORA H2t", homora_t, 0.0385),
        ("TLHMORA", tlhmora, 0.0125),
        ("TLPHMORA", tlphmora, 0.0121),
    ];
    let values_ok = cells.iter().all(|&(_, got, want)| rel_err(got, want) <= TOL_ITERATIVE);
    // row orderings of the reference tables
    let freq_order = flphmora < homora_w && homora_w < flhmora;
    let time_order = tlphmora < tlhmora && tlhmora < homora_t;
    let detail = cells
        .iter()
        .map(|(name, got, want)| format!("{name} {got:.4} vs {want}"))
        .collect::<Vec<_>>()
        .join(", ");
    let detail = format!("{detail}; freq order {freq_order}, time order {time_order}");
    assert!(verdict(
        2,
        "iterative table cells within 15% with reference row ordering",
        values_ok && freq_order && time_order,
        &detail
    ));
}

#[test]
fn criterion_03_pseudo_optimality_by_construction() {
    let sys = illustrative_7();
    let cfg = reproduction();
    let mut ok = true;
    let mut detail = Vec::new();
    for (alg, r, kind) in [
        (Algorithm::Flphmora, 1, GramianKind::Freq(freq_band())),
        (Algorithm::Tlphmora, 3, GramianKind::Time(time_band())),
    ] {
        let out = run_algorithm(&sys, alg, r, Some(time_band()), Some(freq_band()), &cfg).unwrap();
        let res = residuals(&sys, &out.rom, kind, cfg.solve_mode).unwrap();
        let bound = TOL_PSEUDO_RESIDUAL * res.scale;
        let err = error_norm(&sys, &out.rom, kind, cfg.solve_mode).unwrap();
        let full = norm_squared(&sys, kind, cfg.solve_mode).unwrap();
        let rom = norm_squared(&out.rom, kind, cfg.solve_mode).unwrap();
        let energy = (err * err - (full - rom)).abs() / (err * err);
        ok &= out.converged && res.cond_b <= bound && res.cond_c <= bound && energy <= TOL_ENERGY;
        detail.push(format!(
            "{alg}: cond_B {:.1e}, cond_C {:.1e}, bound {bound:.1e}, energy gap {energy:.1e}",
            res.cond_b, res.cond_c
        ));
    }
    assert!(verdict(3, "pseudo-optimal B/C conditions and energy identity", ok, &detail.join("; ")));
}

#[test]
fn criterion_04_time_limited_norm_matches_volterra_quadrature() {
    let sys = BilinearSystem::new(
        Mat::from_row_slice(2, 2, &[-1.0, 0.5, -0.3, -2.0]),
        vec![Mat::from_row_slice(2, 2, &[0.1, -0.05, 0.08, 0.12])],
        Mat::from_column_slice(2, 1, &[1.0, 0.5]),
        Mat::from_row_slice(1, 2, &[0.7, -0.4]),
    )
    .unwrap();
    assert!(sys.n[0].norm() <= 0.1 * sys.a.norm());
    let mut ok = true;
    let mut detail = Vec::new();
    for band in [TimeBand::up_to(1.0), TimeBand::up_to(3.0)] {
        let gram = h2_time_limited(&sys, band, SolveMode::Direct).unwrap();
        let quad = volterra_quadrature_oracle_levels(&sys, band, &[64, 64, 24]).unwrap();
        let rel = rel_err(gram, quad);
        ok &= rel <= TOL_ORACLE;
        detail.push(format!("[0, {}]: gramian {gram:.8}, quadrature {quad:.8}, rel {rel:.1e}", band.hi));
    }
    assert!(verdict(4, "time-limited norm equals Volterra quadrature", ok, &detail.join("; ")));
}

fn squared_error(full: &BilinearSystem, rom: &BilinearSystem, kind: GramianKind) -> f64 {
    let f = SystemOperators::new(full, kind).unwrap();
    let r = SystemOperators::new(rom, kind).unwrap();
    error_decomposition(&f, &r, SolveMode::Direct).unwrap().squared()
}

fn central_difference(
    full: &BilinearSystem,
    rom: &BilinearSystem,
    kind: GramianKind,
    shape: (usize, usize),
    entry: impl Fn(&mut BilinearSystem) -> &mut Mat,
) -> Mat {
    let h = 1e-5;
    Mat::from_fn(shape.0, shape.1, |i, j| {
        let mut plus = rom.clone();
        entry(&mut plus)[(i, j)] += h;
        let mut minus = rom.clone();
        entry(&mut minus)[(i, j)] -= h;
        (squared_error(full, &plus, kind) - squared_error(full, &minus, kind)) / (2.0 * h)
    })
}

#[test]
fn criterion_05_gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut g = rng(500 + seed);
        let full = random_system(&mut g, 4, 2, 2, 0.3);
        let rom = random_system(&mut g, 2, 2, 2, 0.2);
        let tau = 0.3 + 1.5 * (seed as f64) / 9.0;
        let band = TimeBand::up_to(tau);
        let kind = GramianKind::Time(band);
        let grad = gradient_h2tau(&full, &rom, band, SolveMode::Direct).unwrap();
        let blocks = [
            (&grad.d_a, central_difference(&full, &rom, kind, (2, 2), |s| &mut s.a)),
            (&grad.d_n[0], central_difference(&full, &rom, kind, (2, 2), |s| &mut s.n[0])),
            (&grad.d_n[1], central_difference(&full, &rom, kind, (2, 2), |s| &mut s.n[1])),
            (&grad.d_b, central_difference(&full, &rom, kind, (2, 2), |s| &mut s.b)),
            (&grad.d_c, central_difference(&full, &rom, kind, (2, 2), |s| &mut s.c)),
        ];
        for (analytic, fd) in &blocks {
            worst = worst.max(rel_mat(analytic, fd));
        }
    }
    assert!(verdict(
        5,
        "gradient blocks match central differences on 10 instances",
        worst <= TOL_GRADIENT,
        &format!("worst relative block error {worst:.2e}")
    ));
}

#[test]
fn criterion_06_trace_identity() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut g = rng(600 + seed);
        let special = seed % 4 == 0;
        let n = if special { 2 } else { 4 };
        let a = stable_drift(&mut g, n, 1.0);
        let a_til = stable_drift(&mut g, 2, 1.0);
        let a = if special { a_til.clone() } else { a };
        let nk: Vec<Mat> = (0..2).map(|_| random_mat(&mut g, n, n) * 0.15).collect();
        let nk_til: Vec<Mat> = (0..2).map(|_| random_mat(&mut g, 2, 2) * 0.15).collect();
        let nk = if special { nk_til.clone() } else { nk };
        let o1 = random_mat(&mut g, n, 2);
        let o2 = random_mat(&mut g, 2, n);
        let tau = 0.2 + seed as f64 * 0.1;
        let (l, r) =
            trace_identity_check(&a, &a_til, &nk, &nk_til, tau, &o1, &o2, SolveMode::Direct).unwrap();
        worst = worst.max((l - r).abs() / l.abs().max(r.abs()));
    }
    assert!(verdict(
        6,
        "trace(O1 Z) = trace(O2 L) on 20 instances",
        worst <= TOL_TRACE_IDENTITY,
        &format!("worst relative gap {worst:.2e}")
    ));
}

fn problem_distance(x: &GeneralizedLyapunovProblem, y: &GeneralizedLyapunovProblem) -> f64 {
    rel_mat(&x.vectorized_operator(), &y.vectorized_operator())
        .max(rel_mat(&x.constant, &y.constant))
}

#[test]
fn criterion_07_unbounded_windows_reduce_to_infinite_horizon() {
    let mut gramian_gap: f64 = 0.0;
    let mut operator_gap: f64 = 0.0;
    let unbounded = [
        GramianKind::Time(TimeBand::infinite()),
        GramianKind::Freq(FreqBand::infinite()),
    ];
    for seed in 0..5 {
        let mut g = rng(700 + seed);
        let sys = random_system(&mut g, 5, 1 + seed as usize % 2, 2, 0.3);
        let reference = gramians(&sys, GramianKind::Infinite, SolveMode::Direct).unwrap();
        let ref_norm = norm_squared(&sys, GramianKind::Infinite, SolveMode::Direct).unwrap();
        let rom = balanced_truncation(&sys, 2, GramianKind::Infinite, SolveMode::Direct)
            .unwrap()
            .rom;
        let ref_full = SystemOperators::new(&sys, GramianKind::Infinite).unwrap();
        let ref_rom = SystemOperators::new(&rom, GramianKind::Infinite).unwrap();
        let (ref_v, ref_w) = iteration_problems(&ref_full, &ref_rom).unwrap();
        for kind in unbounded {
            let gs = gramians(&sys, kind, SolveMode::Direct).unwrap();
            let nrm = norm_squared(&sys, kind, SolveMode::Direct).unwrap();
            gramian_gap = gramian_gap
                .max(rel_mat(&gs.p, &reference.p))
                .max(rel_mat(&gs.q, &reference.q))
                .max(rel_err(nrm, ref_norm));
            let full = SystemOperators::new(&sys, kind).unwrap();
            let rom_ops = SystemOperators::new(&rom, kind).unwrap();
            let (v, w) = iteration_problems(&full, &rom_ops).unwrap();
            operator_gap = operator_gap
                .max(problem_distance(&v, &ref_v))
                .max(problem_distance(&w, &ref_w));
        }
    }
    let ok = gramian_gap <= TOL_LIMIT_GRAMIAN && operator_gap <= TOL_LIMIT_OPERATOR;
    assert!(verdict(
        7,
        "[0, inf) windows reproduce infinite-horizon gramians and iteration operators",
        ok,
        &format!("gramian/norm gap {gramian_gap:.1e}, operator gap {operator_gap:.1e}")
    ));
}

#[test]
fn criterion_08_duality_of_gramian_traces() {
    let mut corpus: Vec<(BilinearSystem, SolveMode, Vec<GramianKind>)> = vec![
        (
            illustrative_7(),
            SolveMode::truncated(TRUNCATION),
            vec![
                GramianKind::Infinite,
                GramianKind::Time(time_band()),
                GramianKind::Freq(freq_band()),
            ],
        ),
        (
            heat_transfer(4).unwrap(),
            SolveMode::Direct,
            vec![
                GramianKind::Infinite,
                GramianKind::Time(TimeBand::new(0.05, 0.2).unwrap()),
                GramianKind::Freq(FreqBand::up_to(2.0)),
            ],
        ),
    ];
    for seed in 0..5 {
        let mut g = rng(800 + seed);
        corpus.push((
            random_system(&mut g, 5, 2, 2, 0.3),
            SolveMode::Direct,
            vec![
                GramianKind::Infinite,
                GramianKind::Time(TimeBand::new(0.2, 1.5).unwrap()),
                GramianKind::Freq(FreqBand::new(0.5, 3.0).unwrap()),
            ],
        ));
    }
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (sys, mode, kinds) in &corpus {
        for &kind in kinds {
            let g = gramians(sys, kind, *mode).unwrap();
            let via_p = (&sys.c * &g.p * sys.c.transpose()).trace();
            let via_q = (sys.b.transpose() * &g.q * &sys.b).trace();
            worst = worst.max(rel_err(via_p, via_q));
            count += 1;
        }
    }
    assert!(verdict(
        8,
        "trace(C P C^T) = trace(B^T Q B) for all gramian kinds",
        worst <= TOL_DUALITY,
        &format!("{count} cases, worst relative gap {worst:.1e}")
    ));
}

fn product_error(approx: &WeightProducts, exact: &WeightProducts) -> f64 {
    let mut worst = rel_mat(&approx.mb, &exact.mb).max(rel_mat(&approx.mtct, &exact.mtct));
    for (x, y) in approx.mn.iter().zip(&exact.mn) {
        worst = worst.max(rel_mat(x, y));
    }
    for (x, y) in approx.mtnt.iter().zip(&exact.mtnt) {
        worst = worst.max(rel_mat(x, y));
    }
    worst
}

#[test]
fn criterion_09_heat_transfer_properties() {
    let sys = heat_transfer(23).unwrap();
    let band = TimeBand::new(0.5, 1.5).unwrap();
    let kind = GramianKind::Time(band);
    let cfg = reproduction();
    let full = norm_squared(&sys, kind, cfg.solve_mode).unwrap().sqrt();
    let full_ops = SystemOperators::auto(&sys, kind).unwrap();
    let mut rel = Vec::new();
    for alg in [
        Algorithm::Bt,
        Algorithm::Homora,
        Algorithm::Tlbt,
        Algorithm::Tlhmora,
        Algorithm::Tlphmora,
    ] {
        let out = run_algorithm(&sys, alg, 1, Some(band), None, &cfg).unwrap();
        let e = bimor_core::norms::error_norm_with(&full_ops, &out.rom, cfg.solve_mode).unwrap();
        rel.push((alg, e / full));
    }
    let infinite_best = rel[0].1.min(rel[1].1);
    let ordering = rel[2..].iter().all(|&(_, e)| e < infinite_best);

    let approx = approx_products(
        &sys,
        20,
        &[band.lo, band.hi],
        Some(FreqBand::up_to(2.0)),
        &IterationConfig::default(),
    )
    .unwrap();
    let mut product_worst: f64 = 0.0;
    let mut product_detail = Vec::new();
    for (t, p) in &approx.time {
        let exact = WeightProducts::exact(&sys, &expm(&sys.a, *t).unwrap());
        let e = product_error(p, &exact);
        product_detail.push(format!("e^(A {t}) {e:.1e}"));
        product_worst = product_worst.max(e);
    }
    if let Some(p) = &approx.freq {
        let f = bimor_core::matfun::freq_indicator(&sys.a, &FreqBand::up_to(2.0)).unwrap();
        let e = product_error(p, &WeightProducts::exact(&sys, &f));
        product_detail.push(format!("F[0,2] {e:.1e}"));
        product_worst = product_worst.max(e);
    }
    let detail = format!(
        "relative H2t errors {}; ordering {ordering}; product errors {}",
        rel.iter()
            .map(|(a, e)| format!("{a} {e:.3e}"))
            .collect::<Vec<_>>()
            .join(", "),
        product_detail.join(", ")
    );
    let ok = ordering && product_worst <= TOL_PRODUCTS;
    assert!(verdict(
        9,
        "heat transfer: time-limited beats infinite-horizon, r=20 products within 1e-2",
        ok,
        &detail
    ));
}

fn magnitude_class(x: f64) -> i32 {
    x.abs().log10().floor() as i32
}

/// Sorted order of entry magnitudes, largest first.
fn magnitude_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));
    idx
}

#[test]
fn criterion_10_reference_residual_spot_values() {
    let sys = illustrative_7();
    let cfg = reproduction();

    let fk = GramianKind::Freq(freq_band());
    let out = run_algorithm(&sys, Algorithm::Flhmora, 1, None, Some(freq_band()), &cfg).unwrap();
    let res = residuals(&sys, &out.rom, fk, cfg.solve_mode).unwrap();
    let freq_ok = rel_err(res.cond_c, 0.1364) <= TOL_FLHMORA_RESIDUAL
        && rel_err(res.cond_b, 0.0457) <= TOL_FLHMORA_RESIDUAL
        && res.cond_c > res.cond_b
        && magnitude_class(res.cond_c) == magnitude_class(0.1364)
        && magnitude_class(res.cond_b) == magnitude_class(0.0457);

    // A reduced model is defined up to a change of state coordinates; a sign
    // flip of state i flips entry i of both residuals, so entries are
    // compared in magnitude and the sign of the product C_i B_i.
    let tk = GramianKind::Time(time_band());
    let out = run_algorithm(&sys, Algorithm::Tlhmora, 3, Some(time_band()), None, &cfg).unwrap();
    let res_t = residuals(&sys, &out.rom, tk, cfg.solve_mode).unwrap();
    let c: Vec<f64> = res_t.c_residual.iter().copied().collect();
    let b: Vec<f64> = res_t.b_residual.iter().copied().collect();
    let c_ref = [0.0008, 0.0022, -0.0005];
    let b_ref = [-0.0006, -0.0014, 0.0002];
    let mut time_ok = magnitude_order(&c) == magnitude_order(&c_ref)
        && magnitude_order(&b) == magnitude_order(&b_ref);
    for i in 0..3 {
        time_ok &= rel_err(c[i].abs(), c_ref[i].abs()) <= TOL_TLHMORA_RESIDUAL
            && rel_err(b[i].abs(), b_ref[i].abs()) <= TOL_TLHMORA_RESIDUAL
            && (c[i] * b[i]).signum() == (c_ref[i] * b_ref[i]).signum()
            && magnitude_class(c[i]) == magnitude_class(c_ref[i])
            && magnitude_class(b[i]) == magnitude_class(b_ref[i]);
    }
    let detail = format!(
        "FLHMORA cond_C {:.4} cond_B {:.4}; TLHMORA C {:?} B {:?}",
        res.cond_c,
        res.cond_b,
        c.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>(),
        b.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>()
    );
    assert!(verdict(10, "reference residual spot values", freq_ok && time_ok, &detail));
}
