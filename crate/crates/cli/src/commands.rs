use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use bimor_core::examples::{heat_transfer, illustrative_7};
use bimor_core::io::{self, band_unit, ReportRow, RunManifest};
use bimor_core::norms::{error_norm_with, norm_squared};
use bimor_core::gramians::SystemOperators;
use bimor_core::optimality::residuals;
use bimor_core::system::{simulate, SimOptions};
use bimor_core::{
    run_algorithm, Algorithm, BilinearSystem, FreqBand, GramianKind, IterationConfig, SolveMode,
    TimeBand, Trajectory,
};
use clap::ValueEnum;
use nalgebra::DVector;

use crate::signal::Signal;
use crate::{BandArgs, Command, ReduceArgs, Scenario, SolverArgs, SolverChoice};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

pub enum Status {
    Done,
    NotConverged,
}

/// Bad command-line input detected by the front end itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_VALIDATION;
        }
        if let Some(core) = cause.downcast_ref::<bimor_core::Error>() {
            return if core.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_NUMERICAL
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_VALIDATION;
        }
    }
    EXIT_NUMERICAL
}

pub fn run(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Example { name, grid, out } => example(&name, grid, &out),
        Command::Reduce(args) => reduce(args),
        Command::Eval {
            system,
            rom,
            band,
            solver,
        } => eval(&system, &rom, band, solver),
        Command::Residuals {
            system,
            rom,
            band,
            solver,
        } => residuals_cmd(&system, &rom, band, solver),
        Command::Simulate {
            system,
            rom,
            input,
            from,
            until,
            step,
            out,
        } => simulate_cmd(&system, rom.as_deref(), &input, from, until, step, out.as_deref()),
        Command::Bench {
            scenario,
            grid,
            solver,
            out,
        } => bench(scenario, grid, solver, &out),
    }
}

fn solve_mode(choice: SolverChoice, truncation: usize) -> Result<SolveMode> {
    Ok(match choice {
        SolverChoice::Truncated => {
            if truncation == 0 {
                return Err(usage("--truncation must be at least 1"));
            }
            SolveMode::truncated(truncation)
        }
        SolverChoice::Converged => SolveMode::converged(),
        SolverChoice::Direct => SolveMode::Direct,
        SolverChoice::Auto => SolveMode::Auto,
    })
}

fn solver_name(choice: SolverChoice) -> String {
    choice
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

#[derive(Debug, Clone, Copy)]
enum Band {
    Time(TimeBand),
    Freq(FreqBand),
}

impl Band {
    fn kind(band: Option<Band>) -> GramianKind {
        match band {
            None => GramianKind::Infinite,
            Some(Band::Time(b)) => GramianKind::Time(b),
            Some(Band::Freq(b)) => GramianKind::Freq(b),
        }
    }
}

fn parse_band(args: BandArgs) -> Result<Option<Band>> {
    if let Some(v) = args.time_band {
        return Ok(Some(Band::Time(TimeBand::new(v[0], v[1])?)));
    }
    if let Some(v) = args.freq_band {
        return Ok(Some(Band::Freq(FreqBand::new(v[0], v[1])?)));
    }
    Ok(None)
}

fn metric_name(kind: GramianKind) -> &'static str {
    match kind {
        GramianKind::Infinite => "h2",
        GramianKind::Time(_) => "h2_time",
        GramianKind::Freq(_) => "h2_freq",
    }
}

fn band_fields(band: Option<Band>) -> (&'static str, f64, f64) {
    match band {
        None => ("none", 0.0, f64::INFINITY),
        Some(Band::Time(b)) => ("time", b.lo, b.hi),
        Some(Band::Freq(b)) => ("freq", b.lo, b.hi),
    }
}

fn example(name: &str, grid: usize, out: &Path) -> Result<Status> {
    let (sys, label, provenance) = match name {
        "illustrative7" => (
            illustrative_7(),
            "illustrative7".to_string(),
            "built-in seventh-order illustrative model".to_string(),
        ),
        "heat" => (
            heat_transfer(grid)?,
            format!("heat{grid}"),
            format!("built-in heat transfer model, {grid}x{grid} grid"),
        ),
        other => return Err(usage(format!("unknown example '{other}' (illustrative7, heat)"))),
    };
    io::save_system(&sys, out, &label, &provenance)?;
    println!("wrote {label} (n = {}) to {}", sys.order(), out.display());
    Ok(Status::Done)
}

struct ReduceSettings {
    algorithm: Algorithm,
    r: usize,
    band: Option<Band>,
    choice: SolverChoice,
    truncation: usize,
    cfg: IterationConfig,
}

fn settings_from_flags(args: &ReduceArgs) -> Result<ReduceSettings> {
    let algorithm: Algorithm = args
        .algorithm
        .as_deref()
        .ok_or_else(|| usage("--alg is required"))?
        .parse()?;
    let r = args.r.ok_or_else(|| usage("-r is required"))?;
    let cfg = IterationConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        solve_mode: solve_mode(args.solver.solver, args.solver.truncation)?,
        stability_guard: args.stability_guard,
        ..IterationConfig::default()
    };
    Ok(ReduceSettings {
        algorithm,
        r,
        band: parse_band(args.band.clone())?,
        choice: args.solver.solver,
        truncation: args.solver.truncation,
        cfg,
    })
}

fn settings_from_manifest(path: &Path) -> Result<ReduceSettings> {
    let m = RunManifest::load(path)?;
    let algorithm: Algorithm = m.algorithm.parse()?;
    let band = match m.band_kind.as_str() {
        "none" => None,
        "time" => Some(Band::Time(TimeBand::new(m.band_lo, m.band_hi)?)),
        "freq" => Some(Band::Freq(FreqBand::new(m.band_lo, m.band_hi)?)),
        other => return Err(usage(format!("unknown band kind '{other}' in manifest"))),
    };
    let choice = SolverChoice::from_str(&m.solver_mode, true)
        .map_err(|e| usage(format!("manifest solver_mode: {e}")))?;
    let cfg = IterationConfig {
        tol: m.tol,
        max_iter: m.max_iter,
        solve_mode: solve_mode(choice, m.truncation)?,
        stability_guard: m.stability_guard,
        ..IterationConfig::default()
    };
    Ok(ReduceSettings {
        algorithm,
        r: m.r,
        band,
        choice,
        truncation: m.truncation,
        cfg,
    })
}

fn init_label(alg: Algorithm) -> &'static str {
    match alg {
        Algorithm::Homora => "bt",
        Algorithm::Tlhmora | Algorithm::Tlphmora => "tlbt",
        Algorithm::Flhmora | Algorithm::Flphmora => "flbt",
        Algorithm::Bt | Algorithm::Tlbt | Algorithm::Flbt => "none",
    }
}

fn reduce(args: ReduceArgs) -> Result<Status> {
    let system = args
        .system
        .clone()
        .ok_or_else(|| usage("system bundle path is required"))?;
    let s = match &args.from_manifest {
        Some(path) => settings_from_manifest(path)?,
        None => settings_from_flags(&args)?,
    };
    let bundle = io::load_bundle(&system)?;
    let sys = bundle.system;
    let (time, freq) = match s.band {
        Some(Band::Time(b)) => (Some(b), None),
        Some(Band::Freq(b)) => (None, Some(b)),
        None => (None, None),
    };
    if s.algorithm.needs_time_band() && time.is_none() {
        return Err(usage(format!("{} needs --time-band", s.algorithm)));
    }
    if s.algorithm.needs_freq_band() && freq.is_none() {
        return Err(usage(format!("{} needs --freq-band", s.algorithm)));
    }
    log::info!("reducing {} (n = {}) with {} to r = {}", bundle.manifest.name, sys.order(), s.algorithm, s.r);
    let outcome = run_algorithm(&sys, s.algorithm, s.r, time, freq, &s.cfg)?;

    let kind = Band::kind(s.band);
    let full_ops = SystemOperators::auto(&sys, kind)?;
    let value = error_norm_with(&full_ops, &outcome.rom, s.cfg.solve_mode)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    io::save_system(
        &outcome.rom,
        &args.out.join("rom"),
        &format!("{}-{}-r{}", bundle.manifest.name, s.algorithm.id(), s.r),
        &format!("{} reduction of {}", s.algorithm.label(), bundle.manifest.name),
    )?;
    let (band_kind, lo, hi) = band_fields(s.band);
    let manifest = RunManifest {
        algorithm: s.algorithm.id().to_string(),
        r: s.r,
        band_kind: band_kind.to_string(),
        band_lo: lo,
        band_hi: hi,
        solver_mode: solver_name(s.choice),
        truncation: s.truncation,
        tol: s.cfg.tol,
        max_iter: s.cfg.max_iter,
        stability_guard: s.cfg.stability_guard,
        init: init_label(s.algorithm).to_string(),
        seed: None,
    };
    manifest.save(&args.out.join(io::RUN_MANIFEST_FILE))?;
    let row = ReportRow {
        algorithm: s.algorithm.label().to_string(),
        r: s.r,
        band_lo: lo,
        band_hi: hi,
        band_unit: band_unit(band_kind).to_string(),
        error_metric: metric_name(kind).to_string(),
        value,
        iterations: outcome.iterations,
        converged: outcome.converged,
    };
    io::write_report(std::slice::from_ref(&row), &args.out.join("report.csv"))?;
    println!(
        "{} r={} {}={:.6e} iterations={} converged={}",
        row.algorithm, row.r, row.error_metric, row.value, row.iterations, row.converged
    );
    Ok(if outcome.converged {
        Status::Done
    } else {
        Status::NotConverged
    })
}

fn eval(system: &Path, rom: &Path, band: BandArgs, solver: SolverArgs) -> Result<Status> {
    let sys = io::load_system(system)?;
    let red = io::load_system(rom)?;
    let mode = solve_mode(solver.solver, solver.truncation)?;
    let kind = Band::kind(parse_band(band)?);
    let full = norm_squared(&sys, kind, mode)?.max(0.0).sqrt();
    let reduced = norm_squared(&red, kind, mode)?.max(0.0).sqrt();
    let ops = SystemOperators::auto(&sys, kind)?;
    let err = error_norm_with(&ops, &red, mode)?;
    println!("metric,system,rom,error,relative_error");
    println!(
        "{},{:.11e},{:.11e},{:.11e},{:.11e}",
        metric_name(kind),
        full,
        reduced,
        err,
        err / full
    );
    Ok(Status::Done)
}

fn residuals_cmd(system: &Path, rom: &Path, band: BandArgs, solver: SolverArgs) -> Result<Status> {
    let sys = io::load_system(system)?;
    let red = io::load_system(rom)?;
    let mode = solve_mode(solver.solver, solver.truncation)?;
    let kind = Band::kind(parse_band(band)?);
    let res = residuals(&sys, &red, kind, mode)?;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.11e}"));
    println!("cond_A={}", show(res.cond_a));
    println!("cond_N={}", show(res.cond_n));
    println!("cond_B={}", show(Some(res.cond_b)));
    println!("cond_C={}", show(Some(res.cond_c)));
    println!("scale={}", show(Some(res.scale)));
    Ok(Status::Done)
}

fn run_simulation(
    sys: &BilinearSystem,
    signal: &Signal,
    span: TimeBand,
    step: Option<f64>,
) -> Result<Trajectory> {
    if signal.channels() != sys.inputs() {
        return Err(usage(format!(
            "input has {} channels, system has {} inputs",
            signal.channels(),
            sys.inputs()
        )));
    }
    let input = |t: f64, u: &mut DVector<f64>| signal.eval(t, u.as_mut_slice());
    let opts = SimOptions {
        step,
        keep_states: false,
    };
    Ok(simulate(sys, &input, &DVector::zeros(sys.order()), &span, opts)?)
}

fn trajectory_csv(full: &Trajectory, rom: Option<&Trajectory>) -> String {
    let p = full.outputs.first().map_or(0, |y| y.len());
    let mut s = String::from("t");
    for i in 1..=p {
        write!(s, ",y_{i}").unwrap();
    }
    if rom.is_some() {
        for i in 1..=p {
            write!(s, ",y_rom_{i}").unwrap();
        }
        s.push_str(",abs_error");
    }
    s.push('\n');
    for (k, t) in full.times.iter().enumerate() {
        write!(s, "{t:.11e}").unwrap();
        let y = &full.outputs[k];
        for v in y.iter() {
            write!(s, ",{v:.11e}").unwrap();
        }
        if let Some(r) = rom {
            let yr = &r.outputs[k];
            for v in yr.iter() {
                write!(s, ",{v:.11e}").unwrap();
            }
            write!(s, ",{:.11e}", (y - yr).norm()).unwrap();
        }
        s.push('\n');
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate_cmd(
    system: &Path,
    rom: Option<&Path>,
    input: &str,
    from: f64,
    until: f64,
    step: Option<f64>,
    out: Option<&Path>,
) -> Result<Status> {
    let signal = Signal::parse(input).map_err(|e| usage(format!("{e:#}")))?;
    let span = TimeBand::new(from, until)?;
    let sys = io::load_system(system)?;
    let full = run_simulation(&sys, &signal, span, step)?;
    let red = match rom {
        Some(p) => {
            let red = io::load_system(p)?;
            sys.same_io(&red)?;
            Some(run_simulation(&red, &signal, span, step)?)
        }
        None => None,
    };
    let text = trajectory_csv(&full, red.as_ref());
    match out {
        Some(path) => write_file(path, &text)?,
        None => print_stdout(&text)?,
    }
    Ok(Status::Done)
}

/// Writes to stdout, treating a closed pipe (e.g. `| head`) as success.
fn print_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

struct ScenarioSpec {
    sys: BilinearSystem,
    algorithms: [Algorithm; 5],
    r: usize,
    band: Band,
    relative: bool,
    input: &'static str,
    span: TimeBand,
}

fn scenario(s: Scenario, grid: usize) -> Result<ScenarioSpec> {
    Ok(match s {
        Scenario::IllustrativeFreq => ScenarioSpec {
            sys: illustrative_7(),
            algorithms: [
                Algorithm::Bt,
                Algorithm::Flbt,
                Algorithm::Homora,
                Algorithm::Flhmora,
                Algorithm::Flphmora,
            ],
            r: 1,
            band: Band::Freq(FreqBand::new(4.0, 6.0)?),
            relative: false,
            input: "0.01*sin(5*t)",
            span: TimeBand::up_to(10.0),
        },
        Scenario::IllustrativeTime => ScenarioSpec {
            sys: illustrative_7(),
            algorithms: [
                Algorithm::Bt,
                Algorithm::Tlbt,
                Algorithm::Homora,
                Algorithm::Tlhmora,
                Algorithm::Tlphmora,
            ],
            r: 3,
            band: Band::Time(TimeBand::up_to(0.5)),
            relative: false,
            input: "0.01*sin(5*t)",
            span: TimeBand::up_to(0.5),
        },
        Scenario::HeatTime => ScenarioSpec {
            sys: heat_transfer(grid)?,
            algorithms: [
                Algorithm::Bt,
                Algorithm::Tlbt,
                Algorithm::Homora,
                Algorithm::Tlhmora,
                Algorithm::Tlphmora,
            ],
            r: 1,
            band: Band::Time(TimeBand::new(0.5, 1.5)?),
            relative: true,
            input: "0.01*sin(t)",
            span: TimeBand::up_to(1.5),
        },
    })
}

fn bench(which: Scenario, grid: usize, solver: SolverArgs, out: &Path) -> Result<Status> {
    let spec = scenario(which, grid)?;
    let cfg = IterationConfig {
        solve_mode: solve_mode(solver.solver, solver.truncation)?,
        ..IterationConfig::reproduction(solver.truncation.max(1))
    };
    let kind = Band::kind(Some(spec.band));
    let (time, freq) = match spec.band {
        Band::Time(b) => (Some(b), None),
        Band::Freq(b) => (None, Some(b)),
    };
    let (band_kind, lo, hi) = band_fields(Some(spec.band));
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let full_ops = SystemOperators::auto(&spec.sys, kind)?;
    let scale = if spec.relative {
        norm_squared(&spec.sys, kind, cfg.solve_mode)?.max(0.0).sqrt()
    } else {
        1.0
    };
    let signal = Signal::parse(spec.input)?;
    let full_traj = run_simulation(&spec.sys, &signal, spec.span, None)?;

    let mut rows = Vec::new();
    let mut all_converged = true;
    for alg in spec.algorithms {
        let outcome = run_algorithm(&spec.sys, alg, spec.r, time, freq, &cfg)
            .map_err(|e| anyhow!(e).context(format!("{alg} failed")))?;
        let err = error_norm_with(&full_ops, &outcome.rom, cfg.solve_mode)?;
        log::info!("{alg}: error {err:.6e} after {} iterations", outcome.iterations);
        all_converged &= outcome.converged;
        let metric = if spec.relative {
            format!("{}_relative", metric_name(kind))
        } else {
            metric_name(kind).to_string()
        };
        rows.push(ReportRow {
            algorithm: alg.label().to_string(),
            r: spec.r,
            band_lo: lo,
            band_hi: hi,
            band_unit: band_unit(band_kind).to_string(),
            error_metric: metric,
            value: err / scale,
            iterations: outcome.iterations,
            converged: outcome.converged,
        });
        let traj = run_simulation(&outcome.rom, &signal, spec.span, None)?;
        let path: PathBuf = out.join(format!("trajectory_{}.csv", alg.id()));
        write_file(&path, &trajectory_csv(&full_traj, Some(&traj)))?;
    }
    io::write_report(&rows, &out.join("table.csv"))?;
    print_stdout(&io::report_csv(&rows)?)?;
    Ok(if all_converged {
        Status::Done
    } else {
        Status::NotConverged
    })
}
