use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bimor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bimor"))
        .args(args)
        .env_remove("BIMOR_TRUNC")
        .output()
        .expect("failed to launch bimor")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("killed by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn illustrative(dir: &Path) -> std::path::PathBuf {
    let sys = dir.join("sys");
    let out = bimor(&["example", "illustrative7", "-o", p(&sys)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    sys
}

fn report_value(dir: &Path) -> f64 {
    let text = fs::read_to_string(dir.join("report.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    row[6].parse().unwrap()
}

#[test]
fn example_bundle_has_manifest_and_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = illustrative(tmp.path());
    let manifest = fs::read_to_string(sys.join("manifest.txt")).unwrap();
    assert!(manifest.contains("n=7"), "{manifest}");
    for m in ["A", "N_1", "B", "C"] {
        assert!(sys.join(format!("{m}.mtx")).exists(), "{m}");
    }
}

#[test]
fn time_limited_reduction_converges_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = illustrative(tmp.path());
    let out = tmp.path().join("red");
    let run = bimor(&[
        "reduce", p(&sys), "--alg", "tlphmora", "-r", "3", "--time-band", "0", "0.5", "-o", p(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out.join("rom").join("manifest.txt").exists());
    assert!(out.join("run.txt").exists());
    let v = report_value(&out);
    assert!((v - 0.012114).abs() < 1e-5, "{v}");
}

#[test]
fn non_convergence_exits_4_after_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = illustrative(tmp.path());
    let out = tmp.path().join("red");
    let run = bimor(&[
        "reduce", p(&sys), "--alg", "flhmora", "-r", "1", "--freq-band", "4", "6", "-o", p(&out),
    ]);
    assert_eq!(code(&run), 4);
    let v = report_value(&out);
    assert!((v - 1.031826).abs() < 1e-5, "{v}");
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = illustrative(tmp.path());
    let too_big = bimor(&["reduce", p(&sys), "--alg", "bt", "-r", "8", "-o", p(&tmp.path().join("x"))]);
    assert_eq!(code(&too_big), 2);
    let grid = bimor(&["example", "heat", "--grid", "1", "-o", p(&tmp.path().join("h"))]);
    assert_eq!(code(&grid), 2);
    let no_band = bimor(&["reduce", p(&sys), "--alg", "tlbt", "-r", "2", "-o", p(&tmp.path().join("y"))]);
    assert_eq!(code(&no_band), 2);
    let bad_input = bimor(&["simulate", p(&sys), "--input", "exp(t)", "--until", "1"]);
    assert_eq!(code(&bad_input), 2);
    let missing = bimor(&["eval", p(&tmp.path().join("nope")), p(&sys)]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn residuals_report_all_conditions() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = illustrative(tmp.path());
    let out = tmp.path().join("red");
    bimor(&["reduce", p(&sys), "--alg", "tlphmora", "-r", "3", "--time-band", "0", "0.5", "-o", p(&out)]);
    let res = bimor(&["residuals", p(&sys), p(&out.join("rom")), "--time-band", "0", "0.5"]);
    assert_eq!(code(&res), 0);
    let text = stdout(&res);
    let get = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{key}="))).unwrap();
        line.split('=').nth(1).unwrap().parse().unwrap()
    };
    assert!(get("cond_B") < 1e-10 && get("cond_C") < 1e-10, "{text}");
    assert!(get("cond_A") > 1e-6, "{text}");

    let generic = bimor(&["residuals", p(&sys), p(&out.join("rom")), "--time-band", "0.1", "0.5"]);
    assert!(stdout(&generic).contains("cond_A=n/a"));
}

#[test]
fn simulation_starts_at_rest() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = illustrative(tmp.path());
    let csv = tmp.path().join("y.csv");
    let run = bimor(&[
        "simulate", p(&sys), "--rom", p(&sys), "--input", "0.01*sin(5*t)", "--until", "0.5", "--step",
        "1e-3", "-o", p(&csv),
    ]);
    assert_eq!(code(&run), 0);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,y_1,y_rom_1,abs_error");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0; 4]);
    assert_eq!(text.lines().count(), 502);
    // a system compared with itself has zero error everywhere
    for line in text.lines().skip(1) {
        assert_eq!(line.rsplit(',').next().unwrap().parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn bench_writes_table_and_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let run = bimor(&["bench", "illustrative-time", "-o", p(&out)]);
    assert_eq!(code(&run), 0);
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    for alg in ["bt", "tlbt", "homora", "tlhmora", "tlphmora"] {
        assert!(out.join(format!("trajectory_{alg}.csv")).exists(), "{alg}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = illustrative(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let flags = ["--alg", "tlhmora", "-r", "3", "--time-band", "0", "0.5"];
    let mut args = vec!["reduce", p(&sys)];
    args.extend(flags);
    bimor(&[args.as_slice(), &["-o", p(&a)]].concat());
    let replay = bimor(&["reduce", p(&sys), "--from-manifest", p(&a.join("run.txt")), "-o", p(&b)]);
    assert_eq!(code(&replay), 0);
    for file in ["run.txt", "report.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    for entry in fs::read_dir(a.join("rom")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(a.join("rom").join(&name)).unwrap(),
            fs::read(b.join("rom").join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn truncation_level_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let sys = illustrative(tmp.path());
    let out = tmp.path().join("r");
    let run = Command::new(env!("CARGO_BIN_EXE_bimor"))
        .args(["reduce", p(&sys), "--alg", "bt", "-r", "2", "-o", p(&out)])
        .env("BIMOR_TRUNC", "5")
        .output()
        .unwrap();
    assert_eq!(code(&run), 0);
    let manifest = fs::read_to_string(out.join("run.txt")).unwrap();
    assert!(manifest.contains("truncation=5"), "{manifest}");
}
