//! On-disk formats: system bundles, run manifests and CSV reports.
//!
//! A system bundle is a directory holding `manifest.txt` (flat `key=value`
//! lines) and one matrix file per matrix: `A.mtx`, `N_1.mtx` … `N_m.mtx`,
//! `B.mtx`, `C.mtx`. A matrix file starts with `rows cols nnz` followed by
//! `nnz` lines `row col value` (1-based indices). Values are written in the
//! shortest decimal form that round-trips exactly. Entries not listed are
//! zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::system::BilinearSystem;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const RUN_MANIFEST_FILE: &str = "run.txt";

pub const REPORT_HEADER: [&str; 9] = [
    "algorithm",
    "r",
    "band_lo",
    "band_hi",
    "band_unit",
    "error_metric",
    "value",
    "iterations",
    "converged",
];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn schema(path: &Path, detail: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(path: &Path, text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| schema(path, format!("line {}: expected key=value", lineno + 1)))?;
        let k = k.trim().to_string();
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(schema(path, format!("duplicate key {k}")));
        }
    }
    Ok(map)
}

fn require<'a>(path: &Path, map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| schema(path, format!("missing key {key}")))
}

fn parse_field<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| schema(path, format!("cannot parse {key}={value}")))
}

pub fn write_matrix(m: &Mat, path: &Path) -> Result<()> {
    let nnz = m.iter().filter(|&&x| x != 0.0).count();
    let mut out = format!("{} {} {}\n", m.nrows(), m.ncols(), nnz);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(out, "{} {} {:?}", i + 1, j + 1, v).expect("string write");
            }
        }
    }
    write_text(path, &out)
}

pub fn read_matrix(path: &Path) -> Result<Mat> {
    let text = read_text(path)?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%') && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| schema(path, "empty matrix file"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(schema(path, "header must be `rows cols nnz`"));
    }
    let rows: usize = parse_field(path, "rows", dims[0])?;
    let cols: usize = parse_field(path, "cols", dims[1])?;
    let nnz: usize = parse_field(path, "nnz", dims[2])?;
    let mut m = Mat::zeros(rows, cols);
    let mut count = 0;
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(schema(path, format!("bad entry line `{line}`")));
        }
        let i: usize = parse_field(path, "row", f[0])?;
        let j: usize = parse_field(path, "col", f[1])?;
        let v: f64 = parse_field(path, "value", f[2])?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(schema(path, format!("entry ({i}, {j}) outside {rows}x{cols}")));
        }
        if !v.is_finite() {
            return Err(schema(path, format!("non-finite entry at ({i}, {j})")));
        }
        m[(i - 1, j - 1)] = v;
        count += 1;
    }
    if count != nnz {
        return Err(schema(path, format!("header announces {nnz} entries, found {count}")));
    }
    Ok(m)
}

/// Metadata stored next to the matrices of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleManifest {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemBundle {
    pub manifest: BundleManifest,
    pub system: BilinearSystem,
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

pub fn save_system(sys: &BilinearSystem, dir: &Path, name: &str, provenance: &str) -> Result<()> {
    sys.validate()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest = format!(
        "format_version={FORMAT_VERSION}\nname={}\nn={}\nm={}\np={}\nprovenance={}\n",
        one_line(name),
        sys.order(),
        sys.inputs(),
        sys.outputs(),
        one_line(provenance)
    );
    write_text(&dir.join(MANIFEST_FILE), &manifest)?;
    write_matrix(&sys.a, &dir.join("A.mtx"))?;
    for (k, nk) in sys.n.iter().enumerate() {
        write_matrix(nk, &dir.join(format!("N_{}.mtx", k + 1)))?;
    }
    write_matrix(&sys.b, &dir.join("B.mtx"))?;
    write_matrix(&sys.c, &dir.join("C.mtx"))
}

fn expect_shape(path: &Path, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(schema(
            path,
            format!(
                "matrix is {}x{}, manifest implies {rows}x{cols}",
                m.nrows(),
                m.ncols()
            ),
        ));
    }
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<SystemBundle> {
    let mpath = dir.join(MANIFEST_FILE);
    let map = parse_key_values(&mpath, &read_text(&mpath)?)?;
    let version: u32 = parse_field(&mpath, "format_version", require(&mpath, &map, "format_version")?)?;
    if version != FORMAT_VERSION {
        return Err(schema(&mpath, format!("unsupported format_version {version}")));
    }
    let manifest = BundleManifest {
        name: require(&mpath, &map, "name")?.to_string(),
        n: parse_field(&mpath, "n", require(&mpath, &map, "n")?)?,
        m: parse_field(&mpath, "m", require(&mpath, &map, "m")?)?,
        p: parse_field(&mpath, "p", require(&mpath, &map, "p")?)?,
        provenance: map.get("provenance").cloned().unwrap_or_default(),
    };
    let (n, m, p) = (manifest.n, manifest.m, manifest.p);
    let load = |file: String, rows: usize, cols: usize| -> Result<Mat> {
        let path: PathBuf = dir.join(file);
        if !path.exists() {
            return Err(schema(&path, "missing matrix file"));
        }
        let mat = read_matrix(&path)?;
        expect_shape(&path, &mat, rows, cols)?;
        Ok(mat)
    };
    let a = load("A.mtx".into(), n, n)?;
    let nk = (1..=m)
        .map(|k| load(format!("N_{k}.mtx"), n, n))
        .collect::<Result<Vec<_>>>()?;
    let b = load("B.mtx".into(), n, m)?;
    let c = load("C.mtx".into(), p, n)?;
    let system = BilinearSystem::new(a, nk, b, c)?;
    Ok(SystemBundle { manifest, system })
}

pub fn load_system(dir: &Path) -> Result<BilinearSystem> {
    Ok(load_bundle(dir)?.system)
}

/// Everything needed to repeat a reduction run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub algorithm: String,
    pub r: usize,
    /// `time`, `freq` or `none`.
    pub band_kind: String,
    pub band_lo: f64,
    pub band_hi: f64,
    pub solver_mode: String,
    pub truncation: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub stability_guard: bool,
    pub init: String,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "format_version={FORMAT_VERSION}").unwrap();
        writeln!(s, "algorithm={}", self.algorithm).unwrap();
        writeln!(s, "r={}", self.r).unwrap();
        writeln!(s, "band_kind={}", self.band_kind).unwrap();
        writeln!(s, "band_lo={:?}", self.band_lo).unwrap();
        writeln!(s, "band_hi={:?}", self.band_hi).unwrap();
        writeln!(s, "band_unit={}", band_unit(&self.band_kind)).unwrap();
        writeln!(s, "solver_mode={}", self.solver_mode).unwrap();
        writeln!(s, "truncation={}", self.truncation).unwrap();
        writeln!(s, "tol={:?}", self.tol).unwrap();
        writeln!(s, "max_iter={}", self.max_iter).unwrap();
        writeln!(s, "stability_guard={}", self.stability_guard).unwrap();
        writeln!(s, "init={}", self.init).unwrap();
        if let Some(seed) = self.seed {
            writeln!(s, "seed={seed}").unwrap();
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let map = parse_key_values(path, &read_text(path)?)?;
        let get = |k: &str| require(path, &map, k);
        let float = |k: &str| -> Result<f64> {
            let v = get(k)?;
            match v {
                "inf" => Ok(f64::INFINITY),
                _ => parse_field(path, k, v),
            }
        };
        Ok(Self {
            algorithm: get("algorithm")?.to_string(),
            r: parse_field(path, "r", get("r")?)?,
            band_kind: get("band_kind")?.to_string(),
            band_lo: float("band_lo")?,
            band_hi: float("band_hi")?,
            solver_mode: get("solver_mode")?.to_string(),
            truncation: parse_field(path, "truncation", get("truncation")?)?,
            tol: float("tol")?,
            max_iter: parse_field(path, "max_iter", get("max_iter")?)?,
            stability_guard: parse_field(path, "stability_guard", get("stability_guard")?)?,
            init: get("init")?.to_string(),
            seed: map
                .get("seed")
                .map(|v| parse_field(path, "seed", v))
                .transpose()?,
        })
    }
}

/// Unit label for a band kind.
pub fn band_unit(kind: &str) -> &'static str {
    match kind {
        "time" => "s",
        "freq" => "rad/s",
        _ => "",
    }
}

/// One row of a result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub algorithm: String,
    pub r: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub band_unit: String,
    pub error_metric: String,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.11e}")
    }
}

/// Render rows as CSV text in the given order.
pub fn report_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.r.to_string(),
            fmt_value(r.band_lo),
            fmt_value(r.band_hi),
            r.band_unit.clone(),
            r.error_metric.clone(),
            fmt_value(r.value),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Consistency(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_report(rows: &[ReportRow], path: &Path) -> Result<()> {
    write_text(path, &report_csv(rows)?)
}
