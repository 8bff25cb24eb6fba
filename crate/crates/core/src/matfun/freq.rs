use std::f64::consts::PI;

use num_complex::Complex64;

use super::logm::{frechet_in_basis, logm_triangular, real_checked};
use super::FreqBand;
use crate::error::{Error, Result};
use crate::linalg::{check_square, cmatmul, require_hurwitz, to_complex, CMat, Mat, RealSchur};

const RESIDUE_TOL: f64 = 1e-12;

fn j() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

fn shifted(t: &CMat, s: Complex64) -> CMat {
    let mut m = t.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += s;
    }
    m
}

/// `(j/2π)(log(−T − jωI) − log(−T + jωI))` for triangular `T`: the
/// indicator of the symmetric band `[−ω, ω]`.
fn indicator_to(t: &CMat, w: f64) -> Result<CMat> {
    let minus_t = -t;
    let lp = logm_triangular(&shifted(&minus_t, Complex64::new(0.0, -w)))?;
    let lm = logm_triangular(&shifted(&minus_t, Complex64::new(0.0, w)))?;
    Ok((lp - lm) * (j() / (2.0 * PI)))
}

/// `(jaI + T)^{-1}(jbI + T)` for triangular `T`.
fn ratio(t: &CMat, a: f64, b: f64) -> Result<CMat> {
    let den = shifted(t, Complex64::new(0.0, a));
    let num = shifted(t, Complex64::new(0.0, b));
    den.solve_upper_triangular(&num)
        .ok_or_else(|| Error::MatFun("frequency indicator: singular shift".into()))
}

/// Indicator of `[−hi, −lo] ∪ [lo, hi]` with `0 < lo < hi < ∞`, built from
/// the two-point logarithm of each half band.
fn indicator_between(t: &CMat, lo: f64, hi: f64) -> Result<CMat> {
    let up = logm_triangular(&ratio(t, lo, hi)?)?;
    let down = logm_triangular(&ratio(t, -lo, -hi)?)?;
    Ok((up - down) * (j() / (2.0 * PI)))
}

fn indicator_triangular(t: &CMat, band: &FreqBand) -> Result<CMat> {
    let n = t.nrows();
    let half = CMat::identity(n, n) * Complex64::new(0.5, 0.0);
    match (band.lo == 0.0, band.hi.is_finite()) {
        (true, false) => Ok(half),
        (true, true) => indicator_to(t, band.hi),
        (false, true) => indicator_between(t, band.lo, band.hi),
        (false, false) => Ok(half - indicator_to(t, band.lo)?),
    }
}

/// Frequency indicator `F[A] = (1/2π) ∫ (jνI − A)^{-1} dν` over the band and
/// its mirror image on the negative axis. The result is real; the imaginary
/// residue of the complex evaluation is checked before it is dropped.
pub fn freq_indicator(a: &Mat, band: &FreqBand) -> Result<Mat> {
    let n = check_square(a, "freq_indicator")?;
    band.validate()?;
    require_hurwitz(a, "freq_indicator")?;
    if band.is_everything() {
        return Ok(Mat::identity(n, n) * 0.5);
    }
    indicator_real(a, band)
}

/// [`freq_indicator`] extended to matrices with eigenvalues in the right
/// half-plane. The defining integral stays finite as long as no eigenvalue
/// lies on the imaginary axis; only bounded bands `0 < lo < hi < ∞` are
/// accepted for such matrices, where the two-point formula still equals the
/// integral. Used for intermediate iterates of unguarded reductions.
pub fn freq_indicator_bounded(a: &Mat, band: &FreqBand) -> Result<Mat> {
    check_square(a, "freq_indicator_bounded")?;
    band.validate()?;
    if band.lo == 0.0 || !band.hi.is_finite() {
        return freq_indicator(a, band);
    }
    let schur = RealSchur::new(a)?;
    let scale = a.norm().max(1.0);
    if let Some(l) = schur
        .eigenvalues()
        .into_iter()
        .find(|l| l.re.abs() <= 1e-12 * scale)
    {
        return Err(Error::NotHurwitz {
            context: "freq_indicator_bounded (eigenvalue on the imaginary axis)",
            max_real: l.re,
        });
    }
    indicator_real(a, band)
}

fn indicator_real(a: &Mat, band: &FreqBand) -> Result<Mat> {
    let schur = RealSchur::new(a)?;
    let (u, t) = schur.to_complex();
    let g = indicator_triangular(&t, band)?;
    let f = cmatmul(&cmatmul(&u, &g), &u.adjoint());
    real_checked(&f, RESIDUE_TOL)
}

/// `Re[(j/π) L(−A − jω₂I, E)] − Re[(j/π) L(−A − jω₁I, E)]`: the
/// logarithm-derivative weight that appears in the frequency-limited
/// optimality conditions. Endpoints at 0 or ∞ contribute nothing.
pub fn freq_log_frechet_weight(a: &Mat, band: &FreqBand, e: &Mat) -> Result<Mat> {
    let n = check_square(a, "freq_log_frechet_weight")?;
    band.validate()?;
    if e.shape() != (n, n) {
        return Err(Error::dim(
            "freq_log_frechet_weight",
            format!("direction is {}x{}, expected {n}x{n}", e.nrows(), e.ncols()),
        ));
    }
    let schur = RealSchur::new(a)?;
    let (u, t) = schur.to_complex();
    let minus_t = -&t;
    let ec = to_complex(e);
    let mut total = Mat::zeros(n, n);
    for (w, sign) in [(band.hi, 1.0), (band.lo, -1.0)] {
        if w == 0.0 || !w.is_finite() {
            continue;
        }
        let l = frechet_in_basis(&u, &shifted(&minus_t, Complex64::new(0.0, -w)), &ec)?;
        let term = (l * (j() / PI)).map(|z| z.re);
        total += term * sign;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    fn scalar(a: f64, lo: f64, hi: f64) -> f64 {
        let m = Mat::from_element(1, 1, a);
        freq_indicator(&m, &FreqBand::new(lo, hi).unwrap()).unwrap()[(0, 0)]
    }

    #[test]
    fn scalar_values() {
        assert!((scalar(-1.0, 0.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((scalar(-1.0, 0.0, f64::INFINITY) - 0.5).abs() < 1e-15);
        let want = (2f64.atan() - 1f64.atan()) / PI;
        assert!((scalar(-1.0, 1.0, 2.0) - want).abs() < 1e-14);
        let want = 0.5 - 3f64.atan() / PI;
        assert!((scalar(-1.0, 3.0, f64::INFINITY) - want).abs() < 1e-14);
    }

    #[test]
    fn scalar_band_matches_quadrature() {
        // (1/2π) ∫ over ±[1, 2] of (jν + 1)^{-1} dν, real part only.
        let (x, w) = gauss_legendre(40, 1.0, 2.0);
        let half: f64 = x
            .iter()
            .zip(&w)
            .map(|(v, wt)| wt * (1.0 / (1.0 + v * v)))
            .sum();
        let quad = 2.0 * half / (2.0 * PI);
        assert!((scalar(-1.0, 1.0, 2.0) - quad).abs() < 1e-13);
    }

    fn test_matrix() -> Mat {
        Mat::from_row_slice(
            4,
            4,
            &[
                -1.0, 2.0, 0.1, 0.0, -2.0, -0.5, 0.3, 0.2, 0.0, 0.4, -3.0, 1.0, 0.1, 0.0, -1.0,
                -2.0,
            ],
        )
    }

    #[test]
    fn additivity() {
        let a = test_matrix();
        let f = |lo, hi| freq_indicator(&a, &FreqBand::new(lo, hi).unwrap()).unwrap();
        let sum = f(0.0, 1.5) + f(1.5, 4.0);
        let whole = f(0.0, 4.0);
        assert!((sum - &whole).norm() < 1e-10 * whole.norm());
        let tail = f(4.0, f64::INFINITY) + whole;
        assert!((tail - Mat::identity(4, 4) * 0.5).norm() < 1e-10);
    }

    #[test]
    fn matches_resolvent_quadrature() {
        let a = test_matrix();
        let band = FreqBand::new(0.5, 3.0).unwrap();
        let f = freq_indicator(&a, &band).unwrap();
        let (x, w) = gauss_legendre(200, band.lo, band.hi);
        let ac = to_complex(&a);
        let mut acc = CMat::zeros(4, 4);
        for (v, wt) in x.iter().zip(&w) {
            for s in [1.0, -1.0] {
                let m = CMat::identity(4, 4) * Complex64::new(0.0, s * v) - &ac;
                acc += m.try_inverse().unwrap() * Complex64::new(*wt, 0.0);
            }
        }
        let quad = acc.map(|z| z.re) / (2.0 * PI);
        assert!((f - quad).norm() < 1e-10);
    }

    #[test]
    fn rejects_unstable_and_bad_bands() {
        let m = Mat::from_element(1, 1, 0.5);
        assert!(matches!(
            freq_indicator(&m, &FreqBand::up_to(1.0)),
            Err(Error::NotHurwitz { .. })
        ));
        assert!(FreqBand::new(2.0, 1.0).is_err());
    }

    #[test]
    fn bounded_band_on_unstable_matrix_matches_integral() {
        // (1/π)∫_1^2 −a/(ν² + a²) dν for a = 0.5
        let a = 0.5f64;
        let want = -((2.0 / a).atan() - (1.0 / a).atan()) / PI;
        let m = Mat::from_element(1, 1, a);
        let f = freq_indicator_bounded(&m, &FreqBand::new(1.0, 2.0).unwrap()).unwrap();
        assert!((f[(0, 0)] - want).abs() < 1e-14);
        assert!(freq_indicator_bounded(&m, &FreqBand::up_to(1.0)).is_err());
    }

    #[test]
    fn frechet_weight_matches_indicator_derivative() {
        // F[A] on [0, ω] is Re((j/π) log(−A − jωI)), so its derivative in
        // direction D equals the weight evaluated at −D.
        let a = test_matrix();
        let d = Mat::from_fn(4, 4, |i, j| ((3 * i + j) % 4) as f64 * 0.1 - 0.15);
        let band = FreqBand::new(0.7, 2.5).unwrap();
        let h = 1e-6;
        let fd = (freq_indicator(&(&a + &d * h), &band).unwrap()
            - freq_indicator(&(&a - &d * h), &band).unwrap())
            / (2.0 * h);
        let w = freq_log_frechet_weight(&a, &band, &(-&d)).unwrap();
        assert!((&w - &fd).norm() < 1e-6 * fd.norm().max(1e-3));
    }
}
