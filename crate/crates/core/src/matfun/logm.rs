use nalgebra::Complex;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cmatmul, norm1_c, real_part, to_complex, CMat, Mat, RealSchur};
use crate::quadrature::gauss_legendre;

const PADE_NODES: usize = 8;
const MAX_SQRTS: usize = 64;
const CLOSE_TO_IDENTITY: f64 = 0.25;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn check_branch(t: &CMat) -> Result<()> {
    for i in 0..t.nrows() {
        let z = t[(i, i)];
        if z.norm() == 0.0 || (z.re <= 0.0 && z.im.abs() <= 1e-14 * z.norm()) {
            return Err(Error::BranchCut { re: z.re, im: z.im });
        }
    }
    Ok(())
}

/// Principal square root of an upper triangular matrix.
fn sqrt_triangular(t: &CMat) -> CMat {
    let n = t.nrows();
    let mut r = CMat::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = t[(j, j)].sqrt();
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in (i + 1)..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = s / (r[(i, i)] + r[(j, j)]);
        }
    }
    r
}

/// Principal logarithm of an upper triangular matrix by inverse scaling and
/// squaring: repeated square roots bring `T` near `I`, a Gauss–Legendre
/// rational approximant evaluates `log(I + X)`, and the result is rescaled.
pub(crate) fn logm_triangular(t: &CMat) -> Result<CMat> {
    let n = t.nrows();
    check_branch(t)?;
    let id = CMat::identity(n, n);
    let mut r = t.clone();
    let mut s = 0usize;
    while norm1_c(&(&r - &id)) > CLOSE_TO_IDENTITY {
        if s == MAX_SQRTS {
            return Err(Error::MatFun(format!(
                "logarithm: no convergence after {MAX_SQRTS} square roots"
            )));
        }
        r = sqrt_triangular(&r);
        s += 1;
    }
    let x = &r - &id;
    let (nodes, weights) = gauss_legendre(PADE_NODES, 0.0, 1.0);
    let mut out = CMat::zeros(n, n);
    for (xj, wj) in nodes.iter().zip(&weights) {
        let denom = &id + &x * c(*xj);
        let term = denom
            .solve_upper_triangular(&x)
            .ok_or_else(|| Error::MatFun("logarithm: singular Padé denominator".into()))?;
        out += term * c(*wj);
    }
    out *= c(2f64.powi(s as i32));
    for i in 0..n {
        out[(i, i)] = t[(i, i)].ln();
        for j in 0..i {
            out[(i, j)] = c(0.0);
        }
    }
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("logarithm result"));
    }
    Ok(out)
}

/// Complex Schur form `A = U T U^*` of a general complex matrix.
pub(crate) fn complex_schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("complex Schur input"));
    }
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or(Error::SchurFailure(n))?;
    let (u, mut t) = schur.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = Complex::new(0.0, 0.0);
        }
    }
    Ok((u, t))
}

fn check_sq_c(a: &CMat, context: &'static str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim(
            context,
            format!("expected square matrix, got {}x{}", a.nrows(), a.ncols()),
        ));
    }
    Ok(a.nrows())
}

/// Principal logarithm of a complex matrix.
pub fn logm_complex(a: &CMat) -> Result<CMat> {
    check_sq_c(a, "logm")?;
    let (u, t) = complex_schur(a)?;
    let lt = logm_triangular(&t)?;
    Ok(cmatmul(&cmatmul(&u, &lt), &u.adjoint()))
}

/// Principal logarithm of a real matrix; the result is real whenever it
/// exists, and the imaginary residue of the complex computation is checked.
pub fn logm(a: &Mat) -> Result<Mat> {
    check_sq_c(&to_complex(a), "logm")?;
    let schur = RealSchur::new(a)?;
    let (u, t) = schur.to_complex();
    let lt = logm_triangular(&t)?;
    let full = cmatmul(&cmatmul(&u, &lt), &u.adjoint());
    real_checked(&full, 1e-10)
}

pub(crate) fn real_checked(m: &CMat, rel_tol: f64) -> Result<Mat> {
    let re = real_part(m);
    let scale = re.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    let residue = m.iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()));
    let tol = rel_tol * scale;
    if residue > tol {
        return Err(Error::ComplexResidue { residue, tol });
    }
    Ok(re)
}

/// Fréchet derivative `L(A, E)` of the principal logarithm at a complex
/// `A`, from the logarithm of the block triangular matrix `[[T, F], [0, T]]`
/// where `A = U T U^*` and `F = U^* E U`.
pub fn logm_frechet_complex(a: &CMat, e: &CMat) -> Result<CMat> {
    let n = check_sq_c(a, "logm_frechet")?;
    if e.shape() != (n, n) {
        return Err(Error::dim(
            "logm_frechet",
            format!("direction is {}x{}, expected {n}x{n}", e.nrows(), e.ncols()),
        ));
    }
    let (u, t) = complex_schur(a)?;
    frechet_in_basis(&u, &t, e)
}

pub(crate) fn frechet_in_basis(u: &CMat, t: &CMat, e: &CMat) -> Result<CMat> {
    let n = t.nrows();
    let f = cmatmul(&cmatmul(&u.adjoint(), e), u);
    let fnorm = f.norm();
    if fnorm == 0.0 {
        return Ok(CMat::zeros(n, n));
    }
    let scale = t.norm().max(1e-300) / fnorm;
    let mut block = CMat::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(t);
    block.view_mut((n, n), (n, n)).copy_from(t);
    block.view_mut((0, n), (n, n)).copy_from(&(f * c(scale)));
    let lb = logm_triangular(&block)?;
    let top = lb.view((0, n), (n, n)).into_owned() * c(1.0 / scale);
    Ok(cmatmul(&cmatmul(u, &top), &u.adjoint()))
}

/// Fréchet derivative of the principal logarithm at a real matrix.
pub fn logm_frechet(a: &Mat, e: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim("logm_frechet", "expected square matrix"));
    }
    if e.shape() != (n, n) {
        return Err(Error::dim(
            "logm_frechet",
            format!("direction is {}x{}, expected {n}x{n}", e.nrows(), e.ncols()),
        ));
    }
    let schur = RealSchur::new(a)?;
    let (u, t) = schur.to_complex();
    let l = frechet_in_basis(&u, &t, &to_complex(e))?;
    real_checked(&l, 1e-10)
}
