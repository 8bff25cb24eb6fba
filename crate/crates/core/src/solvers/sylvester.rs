use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_square, Mat, RealSchur, EPS};

/// A drift matrix with lazily computed real Schur forms of itself and of
/// its transpose. Shared between the equations of one reduction run so each
/// factorization happens once.
#[derive(Debug)]
pub struct Drift {
    matrix: Mat,
    schur: OnceLock<RealSchur>,
    schur_t: OnceLock<RealSchur>,
}

impl Drift {
    pub fn new(matrix: Mat) -> Arc<Self> {
        Arc::new(Self {
            matrix,
            schur: OnceLock::new(),
            schur_t: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn schur(&self) -> Result<&RealSchur> {
        if let Some(s) = self.schur.get() {
            return Ok(s);
        }
        let s = RealSchur::new(&self.matrix)?;
        Ok(self.schur.get_or_init(|| s))
    }

    /// Schur form of the matrix (`transposed = false`) or of its transpose.
    pub(crate) fn schur_of(&self, transposed: bool) -> Result<&RealSchur> {
        if !transposed {
            return self.schur();
        }
        if let Some(s) = self.schur_t.get() {
            return Ok(s);
        }
        let s = self.schur()?.transposed();
        Ok(self.schur_t.get_or_init(|| s))
    }
}

/// Solve `T1 Y + Y T2 = F` for upper quasi-triangular `T1`, `T2`.
fn solve_quasi_triangular(s1: &RealSchur, s2: &RealSchur, f: &Mat, tol: f64) -> Result<Mat> {
    let (n1, n2) = f.shape();
    let t1 = &s1.t;
    let t2 = &s2.t;
    let mut y = Mat::zeros(n1, n2);
    for &(c0, q) in &s2.blocks {
        let mut rhs = f.columns(c0, q).into_owned();
        if c0 > 0 {
            rhs -= y.columns(0, c0) * t2.view((0, c0), (c0, q));
        }
        let t2jj = t2.view((c0, c0), (q, q));
        let mut z = Mat::zeros(n1, q);
        for &(r0, p) in s1.blocks.iter().rev() {
            let mut g = rhs.rows(r0, p).into_owned();
            let tail = n1 - r0 - p;
            if tail > 0 {
                g -= t1.view((r0, r0 + p), (p, tail)) * z.rows(r0 + p, tail);
            }
            let t1ii = t1.view((r0, r0), (p, p));
            let block = solve_small(&t1ii.into_owned(), &t2jj.into_owned(), &g, tol)?;
            z.rows_mut(r0, p).copy_from(&block);
        }
        y.columns_mut(c0, q).copy_from(&z);
    }
    Ok(y)
}

/// `T1 Z + Z T2 = G` for blocks of order at most 2, via the Kronecker form.
fn solve_small(t1: &Mat, t2: &Mat, g: &Mat, tol: f64) -> Result<Mat> {
    let (p, q) = g.shape();
    if p == 1 && q == 1 {
        let d = t1[(0, 0)] + t2[(0, 0)];
        if d.abs() <= tol {
            return Err(Error::SpectraOverlap);
        }
        return Ok(Mat::from_element(1, 1, g[(0, 0)] / d));
    }
    let order = p * q;
    let mut k = Mat::zeros(order, order);
    // vec(T1 Z) = (I ⊗ T1) vec Z, vec(Z T2) = (T2^T ⊗ I) vec Z
    for b in 0..q {
        for i in 0..p {
            for j in 0..p {
                k[(b * p + i, b * p + j)] += t1[(i, j)];
            }
        }
    }
    for a in 0..q {
        for b in 0..q {
            for i in 0..p {
                k[(a * p + i, b * p + i)] += t2[(b, a)];
            }
        }
    }
    let lu = k.lu();
    let u = lu.u();
    if (0..order).any(|i| u[(i, i)].abs() <= tol) {
        return Err(Error::SpectraOverlap);
    }
    let v = lu
        .solve(&Mat::from_column_slice(order, 1, g.as_slice()))
        .ok_or(Error::SpectraOverlap)?;
    Ok(Mat::from_column_slice(p, q, v.as_slice()))
}

pub(crate) fn sylvester_with_schur(
    s1: &RealSchur,
    s2: &RealSchur,
    c: &Mat,
    scale: f64,
) -> Result<Mat> {
    let f = -(s1.q.transpose() * c * &s2.q);
    let tol = 64.0 * EPS * scale;
    let y = solve_quasi_triangular(s1, s2, &f, tol)?;
    let x = &s1.q * y * s2.q.transpose();
    check_finite(&x, "Sylvester solution")?;
    Ok(x)
}

/// Solve `A X + X B + C = 0` by the Bartels–Stewart method on real Schur
/// forms of `A` and `B`.
pub fn solve_sylvester(a: &Mat, b: &Mat, c: &Mat) -> Result<Mat> {
    let n1 = check_square(a, "solve_sylvester (A)")?;
    let n2 = check_square(b, "solve_sylvester (B)")?;
    if c.shape() != (n1, n2) {
        return Err(Error::dim(
            "solve_sylvester",
            format!("right-hand side is {}x{}, expected {n1}x{n2}", c.nrows(), c.ncols()),
        ));
    }
    check_finite(c, "Sylvester right-hand side")?;
    let s1 = RealSchur::new(a)?;
    let s2 = RealSchur::new(b)?;
    sylvester_with_schur(&s1, &s2, c, a.norm() + b.norm())
}
