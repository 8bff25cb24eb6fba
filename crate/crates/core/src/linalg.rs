//! Dense building blocks shared by the numerical modules.
//!
//! Decompositions come from nalgebra; this module adds the pieces it lacks:
//! a real Schur form with explicit block structure, its complex triangular
//! counterpart, a split real/imaginary complex product, and the subspace
//! helpers used by the projection algorithms.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

pub(crate) const EPS: f64 = f64::EPSILON;

pub fn check_square(m: &Mat, context: &'static str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(
            context,
            format!("expected square matrix, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m.nrows())
}

pub fn check_finite(m: &Mat, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> Mat {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMat) -> Mat {
    m.map(|z| z.im)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Complex product through four real products, which use the blocked
/// real kernel instead of nalgebra's generic complex loop.
pub fn cmatmul(a: &CMat, b: &CMat) -> CMat {
    let (ar, ai) = (real_part(a), imag_part(a));
    let (br, bi) = (real_part(b), imag_part(b));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMat::from_fn(re.nrows(), re.ncols(), |i, j| {
        Complex64::new(re[(i, j)], im[(i, j)])
    })
}

pub fn norm1_c(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn inverse(m: &Mat, context: &'static str) -> Result<Mat> {
    let n = check_square(m, context)?;
    let lu = m.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Consistency(format!("{context}: singular {n}x{n} matrix")))?;
    if inv.iter().all(|x| x.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::Consistency(format!(
            "{context}: singular {n}x{n} matrix"
        )))
    }
}

/// Reciprocal condition estimate in the 2-norm from singular values.
pub fn rcond(m: &Mat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Real Schur form `A = Q T Q^T` with the diagonal block partition of `T`.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: Mat,
    pub t: Mat,
    /// `(start, size)` of each diagonal block, size 1 or 2, in order.
    pub blocks: Vec<(usize, usize)>,
}

impl RealSchur {
    pub fn new(a: &Mat) -> Result<Self> {
        let n = check_square(a, "real Schur")?;
        check_finite(a, "Schur input")?;
        if n == 0 {
            return Ok(Self {
                q: Mat::zeros(0, 0),
                t: Mat::zeros(0, 0),
                blocks: Vec::new(),
            });
        }
        if a == &a.transpose() {
            // symmetric input: the Schur form is an eigendecomposition, and
            // the QR iteration can stall on the clustered spectra of
            // discretized operators
            let eig = SymmetricEigen::try_new(a.clone(), EPS, 100 * n.max(10))
                .ok_or(Error::SchurFailure(n))?;
            let t = Mat::from_diagonal(&eig.eigenvalues);
            return Ok(Self {
                q: eig.eigenvectors,
                t,
                blocks: (0..n).map(|i| (i, 1)).collect(),
            });
        }
        let schur = nalgebra::Schur::try_new(a.clone(), EPS, 100 * n.max(10))
            .or_else(|| nalgebra::Schur::try_new(a.clone(), EPS, 0))
            .ok_or(Error::SchurFailure(n))?;
        let (q, mut t) = schur.unpack();
        for j in 0..n {
            for i in (j + 2)..n {
                t[(i, j)] = 0.0;
            }
        }
        let mut blocks = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n {
                let sub = t[(i + 1, i)];
                let scale = t[(i, i)].abs() + t[(i + 1, i + 1)].abs();
                if sub.abs() > EPS * scale.max(f64::MIN_POSITIVE) {
                    blocks.push((i, 2));
                    i += 2;
                    continue;
                }
                t[(i + 1, i)] = 0.0;
            }
            blocks.push((i, 1));
            i += 1;
        }
        Ok(Self { q, t, blocks })
    }

    /// Schur form of `A^T` derived from that of `A`: with `J` the reversal
    /// permutation, `A^T = (QJ)(J T^T J)(QJ)^T` and `J T^T J` is again upper
    /// quasi-triangular.
    pub fn transposed(&self) -> Self {
        let n = self.t.nrows();
        let t = Mat::from_fn(n, n, |i, j| self.t[(n - 1 - j, n - 1 - i)]);
        let q = Mat::from_fn(n, n, |i, j| self.q[(i, n - 1 - j)]);
        let blocks = self
            .blocks
            .iter()
            .rev()
            .map(|&(s, size)| (n - s - size, size))
            .collect();
        Self { q, t, blocks }
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.t.nrows());
        for &(s, size) in &self.blocks {
            if size == 1 {
                out.push(Complex64::new(self.t[(s, s)], 0.0));
            } else {
                let (a, b, c, d) = (
                    self.t[(s, s)],
                    self.t[(s, s + 1)],
                    self.t[(s + 1, s)],
                    self.t[(s + 1, s + 1)],
                );
                let half_tr = 0.5 * (a + d);
                let disc = 0.25 * (a - d) * (a - d) + b * c;
                if disc >= 0.0 {
                    let r = disc.sqrt();
                    out.push(Complex64::new(half_tr + r, 0.0));
                    out.push(Complex64::new(half_tr - r, 0.0));
                } else {
                    let r = (-disc).sqrt();
                    out.push(Complex64::new(half_tr, r));
                    out.push(Complex64::new(half_tr, -r));
                }
            }
        }
        out
    }

    /// Complex Schur form `A = U T U^*` with `T` upper triangular, obtained
    /// by splitting each 2x2 block with a unitary rotation.
    pub fn to_complex(&self) -> (CMat, CMat) {
        let n = self.t.nrows();
        let mut u = to_complex(&self.q);
        let mut t = to_complex(&self.t);
        for &(s, size) in self.blocks.iter().rev() {
            if size != 2 {
                continue;
            }
            let (k0, k1) = (s, s + 1);
            // Eigenvalue of the block minus the trailing diagonal entry.
            let a = t[(k0, k0)];
            let b = t[(k0, k1)];
            let c = t[(k1, k0)];
            let d = t[(k1, k1)];
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * (a - d) * 0.25 + b * c).sqrt();
            let mu = half_tr + disc - d;
            let r = (mu.norm_sqr() + c.norm_sqr()).sqrt();
            if r == 0.0 {
                continue;
            }
            let cs = mu / r;
            let sn = c / r;
            // G = [conj(cs) conj(sn); -sn cs]
            let g00 = cs.conj();
            let g01 = sn.conj();
            let g10 = -sn;
            let g11 = cs;
            for j in k0..n {
                let x = t[(k0, j)];
                let y = t[(k1, j)];
                t[(k0, j)] = g00 * x + g01 * y;
                t[(k1, j)] = g10 * x + g11 * y;
            }
            // Right-multiply by G^* on rows 0..=k1.
            for i in 0..=k1 {
                let x = t[(i, k0)];
                let y = t[(i, k1)];
                t[(i, k0)] = x * g00.conj() + y * g01.conj();
                t[(i, k1)] = x * g10.conj() + y * g11.conj();
            }
            for i in 0..n {
                let x = u[(i, k0)];
                let y = u[(i, k1)];
                u[(i, k0)] = x * g00.conj() + y * g01.conj();
                u[(i, k1)] = x * g10.conj() + y * g11.conj();
            }
            t[(k1, k0)] = Complex64::new(0.0, 0.0);
        }
        (u, t)
    }
}

pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    Ok(RealSchur::new(a)?.eigenvalues())
}

/// Eigenvalues ordered by real part, then imaginary part.
pub fn sorted_eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    let mut ev = eigenvalues(a)?;
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(ev)
}

pub fn spectral_abscissa(a: &Mat) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn require_hurwitz(a: &Mat, context: &'static str) -> Result<()> {
    let max_real = spectral_abscissa(a)?;
    if max_real < 0.0 {
        Ok(())
    } else {
        Err(Error::NotHurwitz { context, max_real })
    }
}

/// Orthonormal basis of the column span, with a rank check against
/// `1e-12` times the largest singular value.
pub fn orth(v: &Mat, wanted: usize) -> Result<Mat> {
    let svd = SVD::new(v.clone(), true, false);
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-12 * smax && s > 0.0).count();
    if rank < wanted {
        return Err(Error::DegenerateSubspace { rank, wanted });
    }
    let u = svd.u.expect("left singular vectors requested");
    Ok(u.columns(0, wanted).into_owned())
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
pub fn sym_eig_desc(m: &Mat) -> (DVector<f64>, Mat) {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Mat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn symmetric_part(m: &Mat) -> Mat {
    0.5 * (m + m.transpose())
}

pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).norm()
}

pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let (n1, m1) = a.shape();
    let (n2, m2) = b.shape();
    let mut out = Mat::zeros(n1 + n2, m1 + m2);
    out.view_mut((0, 0), (n1, m1)).copy_from(a);
    out.view_mut((n1, m1), (n2, m2)).copy_from(b);
    out
}

pub fn vstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = Mat::zeros(ra * rb, ca * cb);
    for j in 0..ca {
        for i in 0..ra {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * rb, j * cb), (rb, cb)).copy_from(&(b * s));
            }
        }
    }
    out
}

pub fn vec_of(m: &Mat) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| {
            let x = ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5;
            if i == j {
                x - 2.0
            } else {
                x
            }
        })
    }

    #[test]
    fn real_schur_reconstructs_and_blocks_are_small() {
        let a = sample(9);
        let s = RealSchur::new(&a).unwrap();
        let rec = &s.q * &s.t * s.q.transpose();
        assert!((rec - &a).norm() < 1e-12 * a.norm());
        assert_eq!(s.blocks.iter().map(|b| b.1).sum::<usize>(), 9);
    }

    #[test]
    fn complex_schur_is_triangular() {
        // Rotation-dominated matrix guarantees complex pairs.
        let mut a = sample(6);
        a[(0, 1)] += 3.0;
        a[(1, 0)] -= 3.0;
        a[(3, 4)] += 2.0;
        a[(4, 3)] -= 2.0;
        let s = RealSchur::new(&a).unwrap();
        assert!(s.blocks.iter().any(|b| b.1 == 2));
        let (u, t) = s.to_complex();
        for j in 0..6 {
            for i in (j + 1)..6 {
                assert!(t[(i, j)].norm() < 1e-12, "T[{i},{j}] = {}", t[(i, j)]);
            }
        }
        let rec = cmatmul(&cmatmul(&u, &t), &u.adjoint());
        let err = (rec - to_complex(&a)).norm();
        assert!(err < 1e-12 * a.norm(), "reconstruction error {err}");
        let uu = cmatmul(&u.adjoint(), &u) - CMat::identity(6, 6);
        assert!(uu.norm() < 1e-13);
    }

    #[test]
    fn orth_detects_rank_deficiency() {
        let mut v = Mat::zeros(5, 2);
        v[(0, 0)] = 1.0;
        v[(0, 1)] = 2.0;
        assert!(matches!(
            orth(&v, 2),
            Err(Error::DegenerateSubspace { rank: 1, wanted: 2 })
        ));
    }

    #[test]
    fn kron_matches_definition() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Mat::from_row_slice(1, 2, &[5.0, 6.0]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 4));
        assert_eq!(k[(1, 3)], 4.0 * 6.0);
        assert_eq!(k[(0, 2)], 2.0 * 5.0);
    }
}
