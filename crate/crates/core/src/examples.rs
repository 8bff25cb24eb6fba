//! Built-in benchmark systems.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::system::BilinearSystem;

#[rustfmt::skip]
const ILLUSTRATIVE_A: [f64; 49] = [
    -0.81,  0.47,  -0.43,  1.6,   0.26, -0.4,   0.92,
    -0.61, -1.9,    0.8,  -1.6,   2.0,   0.98, -0.9,
     0.5,  -1.2,   -2.1,  -1.6,  -1.1,   0.14, -0.87,
    -1.3,   2.1,    0.47, -1.2,   3.7,  -1.2,  -1.3,
    -0.24, -0.081,  1.6,  -3.6,  -1.3,   1.7,  -2.6,
     1.3,  -0.96,  -1.3,  -0.57, -2.4,  -2.4,  -0.36,
    -0.16,  1.5,   -0.99,  1.5,   0.61, -2.2,  -3.3,
];
const ILLUSTRATIVE_B: [f64; 7] = [0.0, 0.0, -0.196, 1.42, 0.292, 0.198, 1.59];
const ILLUSTRATIVE_C: [f64; 7] = [-0.804, 0.0, 0.835, -0.244, 0.216, -1.17, -1.15];

/// Seventh-order single-input single-output test system with `N = −I`.
pub fn illustrative_7() -> BilinearSystem {
    BilinearSystem {
        a: Mat::from_row_slice(7, 7, &ILLUSTRATIVE_A),
        n: vec![-Mat::identity(7, 7)],
        b: Mat::from_column_slice(7, 1, &ILLUSTRATIVE_B),
        c: Mat::from_row_slice(1, 7, &ILLUSTRATIVE_C),
    }
}

/// Heat equation on the unit square, `k × k` interior grid, Dirichlet
/// boundary, with Robin-type control on the edge `x = 0`.
///
/// State index of node `(i, j)` (`i` along x) is `i + k j`. The output is
/// the mean temperature.
pub fn heat_transfer(grid_k: usize) -> Result<BilinearSystem> {
    if grid_k < 2 {
        return Err(Error::InvalidArgument(format!(
            "heat grid needs at least 2 points per side, got {grid_k}"
        )));
    }
    let k = grid_k;
    let n = k * k;
    let h_inv = (k + 1) as f64;
    let scale = h_inv * h_inv;
    let mut a = Mat::zeros(n, n);
    for j in 0..k {
        for i in 0..k {
            let p = i + k * j;
            a[(p, p)] = -4.0 * scale;
            if i > 0 {
                a[(p, p - 1)] = scale;
            }
            if i + 1 < k {
                a[(p, p + 1)] = scale;
            }
            if j > 0 {
                a[(p, p - k)] = scale;
            }
            if j + 1 < k {
                a[(p, p + k)] = scale;
            }
        }
    }
    let mut nmat = Mat::zeros(n, n);
    let mut b = Mat::zeros(n, 1);
    for j in 0..k {
        let p = k * j;
        nmat[(p, p)] = -h_inv;
        b[(p, 0)] = h_inv;
    }
    let c = Mat::from_element(1, n, 1.0 / n as f64);
    BilinearSystem::new(a, vec![nmat], b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_abscissa;

    #[test]
    fn illustrative_entries() {
        let s = illustrative_7();
        s.validate().unwrap();
        assert_eq!(s.a[(0, 0)], -0.81);
        assert_eq!(s.a[(3, 4)], 3.7);
        assert_eq!(s.n[0], -Mat::identity(7, 7));
        assert_eq!(s.b[0], 0.0);
        assert_eq!(s.b[6], 1.59);
        assert_eq!(s.c[1], 0.0);
        assert!(spectral_abscissa(&s.a).unwrap() < 0.0);
    }

    #[test]
    fn heat_structure() {
        let s = heat_transfer(23).unwrap();
        assert_eq!(s.order(), 529);
        assert!(heat_transfer(1).is_err());
        let s = heat_transfer(5).unwrap();
        assert_eq!(s.a, s.a.transpose());
        assert!(spectral_abscissa(&s.a).unwrap() < 0.0);
        for r in 0..25 {
            for c in 0..25 {
                let v = s.n[0][(r, c)];
                if r != c || r % 5 != 0 {
                    assert_eq!(v, 0.0);
                } else {
                    assert_eq!(v, -6.0);
                }
            }
        }
    }
}
