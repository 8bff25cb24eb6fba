//! Gauss–Legendre nodes and weights.

use std::f64::consts::PI;

/// `n`-point Gauss–Legendre rule mapped to `[lo, hi]`.
///
/// Nodes are found by Newton iteration on the Legendre polynomial from the
/// Chebyshev-like initial guess; accurate to roundoff for `n` up to a few
/// hundred.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "quadrature needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        // Recompute the derivative at the converged node.
        let (mut p0, mut p1) = (1.0, 0.0);
        for j in 0..n {
            let p2 = p1;
            p1 = p0;
            p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
        }
        if z * z != 1.0 {
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = mid - half * z;
        x[n - 1 - i] = mid + half * z;
        w[i] = half * wt;
        w[n - 1 - i] = half * wt;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5, 0.0, 2.0);
        // degree 9 is exact for 5 nodes
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(9)).sum();
        assert!((approx - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn many_nodes_exponential() {
        let (x, w) = gauss_legendre(64, 0.0, 3.0);
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * (-x).exp()).sum();
        assert!((approx - (1.0 - (-3f64).exp())).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
