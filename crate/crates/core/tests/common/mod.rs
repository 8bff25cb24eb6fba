#![allow(dead_code)]

use bimor_core::{BilinearSystem, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Stable drift: negative definite symmetric part plus a skew part, so the
/// spectral abscissa is at most `-shift`.
pub fn stable_drift(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Mat {
    let g = random_mat(rng, n, n);
    let s = random_mat(rng, n, n);
    -(&g * g.transpose()) / n as f64 - Mat::identity(n, n) * shift + (&s - s.transpose()) * 0.5
}

/// Random stable bilinear system with `‖N_k‖_2 ≤ n_scale`.
pub fn random_system(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    p: usize,
    n_scale: f64,
) -> BilinearSystem {
    let a = stable_drift(rng, n, 1.0);
    let nk = (0..m)
        .map(|_| {
            let x = random_mat(rng, n, n);
            let norm = x.norm();
            x * (n_scale / norm)
        })
        .collect();
    BilinearSystem::new(a, nk, random_mat(rng, n, m), random_mat(rng, p, n)).unwrap()
}

pub fn rel_err(x: f64, want: f64) -> f64 {
    (x - want).abs() / want.abs()
}

/// Relative error in the Frobenius norm.
pub fn rel_mat(x: &Mat, want: &Mat) -> f64 {
    let d = want.norm();
    if d == 0.0 {
        x.norm()
    } else {
        (x - want).norm() / d
    }
}
