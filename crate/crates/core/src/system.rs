//! Bilinear state-space systems, projection, error systems and simulation.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, check_finite, hstack, orth, vstack, Mat};

/// `ẋ = A x + Σ_k N_k x u_k + B u`, `y = C x`.
///
/// Used both for full models and for reduced-order models.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearSystem {
    pub a: Mat,
    pub n: Vec<Mat>,
    pub b: Mat,
    pub c: Mat,
}

impl BilinearSystem {
    pub fn new(a: Mat, n: Vec<Mat>, b: Mat, c: Mat) -> Result<Self> {
        let sys = Self { a, n, b, c };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let order = self.a.nrows();
        if self.a.ncols() != order {
            return Err(Error::dim(
                "system",
                format!("A is {}x{}", self.a.nrows(), self.a.ncols()),
            ));
        }
        if self.b.nrows() != order {
            return Err(Error::dim(
                "system",
                format!("B has {} rows, A has order {order}", self.b.nrows()),
            ));
        }
        if self.c.ncols() != order {
            return Err(Error::dim(
                "system",
                format!("C has {} columns, A has order {order}", self.c.ncols()),
            ));
        }
        if self.n.len() != self.b.ncols() {
            return Err(Error::dim(
                "system",
                format!(
                    "{} bilinear matrices for {} inputs",
                    self.n.len(),
                    self.b.ncols()
                ),
            ));
        }
        for (k, nk) in self.n.iter().enumerate() {
            if nk.shape() != (order, order) {
                return Err(Error::dim(
                    "system",
                    format!("N_{} is {}x{}, expected {order}x{order}", k + 1, nk.nrows(), nk.ncols()),
                ));
            }
            check_finite(nk, "N")?;
        }
        check_finite(&self.a, "A")?;
        check_finite(&self.b, "B")?;
        check_finite(&self.c, "C")?;
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// True when every `N_k` is zero.
    pub fn is_linear(&self) -> bool {
        self.n.iter().all(|nk| nk.iter().all(|&x| x == 0.0))
    }

    pub fn same_io(&self, other: &BilinearSystem) -> Result<()> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::dim(
                "system pair",
                format!(
                    "{} inputs/{} outputs vs {} inputs/{} outputs",
                    self.inputs(),
                    self.outputs(),
                    other.inputs(),
                    other.outputs()
                ),
            ));
        }
        Ok(())
    }
}

/// Time window `[lo, hi]` in seconds, `hi` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBand {
    pub lo: f64,
    pub hi: f64,
}

impl TimeBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let band = Self { lo, hi };
        band.validate()?;
        Ok(band)
    }

    /// `[0, t]`.
    pub fn up_to(t: f64) -> Self {
        Self { lo: 0.0, hi: t }
    }

    /// `[0, ∞)`.
    pub fn infinite() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lo.is_finite() && self.lo >= 0.0 && !self.hi.is_nan() && self.hi > self.lo;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidBand {
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    pub fn is_everything(&self) -> bool {
        self.lo == 0.0 && self.hi == f64::INFINITY
    }
}

/// Sampled simulation output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<DVector<f64>>,
    pub states: Option<Vec<DVector<f64>>>,
}

/// `(W^T A V, {W^T N_k V}, W^T B, C V)`. No bi-orthonormalization is done
/// here; callers decide.
pub fn project(sys: &BilinearSystem, v: &Mat, w: &Mat) -> Result<BilinearSystem> {
    let n = sys.order();
    if v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() {
        return Err(Error::dim(
            "project",
            format!(
                "bases {}x{} and {}x{} for order {n}",
                v.nrows(),
                v.ncols(),
                w.nrows(),
                w.ncols()
            ),
        ));
    }
    let wt = w.transpose();
    Ok(BilinearSystem {
        a: &wt * &sys.a * v,
        n: sys.n.iter().map(|nk| &wt * nk * v).collect(),
        b: &wt * &sys.b,
        c: &sys.c * v,
    })
}

/// Orthonormalize both bases and rescale `W` so that `W^T V = I`.
pub fn biorthonormalize(v_raw: &Mat, w_raw: &Mat) -> Result<(Mat, Mat)> {
    if v_raw.shape() != w_raw.shape() {
        return Err(Error::dim(
            "biorthonormalize",
            format!("{:?} vs {:?}", v_raw.shape(), w_raw.shape()),
        ));
    }
    let r = v_raw.ncols();
    let v = orth(v_raw, r)?;
    let w = orth(w_raw, r)?;
    let vtw = v.transpose() * &w;
    // both bases are orthonormal, so the singular values of V^T W are the
    // cosines of the principal angles between the subspaces
    let min_cos = vtw.clone().svd(false, false).singular_values.min();
    if !(min_cos > 1e-10) {
        return Err(Error::ObliqueProjection);
    }
    let inv = vtw.try_inverse().ok_or(Error::ObliqueProjection)?;
    Ok((v, w * inv))
}

/// `A_e = diag(A, Ã)`, `N_e = diag(N_k, Ñ_k)`, `B_e = [B; B̃]`, `C_e = [C, −C̃]`.
pub fn error_system(full: &BilinearSystem, rom: &BilinearSystem) -> Result<BilinearSystem> {
    full.same_io(rom)?;
    Ok(BilinearSystem {
        a: block_diag(&full.a, &rom.a),
        n: full
            .n
            .iter()
            .zip(&rom.n)
            .map(|(a, b)| block_diag(a, b))
            .collect(),
        b: vstack(&full.b, &rom.b),
        c: hstack(&full.c, &(-&rom.c)),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Fixed step; `None` means `(hi − lo) / 10⁴`.
    pub step: Option<f64>,
    pub keep_states: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            step: None,
            keep_states: false,
        }
    }
}

const BLOWUP: f64 = 1e150;

/// Classical fixed-step RK4 on `ẋ = (A + Σ u_k N_k) x + B u` over a finite
/// window. `input` writes `u(t)` into its second argument.
pub fn simulate(
    sys: &BilinearSystem,
    input: &dyn Fn(f64, &mut DVector<f64>),
    x0: &DVector<f64>,
    span: &TimeBand,
    opts: SimOptions,
) -> Result<Trajectory> {
    span.validate()?;
    if !span.hi.is_finite() {
        return Err(Error::InvalidArgument(
            "simulation window must be finite".into(),
        ));
    }
    let n = sys.order();
    if x0.len() != n {
        return Err(Error::dim(
            "simulate",
            format!("initial state has length {}, order is {n}", x0.len()),
        ));
    }
    let len = span.hi - span.lo;
    let step = opts.step.unwrap_or(len / 1e4);
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step {step} must be positive")));
    }
    let steps = (len / step - 1e-9).ceil().max(1.0) as usize;
    let h = len / steps as f64;

    let m = sys.inputs();
    let mut u = DVector::zeros(m);
    let rhs = |t: f64, x: &DVector<f64>, u: &mut DVector<f64>| -> DVector<f64> {
        input(t, u);
        let mut dx = &sys.a * x + &sys.b * &*u;
        for (k, nk) in sys.n.iter().enumerate() {
            if u[k] != 0.0 {
                dx += nk * x * u[k];
            }
        }
        dx
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut states = opts.keep_states.then(|| Vec::with_capacity(steps + 1));
    let mut x = x0.clone();
    for i in 0..=steps {
        let t = span.lo + h * i as f64;
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP) {
            return Err(Error::Divergence { time: t });
        }
        times.push(t);
        outputs.push(&sys.c * &x);
        if let Some(s) = states.as_mut() {
            s.push(x.clone());
        }
        if i == steps {
            break;
        }
        let k1 = rhs(t, &x, &mut u);
        let k2 = rhs(t + 0.5 * h, &(&x + &k1 * (0.5 * h)), &mut u);
        let k3 = rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)), &mut u);
        let k4 = rhs(t + h, &(&x + &k3 * h), &mut u);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(Trajectory {
        times,
        outputs,
        states,
    })
}
