//! Dense matrix functions: exponential, principal logarithm, their Fréchet
//! derivatives, and the frequency indicator `F[A]`.
//!
//! Complex arithmetic stays inside this module; exported results are real
//! except for the explicitly complex logarithm entry points.

mod expm;
mod freq;
mod logm;

pub use expm::{expm, expm_frechet};
pub use freq::{freq_indicator, freq_indicator_bounded, freq_log_frechet_weight};
pub use logm::{logm, logm_complex, logm_frechet, logm_frechet_complex};

use crate::error::{Error, Result};

/// Frequency window `[lo, hi]` in rad/s, `hi` may be `f64::INFINITY`.
///
/// The window is understood symmetrically: the indicator integrates over
/// `[−hi, −lo] ∪ [lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqBand {
    pub lo: f64,
    pub hi: f64,
}

impl FreqBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let band = Self { lo, hi };
        band.validate()?;
        Ok(band)
    }

    /// `[0, w]`.
    pub fn up_to(w: f64) -> Self {
        Self { lo: 0.0, hi: w }
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
