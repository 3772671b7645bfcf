//! Confidence-level bounds on first passage time and value.
//!
//! Starting from the metastable distribution the first passage time is
//! geometric: `Pr(FPT > n) = lambda2^n`. For a confidence level `pr`,
//!
//! ```text
//! LFPT(pr) = log_lambda2(pr)          Pr(FPT > LFPT) = pr
//! UFPT(pr) = log_lambda2(1 - pr) + 1  Pr(FPT <= UFPT) = pr
//! ```
//!
//! Value bounds scale both by the system-wide value rate `MFPV / MFPT`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FptBounds {
    pub lfpt: f64,
    /// `+inf` at `pr = 1`.
    pub ufpt: f64,
    /// Set when `pr = 1`: only the trivial bounds `lfpt = 0`, `ufpt = inf` hold.
    pub boundary: bool,
}

impl FptBounds {
    pub fn is_ordered(&self) -> bool {
        self.lfpt < self.ufpt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpvBounds {
    pub pr: f64,
    pub lfpt: f64,
    pub ufpt: f64,
    pub lfpv: f64,
    pub ufpv: f64,
    pub valid_ordering: bool,
}

fn check_lambda(lambda2: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda2) {
        return Err(Error::Domain(format!("lambda2 = {lambda2} is outside [0, 1)")));
    }
    Ok(())
}

/// Lower and upper FPT bounds at confidence `pr`.
pub fn fpt_bounds(lambda2: f64, pr: f64) -> Result<FptBounds> {
    check_lambda(lambda2)?;
    if !(pr > 0.0 && pr <= 1.0) {
        return Err(Error::Domain(format!("confidence level {pr} is outside (0, 1)")));
    }
    if pr == 1.0 {
        return Ok(FptBounds {
            lfpt: 0.0,
            ufpt: f64::INFINITY,
            boundary: true,
        });
    }
    if lambda2 == 0.0 {
        // absorption is certain on the first step
        return Ok(FptBounds {
            lfpt: 0.0,
            ufpt: 1.0,
            boundary: false,
        });
    }
    let log_lambda = lambda2.ln();
    Ok(FptBounds {
        lfpt: pr.ln() / log_lambda,
        ufpt: (-pr).ln_1p() / log_lambda + 1.0,
        boundary: false,
    })
}

/// Scales FPT bounds by the value rate `mfpv / mfpt`.
pub fn fpv_bounds(bounds: &FptBounds, mfpv: f64, mfpt: f64) -> Result<(f64, f64)> {
    if !(mfpt.is_finite() && mfpt > 0.0) {
        return Err(Error::Domain(format!("MFPT = {mfpt} must be finite and positive")));
    }
    if !mfpv.is_finite() {
        return Err(Error::Domain(format!("MFPV = {mfpv} must be finite")));
    }
    let rate = mfpv / mfpt;
    let scale = |fpt: f64| if fpt == 0.0 { 0.0 } else { fpt * rate };
    Ok((scale(bounds.lfpt), scale(bounds.ufpt)))
}

/// FPT bounds plus their value-scaled counterparts.
pub fn confidence_bounds(lambda2: f64, pr: f64, mfpv: f64, mfpt: f64) -> Result<FpvBounds> {
    let fpt = fpt_bounds(lambda2, pr)?;
    let (lfpv, ufpv) = fpv_bounds(&fpt, mfpv, mfpt)?;
    Ok(FpvBounds {
        pr,
        lfpt: fpt.lfpt,
        ufpt: fpt.ufpt,
        lfpv,
        ufpv,
        valid_ordering: fpt.is_ordered(),
    })
}

/// Smallest confidence level giving `LFPT < UFPT`: `lambda2 / (1 + lambda2)`.
pub fn min_ordered_confidence(lambda2: f64) -> f64 {
    lambda2 / (1.0 + lambda2)
}

/// Probability of surviving more than `M = 1/(1 - lambda2)` steps,
/// `lambda2^(1/(1 - lambda2))`; bounded above by `1/e`.
pub fn survival_at_mean(lambda2: f64) -> f64 {
    if lambda2 <= 0.0 {
        return 0.0;
    }
    if lambda2 >= 1.0 {
        return (-1.0f64).exp();
    }
    (lambda2.ln() / (1.0 - lambda2)).exp()
}
