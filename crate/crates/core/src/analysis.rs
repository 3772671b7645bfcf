//! One-call analysis of a chain, with per-state results in the model's
//! original state order.

use crate::chain::{CanonicalChain, ChainModel};
use crate::confidence::{confidence_bounds, FpvBounds};
use crate::error::Result;
use crate::passage::{self, PassageSummary};
use crate::spectral::{self, SpectralOptions, SpectralSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainAnalysis {
    pub canonical: CanonicalChain,
    pub spectral: SpectralSummary,
    pub steps: PassageSummary,
    /// Present when the model carries a value matrix.
    pub value: Option<PassageSummary>,
}

impl ChainAnalysis {
    pub fn lambda2(&self) -> f64 {
        self.spectral.lambda2
    }

    /// System-wide MFPT.
    pub fn mfpt(&self) -> f64 {
        self.steps.mean
    }

    pub fn is_trapped(&self) -> bool {
        self.spectral.is_trapped()
    }

    /// Metastable distribution in original state order.
    pub fn phi(&self) -> Vec<f64> {
        self.canonical.to_original(self.spectral.phi.as_slice())
    }

    /// MFPT vector in original state order.
    pub fn mfpt_vector(&self) -> Option<Vec<f64>> {
        self.steps
            .per_state
            .as_ref()
            .map(|m| self.canonical.to_original(m.as_slice()))
    }

    /// MFPV vector in original state order.
    pub fn mfpv_vector(&self) -> Option<Vec<f64>> {
        self.value
            .as_ref()
            .and_then(|v| v.per_state.as_ref())
            .map(|m| self.canonical.to_original(m.as_slice()))
    }

    /// Confidence bounds at `pr`, scaled by the value rate when a value
    /// matrix is present (otherwise FPV bounds equal FPT bounds).
    pub fn bounds(&self, pr: f64) -> Result<FpvBounds> {
        let mfpt = self.mfpt();
        let mfpv = self.value.as_ref().map_or(mfpt, |v| v.mean);
        confidence_bounds(self.lambda2(), pr, mfpv, mfpt)
    }
}

pub fn analyze(model: &ChainModel) -> Result<ChainAnalysis> {
    analyze_with(model, &SpectralOptions::default())
}

pub fn analyze_with(model: &ChainModel, opts: &SpectralOptions) -> Result<ChainAnalysis> {
    let canonical = model.canonicalize();
    let spectral = spectral::analyze_with(&canonical, opts)?;
    let steps = passage::mfpt_summary(&canonical, &spectral);
    let value = match canonical.model().values() {
        Some(v) => Some(passage::mfpv_summary(&canonical, &spectral, v)?),
        None => None,
    };
    Ok(ChainAnalysis {
        canonical,
        spectral,
        steps,
        value,
    })
}
