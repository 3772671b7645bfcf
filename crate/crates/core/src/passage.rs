//! First-passage statistics: system-wide MFPT, its standard deviation, and
//! per-state MFPT/MFPV vectors.
//!
//! Per-state vectors solve `(I - T_hat') m = b` on the transient states,
//! where `b = 1` for step counts and `b_i = sum_j T_s[i][j] T_v[i][j]` for a
//! general value matrix. The halt entry is always zero.

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::chain::{CanonicalChain, StateDistribution, ValueMatrix};
use crate::error::{Error, Result};
use crate::spectral::SpectralSummary;

/// Pivots smaller than this times `|I - T_hat'|_inf` make the solve singular.
pub const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum ValueKind {
    Steps,
    Custom { name: String, unit: String },
}

impl ValueKind {
    pub fn name(&self) -> &str {
        match self {
            ValueKind::Steps => "steps",
            ValueKind::Custom { name, .. } => name,
        }
    }

    pub fn unit(&self) -> &str {
        match self {
            ValueKind::Steps => "steps",
            ValueKind::Custom { unit, .. } => unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassageSummary {
    /// System-wide mean first passage value `M = m' phi` (`+inf` when trapped).
    pub mean: f64,
    /// Per-state values in canonical order; `None` when the solve is singular.
    pub per_state: Option<DVector<f64>>,
    /// FPT standard deviation `M sqrt(lambda2)`; only for step counts.
    pub fpt_std: Option<f64>,
    pub kind: ValueKind,
}

/// `M = 1 / (1 - lambda2)`, or `+inf` when `lambda2 = 1`.
pub fn mfpt_scalar(spec: &SpectralSummary) -> f64 {
    if spec.is_trapped() {
        f64::INFINITY
    } else {
        1.0 / spec.escape_prob
    }
}

/// Standard deviation of the geometric first passage time, `M sqrt(lambda2)`.
pub fn fpt_std(spec: &SpectralSummary) -> Result<f64> {
    if spec.is_trapped() {
        return Err(Error::Undefined("FPT standard deviation requires lambda2 < 1"));
    }
    Ok(mfpt_scalar(spec) * spec.lambda2.sqrt())
}

/// LU factorization of `I - T_hat'` (the transient block of `I - T_s`).
#[derive(Debug, Clone)]
pub struct TransientSolver {
    system: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
}

impl TransientSolver {
    pub fn new(chain: &CanonicalChain) -> Result<Self> {
        let t_hat = chain.t_hat();
        let n = t_hat.nrows();
        let system = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - t_hat[(j, i)]
        });
        let norm = (0..n)
            .map(|i| system.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let lu = system.clone().lu();
        let u = lu.u();
        let min_pivot = u.diagonal().iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        if min_pivot.is_nan() || min_pivot < PIVOT_TOL * norm {
            return Err(Error::Singular);
        }
        Ok(Self { system, lu })
    }

    /// Solves for the transient part and prepends the halt entry 0.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.system.nrows();
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: rhs.len(),
            });
        }
        let mut x = self.lu.solve(rhs).ok_or(Error::Singular)?;
        // one round of iterative refinement
        let r = rhs - &self.system * &x;
        if let Some(dx) = self.lu.solve(&r) {
            x += dx;
        }
        let mut out = DVector::zeros(n + 1);
        out.rows_mut(1, n).copy_from(&x);
        Ok(out)
    }

    /// `|(I - T_hat') m - b|_inf` for a full-length `m` (halt entry ignored).
    pub fn residual(&self, m: &DVector<f64>, rhs: &DVector<f64>) -> f64 {
        let n = self.system.nrows();
        let x = m.rows(1, n);
        (&self.system * x - rhs).amax()
    }
}

/// MFPT vector in canonical order: `m = [0; (I - T_hat')^-1 1]`.
pub fn mfpt_vector(chain: &CanonicalChain) -> Result<DVector<f64>> {
    let solver = TransientSolver::new(chain)?;
    solver.solve(&DVector::from_element(chain.len() - 1, 1.0))
}

/// Expected one-step value `b_i = sum_j T_s[i][j] T_v[i][j]` for each
/// transient state, with `values` in canonical order.
pub fn expected_step_value(chain: &CanonicalChain, values: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = chain.len();
    if values.shape() != (n, n) {
        return Err(Error::Dimension {
            expected: n,
            found: values.nrows(),
        });
    }
    let t = chain.model().transitions();
    Ok(DVector::from_fn(n - 1, |i, _| {
        (0..n).map(|j| t[(i + 1, j)] * values[(i + 1, j)]).sum()
    }))
}

/// MFPV vector in canonical order using the chain's own value matrix.
pub fn mfpv_vector(chain: &CanonicalChain) -> Result<DVector<f64>> {
    let values = chain.model().values().ok_or(Error::MissingValueMatrix)?;
    mfpv_vector_with(chain, &values.values)
}

/// MFPV vector for an explicit value matrix given in canonical order.
pub fn mfpv_vector_with(chain: &CanonicalChain, values: &DMatrix<f64>) -> Result<DVector<f64>> {
    let b = expected_step_value(chain, values)?;
    TransientSolver::new(chain)?.solve(&b)
}

/// `m' phi`.
pub fn systemwide_value(m: &DVector<f64>, phi: &StateDistribution) -> Result<f64> {
    if m.len() != phi.len() {
        return Err(Error::Dimension {
            expected: m.len(),
            found: phi.len(),
        });
    }
    Ok(m.iter().zip(phi.as_slice()).map(|(a, b)| a * b).sum())
}

/// Step-count summary: `M` from the spectrum, `m` from the linear solve.
pub fn mfpt_summary(chain: &CanonicalChain, spec: &SpectralSummary) -> PassageSummary {
    let per_state = if spec.is_trapped() {
        None
    } else {
        mfpt_vector(chain).ok()
    };
    PassageSummary {
        mean: mfpt_scalar(spec),
        per_state,
        fpt_std: fpt_std(spec).ok(),
        kind: ValueKind::Steps,
    }
}

/// Value summary for `values` (canonical order): `M = m' phi`.
pub fn mfpv_summary(
    chain: &CanonicalChain,
    spec: &SpectralSummary,
    values: &ValueMatrix,
) -> Result<PassageSummary> {
    let kind = ValueKind::Custom {
        name: values.name.clone(),
        unit: values.unit.clone(),
    };
    if spec.is_trapped() {
        return Ok(PassageSummary {
            mean: f64::INFINITY,
            per_state: None,
            fpt_std: None,
            kind,
        });
    }
    let m = mfpv_vector_with(chain, &values.values)?;
    let mean = systemwide_value(&m, &spec.phi)?;
    Ok(PassageSummary {
        mean,
        per_state: Some(m),
        fpt_std: None,
        kind,
    })
}
