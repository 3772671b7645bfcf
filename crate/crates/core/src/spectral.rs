//! Perron quantities of the transient block `T_hat`.
//!
//! `lambda2` is the spectral radius of `T_hat` (the per-step survival
//! probability in the metastable regime), `z` its non-negative eigenvector,
//! and `phi = [0, z/|z|_1]` the metastable distribution. `|lambda3|` is the
//! next eigenvalue modulus and drives the memory constant
//! `(1 - lambda2) / (1 - |lambda3|)`.
//!
//! Small blocks go through a dense Schur decomposition. Large blocks use a
//! shifted power iteration on `(T_hat + I) / 2`, which has the same Perron
//! vector but no competing eigenvalue of equal modulus, and then a deflated
//! subspace iteration for `|lambda3|`.

use nalgebra::{DMatrix, DVector, Schur};

use crate::chain::{CanonicalChain, StateDistribution};
use crate::error::{Error, Result};

/// Residual tolerance on `|T_hat z - lambda z|_inf`.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Eigenvector magnitudes below this are clamped to exactly zero.
pub const CLAMP_TOL: f64 = 1e-12;
/// `1 - lambda2` below this is reported as `lambda2 = 1`.
pub const UNIT_LAMBDA_TOL: f64 = 1e-13;

const DEFLATION_BLOCK: usize = 8;

const SCHUR_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Dense,
    PowerIteration,
}

impl EigenMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EigenMethod::Dense => "dense",
            EigenMethod::PowerIteration => "power-iteration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Transient blocks up to this size use the dense solver.
    pub dense_limit: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Retry with the dense solver when power iteration fails.
    pub dense_fallback: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            dense_limit: 64,
            tolerance: RESIDUAL_TOL,
            max_iterations: 1_000_000,
            dense_fallback: true,
        }
    }
}

impl SpectralOptions {
    /// Options that force the iterative path regardless of size.
    pub fn iterative() -> Self {
        Self {
            dense_limit: 0,
            dense_fallback: false,
            ..Self::default()
        }
    }
}

/// Spectral radius and Perron vector of a non-negative matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Perron {
    pub lambda: f64,
    /// Non-negative, `|z|_1 = 1`.
    pub vector: DVector<f64>,
    pub method: EigenMethod,
    /// Eigenvalue moduli sorted in decreasing order (dense path only).
    pub moduli: Option<Vec<f64>>,
}

/// Spectral radius and Perron vector of `t_hat`, with default options.
pub fn perron(t_hat: &DMatrix<f64>) -> Result<Perron> {
    perron_with(t_hat, &SpectralOptions::default())
}

pub fn perron_with(t_hat: &DMatrix<f64>, opts: &SpectralOptions) -> Result<Perron> {
    check_square(t_hat)?;
    if t_hat.nrows() <= opts.dense_limit {
        return dense_perron(t_hat, opts);
    }
    match power_perron(t_hat, opts) {
        Ok(p) => Ok(p),
        Err(Error::Convergence { .. }) if opts.dense_fallback => dense_perron(t_hat, opts),
        Err(e) => Err(e),
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Shape(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Eigenvalue moduli of `m`, sorted in decreasing order.
pub fn eigenvalue_moduli(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_square(m)?;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(
        Error::Convergence {
            iterations: SCHUR_MAX_ITER,
            residual: f64::NAN,
        },
    )?;
    let mut moduli: Vec<f64> = schur.complex_eigenvalues().iter().map(|c| c.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli)
}

fn dense_perron(t_hat: &DMatrix<f64>, opts: &SpectralOptions) -> Result<Perron> {
    let n = t_hat.nrows();
    let moduli = eigenvalue_moduli(t_hat)?;
    let rho = moduli[0];

    // Inverse iteration just above the spectral radius. For sigma > rho the
    // resolvent (sigma I - T_hat)^-1 = sum_k T_hat^k / sigma^(k+1) is a
    // non-negative matrix, so iterates stay non-negative.
    let sigma = rho + 1e-13 * rho.max(1.0);
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            sigma - t_hat[(i, j)]
        } else {
            -t_hat[(i, j)]
        }
    });
    let lu = shifted.lu();
    let mut z = DVector::from_element(n, 1.0 / n as f64);
    let mut iterations = 0;
    let mut last_residual = f64::INFINITY;
    while iterations < 100 {
        iterations += 1;
        let mut y = lu.solve(&z).ok_or(Error::Convergence {
            iterations,
            residual: f64::NAN,
        })?;
        y.iter_mut().for_each(|x| *x = x.abs());
        let norm = y.sum();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        y /= norm;
        let delta = (&y - &z).amax();
        z = y;
        let (_, residual) = rayleigh_residual(t_hat, &z);
        last_residual = residual;
        if delta < 1e-15 || (residual <= opts.tolerance && delta < 1e-13) {
            break;
        }
    }
    if last_residual > opts.tolerance {
        // Near-defective blocks can stall inverse iteration; the shifted power
        // iteration is slower but needs no factorization.
        let mut p = power_perron(t_hat, opts)?;
        p.moduli = Some(moduli);
        return Ok(p);
    }
    let z = clamp_and_normalize(z);
    let (lambda, _) = rayleigh_residual(t_hat, &z);
    Ok(Perron {
        lambda: lambda.max(0.0),
        vector: z,
        method: EigenMethod::Dense,
        moduli: Some(moduli),
    })
}

/// `lambda = 1' T z / 1' z` and the residual `|T z - lambda z|_inf`.
fn rayleigh_residual(t_hat: &DMatrix<f64>, z: &DVector<f64>) -> (f64, f64) {
    let tz = t_hat * z;
    let lambda = tz.sum() / z.sum();
    let residual = (&tz - z * lambda).amax();
    (lambda, residual)
}

fn clamp_and_normalize(mut z: DVector<f64>) -> DVector<f64> {
    z.iter_mut().for_each(|x| {
        if x.abs() < CLAMP_TOL {
            *x = 0.0;
        } else {
            *x = x.abs();
        }
    });
    let s = z.sum();
    z / s
}

fn power_perron(t_hat: &DMatrix<f64>, opts: &SpectralOptions) -> Result<Perron> {
    let (lambda, z) = shifted_power(t_hat, opts)?;
    Ok(Perron {
        lambda,
        vector: clamp_and_normalize(z),
        method: EigenMethod::PowerIteration,
        moduli: None,
    })
}

/// Power iteration on `(T + I)/2` from the uniform vector.
fn shifted_power(t: &DMatrix<f64>, opts: &SpectralOptions) -> Result<(f64, DVector<f64>)> {
    let n = t.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let tx = t * &x;
        let lambda = tx.sum();
        residual = (&tx - &x * lambda).amax();
        if residual <= opts.tolerance {
            return Ok((lambda.max(0.0), x));
        }
        x = (tx + &x) * 0.5;
        let s = x.sum();
        x /= s;
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        residual,
    })
}

/// `|lambda3|` by subspace iteration on the Wielandt-deflated matrix
/// `T - lambda z w' / (w' z)`, where `w` is the left Perron vector. The
/// largest Ritz value modulus is the estimate; a block rather than a single
/// vector keeps complex pairs and near-ties from stalling convergence.
fn deflated_second_modulus(
    t_hat: &DMatrix<f64>,
    perron: &Perron,
    opts: &SpectralOptions,
) -> Result<f64> {
    let n = t_hat.nrows();
    if n == 1 {
        return Ok(0.0);
    }
    let (_, w) = shifted_power(&t_hat.transpose(), opts)?;
    let z = &perron.vector;
    let wz = w.dot(z);
    if wz.abs() < 1e-14 {
        return Err(Error::Convergence {
            iterations: 0,
            residual: wz,
        });
    }
    let scale = perron.lambda / wz;
    let apply = |q: &DMatrix<f64>| -> DMatrix<f64> {
        let wq = w.transpose() * q * scale;
        t_hat * q - z * wq
    };

    let p = n.min(DEFLATION_BLOCK);
    // Deterministic start with components along most eigendirections.
    let start = DMatrix::from_fn(n, p, |i, j| ((i * p + j + 1) as f64 * 0.7548776662).sin());
    let mut q = start.qr().q();
    let mut previous = f64::NAN;
    let mut stable = 0;
    for iteration in 1..=opts.max_iterations {
        let y = apply(&q);
        let h = q.transpose() * &y;
        let estimate = eigenvalue_moduli(&h)?[0];
        if estimate < 1e-10 && y.amax() < 1e-10 {
            return Ok(0.0);
        }
        if (estimate - previous).abs() <= 1e-12 * estimate.max(1e-3) {
            stable += 1;
            if stable >= 3 {
                return Ok(estimate.min(perron.lambda));
            }
        } else {
            stable = 0;
        }
        previous = estimate;
        q = y.qr().q();
        if iteration == opts.max_iterations {
            return Err(Error::Convergence {
                iterations: iteration,
                residual: f64::NAN,
            });
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        residual: f64::NAN,
    })
}

/// Summary of the spectral quantities of a canonical chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub lambda2: f64,
    pub lambda3_modulus: f64,
    /// Metastable distribution in canonical order (halt first).
    pub phi: StateDistribution,
    /// `1 - lambda2`, computed as the halt entry of `T_s' phi`.
    pub escape_prob: f64,
    /// `None` when undefined (`lambda2 = 1`); `+inf` when `|lambda3| = 1`.
    pub memory_constant: Option<f64>,
    pub eigen_method: EigenMethod,
    /// Sorted eigenvalue moduli of `T_hat` (dense path only).
    pub moduli: Option<Vec<f64>>,
}

impl SpectralSummary {
    /// True when no probability mass escapes from `phi`.
    pub fn is_trapped(&self) -> bool {
        self.escape_prob == 0.0
    }
}

pub fn analyze(chain: &CanonicalChain) -> Result<SpectralSummary> {
    analyze_with(chain, &SpectralOptions::default())
}

pub fn analyze_with(chain: &CanonicalChain, opts: &SpectralOptions) -> Result<SpectralSummary> {
    let t_hat = chain.t_hat();
    let perron = perron_with(t_hat, opts)?;
    let lambda3 = match &perron.moduli {
        Some(m) => m.get(1).copied().unwrap_or(0.0),
        None => match deflated_second_modulus(t_hat, &perron, opts) {
            Ok(v) => v,
            Err(Error::Convergence { .. }) if opts.dense_fallback => {
                eigenvalue_moduli(t_hat)?.get(1).copied().unwrap_or(0.0)
            }
            Err(e) => return Err(e),
        },
    };

    let phi = phi_from_perron(&perron.vector);
    // Halt entry of T_s' phi. Summing the escape row keeps full relative
    // precision of 1 - lambda2 even when lambda2 is within 1e-12 of one.
    let mut escape_prob: f64 = chain.escape_row().dot(&perron.vector);
    let mut lambda2 = perron.lambda.min(1.0);
    if escape_prob < UNIT_LAMBDA_TOL {
        escape_prob = 0.0;
        lambda2 = 1.0;
    }
    let lambda3_modulus = lambda3.min(lambda2);
    let memory_constant = memory_constant_from(lambda2, escape_prob, lambda3_modulus).ok();

    Ok(SpectralSummary {
        lambda2,
        lambda3_modulus,
        phi,
        escape_prob,
        memory_constant,
        eigen_method: perron.method,
        moduli: perron.moduli,
    })
}

fn phi_from_perron(z: &DVector<f64>) -> StateDistribution {
    let mut phi = Vec::with_capacity(z.len() + 1);
    phi.push(0.0);
    phi.extend(z.iter().copied());
    StateDistribution::new(phi).expect("Perron vector is normalized and non-negative")
}

fn memory_constant_from(lambda2: f64, escape_prob: f64, lambda3_modulus: f64) -> Result<f64> {
    if lambda2 >= 1.0 || escape_prob == 0.0 {
        return Err(Error::Undefined("memory constant requires lambda2 < 1"));
    }
    if lambda3_modulus >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(escape_prob / (1.0 - lambda3_modulus))
}

/// Metastable distribution `phi` in canonical order (halt entry 0).
pub fn metastable_distribution(chain: &CanonicalChain) -> Result<StateDistribution> {
    Ok(phi_from_perron(&perron(chain.t_hat())?.vector))
}

/// Second-largest eigenvalue modulus of `T_hat` (`0` when it is 1x1).
pub fn lambda3_modulus(chain: &CanonicalChain) -> Result<f64> {
    Ok(analyze(chain)?.lambda3_modulus)
}

/// `(1 - lambda2) / (1 - |lambda3|)`.
pub fn memory_constant(chain: &CanonicalChain) -> Result<f64> {
    let s = analyze(chain)?;
    memory_constant_from(s.lambda2, s.escape_prob, s.lambda3_modulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainModel;

    fn coin() -> CanonicalChain {
        ChainModel::from_rows(
            &["HH", "T", "TH"],
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.99, 0.01],
                vec![0.01, 0.99, 0.0],
            ],
            0,
        )
        .unwrap()
        .canonicalize()
    }

    #[test]
    fn one_by_one_block() {
        let p = perron(&DMatrix::from_element(1, 1, 0.5)).unwrap();
        assert!((p.lambda - 0.5).abs() < 1e-15);
        assert_eq!(p.vector.as_slice(), &[1.0]);
    }

    #[test]
    fn coin_toss_perron() {
        let c = coin();
        let p = perron(c.t_hat()).unwrap();
        // lambda^2 - 0.99 lambda - 0.0099 = 0
        let exact = (0.99 + (0.99f64 * 0.99 + 4.0 * 0.0099).sqrt()) / 2.0;
        assert!((p.lambda - exact).abs() < 1e-14);
        assert!((p.vector[0] - 0.9901).abs() < 1e-4);
        assert!((p.vector[1] - 0.0099).abs() < 1e-4);
    }

    #[test]
    fn two_state_chain_has_zero_lambda3() {
        let c = ChainModel::from_rows(&["h", "a"], &[vec![1.0, 0.0], vec![0.3, 0.7]], 0)
            .unwrap()
            .canonicalize();
        let s = analyze(&c).unwrap();
        assert_eq!(s.lambda3_modulus, 0.0);
        assert!((s.memory_constant.unwrap() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn trapped_chain_reports_unit_lambda() {
        let c = ChainModel::from_rows(&["h", "a"], &[vec![1.0, 0.0], vec![0.0, 1.0]], 0)
            .unwrap()
            .canonicalize();
        let s = analyze(&c).unwrap();
        assert_eq!(s.lambda2, 1.0);
        assert!(s.is_trapped());
        assert_eq!(s.memory_constant, None);
        assert!(matches!(memory_constant(&c), Err(Error::Undefined(_))));
    }

    #[test]
    fn nilpotent_block_gives_zero_radius() {
        // a -> b -> halt deterministically
        let c = ChainModel::from_rows(
            &["h", "a", "b"],
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
            ],
            0,
        )
        .unwrap()
        .canonicalize();
        let s = analyze(&c).unwrap();
        assert!(s.lambda2.abs() < 1e-9);
        assert!((s.escape_prob - 1.0).abs() < 1e-9);
        assert_eq!(s.phi.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn periodic_block_converges_with_shift() {
        // a <-> b cycle with leak: T_hat has eigenvalues +-0.9
        let t = DMatrix::from_row_slice(2, 2, &[0.0, 0.9, 0.9, 0.0]);
        let p = perron_with(&t, &SpectralOptions::iterative()).unwrap();
        assert!((p.lambda - 0.9).abs() < 1e-11);
        assert!((p.vector[0] - 0.5).abs() < 1e-11);
        assert_eq!(p.method, EigenMethod::PowerIteration);
    }

    #[test]
    fn iteration_budget_is_enforced_without_fallback() {
        let t = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.3, 0.2]);
        let opts = SpectralOptions {
            max_iterations: 2,
            ..SpectralOptions::iterative()
        };
        assert!(matches!(perron_with(&t, &opts), Err(Error::Convergence { .. })));
        let fallback = SpectralOptions {
            dense_fallback: true,
            ..opts
        };
        assert_eq!(perron_with(&t, &fallback).unwrap().method, EigenMethod::Dense);
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(matches!(perron(&DMatrix::zeros(2, 3)), Err(Error::Shape(_))));
    }
}
