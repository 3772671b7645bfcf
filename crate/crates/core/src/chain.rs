//! Absorbing Markov chain representation.
//!
//! A [`ChainModel`] is a validated row-stochastic matrix with one absorbing
//! halt state. [`CanonicalChain`] reorders it so the halt state comes first
//! and exposes the blocks of the transposed matrix
//!
//! ```text
//! T_s' = | 1   t1    |
//!        | 0   T_hat |
//! ```
//!
//! where `t1[j]` is the one-step escape probability of transient state `j`
//! and `T_hat` is the transpose of the transient-to-transient block.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-sum tolerance used for every stochasticity check.
pub const ROW_TOL: f64 = 1e-9;

/// Per-transition value (reward) matrix with a reporting label.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueMatrix {
    pub name: String,
    pub unit: String,
    pub values: DMatrix<f64>,
}

impl ValueMatrix {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, values: DMatrix<f64>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }

    /// Value matrix with every entry equal to one (one unit per step).
    pub fn steps(n: usize) -> Self {
        Self::new("steps", "steps", DMatrix::from_element(n, n, 1.0))
    }
}

/// A validated absorbing Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    state_names: Vec<String>,
    transitions: DMatrix<f64>,
    halt: usize,
    values: Option<ValueMatrix>,
}

impl ChainModel {
    /// Validates and builds a chain. Rows are never renormalized.
    pub fn new(
        state_names: Vec<String>,
        transitions: DMatrix<f64>,
        halt: usize,
        values: Option<ValueMatrix>,
    ) -> Result<Self> {
        let n = transitions.nrows();
        if transitions.ncols() != n {
            return Err(Error::Shape(format!(
                "transition matrix is {}x{}, expected square",
                n,
                transitions.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::Shape(format!("chain needs at least 2 states, got {n}")));
        }
        if state_names.len() != n {
            return Err(Error::Shape(format!(
                "{} state names for a {n}-state matrix",
                state_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &state_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Shape(format!("duplicate state name {name:?}")));
            }
        }
        if halt >= n {
            return Err(Error::Shape(format!("halt index {halt} out of range for {n} states")));
        }

        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let p = transitions[(i, j)];
                if !p.is_finite() {
                    return Err(Error::Shape(format!("entry ({i}, {j}) is not finite")));
                }
                if p < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j, value: p });
                }
                if p > 1.0 + ROW_TOL {
                    return Err(Error::EntryOutOfRange { row: i, col: j, value: p });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::RowSum {
                    row: i,
                    state: state_names[i].clone(),
                    sum,
                });
            }
        }

        let self_prob = transitions[(halt, halt)];
        if (self_prob - 1.0).abs() > ROW_TOL {
            return Err(Error::HaltNotAbsorbing {
                state: state_names[halt].clone(),
                self_prob,
            });
        }

        if let Some(v) = &values {
            if v.values.shape() != (n, n) {
                return Err(Error::Shape(format!(
                    "value matrix is {}x{}, expected {n}x{n}",
                    v.values.nrows(),
                    v.values.ncols()
                )));
            }
            if let Some(idx) = v.values.iter().position(|x| !x.is_finite()) {
                // column-major storage
                return Err(Error::Shape(format!(
                    "value entry ({}, {}) is not finite",
                    idx % n,
                    idx / n
                )));
            }
        }

        Ok(Self {
            state_names,
            transitions,
            halt,
            values,
        })
    }

    /// Builds a chain from row-major nested slices; convenient in tests and generators.
    pub fn from_rows(names: &[&str], rows: &[Vec<f64>], halt: usize) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Shape(format!("row of length {} in a {n}-row matrix", r.len())));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(names.iter().map(|s| s.to_string()).collect(), m, halt, None)
    }

    pub fn with_values(self, values: ValueMatrix) -> Result<Self> {
        Self::new(self.state_names, self.transitions, self.halt, Some(values))
    }

    pub fn without_values(mut self) -> Self {
        self.values = None;
        self
    }

    pub fn len(&self) -> usize {
        self.state_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state_names.is_empty()
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|s| s == name)
    }

    pub fn transitions(&self) -> &DMatrix<f64> {
        &self.transitions
    }

    pub fn halt(&self) -> usize {
        self.halt
    }

    pub fn halt_name(&self) -> &str {
        &self.state_names[self.halt]
    }

    pub fn values(&self) -> Option<&ValueMatrix> {
        self.values.as_ref()
    }

    /// Indices of the non-halt states in their original order.
    pub fn transient_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| i != self.halt)
    }

    /// Advances a distribution one step: `p[n+1] = T_s' p[n]`.
    pub fn step_distribution(&self, p: &StateDistribution) -> Result<StateDistribution> {
        let n = self.len();
        if p.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: p.len(),
            });
        }
        let next = self.transitions.tr_mul(&DVector::from_column_slice(p.as_slice()));
        let clamped = next
            .iter()
            .map(|&x| if (-ROW_TOL..0.0).contains(&x) { 0.0 } else { x })
            .collect();
        StateDistribution::with_tolerance(clamped, 2.0 * ROW_TOL)
    }

    /// Reorders states so the halt state sits at index 0.
    pub fn canonicalize(&self) -> CanonicalChain {
        CanonicalChain::new(self)
    }
}

/// A probability vector over the states of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution(Vec<f64>);

impl StateDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(p, ROW_TOL)
    }

    fn with_tolerance(p: Vec<f64>, tol: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Shape("empty distribution".into()));
        }
        for (i, &x) in p.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::Shape(format!("distribution entry {i} is not finite")));
            }
            if x < 0.0 {
                return Err(Error::NegativeEntry {
                    row: 0,
                    col: i,
                    value: x,
                });
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::RowSum {
                row: 0,
                state: "distribution".into(),
                sum,
            });
        }
        Ok(Self(p))
    }

    /// Unit mass on one state.
    pub fn point(n: usize, state: usize) -> Result<Self> {
        if state >= n {
            return Err(Error::Dimension {
                expected: n,
                found: state + 1,
            });
        }
        let mut p = vec![0.0; n];
        p[state] = 1.0;
        Ok(Self(p))
    }

    /// Uniform over every state except `halt`.
    pub fn uniform_transient(n: usize, halt: usize) -> Result<Self> {
        if n < 2 || halt >= n {
            return Err(Error::Shape(format!("no transient states in a {n}-state chain")));
        }
        let w = 1.0 / (n - 1) as f64;
        Ok(Self((0..n).map(|i| if i == halt { 0.0 } else { w }).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for StateDistribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Chain reordered so the halt state is at index 0, with the blocks of `T_s'`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalChain {
    model: ChainModel,
    escape: DVector<f64>,
    t_hat: DMatrix<f64>,
    /// `permutation[original] = canonical`
    permutation: Vec<usize>,
    /// `order[canonical] = original`
    order: Vec<usize>,
}

impl CanonicalChain {
    fn new(model: &ChainModel) -> Self {
        let n = model.len();
        let halt = model.halt();
        let order: Vec<usize> = std::iter::once(halt).chain(model.transient_states()).collect();
        let mut permutation = vec![0; n];
        for (canon, &orig) in order.iter().enumerate() {
            permutation[orig] = canon;
        }

        let t = model.transitions();
        let reordered = DMatrix::from_fn(n, n, |i, j| t[(order[i], order[j])]);
        let values = model.values().map(|v| ValueMatrix {
            name: v.name.clone(),
            unit: v.unit.clone(),
            values: DMatrix::from_fn(n, n, |i, j| v.values[(order[i], order[j])]),
        });
        let names = order.iter().map(|&i| model.state_names()[i].clone()).collect();

        // T_hat[i][j] = T_s'[i+1][j+1] = T_s[j+1][i+1] in canonical order.
        let t_hat = DMatrix::from_fn(n - 1, n - 1, |i, j| reordered[(j + 1, i + 1)]);
        let escape = DVector::from_fn(n - 1, |j, _| reordered[(j + 1, 0)]);

        let model = ChainModel {
            state_names: names,
            transitions: reordered,
            halt: 0,
            values,
        };
        Self {
            model,
            escape,
            t_hat,
            permutation,
            order,
        }
    }

    /// The reordered model (halt at index 0).
    pub fn model(&self) -> &ChainModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.is_empty()
    }

    /// Transient block of `T_s'`, size `(l-1) x (l-1)`.
    pub fn t_hat(&self) -> &DMatrix<f64> {
        &self.t_hat
    }

    /// First row of `T_s'` without its leading 1: one-step escape probabilities.
    pub fn escape_row(&self) -> &DVector<f64> {
        &self.escape
    }

    /// Maps original state indices to canonical ones.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Maps canonical state indices back to original ones.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Rearranges a canonical-order vector into the original state ordering.
    pub fn to_original(&self, canonical: &[f64]) -> Vec<f64> {
        self.permutation.iter().map(|&c| canonical[c]).collect()
    }

    /// Rearranges an original-order vector into canonical ordering.
    pub fn to_canonical(&self, original: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&o| original[o]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> ChainModel {
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
    }

    #[test]
    fn coin_toss_matrix_is_valid() {
        let c = coin();
        assert_eq!(c.len(), 3);
        assert_eq!(c.halt_name(), "HH");
    }

    #[test]
    fn identity_is_a_degenerate_valid_chain() {
        let c = ChainModel::from_rows(&["a", "b"], &[vec![1.0, 0.0], vec![0.0, 1.0]], 0);
        assert!(c.is_ok());
    }

    #[test]
    fn row_sum_violation_names_the_row() {
        let err = ChainModel::from_rows(
            &["HH", "T", "TH"],
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.98, 0.01],
                vec![0.01, 0.99, 0.0],
            ],
            0,
        )
        .unwrap_err();
        match err {
            Error::RowSum { row, state, .. } => {
                assert_eq!(row, 1);
                assert_eq!(state, "T");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_entries_are_rejected() {
        let err = ChainModel::from_rows(&["a", "b"], &[vec![1.0, 0.0], vec![-0.1, 1.1]], 0)
            .unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { row: 1, col: 0, .. }));
    }

    #[test]
    fn halt_must_be_absorbing() {
        let err = ChainModel::from_rows(&["a", "b"], &[vec![0.5, 0.5], vec![0.5, 0.5]], 0)
            .unwrap_err();
        assert!(matches!(err, Error::HaltNotAbsorbing { .. }));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            ChainModel::from_rows(&["a"], &[vec![1.0]], 0),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            ChainModel::from_rows(&["a", "a"], &[vec![1.0, 0.0], vec![0.0, 1.0]], 0),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            ChainModel::from_rows(&["a", "b"], &[vec![1.0, 0.0], vec![0.0, 1.0]], 2),
            Err(Error::Shape(_))
        ));
        let bad_values = ValueMatrix::new("v", "u", DMatrix::zeros(3, 3));
        assert!(coin().with_values(bad_values.clone()).is_ok());
        let small = ValueMatrix::new("v", "u", DMatrix::zeros(2, 2));
        assert!(matches!(coin().with_values(small), Err(Error::Shape(_))));
    }

    #[test]
    fn canonical_coin_toss_blocks() {
        let c = coin().canonicalize();
        assert_eq!(c.permutation(), &[0, 1, 2]);
        let t_hat = c.t_hat();
        assert_eq!(t_hat[(0, 0)], 0.99);
        assert_eq!(t_hat[(0, 1)], 0.99);
        assert_eq!(t_hat[(1, 0)], 0.01);
        assert_eq!(t_hat[(1, 1)], 0.0);
        assert_eq!(c.escape_row().as_slice(), &[0.0, 0.01]);
        // columns of T_s' sum to one
        for j in 0..2 {
            let col: f64 = c.escape_row()[j] + t_hat.column(j).sum();
            assert!((col - 1.0).abs() < ROW_TOL);
        }
    }

    #[test]
    fn canonicalize_moves_halt_first() {
        let c = ChainModel::from_rows(
            &["T", "TH", "HH"],
            &[
                vec![0.99, 0.01, 0.0],
                vec![0.99, 0.0, 0.01],
                vec![0.0, 0.0, 1.0],
            ],
            2,
        )
        .unwrap();
        let canon = c.canonicalize();
        assert_eq!(canon.model(), coin().canonicalize().model());
        assert_eq!(canon.permutation(), &[1, 2, 0]);
        assert_eq!(canon.to_original(&[10.0, 20.0, 30.0]), vec![20.0, 30.0, 10.0]);
        assert_eq!(canon.to_canonical(&[20.0, 30.0, 10.0]), vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn step_from_halt_is_unchanged() {
        let c = coin();
        let p = StateDistribution::point(3, 0).unwrap();
        assert_eq!(c.step_distribution(&p).unwrap(), p);
    }

    #[test]
    fn step_from_point_mass_gives_row() {
        let c = coin();
        let p = StateDistribution::point(3, 2).unwrap();
        assert_eq!(c.step_distribution(&p).unwrap().as_slice(), &[0.01, 0.99, 0.0]);
        let wrong = StateDistribution::point(2, 0).unwrap();
        assert!(matches!(c.step_distribution(&wrong), Err(Error::Dimension { .. })));
    }
}
