//! Finite Markov decision processes with a deterministic successor table
//! `x[n+1] = h(x[n], gamma[n], zeta[n])`.
//!
//! Closing the loop with a policy `zeta = pi(x, gamma)` leaves a table
//! `g(x, gamma)`; averaging it over the randomness distribution gives a
//! [`ChainModel`].

use nalgebra::DMatrix;

use crate::chain::{ChainModel, ValueMatrix, ROW_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    state_names: Vec<String>,
    action_names: Vec<String>,
    randomness_names: Vec<String>,
    halt: usize,
    /// `successor[(x * n_gamma + g) * n_action + a]`
    successor: Vec<usize>,
    gamma_dist: Vec<f64>,
    values: Option<MdpValues>,
}

/// Per-transition values `v(x, gamma, zeta)`, laid out like the successor table.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpValues {
    pub name: String,
    pub unit: String,
    pub table: Vec<f64>,
}

/// `(name, unit, table[state][gamma][action])`.
pub type ValueTable = (String, String, Vec<Vec<Vec<f64>>>);

impl MdpModel {
    /// `successor` is indexed `[state][gamma][action]`.
    pub fn new(
        state_names: Vec<String>,
        action_names: Vec<String>,
        randomness_names: Vec<String>,
        halt: usize,
        successor: Vec<Vec<Vec<usize>>>,
        gamma_dist: Vec<f64>,
        values: Option<ValueTable>,
    ) -> Result<Self> {
        let (ns, ng, na) = (state_names.len(), randomness_names.len(), action_names.len());
        if ns < 2 || ng == 0 || na == 0 {
            return Err(Error::Shape(format!(
                "MDP needs >= 2 states and at least one action and randomness outcome \
                 (got {ns} states, {na} actions, {ng} outcomes)"
            )));
        }
        if halt >= ns {
            return Err(Error::Shape(format!("halt index {halt} out of range")));
        }
        for names in [&state_names, &action_names, &randomness_names] {
            let mut sorted: Vec<&String> = names.iter().collect();
            sorted.sort();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Shape(format!("duplicate name {:?}", w[0])));
            }
        }
        if gamma_dist.len() != ng {
            return Err(Error::Dimension {
                expected: ng,
                found: gamma_dist.len(),
            });
        }
        validate_gamma_dist(&gamma_dist)?;

        let flat = flatten(&successor, ns, ng, na, "successor")?;
        for (idx, &next) in flat.iter().enumerate() {
            let x = idx / (ng * na);
            if next >= ns {
                return Err(Error::Shape(format!(
                    "successor of state {} is {next}, out of range",
                    state_names[x]
                )));
            }
            if x == halt && next != halt {
                return Err(Error::HaltNotAbsorbing {
                    state: state_names[halt].clone(),
                    self_prob: 0.0,
                });
            }
        }
        let values = match values {
            Some((name, unit, table)) => {
                let table = flatten(&table, ns, ng, na, "value")?;
                if table.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Shape("value table has non-finite entries".into()));
                }
                Some(MdpValues { name, unit, table })
            }
            None => None,
        };

        Ok(Self {
            state_names,
            action_names,
            randomness_names,
            halt,
            successor: flat,
            gamma_dist,
            values,
        })
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn randomness_names(&self) -> &[String] {
        &self.randomness_names
    }

    pub fn halt(&self) -> usize {
        self.halt
    }

    pub fn gamma_dist(&self) -> &[f64] {
        &self.gamma_dist
    }

    pub fn values(&self) -> Option<&MdpValues> {
        self.values.as_ref()
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn n_randomness(&self) -> usize {
        self.randomness_names.len()
    }

    fn index(&self, state: usize, gamma: usize, action: usize) -> usize {
        (state * self.n_randomness() + gamma) * self.n_actions() + action
    }

    /// `h(x, gamma, zeta)`.
    pub fn successor(&self, state: usize, gamma: usize, action: usize) -> usize {
        self.successor[self.index(state, gamma, action)]
    }

    pub fn value(&self, state: usize, gamma: usize, action: usize) -> Option<f64> {
        self.values
            .as_ref()
            .map(|v| v.table[self.index(state, gamma, action)])
    }

    /// Same MDP with a different randomness distribution.
    pub fn with_gamma_dist(mut self, gamma_dist: Vec<f64>) -> Result<Self> {
        if gamma_dist.len() != self.n_randomness() {
            return Err(Error::Dimension {
                expected: self.n_randomness(),
                found: gamma_dist.len(),
            });
        }
        validate_gamma_dist(&gamma_dist)?;
        self.gamma_dist = gamma_dist;
        Ok(self)
    }
}

fn validate_gamma_dist(dist: &[f64]) -> Result<()> {
    for (i, &p) in dist.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::NegativeEntry {
                row: 0,
                col: i,
                value: p,
            });
        }
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::RowSum {
            row: 0,
            state: "randomness distribution".into(),
            sum,
        });
    }
    Ok(())
}

fn flatten<T: Copy>(
    table: &[Vec<Vec<T>>],
    ns: usize,
    ng: usize,
    na: usize,
    what: &str,
) -> Result<Vec<T>> {
    if table.len() != ns
        || table
            .iter()
            .any(|per_state| per_state.len() != ng || per_state.iter().any(|r| r.len() != na))
    {
        return Err(Error::Shape(format!(
            "{what} table must be {ns} x {ng} x {na} (state x randomness x action)"
        )));
    }
    Ok(table.iter().flatten().flatten().copied().collect())
}

/// Lookup table `pi(state, gamma) -> action`; the halt state has no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_randomness: usize,
    table: Vec<Option<usize>>,
}

impl Policy {
    pub fn new(n_states: usize, n_randomness: usize) -> Self {
        Self {
            n_randomness,
            table: vec![None; n_states * n_randomness],
        }
    }

    pub fn set(&mut self, state: usize, gamma: usize, action: usize) {
        self.table[state * self.n_randomness + gamma] = Some(action);
    }

    pub fn with(mut self, state: usize, gamma: usize, action: usize) -> Self {
        self.set(state, gamma, action);
        self
    }

    pub fn action(&self, state: usize, gamma: usize) -> Option<usize> {
        self.table.get(state * self.n_randomness + gamma).copied().flatten()
    }

    pub fn n_states(&self) -> usize {
        self.table.len() / self.n_randomness.max(1)
    }

    pub fn n_randomness(&self) -> usize {
        self.n_randomness
    }
}

/// Closed-loop table `g(x, gamma) = h(x, gamma, pi(x, gamma))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    state_names: Vec<String>,
    halt: usize,
    n_randomness: usize,
    next: Vec<usize>,
    values: Option<(String, String, Vec<f64>)>,
}

impl ClosedLoop {
    pub fn next(&self, state: usize, gamma: usize) -> usize {
        self.next[state * self.n_randomness + gamma]
    }

    pub fn value(&self, state: usize, gamma: usize) -> Option<f64> {
        self.values
            .as_ref()
            .map(|(_, _, v)| v[state * self.n_randomness + gamma])
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_randomness(&self) -> usize {
        self.n_randomness
    }

    pub fn halt(&self) -> usize {
        self.halt
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }
}

/// Closes the loop. Every `(non-halt state, gamma)` pair must have an action.
pub fn apply_policy(mdp: &MdpModel, policy: &Policy) -> Result<ClosedLoop> {
    let (ns, ng, na) = (mdp.n_states(), mdp.n_randomness(), mdp.n_actions());
    if policy.n_states() != ns || policy.n_randomness() != ng {
        return Err(Error::Shape(format!(
            "policy is {} x {}, MDP has {ns} states and {ng} randomness outcomes",
            policy.n_states(),
            policy.n_randomness()
        )));
    }
    let mut missing = Vec::new();
    let mut next = Vec::with_capacity(ns * ng);
    let mut values = mdp.values().map(|_| Vec::with_capacity(ns * ng));
    for x in 0..ns {
        for g in 0..ng {
            if x == mdp.halt() {
                if policy.action(x, g).is_some() {
                    return Err(Error::PolicyOnHalt(mdp.state_names()[x].clone()));
                }
                next.push(x);
                if let Some(v) = values.as_mut() {
                    v.push(0.0);
                }
                continue;
            }
            match policy.action(x, g) {
                Some(a) if a < na => {
                    next.push(mdp.successor(x, g, a));
                    if let Some(v) = values.as_mut() {
                        v.push(mdp.value(x, g, a).unwrap_or(0.0));
                    }
                }
                Some(a) => {
                    return Err(Error::Shape(format!(
                        "policy action index {a} out of range for {na} actions"
                    )))
                }
                None => {
                    missing.push((mdp.state_names()[x].clone(), mdp.randomness_names()[g].clone()));
                    next.push(x);
                    if let Some(v) = values.as_mut() {
                        v.push(0.0);
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompletePolicy { missing });
    }
    let values = match (mdp.values(), values) {
        (Some(spec), Some(v)) => Some((spec.name.clone(), spec.unit.clone(), v)),
        _ => None,
    };
    Ok(ClosedLoop {
        state_names: mdp.state_names().to_vec(),
        halt: mdp.halt(),
        n_randomness: ng,
        next,
        values,
    })
}

/// `T_s[i][j] = sum_gamma P(gamma) [g(i, gamma) = j]`. When values are
/// present, `T_v[i][j]` is the probability-weighted mean of the values of
/// the outcomes realizing `i -> j`, so `sum_j T_s T_v` is the expected
/// one-step value.
pub fn marginalize(closed: &ClosedLoop, gamma_dist: &[f64]) -> Result<ChainModel> {
    let (ns, ng) = (closed.n_states(), closed.n_randomness());
    if gamma_dist.len() != ng {
        return Err(Error::Dimension {
            expected: ng,
            found: gamma_dist.len(),
        });
    }
    validate_gamma_dist(gamma_dist)?;
    let mut t = DMatrix::<f64>::zeros(ns, ns);
    let mut weighted = DMatrix::<f64>::zeros(ns, ns);
    for x in 0..ns {
        for (g, &p) in gamma_dist.iter().enumerate() {
            let j = closed.next(x, g);
            t[(x, j)] += p;
            if let Some(v) = closed.value(x, g) {
                weighted[(x, j)] += p * v;
            }
        }
    }
    let values = closed.values.as_ref().map(|(name, unit, _)| {
        let v = DMatrix::from_fn(ns, ns, |i, j| {
            if t[(i, j)] > 0.0 {
                weighted[(i, j)] / t[(i, j)]
            } else {
                0.0
            }
        });
        ValueMatrix::new(name.clone(), unit.clone(), v)
    });
    ChainModel::new(closed.state_names.clone(), t, closed.halt, values)
}

/// Policy application followed by marginalization over the MDP's own
/// randomness distribution.
pub fn reduce(mdp: &MdpModel, policy: &Policy) -> Result<ChainModel> {
    marginalize(&apply_policy(mdp, policy)?, mdp.gamma_dist())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn single_action() -> MdpModel {
        // states h, a, b; gamma g1, g2; one action
        MdpModel::new(
            names(&["h", "a", "b"]),
            names(&["only"]),
            names(&["g1", "g2"]),
            0,
            vec![
                vec![vec![0], vec![0]],
                vec![vec![2], vec![0]],
                vec![vec![1], vec![2]],
            ],
            vec![0.25, 0.75],
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_action_closed_loop_drops_action_axis() {
        let mdp = single_action();
        let mut pi = Policy::new(3, 2);
        for x in 1..3 {
            for g in 0..2 {
                pi.set(x, g, 0);
            }
        }
        let closed = apply_policy(&mdp, &pi).unwrap();
        for x in 0..3 {
            for g in 0..2 {
                assert_eq!(closed.next(x, g), mdp.successor(x, g, 0));
            }
        }
        let chain = marginalize(&closed, mdp.gamma_dist()).unwrap();
        let t = chain.transitions();
        assert_eq!(t[(1, 2)], 0.25);
        assert_eq!(t[(1, 0)], 0.75);
        assert_eq!(t[(2, 1)], 0.25);
        assert_eq!(t[(2, 2)], 0.75);
    }

    #[test]
    fn missing_pairs_are_listed() {
        let mdp = single_action();
        let pi = Policy::new(3, 2).with(1, 0, 0).with(1, 1, 0).with(2, 0, 0);
        match apply_policy(&mdp, &pi) {
            Err(Error::IncompletePolicy { missing }) => {
                assert_eq!(missing, vec![("b".to_string(), "g2".to_string())]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn policy_on_halt_is_rejected() {
        let mdp = single_action();
        let mut pi = Policy::new(3, 2);
        for x in 0..3 {
            for g in 0..2 {
                pi.set(x, g, 0);
            }
        }
        assert!(matches!(apply_policy(&mdp, &pi), Err(Error::PolicyOnHalt(_))));
    }

    #[test]
    fn point_mass_randomness_gives_deterministic_rows() {
        let mdp = single_action().with_gamma_dist(vec![1.0, 0.0]).unwrap();
        let pi = Policy::new(3, 2).with(1, 0, 0).with(1, 1, 0).with(2, 0, 0).with(2, 1, 0);
        let chain = reduce(&mdp, &pi).unwrap();
        for row in chain.transitions().row_iter() {
            assert!(row.iter().all(|&p| p == 0.0 || p == 1.0));
        }
    }

    #[test]
    fn halt_successors_must_self_loop() {
        let err = MdpModel::new(
            names(&["h", "a"]),
            names(&["z"]),
            names(&["g"]),
            0,
            vec![vec![vec![1]], vec![vec![0]]],
            vec![1.0],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::HaltNotAbsorbing { .. }));
    }

    #[test]
    fn colliding_outcomes_average_values() {
        let mdp = MdpModel::new(
            names(&["h", "a"]),
            names(&["z"]),
            names(&["g1", "g2"]),
            0,
            vec![vec![vec![0], vec![0]], vec![vec![0], vec![0]]],
            vec![0.25, 0.75],
            Some((
                "cost".into(),
                "u".into(),
                vec![vec![vec![0.0], vec![0.0]], vec![vec![4.0], vec![8.0]]],
            )),
        )
        .unwrap();
        let pi = Policy::new(2, 2).with(1, 0, 0).with(1, 1, 0);
        let chain = reduce(&mdp, &pi).unwrap();
        let v = &chain.values().unwrap().values;
        assert_eq!(chain.transitions()[(1, 0)], 1.0);
        assert!((v[(1, 0)] - 7.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_dist_must_sum_to_one() {
        assert!(matches!(
            single_action().with_gamma_dist(vec![0.5, 0.4]),
            Err(Error::RowSum { .. })
        ));
    }
}
