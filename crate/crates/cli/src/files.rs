//! JSON model, MDP and policy files. States, actions and randomness outcomes
//! are referenced by name only.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;

use fpv_core::nalgebra::DMatrix;
use fpv_core::{ChainModel, MdpModel, Policy, ValueMatrix};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub halt: String,
    pub transitions: Vec<Transition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<ValueEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueEntry {
    pub from: String,
    pub to: String,
    pub v: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Name the value matrix is selected by (`analyze --value NAME`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Value matrix name used when a model file has values but no `value_name`.
pub const DEFAULT_VALUE_NAME: &str = "value";

fn index_of(names: &[String]) -> Result<HashMap<&str, usize>, CliError> {
    let mut map = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.as_str(), i).is_some() {
            return Err(CliError::invalid(format!("duplicate name {n:?}")));
        }
    }
    Ok(map)
}

fn lookup(map: &HashMap<&str, usize>, name: &str, what: &str) -> Result<usize, CliError> {
    map.get(name)
        .copied()
        .ok_or_else(|| CliError::invalid(format!("unknown {what} {name:?}")))
}

impl ModelFile {
    pub fn from_chain(chain: &ChainModel, metadata: Option<Metadata>) -> Self {
        let names = chain.state_names();
        let t = chain.transitions();
        let n = chain.len();
        let mut transitions = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if t[(i, j)] != 0.0 {
                    transitions.push(Transition {
                        from: names[i].clone(),
                        to: names[j].clone(),
                        p: t[(i, j)],
                    });
                }
            }
        }
        let mut metadata = metadata;
        let values = chain.values().map(|vm| {
            let meta = metadata.get_or_insert_with(Metadata::default);
            meta.value_name = Some(vm.name.clone());
            meta.unit = Some(vm.unit.clone());
            let mut out = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if vm.values[(i, j)] != 0.0 {
                        out.push(ValueEntry {
                            from: names[i].clone(),
                            to: names[j].clone(),
                            v: vm.values[(i, j)],
                        });
                    }
                }
            }
            out
        });
        Self {
            states: names.to_vec(),
            halt: chain.halt_name().to_string(),
            transitions,
            values,
            metadata,
        }
    }

    pub fn value_name(&self) -> Option<&str> {
        self.values.as_ref()?;
        Some(
            self.metadata
                .as_ref()
                .and_then(|m| m.value_name.as_deref())
                .unwrap_or(DEFAULT_VALUE_NAME),
        )
    }

    /// Builds and validates the chain; the value matrix is attached only
    /// when `with_values` is set.
    pub fn to_chain(&self, with_values: bool) -> Result<ChainModel, CliError> {
        let idx = index_of(&self.states)?;
        let n = self.states.len();
        let halt = lookup(&idx, &self.halt, "halt state")?;
        let mut t = DMatrix::zeros(n, n);
        let mut seen = vec![false; n * n];
        for e in &self.transitions {
            let (i, j) = (lookup(&idx, &e.from, "state")?, lookup(&idx, &e.to, "state")?);
            if std::mem::replace(&mut seen[i * n + j], true) {
                return Err(CliError::invalid(format!(
                    "duplicate transition {} -> {}",
                    e.from, e.to
                )));
            }
            t[(i, j)] = e.p;
        }
        let values = match (&self.values, with_values) {
            (Some(entries), true) => {
                let mut v = DMatrix::zeros(n, n);
                let mut seen = vec![false; n * n];
                for e in entries {
                    let (i, j) = (lookup(&idx, &e.from, "state")?, lookup(&idx, &e.to, "state")?);
                    if std::mem::replace(&mut seen[i * n + j], true) {
                        return Err(CliError::invalid(format!("duplicate value {} -> {}", e.from, e.to)));
                    }
                    v[(i, j)] = e.v;
                }
                let unit = self
                    .metadata
                    .as_ref()
                    .and_then(|m| m.unit.clone())
                    .unwrap_or_default();
                let name = self.value_name().unwrap_or(DEFAULT_VALUE_NAME);
                Some(ValueMatrix::new(name, unit, v))
            }
            _ => None,
        };
        ChainModel::new(self.states.clone(), t, halt, values).map_err(CliError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub states: Vec<String>,
    pub halt: String,
    pub actions: Vec<String>,
    pub randomness: Vec<Outcome>,
    pub successors: Vec<Successor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<MdpValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub name: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Successor {
    pub state: String,
    pub gamma: String,
    pub action: String,
    pub next: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpValue {
    pub state: String,
    pub gamma: String,
    pub action: String,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub policy: Vec<PolicyEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub state: String,
    pub gamma: String,
    pub action: String,
}

/// An MDP and its policy in one document, as written by `example mdp-fig5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpBundle {
    pub mdp: MdpFile,
    pub policy: PolicyFile,
}

struct MdpNames<'a> {
    states: HashMap<&'a str, usize>,
    gammas: HashMap<&'a str, usize>,
    actions: HashMap<&'a str, usize>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &MdpModel) -> Self {
        let (s, g, a) = (mdp.state_names(), mdp.randomness_names(), mdp.action_names());
        let mut successors = Vec::new();
        let mut values = mdp.values().map(|_| Vec::new());
        for x in 0..s.len() {
            for gi in 0..g.len() {
                for ai in 0..a.len() {
                    successors.push(Successor {
                        state: s[x].clone(),
                        gamma: g[gi].clone(),
                        action: a[ai].clone(),
                        next: s[mdp.successor(x, gi, ai)].clone(),
                    });
                    if let (Some(out), Some(v)) = (values.as_mut(), mdp.value(x, gi, ai)) {
                        if v != 0.0 {
                            out.push(MdpValue {
                                state: s[x].clone(),
                                gamma: g[gi].clone(),
                                action: a[ai].clone(),
                                v,
                            });
                        }
                    }
                }
            }
        }
        let metadata = mdp.values().map(|v| Metadata {
            value_name: Some(v.name.clone()),
            unit: Some(v.unit.clone()),
            ..Metadata::default()
        });
        Self {
            states: s.to_vec(),
            halt: s[mdp.halt()].clone(),
            actions: a.to_vec(),
            randomness: g
                .iter()
                .zip(mdp.gamma_dist())
                .map(|(name, &p)| Outcome { name: name.clone(), p })
                .collect(),
            successors,
            values,
            metadata,
        }
    }

    fn names(&self) -> Result<MdpNames<'_>, CliError> {
        let mut gammas = HashMap::new();
        for (i, o) in self.randomness.iter().enumerate() {
            if gammas.insert(o.name.as_str(), i).is_some() {
                return Err(CliError::invalid(format!("duplicate randomness outcome {:?}", o.name)));
            }
        }
        Ok(MdpNames {
            states: index_of(&self.states)?,
            gammas,
            actions: index_of(&self.actions)?,
        })
    }

    pub fn to_mdp(&self) -> Result<MdpModel, CliError> {
        let names = self.names()?;
        let (ns, ng, na) = (self.states.len(), self.randomness.len(), self.actions.len());
        let halt = lookup(&names.states, &self.halt, "halt state")?;
        let triple = |x: &str, g: &str, a: &str| -> Result<(usize, usize, usize), CliError> {
            Ok((
                lookup(&names.states, x, "state")?,
                lookup(&names.gammas, g, "randomness outcome")?,
                lookup(&names.actions, a, "action")?,
            ))
        };
        let mut table: Vec<Vec<Vec<Option<usize>>>> = vec![vec![vec![None; na]; ng]; ns];
        for e in &self.successors {
            let (x, g, a) = triple(&e.state, &e.gamma, &e.action)?;
            let next = lookup(&names.states, &e.next, "state")?;
            if table[x][g][a].replace(next).is_some() {
                return Err(CliError::invalid(format!(
                    "duplicate successor for ({}, {}, {})",
                    e.state, e.gamma, e.action
                )));
            }
        }
        let mut missing = Vec::new();
        for (x, row) in table.iter().enumerate() {
            for (g, cell) in row.iter().enumerate() {
                for (a, next) in cell.iter().enumerate() {
                    if next.is_none() {
                        missing.push(format!(
                            "({}, {}, {})",
                            self.states[x], self.randomness[g].name, self.actions[a]
                        ));
                    }
                }
            }
        }
        if !missing.is_empty() {
            return Err(CliError::invalid(format!(
                "successor table is missing {}",
                missing.join(", ")
            )));
        }
        let successor = table
            .into_iter()
            .map(|row| row.into_iter().map(|r| r.into_iter().flatten().collect()).collect())
            .collect();
        let values = match &self.values {
            Some(entries) => {
                let mut v = vec![vec![vec![0.0; na]; ng]; ns];
                let mut seen = vec![vec![vec![false; na]; ng]; ns];
                for e in entries {
                    let (x, g, a) = triple(&e.state, &e.gamma, &e.action)?;
                    if std::mem::replace(&mut seen[x][g][a], true) {
                        return Err(CliError::invalid(format!(
                            "duplicate value for ({}, {}, {})",
                            e.state, e.gamma, e.action
                        )));
                    }
                    v[x][g][a] = e.v;
                }
                let meta = self.metadata.clone().unwrap_or_default();
                Some((
                    meta.value_name.unwrap_or_else(|| DEFAULT_VALUE_NAME.to_string()),
                    meta.unit.unwrap_or_default(),
                    v,
                ))
            }
            None => None,
        };
        MdpModel::new(
            self.states.clone(),
            self.actions.clone(),
            self.randomness.iter().map(|o| o.name.clone()).collect(),
            halt,
            successor,
            self.randomness.iter().map(|o| o.p).collect(),
            values,
        )
        .map_err(CliError::from)
    }
}

impl PolicyFile {
    pub fn from_policy(policy: &Policy, mdp: &MdpModel) -> Self {
        let mut entries = Vec::new();
        for x in 0..policy.n_states() {
            for g in 0..policy.n_randomness() {
                if let Some(a) = policy.action(x, g) {
                    entries.push(PolicyEntry {
                        state: mdp.state_names()[x].clone(),
                        gamma: mdp.randomness_names()[g].clone(),
                        action: mdp.action_names()[a].clone(),
                    });
                }
            }
        }
        Self { policy: entries }
    }

    pub fn to_policy(&self, mdp: &MdpFile) -> Result<Policy, CliError> {
        let names = mdp.names()?;
        let mut policy = Policy::new(mdp.states.len(), mdp.randomness.len());
        let mut seen = HashMap::new();
        for e in &self.policy {
            let x = lookup(&names.states, &e.state, "state")?;
            let g = lookup(&names.gammas, &e.gamma, "randomness outcome")?;
            let a = lookup(&names.actions, &e.action, "action")?;
            if seen.insert((x, g), a).is_some() {
                return Err(CliError::invalid(format!(
                    "duplicate policy entry for ({}, {})",
                    e.state, e.gamma
                )));
            }
            policy.set(x, g, a);
        }
        Ok(policy)
    }
}

/// Reads a JSON document from `path`, or from standard input for `-`.
pub fn read_json<T: DeserializeOwned>(path: &str) -> Result<T, CliError> {
    let text = if path == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::invalid(format!("reading standard input: {e}")))?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| CliError::invalid(format!("reading {path}: {e}")))?
    };
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    serde_json::from_str(text).map_err(|e| CliError::invalid(format!("{path}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fpv_core::models;

    #[test]
    fn chain_round_trips_through_model_file() {
        let chain = models::coin_toss(0.01).unwrap();
        let file = ModelFile::from_chain(&chain, None);
        assert_eq!(file.transitions.len(), 5);
        assert_eq!(file.to_chain(true).unwrap(), chain);
    }

    #[test]
    fn values_round_trip() {
        let cfg = models::EuropeConfig::modified();
        let chain = models::europe_tour(&cfg)
            .unwrap()
            .with_values(models::europe_values(&cfg, models::EuropeValue::Distance).unwrap())
            .unwrap();
        let file = ModelFile::from_chain(&chain, None);
        assert_eq!(file.value_name(), Some("distance"));
        assert_eq!(file.to_chain(true).unwrap(), chain);
        assert!(file.to_chain(false).unwrap().values().is_none());
    }

    #[test]
    fn duplicate_and_unknown_entries_are_rejected() {
        let mut file = ModelFile::from_chain(&models::coin_toss(0.5).unwrap(), None);
        file.transitions.push(file.transitions[0].clone());
        assert!(file.to_chain(false).unwrap_err().message.contains("duplicate"));
        file.transitions.pop();
        file.transitions[0].to = "nowhere".into();
        assert!(file.to_chain(false).unwrap_err().message.contains("nowhere"));
    }

    #[test]
    fn row_sum_error_names_the_state() {
        let mut file = ModelFile::from_chain(&models::coin_toss(0.5).unwrap(), None);
        let e = file.transitions.iter_mut().find(|e| e.from == "TH").unwrap();
        e.p = 0.25;
        let err = file.to_chain(false).unwrap_err();
        assert!(err.message.contains("TH"), "{}", err.message);
    }

    #[test]
    fn mdp_and_policy_round_trip() {
        let (mdp, policy) = models::figure5_mdp(0.01).unwrap();
        let file = MdpFile::from_mdp(&mdp);
        assert_eq!(file.successors.len(), 12);
        let back = file.to_mdp().unwrap();
        let pfile = PolicyFile::from_policy(&policy, &mdp);
        let p = pfile.to_policy(&file).unwrap();
        assert_eq!(
            fpv_core::mdp::reduce(&back, &p).unwrap(),
            fpv_core::mdp::reduce(&mdp, &policy).unwrap()
        );
    }

    #[test]
    fn incomplete_successor_table_is_rejected() {
        let (mdp, _) = models::figure5_mdp(0.01).unwrap();
        let mut file = MdpFile::from_mdp(&mdp);
        file.successors.remove(5);
        assert!(file.to_mdp().unwrap_err().message.contains("missing"));
    }
}
