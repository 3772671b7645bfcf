//! Analysis and simulation reports. The set of keys depends only on the
//! command-line flags: optional quantities serialize as `null` rather than
//! disappearing.

use fpv_core::confidence::{min_ordered_confidence, survival_at_mean};
use fpv_core::{ChainAnalysis, ChainModel, SimReport};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::json::sig;
use crate::CliError;

/// Per-state numbers serialized as a JSON object in model state order.
#[derive(Debug, Clone, PartialEq)]
pub struct Named(pub Vec<(String, Option<f64>)>);

impl Named {
    fn new(names: &[String], values: Option<&[f64]>) -> Self {
        Self(
            names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), values.map(|v| v[i])))
                .collect(),
        )
    }
}

impl Serialize for Named {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub states: Vec<String>,
    pub halt: String,
    pub eigen_method: &'static str,
    pub trapped: bool,
    pub lambda2: f64,
    pub lambda3_modulus: f64,
    pub escape_prob: f64,
    pub memory_constant: Option<f64>,
    #[serde(rename = "M")]
    pub mfpt: f64,
    pub fpt_std: Option<f64>,
    /// Probability of surviving more than `M` steps.
    pub survival_at_mean: Option<f64>,
    /// Confidence levels above this give `LFPT < UFPT`.
    pub min_ordered_confidence: f64,
    pub m: Named,
    pub phi: Named,
    /// Present when `--value NAME` selects a value matrix.
    pub value: Option<ValueReport>,
    pub bounds: Vec<BoundsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueReport {
    pub name: String,
    pub unit: String,
    /// System-wide mean first passage value `m_v' phi`.
    pub mfpv: f64,
    /// Value per step, `MFPV / M`.
    pub rate: f64,
    pub m: Named,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub pr: f64,
    pub lfpt: f64,
    pub ufpt: f64,
    /// `pr = 1`: only `0 <= FPT < inf` can be guaranteed.
    pub boundary: bool,
    pub valid_ordering: bool,
    pub lfpv: f64,
    pub ufpv: f64,
}

impl AnalysisReport {
    pub fn new(a: &ChainAnalysis, confidence: &[f64]) -> Result<Self, CliError> {
        let model = a.canonical.model();
        let names = original_names(a);
        let s = &a.spectral;
        let trapped = a.is_trapped();
        let m = a.mfpt_vector();
        let value = a.value.as_ref().map(|v| {
            let vm = model.values().expect("value summary implies a value matrix");
            ValueReport {
                name: vm.name.clone(),
                unit: vm.unit.clone(),
                mfpv: v.mean,
                rate: v.mean / a.mfpt(),
                m: Named::new(&names, a.mfpv_vector().as_deref()),
            }
        });
        let mut bounds = Vec::new();
        if !trapped {
            for &pr in confidence {
                let b = a.bounds(pr)?;
                bounds.push(BoundsReport {
                    pr,
                    lfpt: b.lfpt,
                    ufpt: b.ufpt,
                    boundary: pr == 1.0,
                    valid_ordering: b.valid_ordering,
                    lfpv: b.lfpv,
                    ufpv: b.ufpv,
                });
            }
        }
        Ok(Self {
            halt: names[a.canonical.order()[0]].clone(),
            eigen_method: s.eigen_method.as_str(),
            trapped,
            lambda2: s.lambda2,
            lambda3_modulus: s.lambda3_modulus,
            escape_prob: s.escape_prob,
            memory_constant: s.memory_constant,
            mfpt: a.mfpt(),
            fpt_std: a.steps.fpt_std,
            survival_at_mean: (!trapped).then(|| survival_at_mean(s.lambda2)),
            min_ordered_confidence: min_ordered_confidence(s.lambda2),
            m: Named::new(&names, m.as_deref()),
            phi: Named::new(&names, Some(&a.phi())),
            value,
            bounds,
            states: names,
        })
    }

    pub fn to_text(&self) -> String {
        let opt = |x: Option<f64>| x.map_or("undefined".to_string(), |v| sig(v, 6));
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k:<24}{v}\n"));
        line("halt", self.halt.clone());
        line("eigen method", self.eigen_method.to_string());
        line("lambda2", sig(self.lambda2, 6));
        line("|lambda3|", sig(self.lambda3_modulus, 6));
        line("escape probability", sig(self.escape_prob, 6));
        line("memory constant", opt(self.memory_constant));
        line("M", sig(self.mfpt, 6));
        line("FPT std", opt(self.fpt_std));
        line("P(FPT > M)", opt(self.survival_at_mean));
        line("min ordered confidence", sig(self.min_ordered_confidence, 6));
        if let Some(v) = &self.value {
            let unit = if v.unit.is_empty() { String::new() } else { format!(" {}", v.unit) };
            line(&format!("MFPV ({})", v.name), format!("{}{unit}", sig(v.mfpv, 6)));
            line("value per step", format!("{}{unit}", sig(v.rate, 6)));
        }

        let width = self.states.iter().map(|s| s.len()).max().unwrap_or(5).max(5) + 2;
        out.push('\n');
        let mut header = format!("{:<width$}{:>14}{:>14}", "state", "m", "phi");
        if let Some(v) = &self.value {
            header.push_str(&format!("{:>14}", format!("m_{}", v.name)));
        }
        out.push_str(header.trim_end());
        out.push('\n');
        for (i, name) in self.states.iter().enumerate() {
            let mut row = format!(
                "{name:<width$}{:>14}{:>14}",
                opt(self.m.0[i].1),
                opt(self.phi.0[i].1)
            );
            if let Some(v) = &self.value {
                row.push_str(&format!("{:>14}", opt(v.m.0[i].1)));
            }
            out.push_str(&row);
            out.push('\n');
        }

        if !self.bounds.is_empty() {
            out.push('\n');
            out.push_str(&format!(
                "{:<10}{:>14}{:>14}{:>14}{:>14}  ordered\n",
                "pr", "LFPT", "UFPT", "LFPV", "UFPV"
            ));
            for b in &self.bounds {
                out.push_str(&format!(
                    "{:<10}{:>14}{:>14}{:>14}{:>14}  {}\n",
                    sig(b.pr, 6),
                    sig(b.lfpt, 6),
                    sig(b.ufpt, 6),
                    sig(b.lfpv, 6),
                    sig(b.ufpv, 6),
                    if b.valid_ordering { "yes" } else { "no" }
                ));
            }
        }
        out
    }
}

fn original_names(a: &ChainAnalysis) -> Vec<String> {
    let canon_names = a.canonical.model().state_names();
    a.canonical.order().iter().enumerate().fold(
        vec![String::new(); canon_names.len()],
        |mut acc, (c, &o)| {
            acc[o] = canon_names[c].clone();
            acc
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantile {
    pub pr: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub trials: usize,
    pub seed: u64,
    pub max_steps: u64,
    pub start: Named,
    pub completed: usize,
    pub censored: usize,
    pub mean_fpt: f64,
    pub std_fpt: f64,
    pub fpt_stderr: f64,
    /// Name of the value matrix accumulated along trajectories, if any.
    pub value_name: Option<String>,
    pub mean_fpv: Option<f64>,
    pub std_fpv: Option<f64>,
    pub fpv_stderr: Option<f64>,
    pub fpt_quantiles: Vec<Quantile>,
}

impl SimulationReport {
    pub fn new(chain: &ChainModel, r: &SimReport) -> Self {
        Self {
            trials: r.trials,
            seed: r.seed,
            max_steps: r.max_steps,
            start: Named::new(chain.state_names(), Some(r.start.as_slice())),
            completed: r.completed,
            censored: r.censored,
            mean_fpt: r.mean_fpt,
            std_fpt: r.std_fpt,
            fpt_stderr: r.fpt_stderr(),
            value_name: chain.values().map(|v| v.name.clone()),
            mean_fpv: r.mean_fpv,
            std_fpv: r.std_fpv,
            fpv_stderr: r.fpv_stderr(),
            fpt_quantiles: r
                .fpt_quantiles
                .iter()
                .map(|&(pr, steps)| Quantile { pr, steps })
                .collect(),
        }
    }
}
