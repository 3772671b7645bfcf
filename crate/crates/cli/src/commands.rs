use std::collections::BTreeMap;
use std::fs;

use fpv_core::chain::StateDistribution;
use fpv_core::models::{self, EuropeConfig, EuropeValue};
use fpv_core::{analysis, mdp, sim, ChainModel};
use serde_json::json;

use crate::files::{read_json, MdpBundle, MdpFile, Metadata, ModelFile, PolicyFile};
use crate::report::{AnalysisReport, SimulationReport};
use crate::{exit, json, CliError, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Text,
}

/// Value selection for `analyze`: `steps` (MFPT only) or a named value matrix.
pub const STEPS: &str = "steps";

pub fn load_model(path: &str, value: Option<&str>) -> Result<(ModelFile, ChainModel), CliError> {
    let file: ModelFile = read_json(path)?;
    let want = value.filter(|v| *v != STEPS);
    if let Some(name) = want {
        match file.value_name() {
            Some(have) if have == name => {}
            Some(have) => {
                return Err(CliError::invalid(format!(
                    "{path}: no value matrix named {name:?} (the file has {have:?})"
                )))
            }
            None => return Err(CliError::invalid(format!("{path}: the model has no value matrix"))),
        }
    }
    let chain = file.to_chain(want.is_some())?;
    Ok((file, chain))
}

pub fn analyze(path: &str, confidence: &[f64], value: Option<&str>, format: Format) -> Result<Output, CliError> {
    if let Some(pr) = confidence.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(CliError::invalid(format!("confidence level {pr} is outside (0, 1]")));
    }
    let (_, chain) = load_model(path, value)?;
    let a = analysis::analyze(&chain)?;
    let report = AnalysisReport::new(&a, confidence)?;
    let stdout = match format {
        Format::Json => json::to_string(&report),
        Format::Text => report.to_text(),
    };
    let code = if report.trapped { exit::TRAPPED } else { exit::OK };
    Ok(Output { stdout, code })
}

pub const EXAMPLES: [&str; 5] = ["coin", "epidemics", "europe", "europe-mod", "mdp-fig5"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleArgs {
    pub p_heads: Option<f64>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub paris_population: Option<f64>,
    /// `CITY=POPULATION` overrides.
    pub population: Vec<String>,
    /// `distance`, `time` or `none`.
    pub value: Option<String>,
    pub stay_value: Option<f64>,
    pub p_gamma2: Option<f64>,
    pub mdp_out: Option<String>,
    pub policy_out: Option<String>,
}

impl ExampleArgs {
    fn given(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let flags: [(&'static str, bool); 10] = [
            ("--p-heads", self.p_heads.is_some()),
            ("--delta", self.delta.is_some()),
            ("--beta", self.beta.is_some()),
            ("--paris-population", self.paris_population.is_some()),
            ("--population", !self.population.is_empty()),
            ("--value", self.value.is_some()),
            ("--stay-value", self.stay_value.is_some()),
            ("--p-gamma2", self.p_gamma2.is_some()),
            ("--mdp-out", self.mdp_out.is_some()),
            ("--policy-out", self.policy_out.is_some()),
        ];
        for (name, set) in flags {
            if set {
                v.push(name);
            }
        }
        v
    }
}

fn applicable(name: &str) -> &'static [&'static str] {
    match name {
        "coin" => &["--p-heads"],
        "epidemics" => &["--delta", "--beta"],
        "europe" | "europe-mod" => &["--paris-population", "--population", "--value", "--stay-value"],
        "mdp-fig5" => &["--p-gamma2", "--mdp-out", "--policy-out"],
        _ => &[],
    }
}

fn meta(description: String, example: &str, parameters: serde_json::Value) -> Option<Metadata> {
    let mut extra = BTreeMap::new();
    extra.insert("example".to_string(), json!(example));
    extra.insert("parameters".to_string(), parameters);
    Some(Metadata {
        description: Some(description),
        extra,
        ..Metadata::default()
    })
}

fn europe_config(name: &str, args: &ExampleArgs) -> Result<EuropeConfig, CliError> {
    let mut cfg = if name == "europe-mod" {
        EuropeConfig::modified()
    } else {
        EuropeConfig::default()
    };
    for entry in &args.population {
        let (city, pop) = entry
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("--population expects CITY=N, got {entry:?}")))?;
        let pop: f64 = pop
            .parse()
            .map_err(|_| CliError::invalid(format!("bad population {pop:?} for {city}")))?;
        if !models::EUROPE_CITIES.contains(&city) {
            return Err(CliError::invalid(format!("unknown city {city:?}")));
        }
        cfg.populations.insert(city.to_string(), pop);
        if city == "Paris" {
            cfg.paris_override = None;
        }
    }
    if let Some(p) = args.paris_population {
        cfg.paris_override = Some(p);
    }
    if let Some(s) = args.stay_value {
        cfg.stay_value = s;
    }
    Ok(cfg)
}

pub fn example(name: &str, args: &ExampleArgs) -> Result<Output, CliError> {
    if !EXAMPLES.contains(&name) {
        return Err(CliError::invalid(format!(
            "unknown example {name:?}; expected one of {}",
            EXAMPLES.join(", ")
        )));
    }
    let allowed = applicable(name);
    if let Some(flag) = args.given().into_iter().find(|f| !allowed.contains(f)) {
        return Err(CliError::invalid(format!("{flag} does not apply to example {name}")));
    }
    let file = match name {
        "coin" => {
            let p = args.p_heads.unwrap_or(0.01);
            ModelFile::from_chain(
                &models::coin_toss(p)?,
                meta(
                    "coin flips until two heads in a row".into(),
                    name,
                    json!({ "p_heads": p }),
                ),
            )
        }
        "epidemics" => {
            let (d, b) = (args.delta.unwrap_or(0.01), args.beta.unwrap_or(0.8));
            ModelFile::from_chain(
                &models::sis_two_node(d, b)?,
                meta(
                    "two-node SIS epidemic until both nodes are susceptible".into(),
                    name,
                    json!({ "delta": d, "beta": b }),
                ),
            )
        }
        "europe" | "europe-mod" => {
            let cfg = europe_config(name, args)?;
            let mut chain = models::europe_tour(&cfg)?;
            let kind = args.value.as_deref().unwrap_or("distance");
            let kind = match kind {
                "distance" => Some(EuropeValue::Distance),
                "time" => Some(EuropeValue::TravelTime),
                "none" => None,
                other => {
                    return Err(CliError::invalid(format!(
                        "--value must be distance, time or none, got {other:?}"
                    )))
                }
            };
            if let Some(k) = kind {
                chain = chain.with_values(models::europe_values(&cfg, k)?)?;
            }
            let populations: BTreeMap<&str, f64> = models::EUROPE_CITIES
                .iter()
                .map(|&c| {
                    let p = match (c, cfg.paris_override) {
                        ("Paris", Some(p)) => p,
                        _ => cfg.populations[c],
                    };
                    (c, p)
                })
                .collect();
            ModelFile::from_chain(
                &chain,
                meta(
                    "daily moves between European cities until reaching Istanbul".into(),
                    name,
                    json!({ "populations": populations, "stay_value": cfg.stay_value }),
                ),
            )
        }
        _ => return example_mdp(args),
    };
    Ok(Output::ok(json::to_string(&file)))
}

fn example_mdp(args: &ExampleArgs) -> Result<Output, CliError> {
    let p = args.p_gamma2.unwrap_or(0.01);
    let (model, policy) = models::figure5_mdp(p)?;
    let bundle = MdpBundle {
        mdp: MdpFile::from_mdp(&model),
        policy: PolicyFile::from_policy(&policy, &model),
    };
    match (&args.mdp_out, &args.policy_out) {
        (None, None) => Ok(Output::ok(json::to_string(&bundle))),
        (Some(m), Some(p)) => {
            write(m, &json::to_string(&bundle.mdp))?;
            write(p, &json::to_string(&bundle.policy))?;
            Ok(Output::ok(String::new()))
        }
        _ => Err(CliError::invalid("--mdp-out and --policy-out go together")),
    }
}

fn write(path: &str, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::invalid(format!("writing {path}: {e}")))
}

/// Closes the loop with the policy and marginalizes over the randomness.
/// Without `policy_path` the MDP file must be a bundle holding both.
pub fn reduce(mdp_path: &str, policy_path: Option<&str>) -> Result<Output, CliError> {
    let (mdp_file, policy_file, policy_source) = match policy_path {
        Some(p) => (read_json::<MdpFile>(mdp_path)?, read_json::<PolicyFile>(p)?, p),
        None => {
            let b: MdpBundle = read_json(mdp_path)?;
            (b.mdp, b.policy, mdp_path)
        }
    };
    let model = mdp_file.to_mdp()?;
    let policy = policy_file.to_policy(&mdp_file)?;
    let chain = mdp::reduce(&model, &policy)?;
    let gammas: BTreeMap<&str, f64> = mdp_file
        .randomness
        .iter()
        .map(|o| (o.name.as_str(), o.p))
        .collect();
    let mut extra = BTreeMap::new();
    extra.insert("source_mdp".to_string(), json!(mdp_path));
    extra.insert("source_policy".to_string(), json!(policy_source));
    extra.insert("gamma_distribution".to_string(), json!(gammas));
    let metadata = Metadata {
        description: Some("closed-loop chain marginalized over the randomness".into()),
        extra,
        ..Metadata::default()
    };
    Ok(Output::ok(json::to_string(&ModelFile::from_chain(&chain, Some(metadata)))))
}

pub fn simulate(
    path: &str,
    trials: usize,
    seed: u64,
    start: &[String],
    max_steps: Option<u64>,
) -> Result<Output, CliError> {
    // value statistics come along whenever the model carries a value matrix
    let chain = read_json::<ModelFile>(path)?.to_chain(true)?;
    let dist = start_distribution(&chain, start)?;
    let r = sim::simulate(&chain, &dist, trials, seed, max_steps)?;
    Ok(Output::ok(json::to_string(&SimulationReport::new(&chain, &r))))
}

/// `phi`, `uniform` (over transient states) or `state NAME`.
pub fn start_distribution(chain: &ChainModel, start: &[String]) -> Result<StateDistribution, CliError> {
    let words: Vec<&str> = start.iter().map(String::as_str).collect();
    match words.as_slice() {
        [] | ["phi"] => {
            let a = analysis::analyze(chain)?;
            Ok(StateDistribution::new(a.phi())?)
        }
        ["uniform"] => Ok(StateDistribution::uniform_transient(chain.len(), chain.halt())?),
        ["state", name] => {
            let i = chain
                .state_index(name)
                .ok_or_else(|| CliError::invalid(format!("unknown start state {name:?}")))?;
            Ok(StateDistribution::point(chain.len(), i)?)
        }
        _ => Err(CliError::invalid(format!(
            "--start expects phi, uniform or state NAME, got {:?}",
            words.join(" ")
        ))),
    }
}
