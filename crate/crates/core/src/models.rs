//! Example models: biased coin toss, two-node SIS epidemic, the Europe tour
//! and its Paris-heavy variant, and the three-state MDP that reduces to the
//! coin toss.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::chain::{ChainModel, ValueMatrix};
use crate::error::{Error, Result};
use crate::mdp::{MdpModel, Policy};

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("{name} = {x} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_closed_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("{name} = {x} must lie in [0, 1]")));
    }
    Ok(())
}

/// Flips until two heads in a row. States: `HH` (halt), `T` (last flip tails
/// or not flipped yet), `TH` (tails then heads).
pub fn coin_toss(p_heads: f64) -> Result<ChainModel> {
    check_open_unit("p_heads", p_heads)?;
    let q = 1.0 - p_heads;
    ChainModel::from_rows(
        &["HH", "T", "TH"],
        &[
            vec![1.0, 0.0, 0.0],
            vec![0.0, q, p_heads],
            vec![p_heads, q, 0.0],
        ],
        0,
    )
}

/// Two-node SIS epidemic. `delta` is the recovery probability of an infected
/// node and `beta` the infection probability when the other node is infected.
/// States follow (patient 1, patient 2): `SS` (halt), `SI`, `IS`, `II`.
pub fn sis_two_node(delta: f64, beta: f64) -> Result<ChainModel> {
    check_closed_unit("delta", delta)?;
    check_closed_unit("beta", beta)?;
    let (d, b) = (delta, beta);
    ChainModel::from_rows(
        &["SS", "SI", "IS", "II"],
        &[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![(1.0 - b) * d, (1.0 - d) * (1.0 - b), b * d, b * (1.0 - d)],
            vec![(1.0 - b) * d, b * d, (1.0 - d) * (1.0 - b), b * (1.0 - d)],
            vec![d * d, d * (1.0 - d), d * (1.0 - d), (1.0 - d) * (1.0 - d)],
        ],
        0,
    )
}

/// City order; the first city is the halt state.
pub const EUROPE_CITIES: [&str; 8] = [
    "Istanbul", "London", "Athens", "Berlin", "Madrid", "Kiev", "Rome", "Paris",
];

/// City populations (residents), calibrated so that the London row of the
/// transition matrix is (stay 0.5922, Berlin 0.2507, Paris 0.1571).
pub const EUROPE_POPULATIONS: [(&str, f64); 8] = [
    ("Istanbul", 14_160_467.0),
    ("London", 8_307_866.0),
    ("Athens", 3_752_524.0),
    ("Berlin", 3_517_028.0),
    ("Madrid", 3_206_915.0),
    ("Kiev", 2_848_301.0),
    ("Rome", 2_777_556.0),
    ("Paris", 2_203_921.0),
];

/// Population used for Paris in the metastable variant.
pub const PARIS_OVERRIDE: f64 = 1e9;

/// Road connection with its travel time and distance.
#[derive(Debug, Clone, PartialEq)]
pub struct EuropeEdge {
    pub a: String,
    pub b: String,
    pub hours: u32,
    pub minutes: u32,
    pub km: f64,
}

impl EuropeEdge {
    fn new(a: &str, b: &str, hours: u32, minutes: u32, km: f64) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            hours,
            minutes,
            km,
        }
    }

    pub fn days(&self) -> f64 {
        (self.hours as f64 + self.minutes as f64 / 60.0) / 24.0
    }

    fn key(&self) -> (String, String) {
        if self.a <= self.b {
            (self.a.clone(), self.b.clone())
        } else {
            (self.b.clone(), self.a.clone())
        }
    }
}

fn europe_edges() -> Vec<EuropeEdge> {
    vec![
        EuropeEdge::new("London", "Paris", 5, 6, 454.0),
        EuropeEdge::new("London", "Berlin", 10, 25, 1098.0),
        EuropeEdge::new("Madrid", "Paris", 11, 10, 1270.0),
        EuropeEdge::new("Rome", "Paris", 12, 46, 1419.0),
        EuropeEdge::new("Berlin", "Paris", 9, 18, 1055.0),
        EuropeEdge::new("Berlin", "Kiev", 14, 41, 1329.0),
        EuropeEdge::new("Berlin", "Istanbul", 21, 39, 2210.0),
        EuropeEdge::new("Kiev", "Istanbul", 19, 0, 1459.0),
        EuropeEdge::new("Rome", "Istanbul", 22, 46, 2262.0),
        EuropeEdge::new("Athens", "Istanbul", 11, 13, 1095.0),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EuropeConfig {
    pub populations: BTreeMap<String, f64>,
    pub edges: Vec<EuropeEdge>,
    /// Diagonal of the travel-time value matrix, in days (0 or 1).
    pub stay_value: f64,
    pub paris_override: Option<f64>,
}

impl Default for EuropeConfig {
    fn default() -> Self {
        Self {
            populations: EUROPE_POPULATIONS
                .iter()
                .map(|&(c, p)| (c.to_string(), p))
                .collect(),
            edges: europe_edges(),
            stay_value: 0.0,
            paris_override: None,
        }
    }
}

impl EuropeConfig {
    pub fn modified() -> Self {
        Self {
            paris_override: Some(PARIS_OVERRIDE),
            ..Self::default()
        }
    }

    fn population(&self, city: &str) -> Result<f64> {
        if city == "Paris" {
            if let Some(p) = self.paris_override {
                return positive(city, p);
            }
        }
        let p = *self
            .populations
            .get(city)
            .ok_or_else(|| Error::Domain(format!("no population for {city}")))?;
        positive(city, p)
    }

    fn validate_edges(&self) -> Result<()> {
        let mut want: Vec<_> = europe_edges().iter().map(EuropeEdge::key).collect();
        let mut have: Vec<_> = self.edges.iter().map(EuropeEdge::key).collect();
        want.sort();
        have.sort();
        if want != have {
            return Err(Error::Domain(
                "Europe adjacency must be exactly the ten road connections".into(),
            ));
        }
        for e in &self.edges {
            if !(e.km.is_finite() && e.km >= 0.0) || e.minutes >= 60 {
                return Err(Error::Domain(format!(
                    "bad time or distance on {}-{}",
                    e.a, e.b
                )));
            }
        }
        Ok(())
    }

    fn neighbours(&self, city: usize) -> Vec<usize> {
        let name = EUROPE_CITIES[city];
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|e| {
                let other = if e.a == name {
                    &e.b
                } else if e.b == name {
                    &e.a
                } else {
                    return None;
                };
                EUROPE_CITIES.iter().position(|c| c == other)
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn edge(&self, i: usize, j: usize) -> Option<&EuropeEdge> {
        let (a, b) = (EUROPE_CITIES[i], EUROPE_CITIES[j]);
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }
}

fn positive(city: &str, p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Domain(format!("population of {city} must be positive, got {p}")));
    }
    Ok(p)
}

/// Daily moves between connected cities with probability proportional to
/// the population of the next city (staying counts as moving to itself).
/// Istanbul is absorbing.
pub fn europe_tour(config: &EuropeConfig) -> Result<ChainModel> {
    config.validate_edges()?;
    let pops: Vec<f64> = EUROPE_CITIES
        .iter()
        .map(|c| config.population(c))
        .collect::<Result<_>>()?;
    let n = EUROPE_CITIES.len();
    let mut t = DMatrix::zeros(n, n);
    t[(0, 0)] = 1.0;
    for i in 1..n {
        let mut support = config.neighbours(i);
        support.push(i);
        let total: f64 = support.iter().map(|&j| pops[j]).sum();
        for &j in &support {
            t[(i, j)] = pops[j] / total;
        }
    }
    ChainModel::new(
        EUROPE_CITIES.iter().map(|s| s.to_string()).collect(),
        t,
        0,
        None,
    )
}

/// The Europe tour with the population of Paris set to one billion.
pub fn europe_tour_modified(config: &EuropeConfig) -> Result<ChainModel> {
    let cfg = EuropeConfig {
        paris_override: Some(PARIS_OVERRIDE),
        ..config.clone()
    };
    europe_tour(&cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EuropeValue {
    /// Road distance in km; staying is free.
    Distance,
    /// Travel time in days; staying costs `stay_value`.
    TravelTime,
}

pub fn europe_values(config: &EuropeConfig, kind: EuropeValue) -> Result<ValueMatrix> {
    config.validate_edges()?;
    let n = EUROPE_CITIES.len();
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                if kind == EuropeValue::TravelTime && i != 0 {
                    v[(i, j)] = config.stay_value;
                }
            } else if let Some(e) = config.edge(i, j) {
                v[(i, j)] = match kind {
                    EuropeValue::Distance => e.km,
                    EuropeValue::TravelTime => e.days(),
                };
            }
        }
    }
    Ok(match kind {
        EuropeValue::Distance => ValueMatrix::new("distance", "km", v),
        EuropeValue::TravelTime => ValueMatrix::new("time", "days", v),
    })
}

/// Three-state MDP with two actions and two randomness outcomes, plus the
/// policy that turns it into the coin toss chain with `p_heads = p_gamma2`.
pub fn figure5_mdp(p_gamma2: f64) -> Result<(MdpModel, Policy)> {
    check_closed_unit("p_gamma2", p_gamma2)?;
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    // successor[state][gamma][action], states x1 (halt), x2, x3
    let successor = vec![
        vec![vec![0, 0], vec![0, 0]],
        // x2: (g1, z1) -> x1, (g1, z2) -> x2, (g2, z1) -> x3, (g2, z2) -> x1
        vec![vec![0, 1], vec![2, 0]],
        // x3: (g1, z1) -> x2, (g1, z2) -> x1, (g2, z1) -> x1, (g2, z2) -> x1
        vec![vec![1, 0], vec![0, 0]],
    ];
    let mdp = MdpModel::new(
        names(&["x1", "x2", "x3"]),
        names(&["zeta1", "zeta2"]),
        names(&["gamma1", "gamma2"]),
        0,
        successor,
        vec![1.0 - p_gamma2, p_gamma2],
        None,
    )?;
    let policy = Policy::new(3, 2)
        .with(1, 0, 1)
        .with(1, 1, 0)
        .with(2, 0, 0)
        .with(2, 1, 1);
    Ok((mdp, policy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_rows() {
        let c = coin_toss(0.5).unwrap();
        let t = c.transitions();
        assert_eq!([t[(1, 0)], t[(1, 1)], t[(1, 2)]], [0.0, 0.5, 0.5]);
        assert!(matches!(coin_toss(0.0), Err(Error::Domain(_))));
        assert!(matches!(coin_toss(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn sis_certain_recovery() {
        let c = sis_two_node(1.0, 0.3).unwrap();
        assert_eq!(c.transitions()[(3, 0)], 1.0);
        assert!(matches!(sis_two_node(1.2, 0.3), Err(Error::Domain(_))));
    }

    #[test]
    fn london_row_matches_calibration() {
        let c = europe_tour(&EuropeConfig::default()).unwrap();
        let t = c.transitions();
        assert!((t[(1, 1)] - 0.5922).abs() < 1e-3);
        assert!((t[(1, 3)] - 0.2507).abs() < 1e-3);
        assert!((t[(1, 7)] - 0.1571).abs() < 1e-3);
        let support: Vec<usize> = (0..8).filter(|&j| t[(1, j)] > 0.0).collect();
        assert_eq!(support, vec![1, 3, 7]);
    }

    #[test]
    fn athens_only_connects_to_istanbul() {
        let c = europe_tour(&EuropeConfig::default()).unwrap();
        let support: Vec<usize> = (0..8).filter(|&j| c.transitions()[(2, j)] > 0.0).collect();
        assert_eq!(support, vec![0, 2]);
    }

    #[test]
    fn rows_are_scale_invariant() {
        let base = europe_tour(&EuropeConfig::default()).unwrap();
        let mut scaled = EuropeConfig::default();
        scaled.populations.values_mut().for_each(|p| *p *= 7.5);
        let other = europe_tour(&scaled).unwrap();
        assert!((base.transitions() - other.transitions()).amax() < 1e-15);
    }

    #[test]
    fn europe_config_errors() {
        let mut cfg = EuropeConfig::default();
        cfg.populations.insert("Rome".into(), -1.0);
        assert!(matches!(europe_tour(&cfg), Err(Error::Domain(_))));
        let mut cfg = EuropeConfig::default();
        cfg.edges.pop();
        assert!(matches!(europe_tour(&cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn value_matrices() {
        let cfg = EuropeConfig {
            stay_value: 1.0,
            ..EuropeConfig::default()
        };
        let d = europe_values(&cfg, EuropeValue::Distance).unwrap();
        assert_eq!(d.values[(1, 3)], 1098.0);
        assert_eq!(d.values[(3, 1)], 1098.0);
        assert_eq!(d.values[(1, 1)], 0.0);
        let t = europe_values(&cfg, EuropeValue::TravelTime).unwrap();
        assert!((t.values[(2, 0)] - 0.4673611111).abs() < 1e-9);
        assert_eq!(t.values[(5, 5)], 1.0);
        assert_eq!(t.values[(0, 0)], 0.0);
    }

    #[test]
    fn toy_mdp_policy_lookup() {
        let (mdp, pi) = figure5_mdp(0.01).unwrap();
        assert_eq!(pi.action(1, 0), Some(1));
        assert_eq!(mdp.action_names()[1], "zeta2");
        assert_eq!(pi.action(0, 0), None);
    }
}
