//! Monte Carlo trajectory simulation of first passage times and values.
//!
//! Consecutive self-transitions are sampled in one draw: the number of extra
//! stays in state `i` is geometric with success probability `1 - T_s[i][i]`,
//! and the next distinct state follows the off-diagonal row renormalized.
//! This samples exactly the same first passage law as step-by-step simulation
//! but costs one draw per visit instead of one per step, which matters for
//! metastable chains where trajectories last ~10^4 steps.
//!
//! Trials run in fixed-size batches; batch `b` draws from a ChaCha8 stream
//! `b` keyed by the seed, so results do not depend on thread scheduling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use rayon::prelude::*;

use crate::chain::{ChainModel, StateDistribution};
use crate::error::{Error, Result};
use crate::spectral;

const BATCH: usize = 4096;
/// Step cap used when the chain has no finite MFPT.
pub const DEFAULT_CAP: u64 = 10_000_000;
/// Largest tolerated fraction of censored trajectories.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;
/// Quantile levels reported in every [`SimReport`].
pub const REPORTED_QUANTILES: [f64; 5] = [0.01, 0.1, 0.5, 0.9, 0.99];

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub trials: usize,
    pub seed: u64,
    pub max_steps: u64,
    pub completed: usize,
    pub censored: usize,
    pub mean_fpt: f64,
    pub std_fpt: f64,
    pub mean_fpv: Option<f64>,
    pub std_fpv: Option<f64>,
    pub fpt_quantiles: Vec<(f64, u64)>,
    pub start: StateDistribution,
    /// Completed first passage times, sorted ascending.
    samples: Vec<u64>,
}

impl SimReport {
    pub fn samples(&self) -> &[u64] {
        &self.samples
    }

    pub fn fpt_stderr(&self) -> f64 {
        self.std_fpt / (self.completed as f64).sqrt()
    }

    pub fn fpv_stderr(&self) -> Option<f64> {
        self.std_fpv.map(|s| s / (self.completed as f64).sqrt())
    }

    /// Inverse empirical CDF: smallest sample `x` with `F(x) >= q`.
    pub fn quantile(&self, q: f64) -> u64 {
        quantile(&self.samples, q)
    }

    /// Fraction of completed samples with `FPT >= x`.
    pub fn fraction_at_least(&self, x: f64) -> f64 {
        let below = self.samples.partition_point(|&s| (s as f64) < x);
        (self.samples.len() - below) as f64 / self.samples.len() as f64
    }

    /// Fraction of completed samples with `FPT <= x`.
    pub fn fraction_at_most(&self, x: f64) -> f64 {
        let upto = self.samples.partition_point(|&s| (s as f64) <= x);
        upto as f64 / self.samples.len() as f64
    }
}

fn quantile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Empirical `(1 - pr)` and `pr` quantiles of the first passage time.
pub fn empirical_quantiles(report: &SimReport, pr: f64) -> (f64, f64) {
    (report.quantile(1.0 - pr) as f64, report.quantile(pr) as f64)
}

struct StateSampler {
    self_value: f64,
    /// Extra stays before leaving; `None` when the state never self-loops.
    stays: Option<Geometric>,
    /// Next distinct state; `None` when the state never leaves.
    jump: Option<(WeightedIndex<f64>, Vec<usize>, Vec<f64>)>,
}

impl StateSampler {
    fn new(chain: &ChainModel, i: usize) -> Result<Self> {
        let t = chain.transitions();
        let n = chain.len();
        let values = chain.values().map(|v| &v.values);
        let value = |j: usize| values.map_or(0.0, |v| v[(i, j)]);
        let stay = t[(i, i)];
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut jump_values = Vec::new();
        for j in (0..n).filter(|&j| j != i && t[(i, j)] > 0.0) {
            targets.push(j);
            weights.push(t[(i, j)]);
            jump_values.push(value(j));
        }
        let jump = if targets.is_empty() {
            None
        } else {
            let w = WeightedIndex::new(&weights)
                .map_err(|e| Error::Domain(format!("row {i}: {e}")))?;
            Some((w, targets, jump_values))
        };
        let stays = if stay > 0.0 && jump.is_some() {
            let leave: f64 = weights.iter().sum();
            Some(
                Geometric::new(leave.min(1.0))
                    .map_err(|e| Error::Domain(format!("row {i}: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            self_value: value(i),
            stays,
            jump,
        })
    }
}

enum Outcome {
    Absorbed { steps: u64, value: f64 },
    Censored,
}

fn run_trajectory(
    samplers: &[StateSampler],
    halt: usize,
    mut x: usize,
    max_steps: u64,
    rng: &mut ChaCha8Rng,
) -> Outcome {
    let mut steps: u64 = 0;
    let mut value = 0.0;
    while x != halt {
        let s = &samplers[x];
        let Some((jump, targets, jump_values)) = &s.jump else {
            return Outcome::Censored;
        };
        if let Some(g) = &s.stays {
            let k = g.sample(rng);
            steps = steps.saturating_add(k);
            value += k as f64 * s.self_value;
        }
        let idx = jump.sample(rng);
        steps = steps.saturating_add(1);
        value += jump_values[idx];
        x = targets[idx];
        if steps > max_steps {
            return Outcome::Censored;
        }
    }
    Outcome::Absorbed { steps, value }
}

/// Default step cap: `1000 M` when the MFPT `M` is finite, else [`DEFAULT_CAP`].
pub fn default_max_steps(chain: &ChainModel) -> u64 {
    match spectral::analyze(&chain.canonicalize()) {
        Ok(s) if !s.is_trapped() => {
            let cap = 1000.0 / s.escape_prob;
            if cap >= u64::MAX as f64 {
                u64::MAX
            } else {
                (cap.ceil() as u64).max(1000)
            }
        }
        _ => DEFAULT_CAP,
    }
}

/// Samples `trials` trajectories from `start` until the halt state or
/// `max_steps` (default [`default_max_steps`]). Censored trajectories are
/// excluded from the statistics; more than 1% censoring is an error.
pub fn simulate(
    chain: &ChainModel,
    start: &StateDistribution,
    trials: usize,
    seed: u64,
    max_steps: Option<u64>,
) -> Result<SimReport> {
    if trials == 0 {
        return Err(Error::Domain("trials must be positive".into()));
    }
    let n = chain.len();
    if start.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: start.len(),
        });
    }
    let max_steps = max_steps.unwrap_or_else(|| default_max_steps(chain));
    let samplers: Vec<StateSampler> = (0..n)
        .map(|i| StateSampler::new(chain, i))
        .collect::<Result<_>>()?;
    let start_index = WeightedIndex::new(start.as_slice())
        .map_err(|e| Error::Domain(format!("start distribution: {e}")))?;
    let halt = chain.halt();

    let n_batches = trials.div_ceil(BATCH);
    let batches: Vec<Vec<Outcome>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(trials - b * BATCH);
            (0..count)
                .map(|_| {
                    let x0 = start_index.sample(&mut rng);
                    run_trajectory(&samplers, halt, x0, max_steps, &mut rng)
                })
                .collect()
        })
        .collect();

    let mut samples = Vec::with_capacity(trials);
    let mut values = Vec::with_capacity(trials);
    let mut censored = 0;
    for outcome in batches.into_iter().flatten() {
        match outcome {
            Outcome::Absorbed { steps, value } => {
                samples.push(steps);
                values.push(value);
            }
            Outcome::Censored => censored += 1,
        }
    }
    if censored as f64 > MAX_CENSORED_FRACTION * trials as f64 || samples.is_empty() {
        return Err(Error::Censoring { censored, trials });
    }

    let (mean_fpt, std_fpt) = mean_std(samples.iter().map(|&s| s as f64), samples.len());
    let (mean_fpv, std_fpv) = if chain.values().is_some() {
        let (m, s) = mean_std(values.iter().copied(), values.len());
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    samples.sort_unstable();
    let fpt_quantiles = REPORTED_QUANTILES
        .iter()
        .map(|&q| (q, quantile(&samples, q)))
        .collect();

    Ok(SimReport {
        trials,
        seed,
        max_steps,
        completed: samples.len(),
        censored,
        mean_fpt,
        std_fpt,
        mean_fpv,
        std_fpv,
        fpt_quantiles,
        start: start.clone(),
        samples,
    })
}

/// Mean and sample standard deviation (Welford).
fn mean_std(xs: impl Iterator<Item = f64>, n: usize) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, x) in xs.enumerate() {
        let d = x - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, var.sqrt())
}
