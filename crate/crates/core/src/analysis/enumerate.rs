//! Exact output distributions by enumeration, and a Monte Carlo fallback.
//!
//! Given the data, each client's contribution `(y_u, ℓ_u)` is independent
//! with probability `R[x_u][y_u] · q_u[ℓ_u]`, where `q_u` is the `T`-step walk
//! distribution from `u` (or the stationary distribution for the infinite
//! protocol). The curator's view only depends on the multiset partition, so
//! clients are folded in one at a time and partial partitions are merged as
//! soon as they coincide.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::distribution::OutcomeDistribution;
use crate::error::{Error, Result};
use crate::graph;
use crate::protocol::{derive_trial_seed, MultisetPartition, Protocol, ProtocolConfig, Simulator};

/// Default cap on the nominal number of weighted atoms.
pub const DEFAULT_BUDGET: f64 = 1e7;

/// States per parallel work unit. Fixed so the reduction order does not
/// depend on the number of worker threads.
const CHUNK: usize = 512;

/// One client's possible contributions: `None` means it released nothing.
type ClientOptions = Vec<(Option<(usize, usize)>, f64)>;

fn client_options(
    sim: &Simulator<'_>,
    cfg: &ProtocolConfig,
    data: &[usize],
) -> Result<Vec<ClientOptions>> {
    let n = cfg.n();
    let stationary = match sim.protocol() {
        Protocol::Infinite => Some(graph::stationary_distribution(&cfg.graph)?),
        _ => None,
    };
    let keep = match sim.protocol() {
        Protocol::SmplWlk { p } => *p,
        _ => 1.0,
    };
    let mut all = Vec::with_capacity(n);
    for (u, &x) in data.iter().enumerate() {
        let mut options = Vec::new();
        if !sim.is_eligible(u) {
            options.push((None, 1.0));
            all.push(options);
            continue;
        }
        if keep < 1.0 {
            options.push((None, 1.0 - keep));
        }
        let dest = match &stationary {
            Some(pi) => pi.clone(),
            None => graph::walk_distribution(&cfg.graph, u, sim.rounds().unwrap_or(0))?,
        };
        let row = cfg.randomizer.row(x)?;
        for (y, &py) in row.iter().enumerate() {
            for (l, &pl) in dest.probs().iter().enumerate() {
                let w = keep * py * pl;
                if w > 0.0 {
                    options.push((Some((y, l)), w));
                }
            }
        }
        all.push(options);
    }
    Ok(all)
}

/// Nominal enumeration size: `(k_out · n)` choices per releasing client,
/// one more when sampling can skip the client.
pub fn enumeration_size(protocol: &Protocol, cfg: &ProtocolConfig) -> f64 {
    let n = cfg.n();
    let per_client = (cfg.randomizer.output_size() * n) as f64;
    let releasing = match protocol {
        Protocol::Restricted { clients } => {
            let mut c = clients.clone();
            c.sort_unstable();
            c.dedup();
            c.len()
        }
        _ => n,
    };
    let per_client = match protocol {
        Protocol::SmplWlk { .. } => per_client + 1.0,
        _ => per_client,
    };
    per_client.powi(releasing as i32)
}

/// Exact law of the curator's view for `data` under `protocol`.
pub fn exact_output_distribution(
    protocol: &Protocol,
    cfg: &ProtocolConfig,
    data: &[usize],
    budget: f64,
) -> Result<OutcomeDistribution> {
    let required = enumeration_size(protocol, cfg);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let sim = Simulator::new(cfg, protocol.clone())?;
    sim.check_data(data)?;
    let options = client_options(&sim, cfg, data)?;

    let mut states: Vec<(MultisetPartition, f64)> = vec![(MultisetPartition::empty(cfg.n()), 1.0)];
    for opts in &options {
        let partials: Vec<BTreeMap<MultisetPartition, f64>> = states
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut local = BTreeMap::new();
                for (state, ps) in chunk {
                    for (choice, w) in opts {
                        let mut next = state.clone();
                        if let Some((y, l)) = choice {
                            next.insert(*l, *y);
                        }
                        *local.entry(next).or_insert(0.0) += ps * w;
                    }
                }
                local
            })
            .collect();
        let mut merged = BTreeMap::new();
        for local in partials {
            for (k, p) in local {
                *merged.entry(k).or_insert(0.0) += p;
            }
        }
        states = merged.into_iter().collect();
    }
    Ok(OutcomeDistribution::from_map_unchecked(
        states.into_iter().collect(),
    ))
}

/// Monte Carlo frequencies of the curator's view. Results are estimates
/// and come with Wilson intervals, never bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatedDistribution {
    pub trials: usize,
    pub counts: BTreeMap<MultisetPartition, u64>,
}

impl EstimatedDistribution {
    pub fn frequency(&self, key: &MultisetPartition) -> f64 {
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.trials as f64
    }

    /// Wilson score interval at `z` standard deviations.
    pub fn wilson_interval(&self, key: &MultisetPartition, z: f64) -> (f64, f64) {
        wilson_interval(self.counts.get(key).copied().unwrap_or(0), self.trials, z)
    }

    pub fn to_distribution(&self) -> OutcomeDistribution {
        OutcomeDistribution::from_map_unchecked(
            self.counts
                .iter()
                .map(|(k, &c)| (k.clone(), c as f64 / self.trials as f64))
                .collect(),
        )
    }
}

pub fn wilson_interval(successes: u64, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Runs `trials` simulations (seeds derived from `cfg.seed`) and tallies
/// the outcomes.
pub fn monte_carlo_output_distribution(
    protocol: &Protocol,
    cfg: &ProtocolConfig,
    data: &[usize],
    trials: usize,
) -> Result<EstimatedDistribution> {
    let sim = Simulator::new(cfg, protocol.clone())?;
    sim.check_data(data)?;
    let partials: Vec<BTreeMap<MultisetPartition, u64>> = (0..trials)
        .collect::<Vec<_>>()
        .par_chunks(4096)
        .map(|chunk| {
            let mut local = BTreeMap::new();
            for &i in chunk {
                let seed = derive_trial_seed(cfg.seed, i as u64);
                let out = sim.run(data, seed)?;
                *local.entry(out).or_insert(0) += 1;
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;
    let mut counts = BTreeMap::new();
    for local in partials {
        for (k, c) in local {
            *counts.entry(k).or_insert(0) += c;
        }
    }
    Ok(EstimatedDistribution { trials, counts })
}
