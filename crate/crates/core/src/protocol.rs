//! In-process simulation of the network-shuffle protocols.
//!
//! Every released value walks independently: forwarding in a round never
//! looks at what else a client holds, so simulating each value's walk on its
//! own gives the same joint law as the round-synchronised client loop.
//!
//! Randomness is split per client. For a trial seed `s`, client `u` draws
//! its randomizer output and walk steps from ChaCha stream `2u` and its
//! participation coin from stream `2u + 1`, both keyed by `s`. That keeps a
//! trial a pure function of `(config, data, s)` no matter how work is
//! scheduled, and makes `p = 1` sampling and `C = [n]` restriction replay
//! the plain walk bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Graph, VertexDistribution};
use crate::randomizer::{sample_index, Randomizer};

/// Walk length: a fixed count or `auto` (resolved from the spectral gap).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RoundsRepr", into = "RoundsRepr")]
pub enum Rounds {
    Fixed(usize),
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RoundsRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<RoundsRepr> for Rounds {
    type Error = Error;
    fn try_from(r: RoundsRepr) -> Result<Self> {
        match r {
            RoundsRepr::Count(t) => Ok(Rounds::Fixed(t)),
            RoundsRepr::Word(w) => w.parse(),
        }
    }
}

impl From<Rounds> for RoundsRepr {
    fn from(r: Rounds) -> Self {
        match r {
            Rounds::Fixed(t) => RoundsRepr::Count(t),
            Rounds::Auto => RoundsRepr::Word("auto".into()),
        }
    }
}

impl std::str::FromStr for Rounds {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Rounds::Auto);
        }
        s.parse()
            .map(Rounds::Fixed)
            .map_err(|_| Error::param(format!("rounds must be a count or `auto`, got `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub graph: Graph,
    pub randomizer: Randomizer,
    pub rounds: Rounds,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(graph: Graph, randomizer: Randomizer, rounds: Rounds, seed: u64) -> Self {
        ProtocolConfig {
            graph,
            randomizer,
            rounds,
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Fixed counts pass through; `auto` needs an ergodic graph and a
    /// private randomizer.
    pub fn resolve_rounds(&self) -> Result<usize> {
        match self.rounds {
            Rounds::Fixed(t) => Ok(t),
            Rounds::Auto => {
                let eps0 = self.randomizer.claimed_eps0();
                if !eps0.is_finite() {
                    return Err(Error::param(
                        "automatic rounds need a randomizer with finite eps0",
                    ));
                }
                graph::recommended_rounds_for(&self.graph, eps0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Protocol {
    /// Every client releases and walks for `T` rounds.
    RndWlk,
    /// Destinations drawn directly from the stationary distribution.
    Infinite,
    /// Each client participates independently with probability `p`.
    SmplWlk { p: f64 },
    /// Only the listed clients release.
    Restricted { clients: Vec<usize> },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::RndWlk => "rnd_wlk",
            Protocol::Infinite => "infinite",
            Protocol::SmplWlk { .. } => "smpl_wlk",
            Protocol::Restricted { .. } => "restricted",
        }
    }

    pub fn uses_walk(&self) -> bool {
        !matches!(self, Protocol::Infinite)
    }
}

/// Curator view: one multiset of randomized values per client, each kept
/// sorted so equal partitions compare and serialise identically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultisetPartition(Vec<Vec<usize>>);

impl MultisetPartition {
    pub fn empty(n: usize) -> Self {
        MultisetPartition(vec![Vec::new(); n])
    }

    pub fn from_lists(mut per_client: Vec<Vec<usize>>) -> Self {
        for list in &mut per_client {
            list.sort_unstable();
        }
        MultisetPartition(per_client)
    }

    /// Adds one value to client `at`, keeping the canonical order.
    pub fn insert(&mut self, at: usize, value: usize) {
        let list = &mut self.0[at];
        let pos = list.partition_point(|&x| x <= value);
        list.insert(pos, value);
    }

    pub fn per_client(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    /// Total number of values held.
    pub fn released(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    /// Union of all multisets, sorted.
    pub fn union(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.0.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Compact JSON used as the canonical byte encoding.
    pub fn canonical_string(&self) -> String {
        serde_json::to_string(&self.0).expect("plain integer lists always serialise")
    }
}

/// Analyst-side record of a trial: what each origin client released and
/// where it ended up. `None` marks a client that did not release.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub values: Vec<Option<usize>>,
    pub destinations: Vec<Option<usize>>,
}

impl Trace {
    pub fn partition(&self) -> MultisetPartition {
        let mut out = MultisetPartition::empty(self.values.len());
        for (value, dest) in self.values.iter().zip(&self.destinations) {
            if let (Some(value), Some(dest)) = (value, dest) {
                out.insert(*dest, *value);
            }
        }
        out
    }
}

const WALK_STREAM: u64 = 0;
const COIN_STREAM: u64 = 1;

fn client_rng(trial_seed: u64, client: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(2 * client as u64 + purpose);
    rng
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `index` under master seed `master`.
pub fn derive_trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// A validated `(config, protocol)` pair ready to run trials.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    cfg: &'a ProtocolConfig,
    protocol: Protocol,
    rounds: Option<usize>,
    releasing: Vec<bool>,
    stationary: Option<VertexDistribution>,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a ProtocolConfig, protocol: Protocol) -> Result<Self> {
        let n = cfg.n();
        let mut releasing = vec![true; n];
        match &protocol {
            Protocol::SmplWlk { p } if !(0.0..=1.0).contains(p) => {
                return Err(Error::param(format!(
                    "sampling probability {p} outside [0, 1]"
                )));
            }
            Protocol::Restricted { clients } => {
                releasing = vec![false; n];
                for &c in clients {
                    if c >= n {
                        return Err(Error::ClientOutOfRange { client: c, n });
                    }
                    releasing[c] = true;
                }
            }
            _ => {}
        }
        let (rounds, stationary) = if protocol.uses_walk() {
            cfg.graph.require_no_isolated()?;
            (Some(cfg.resolve_rounds()?), None)
        } else {
            (None, Some(graph::stationary_distribution(&cfg.graph)?))
        };
        Ok(Simulator {
            cfg,
            protocol,
            rounds,
            releasing,
            stationary,
        })
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    /// Walk length, or `None` for the stationary-destination protocol.
    pub fn rounds(&self) -> Option<usize> {
        self.rounds
    }

    /// Whether client `u` releases (before any sampling coin).
    pub fn is_eligible(&self, u: usize) -> bool {
        self.releasing[u]
    }

    pub(crate) fn check_data(&self, data: &[usize]) -> Result<()> {
        if data.len() != self.cfg.n() {
            return Err(Error::DatasetSize {
                expected: self.cfg.n(),
                got: data.len(),
            });
        }
        let domain = self.cfg.randomizer.input_size();
        match data.iter().find(|&&x| x >= domain) {
            Some(&symbol) => Err(Error::SymbolOutOfRange { symbol, domain }),
            None => Ok(()),
        }
    }

    fn walk(&self, start: usize, rng: &mut ChaCha8Rng) -> usize {
        let g = &self.cfg.graph;
        let mut at = start;
        for _ in 0..self.rounds.unwrap_or(0) {
            let nb = g.neighbors(at);
            at = nb[rng.random_range(0..nb.len())];
        }
        at
    }

    /// One trial under `trial_seed`.
    pub fn trace(&self, data: &[usize], trial_seed: u64) -> Result<Trace> {
        self.check_data(data)?;
        let n = self.cfg.n();
        let mut values = vec![None; n];
        let mut destinations = vec![None; n];
        for u in 0..n {
            if !self.releasing[u] {
                continue;
            }
            if let Protocol::SmplWlk { p } = self.protocol {
                let mut coin = client_rng(trial_seed, u, COIN_STREAM);
                if !coin.random_bool(p) {
                    continue;
                }
            }
            let mut rng = client_rng(trial_seed, u, WALK_STREAM);
            let y = self.cfg.randomizer.apply(data[u], &mut rng)?;
            let dest = match &self.stationary {
                Some(pi) => sample_index(pi.probs(), &mut rng),
                None => self.walk(u, &mut rng),
            };
            values[u] = Some(y);
            destinations[u] = Some(dest);
        }
        Ok(Trace {
            values,
            destinations,
        })
    }

    pub fn run(&self, data: &[usize], trial_seed: u64) -> Result<MultisetPartition> {
        Ok(self.trace(data, trial_seed)?.partition())
    }

    /// `trials` runs with seeds derived from the config's master seed,
    /// returned in trial order.
    pub fn run_trials(&self, data: &[usize], trials: usize) -> Result<Vec<TrialRecord>> {
        self.check_data(data)?;
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let seed = derive_trial_seed(self.cfg.seed, i as u64);
                Ok(TrialRecord {
                    seed,
                    rounds: self.rounds,
                    per_client: self.run(data, seed)?,
                })
            })
            .collect()
    }

    /// Counts of where each origin client's value landed over `trials` runs.
    pub fn destination_summary(&self, data: &[usize], trials: usize) -> Result<DestinationSummary> {
        self.check_data(data)?;
        let n = self.cfg.n();
        let traces: Vec<Trace> = (0..trials)
            .into_par_iter()
            .map(|i| self.trace(data, derive_trial_seed(self.cfg.seed, i as u64)))
            .collect::<Result<_>>()?;
        let mut counts = vec![vec![0u64; n]; n];
        let mut released = vec![0u64; n];
        for trace in &traces {
            for (u, dest) in trace.destinations.iter().enumerate() {
                if let Some(v) = dest {
                    counts[u][*v] += 1;
                    released[u] += 1;
                }
            }
        }
        Ok(DestinationSummary {
            trials,
            rounds: self.rounds,
            counts,
            released,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    #[serde(rename = "T")]
    pub rounds: Option<usize>,
    pub per_client: MultisetPartition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DestinationSummary {
    pub trials: usize,
    #[serde(rename = "T")]
    pub rounds: Option<usize>,
    /// `counts[u][v]`: trials in which client `u`'s value ended at `v`.
    pub counts: Vec<Vec<u64>>,
    pub released: Vec<u64>,
}

impl DestinationSummary {
    /// Row-normalised by the number of trials.
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / self.trials as f64).collect())
            .collect()
    }
}

pub fn run_rnd_wlk(
    cfg: &ProtocolConfig,
    data: &[usize],
    trial_seed: u64,
) -> Result<MultisetPartition> {
    Simulator::new(cfg, Protocol::RndWlk)?.run(data, trial_seed)
}

pub fn run_infinite(
    cfg: &ProtocolConfig,
    data: &[usize],
    trial_seed: u64,
) -> Result<MultisetPartition> {
    Simulator::new(cfg, Protocol::Infinite)?.run(data, trial_seed)
}

pub fn run_smpl_wlk(
    cfg: &ProtocolConfig,
    data: &[usize],
    p: f64,
    trial_seed: u64,
) -> Result<MultisetPartition> {
    Simulator::new(cfg, Protocol::SmplWlk { p })?.run(data, trial_seed)
}

pub fn run_restricted(
    cfg: &ProtocolConfig,
    data: &[usize],
    clients: &[usize],
    trial_seed: u64,
) -> Result<MultisetPartition> {
    Simulator::new(
        cfg,
        Protocol::Restricted {
            clients: clients.to_vec(),
        },
    )?
    .run(data, trial_seed)
}
