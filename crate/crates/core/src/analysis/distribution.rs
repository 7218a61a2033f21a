//! Finite distributions over outcomes and the divergences between them.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::MultisetPartition;

const MASS_TOLERANCE: f64 = 1e-9;

/// Probability of each outcome; atoms absent from the map have mass zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution<K: Ord = MultisetPartition> {
    atoms: BTreeMap<K, f64>,
}

impl<K: Ord + Clone> OutcomeDistribution<K> {
    /// Validates non-negativity and total mass (within 1e-9). Repeated keys
    /// are summed.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, p) in atoms {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::param(format!(
                    "atom probability {p} is not a probability"
                )));
            }
            *map.entry(k).or_insert(0.0) += p;
        }
        let dist = OutcomeDistribution { atoms: map };
        let total = dist.total();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::param(format!("atoms sum to {total}, not 1")));
        }
        Ok(dist)
    }

    pub(crate) fn from_map_unchecked(atoms: BTreeMap<K, f64>) -> Self {
        OutcomeDistribution { atoms }
    }

    pub fn prob(&self, key: &K) -> f64 {
        self.atoms.get(key).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.atoms.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.atoms.iter().map(|(k, &p)| (k, p))
    }

    pub fn atoms(&self) -> &BTreeMap<K, f64> {
        &self.atoms
    }

    /// Sorted union of both supports.
    pub fn joint_support<'a>(&'a self, other: &'a Self) -> Vec<&'a K> {
        let mut keys: Vec<&K> = self.atoms.keys().chain(other.atoms.keys()).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// Mass of an event given as a list of atoms.
    pub fn event_prob<'a>(&self, event: impl IntoIterator<Item = &'a K>) -> f64
    where
        K: 'a,
    {
        event.into_iter().map(|k| self.prob(k)).sum()
    }
}

/// `δ(ε) = Σ_z max(P(z) − e^ε Q(z), 0)`, clamped to `[0, 1]`.
pub fn hockey_stick<K: Ord + Clone>(
    p: &OutcomeDistribution<K>,
    q: &OutcomeDistribution<K>,
    eps: f64,
) -> f64 {
    let scale = eps.exp();
    let sum: f64 = p
        .iter()
        .map(|(k, pk)| match q.prob(k) {
            0.0 => pk,
            qk => (pk - scale * qk).max(0.0),
        })
        .sum();
    sum.clamp(0.0, 1.0)
}

/// `max(δ_{P‖Q}(ε), δ_{Q‖P}(ε))`.
pub fn two_sided_hockey_stick<K: Ord + Clone>(
    p: &OutcomeDistribution<K>,
    q: &OutcomeDistribution<K>,
    eps: f64,
) -> f64 {
    hockey_stick(p, q, eps).max(hockey_stick(q, p, eps))
}

/// Bisection width for [`empirical_epsilon`].
pub const EPSILON_TOLERANCE: f64 = 1e-6;

const EPSILON_SEARCH_CAP: f64 = 1024.0;

/// Smallest ε (to [`EPSILON_TOLERANCE`]) whose two-sided hockey-stick
/// divergence is at most `delta`. Returns `+∞` when no finite ε works,
/// which happens when one side puts more than `delta` on atoms the other
/// side never produces.
pub fn empirical_epsilon<K: Ord + Clone>(
    p: &OutcomeDistribution<K>,
    q: &OutcomeDistribution<K>,
    delta: f64,
) -> f64 {
    let within = |eps: f64| two_sided_hockey_stick(p, q, eps) <= delta;
    if within(0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !within(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > EPSILON_SEARCH_CAP {
            return f64::INFINITY;
        }
    }
    while hi - lo > EPSILON_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if within(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `½ Σ |P(z) − Q(z)|`.
pub fn tv_distance<K: Ord + Clone>(p: &OutcomeDistribution<K>, q: &OutcomeDistribution<K>) -> f64 {
    let sum: f64 = p
        .joint_support(q)
        .into_iter()
        .map(|k| (p.prob(k) - q.prob(k)).abs())
        .sum();
    (0.5 * sum).clamp(0.0, 1.0)
}
