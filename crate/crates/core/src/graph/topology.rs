use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Redraw limit for the random families.
pub const MAX_TOPOLOGY_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Complete,
    Cycle,
    Path,
    /// Centre is vertex 0.
    Star,
    ErdosRenyi {
        p: f64,
    },
    RandomRegular {
        d: usize,
    },
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::Complete => "complete",
            Topology::Cycle => "cycle",
            Topology::Path => "path",
            Topology::Star => "star",
            Topology::ErdosRenyi { .. } => "erdos_renyi",
            Topology::RandomRegular { .. } => "random_regular",
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(
            self,
            Topology::ErdosRenyi { .. } | Topology::RandomRegular { .. }
        )
    }
}

/// Deterministic in `(kind, n, seed)`. Random families are redrawn until
/// the result is connected and non-bipartite.
pub fn generate_topology(kind: &Topology, n: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    match *kind {
        Topology::Complete => Graph::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))),
        Topology::Cycle => {
            if n < 3 {
                return Err(Error::param("a cycle needs n >= 3"));
            }
            Graph::new(n, (0..n).map(|u| (u, (u + 1) % n)))
        }
        Topology::Path => Graph::new(n, (1..n).map(|v| (v - 1, v))),
        Topology::Star => {
            if n < 2 {
                return Err(Error::param("a star needs n >= 2"));
            }
            Graph::new(n, (1..n).map(|v| (0, v)))
        }
        Topology::ErdosRenyi { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("edge probability {p} outside [0, 1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            redraw(kind, n, || {
                let mut edges = Vec::new();
                for u in 0..n {
                    for v in u + 1..n {
                        if rng.random_bool(p) {
                            edges.push((u, v));
                        }
                    }
                }
                Some(edges)
            })
        }
        Topology::RandomRegular { d } => {
            if d == 0 || d >= n || !(n * d).is_multiple_of(2) {
                return Err(Error::param(format!(
                    "random_regular needs 0 < d < n and n*d even (n={n}, d={d})"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            redraw(kind, n, || pair_stubs(n, d, &mut rng))
        }
    }
}

fn redraw(
    kind: &Topology,
    n: usize,
    mut draw: impl FnMut() -> Option<Vec<(usize, usize)>>,
) -> Result<Graph> {
    for _ in 0..MAX_TOPOLOGY_ATTEMPTS {
        let Some(edges) = draw() else { continue };
        let g = Graph::new(n, edges)?;
        if g.ergodicity().ergodic {
            return Ok(g);
        }
    }
    Err(Error::RetriesExhausted {
        family: format!("{kind:?} on n={n}"),
        attempts: MAX_TOPOLOGY_ATTEMPTS,
    })
}

/// Configuration model: shuffle `n*d` stubs and pair neighbours. Returns
/// `None` when the pairing has a loop or a repeated edge.
fn pair_stubs(n: usize, d: usize, rng: &mut impl Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|u| std::iter::repeat_n(u, d)).collect();
    stubs.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = stubs
        .chunks_exact(2)
        .map(|pair| (pair[0].min(pair[1]), pair[0].max(pair[1])))
        .collect();
    if edges.iter().any(|(u, v)| u == v) {
        return None;
    }
    edges.sort_unstable();
    if edges.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some(edges)
}
