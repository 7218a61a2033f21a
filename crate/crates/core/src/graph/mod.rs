//! Communication graphs and the simple random walk on them.
//!
//! The walk moves from `u` to a uniformly chosen neighbour, so its transition
//! operator is `P = A D^-1` acting on column vectors of position
//! probabilities. Everything here is exact linear algebra in `f64`; the
//! spectral part lives in [`spectral`].

mod edge_list;
mod spectral;
mod topology;

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use edge_list::{parse_edge_list, read_edge_list, to_edge_list};
pub use spectral::{spectral_gap, SpectralInfo, EIGEN_TOLERANCE};
pub use topology::{generate_topology, Topology, MAX_TOPOLOGY_ATTEMPTS};

/// Undirected simple graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    n: usize,
    /// Normalised as `(min, max)` and sorted.
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Validates and builds a graph. Edge orientation in the input is
    /// irrelevant; `(1, 0)` and `(0, 1)` are the same edge.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::EndpointOutOfRange { u, v, n });
            }
            if u == v {
                return Err(Error::SelfLoop { u, v });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::DuplicateEdge { u, v });
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let degrees = adjacency.iter().map(Vec::len).collect();
        Ok(Graph {
            n,
            edges: seen.into_iter().collect(),
            adjacency,
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degrees[u]
    }

    /// Sorted neighbour list of `u`.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub(crate) fn require_no_isolated(&self) -> Result<()> {
        match self.degrees.iter().position(|&d| d == 0) {
            Some(v) => Err(Error::IsolatedVertex(v)),
            None => Ok(()),
        }
    }

    /// Connectivity by BFS and bipartiteness by 2-colouring.
    pub fn ergodicity(&self) -> ErgodicityReport {
        let mut colour: Vec<Option<bool>> = vec![None; self.n];
        let mut bipartite = true;
        let mut components = 0;
        let mut queue = VecDeque::new();
        for root in 0..self.n {
            if colour[root].is_some() {
                continue;
            }
            components += 1;
            colour[root] = Some(false);
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                let cu = colour[u].unwrap();
                for &v in &self.adjacency[u] {
                    match colour[v] {
                        None => {
                            colour[v] = Some(!cu);
                            queue.push_back(v);
                        }
                        Some(cv) if cv == cu => bipartite = false,
                        Some(_) => {}
                    }
                }
            }
        }
        ErgodicityReport::new(components == 1, bipartite)
    }

    pub fn require_ergodic(&self) -> Result<ErgodicityReport> {
        let report = self.ergodicity();
        if report.ergodic {
            Ok(report)
        } else {
            Err(Error::NonErgodic {
                connected: report.connected,
                bipartite: report.bipartite,
            })
        }
    }
}

/// Free-function form of [`Graph::new`].
pub fn build_graph(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
    Graph::new(n, edges.iter().copied())
}

/// Free-function form of [`Graph::ergodicity`].
pub fn validate_ergodic(g: &Graph) -> ErgodicityReport {
    g.ergodicity()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub connected: bool,
    pub bipartite: bool,
    pub ergodic: bool,
}

impl ErgodicityReport {
    fn new(connected: bool, bipartite: bool) -> Self {
        ErgodicityReport {
            connected,
            bipartite,
            ergodic: connected && !bipartite,
        }
    }
}

/// A probability vector over vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct VertexDistribution(Vec<f64>);

impl VertexDistribution {
    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        VertexDistribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn l1_distance(&self, other: &VertexDistribution) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for VertexDistribution {
    type Output = f64;
    fn index(&self, v: usize) -> &f64 {
        &self.0[v]
    }
}

/// Dense `P = A D^-1`: entry `(u, v)` is the probability of moving to `u`
/// from `v`, so every column sums to one.
pub fn transition_matrix(g: &Graph) -> Result<DMatrix<f64>> {
    g.require_no_isolated()?;
    let n = g.n();
    Ok(DMatrix::from_fn(n, n, |u, v| {
        if g.has_edge(u, v) {
            1.0 / g.degree(v) as f64
        } else {
            0.0
        }
    }))
}

/// Degree-proportional `π[u] = d_u / 2m`.
pub fn stationary_distribution(g: &Graph) -> Result<VertexDistribution> {
    if g.m() == 0 {
        return Err(Error::NoEdges);
    }
    let two_m = 2.0 * g.m() as f64;
    Ok(VertexDistribution(
        g.degrees().iter().map(|&d| d as f64 / two_m).collect(),
    ))
}

/// One application of `P` to a position distribution.
pub(crate) fn step(g: &Graph, p: &[f64], out: &mut [f64]) {
    for (v, slot) in out.iter_mut().enumerate() {
        *slot = g
            .neighbors(v)
            .iter()
            .map(|&u| p[u] / g.degree(u) as f64)
            .sum();
    }
}

/// Applies `P` to an arbitrary distribution.
pub fn apply_transition(g: &Graph, p: &VertexDistribution) -> Result<VertexDistribution> {
    g.require_no_isolated()?;
    let mut out = vec![0.0; g.n()];
    step(g, p.probs(), &mut out);
    Ok(VertexDistribution(out))
}

/// Exact `P^t e_start`.
pub fn walk_distribution(g: &Graph, start: usize, t: usize) -> Result<VertexDistribution> {
    if start >= g.n() {
        return Err(Error::ClientOutOfRange {
            client: start,
            n: g.n(),
        });
    }
    Ok(walk_trajectory(g, start, t)?
        .pop()
        .expect("trajectory is never empty"))
}

/// `[p_0, p_1, ..., p_t]` for a walk started at `start`.
pub fn walk_trajectory(g: &Graph, start: usize, t: usize) -> Result<Vec<VertexDistribution>> {
    g.require_no_isolated()?;
    if start >= g.n() {
        return Err(Error::ClientOutOfRange {
            client: start,
            n: g.n(),
        });
    }
    let mut out = Vec::with_capacity(t + 1);
    let mut current = VertexDistribution::point_mass(g.n(), start).into_vec();
    let mut next = vec![0.0; g.n()];
    out.push(VertexDistribution(current.clone()));
    for _ in 0..t {
        step(g, &current, &mut next);
        std::mem::swap(&mut current, &mut next);
        out.push(VertexDistribution(current.clone()));
    }
    Ok(out)
}

/// `P^t e_u` for every start vertex `u`, indexed by `u`.
pub fn all_walk_distributions(g: &Graph, t: usize) -> Result<Vec<VertexDistribution>> {
    (0..g.n()).map(|u| walk_distribution(g, u, t)).collect()
}

fn check_gap(gap: f64) -> Result<()> {
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(Error::param(format!(
            "spectral gap must lie in (0, 1] for an ergodic walk, got {gap}"
        )));
    }
    Ok(())
}

/// `√n (1 − gap)^t`, the L1 convergence envelope for an ergodic walk.
pub fn mixing_bound(n: usize, gap: f64, t: usize) -> Result<f64> {
    check_gap(gap)?;
    Ok((n as f64).sqrt() * (1.0 - gap).powf(t as f64))
}

/// `√((1 − π_u) / π_u) (1 − gap)^t`, the chi-square envelope for a walk
/// started at `u`. Unlike [`mixing_bound`] it holds on irregular graphs too.
pub fn degree_aware_mixing_bound(pi_start: f64, gap: f64, t: usize) -> Result<f64> {
    check_gap(gap)?;
    if !(pi_start > 0.0 && pi_start <= 1.0) {
        return Err(Error::param(
            "stationary mass of the start vertex must be in (0, 1]",
        ));
    }
    Ok(((1.0 - pi_start) / pi_start).sqrt() * (1.0 - gap).powf(t as f64))
}

/// Real values this close to an integer are treated as that integer before
/// taking the ceiling, so `ln(n^4.5 / n^4.5)` does not round up to one step.
const ROUNDS_SNAP: f64 = 1e-9;

/// `⌈(1 / gap) · ln(n^4.5 / eps0)⌉`, clamped at zero.
pub fn recommended_rounds(gap: f64, n: usize, eps0: f64) -> Result<usize> {
    check_gap(gap)?;
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::param(format!(
            "eps0 must be positive and finite, got {eps0}"
        )));
    }
    if n < 2 {
        return Err(Error::param("recommended rounds need n >= 2"));
    }
    let real = (4.5 * (n as f64).ln() - eps0.ln()) / gap;
    if real <= ROUNDS_SNAP {
        return Ok(0);
    }
    let nearest = real.round();
    let rounds = if (real - nearest).abs() <= ROUNDS_SNAP * real.max(1.0) {
        nearest
    } else {
        real.ceil()
    };
    Ok(rounds as usize)
}

/// Spectral gap plus [`recommended_rounds`] for an ergodic graph.
pub fn recommended_rounds_for(g: &Graph, eps0: f64) -> Result<usize> {
    g.require_ergodic()?;
    let info = spectral_gap(g)?;
    recommended_rounds(info.gap, g.n(), eps0)
}
