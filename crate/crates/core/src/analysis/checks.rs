//! Numerical checks of the walk and privacy guarantees on concrete instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::distribution::{empirical_epsilon, two_sided_hockey_stick, OutcomeDistribution};
use super::enumerate::exact_output_distribution;
use crate::bounds::{self, BoundInputs, PrivacyBound};
use crate::error::{Error, Result};
use crate::graph::{self, Graph};
use crate::protocol::{Protocol, ProtocolConfig};
use crate::randomizer::Randomizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub instance: Value,
    pub observed: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl CheckResult {
    pub fn new(check: &str, instance: Value, observed: f64, bound: f64, pass: bool) -> Self {
        CheckResult {
            check: check.to_owned(),
            instance,
            observed: Some(observed),
            bound: Some(bound),
            pass,
            status: if pass {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            details: None,
        }
    }

    /// A check that could not run, e.g. over budget. Counts as a pass
    /// unless the caller is strict.
    pub fn skipped(check: &str, instance: Value, reason: String) -> Self {
        CheckResult {
            check: check.to_owned(),
            instance,
            observed: None,
            bound: None,
            pass: true,
            status: CheckStatus::Skipped,
            details: Some(json!({ "reason": reason })),
        }
    }

    pub fn with_details(mut self, details: impl Serialize) -> Self {
        self.details = serde_json::to_value(details).ok();
        self
    }
}

/// Per-assignment ratios `Π q_u[ℓ_u] / Π π[ℓ_u]` over all `ℓ ∈ [n]^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub n: usize,
    #[serde(rename = "T")]
    pub rounds: usize,
    pub eps0: f64,
    pub assignments: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub ratio_pass: bool,
    /// `max_u ‖q_u − π‖₁`.
    pub max_deviation: f64,
    /// `ε₀ / n⁴`.
    pub deviation_bound: f64,
    pub deviation_pass: bool,
    pub pass: bool,
}

impl Lemma1Report {
    pub fn to_check(&self, instance: Value) -> CheckResult {
        CheckResult::new(
            "lemma1",
            instance,
            (self.max_ratio.ln()).max(-self.min_ratio.ln()),
            self.eps0 / (2.0 * self.n as f64),
            self.pass,
        )
        .with_details(self)
    }
}

fn ratio_bounds(eps0: f64, n: usize) -> (f64, f64) {
    let half = eps0 / (2.0 * n as f64);
    ((-half).exp(), half.exp())
}

pub fn lemma1_ratio_check(
    g: &Graph,
    rounds: usize,
    eps0: f64,
    budget: f64,
) -> Result<Lemma1Report> {
    if !(eps0 > 0.0) {
        return Err(Error::param(format!("eps0 must be positive, got {eps0}")));
    }
    let n = g.n();
    let required = (n as f64).powi(n as i32);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let pi = graph::stationary_distribution(g)?;
    let walks = graph::all_walk_distributions(g, rounds)?;
    let ratios: Vec<Vec<f64>> = walks
        .iter()
        .map(|q| {
            q.probs()
                .iter()
                .zip(pi.probs())
                .map(|(a, b)| a / b)
                .collect()
        })
        .collect();

    // Client 0's destination is fixed per task; the rest run as an odometer.
    let (min_ratio, max_ratio) = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            let mut digits = vec![0usize; n];
            digits[0] = first;
            loop {
                let r: f64 = digits
                    .iter()
                    .enumerate()
                    .map(|(u, &l)| ratios[u][l])
                    .product();
                lo = lo.min(r);
                hi = hi.max(r);
                let mut i = n - 1;
                loop {
                    if i == 0 {
                        return (lo, hi);
                    }
                    digits[i] += 1;
                    if digits[i] < n {
                        break;
                    }
                    digits[i] = 0;
                    i -= 1;
                }
            }
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));

    let (lower, upper) = ratio_bounds(eps0, n);
    let max_deviation = walks.iter().map(|q| q.l1_distance(&pi)).fold(0.0, f64::max);
    let deviation_bound = eps0 / (n as f64).powi(4);
    let ratio_pass = min_ratio >= lower && max_ratio <= upper;
    let deviation_pass = max_deviation <= deviation_bound;
    Ok(Lemma1Report {
        n,
        rounds,
        eps0,
        assignments: n.pow(n as u32) as u64,
        min_ratio,
        max_ratio,
        lower,
        upper,
        ratio_pass,
        max_deviation,
        deviation_bound,
        deviation_pass,
        pass: ratio_pass && deviation_pass,
    })
}

/// `P_walk(Z) / P_inf(Z)` over every singleton atom and random unions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRatioReport {
    pub atoms: usize,
    pub unions: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

pub fn event_ratio_check(
    walk: &OutcomeDistribution,
    infinite: &OutcomeDistribution,
    eps0: f64,
    n: usize,
    unions: usize,
    seed: u64,
) -> EventRatioReport {
    let support = walk.joint_support(infinite);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    let mut record = |pw: f64, pi: f64| {
        let r = if pi > 0.0 {
            pw / pi
        } else if pw > 0.0 {
            f64::INFINITY
        } else {
            return;
        };
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
    };
    for k in &support {
        record(walk.prob(k), infinite.prob(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..unions {
        let event: Vec<_> = support
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.5))
            .collect();
        record(
            walk.event_prob(event.iter().copied()),
            infinite.event_prob(event.iter().copied()),
        );
    }
    let (lower, upper) = ratio_bounds(eps0, n);
    EventRatioReport {
        atoms: support.len(),
        unions,
        min_ratio,
        max_ratio,
        lower,
        upper,
        pass: min_ratio >= lower && max_ratio <= upper,
    }
}

/// Checks `‖p_t − π‖₁ ≤ √n (1 − α)^t` from every start for `t ≤ 3T`, plus
/// the deviation precondition `max_u ‖q_u − π‖₁ ≤ ε₀ / n⁴` at `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub n: usize,
    pub gap: f64,
    #[serde(rename = "T")]
    pub rounds: usize,
    pub t_max: usize,
    pub slack: f64,
    /// Largest `‖p_t − π‖₁ − √n (1 − α)^t`.
    pub worst_excess: f64,
    pub worst_start: usize,
    pub worst_t: usize,
    pub envelope_pass: bool,
    /// Same, against `√((1 − π_u)/π_u) (1 − α)^t`.
    pub degree_aware_worst_excess: f64,
    pub degree_aware_pass: bool,
    pub max_deviation: f64,
    pub deviation_bound: f64,
    pub deviation_pass: bool,
    pub pass: bool,
}

impl MixingReport {
    pub fn to_check(&self, instance: Value) -> CheckResult {
        CheckResult::new("mixing", instance, self.worst_excess, self.slack, self.pass)
            .with_details(self)
    }
}

pub const MIXING_SLACK: f64 = 1e-12;

pub fn mixing_check(g: &Graph, eps0: f64, slack: f64) -> Result<MixingReport> {
    g.require_ergodic()?;
    let n = g.n();
    let gap = graph::spectral_gap(g)?.gap;
    let rounds = graph::recommended_rounds(gap, n, eps0)?;
    let t_max = 3 * rounds;
    let pi = graph::stationary_distribution(g)?;

    struct Start {
        excess: (f64, usize),
        degree_excess: f64,
        deviation: f64,
    }
    let per_start: Vec<Start> = (0..n)
        .into_par_iter()
        .map(|u| -> Result<Start> {
            let traj = graph::walk_trajectory(g, u, t_max)?;
            let mut excess = (f64::NEG_INFINITY, 0);
            let mut degree_excess = f64::NEG_INFINITY;
            for (t, p) in traj.iter().enumerate() {
                let dist = p.l1_distance(&pi);
                let e = dist - graph::mixing_bound(n, gap, t)?;
                if e > excess.0 {
                    excess = (e, t);
                }
                let d = dist - graph::degree_aware_mixing_bound(pi[u], gap, t)?;
                degree_excess = degree_excess.max(d);
            }
            Ok(Start {
                excess,
                degree_excess,
                deviation: traj[rounds].l1_distance(&pi),
            })
        })
        .collect::<Result<_>>()?;

    let (worst_start, worst) =
        per_start
            .iter()
            .enumerate()
            .fold((0, &per_start[0]), |acc, (u, s)| {
                if s.excess.0 > acc.1.excess.0 {
                    (u, s)
                } else {
                    acc
                }
            });
    let degree_aware_worst_excess = per_start
        .iter()
        .map(|s| s.degree_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_deviation = per_start.iter().map(|s| s.deviation).fold(0.0, f64::max);
    let deviation_bound = eps0 / (n as f64).powi(4);
    let envelope_pass = worst.excess.0 <= slack;
    let deviation_pass = max_deviation <= deviation_bound;
    Ok(MixingReport {
        n,
        gap,
        rounds,
        t_max,
        slack,
        worst_excess: worst.excess.0,
        worst_start,
        worst_t: worst.excess.1,
        envelope_pass,
        degree_aware_worst_excess,
        degree_aware_pass: degree_aware_worst_excess <= slack,
        max_deviation,
        deviation_bound,
        deviation_pass,
        pass: envelope_pass && deviation_pass,
    })
}

/// Binomial participant counts against the Bernstein interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub p: f64,
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    pub mean: f64,
    pub radius: f64,
    pub lb: f64,
    pub ub: f64,
    pub violations: usize,
    pub violation_fraction: f64,
    pub pass: bool,
}

impl ConcentrationReport {
    pub fn to_check(&self, instance: Value) -> CheckResult {
        CheckResult::new(
            "concentration",
            instance,
            self.violation_fraction,
            self.delta,
            self.pass,
        )
        .with_details(self)
    }
}

pub fn sampling_concentration_check(
    p: f64,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if trials == 0 {
        return Err(Error::param("concentration check needs at least one trial"));
    }
    let binom = Binomial::new(n as u64, p).map_err(|e| Error::param(format!("binomial: {e}")))?;
    let nf = n as f64;
    let mean = nf * p;
    let radius = bounds::bernstein_radius(nf * p * (1.0 - p), 1.0, delta)?;
    let lb = (mean - radius).max(0.0);
    let ub = (mean + radius).min(nf);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let violations = (0..trials)
        .map(|_| binom.sample(&mut rng) as f64)
        .filter(|&k| k < lb || k > ub)
        .count();
    let violation_fraction = violations as f64 / trials as f64;
    Ok(ConcentrationReport {
        p,
        n,
        delta,
        trials,
        mean,
        radius,
        lb,
        ub,
        violations,
        violation_fraction,
        pass: violation_fraction <= delta,
    })
}

/// Two datasets differing in one position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NeighborPair {
    pub base: Vec<usize>,
    pub position: usize,
    pub replacement: usize,
}

impl NeighborPair {
    pub fn new(base: Vec<usize>, position: usize, replacement: usize) -> Result<Self> {
        if position >= base.len() {
            return Err(Error::param(format!(
                "position {position} outside a dataset of length {}",
                base.len()
            )));
        }
        Ok(NeighborPair {
            base,
            position,
            replacement,
        })
    }

    pub fn datasets(&self) -> (Vec<usize>, Vec<usize>) {
        let mut other = self.base.clone();
        other[self.position] = self.replacement;
        (self.base.clone(), other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpEstimate {
    /// Smallest ε with two-sided divergence at most the target δ.
    pub eps_at_delta: f64,
    pub target_delta: f64,
    /// Two-sided divergence at `target_eps`.
    pub delta_at_eps: f64,
    pub target_eps: f64,
    pub pair_tested: NeighborPair,
}

pub fn estimate_dp(
    p: &OutcomeDistribution,
    q: &OutcomeDistribution,
    pair: &NeighborPair,
    delta: f64,
    eps: f64,
) -> DpEstimate {
    DpEstimate {
        eps_at_delta: empirical_epsilon(p, q, delta),
        target_delta: delta,
        delta_at_eps: two_sided_hockey_stick(p, q, eps),
        target_eps: eps,
        pair_tested: pair.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDpReport {
    pub protocol: String,
    pub eps0: f64,
    pub estimate: DpEstimate,
    pub theory: Option<PrivacyBound>,
    /// Empirical ε at the theory's δ, when the theory bound is valid.
    pub eps_at_theory_delta: Option<f64>,
    pub ldp_pass: bool,
    pub theory_pass: Option<bool>,
    pub pass: bool,
}

impl EmpiricalDpReport {
    pub fn to_check(&self, instance: Value) -> CheckResult {
        CheckResult::new(
            "empirical_dp",
            instance,
            self.estimate.eps_at_delta,
            self.eps0,
            self.pass,
        )
        .with_details(self)
    }
}

const LDP_SLACK: f64 = 1e-9;

fn theory_bound(
    protocol: &Protocol,
    randomizer: &Randomizer,
    n: usize,
    delta: f64,
) -> Option<PrivacyBound> {
    let inputs = BoundInputs::new(
        randomizer.claimed_eps0(),
        randomizer.claimed_delta0(),
        n,
        delta,
    )
    .ok()?;
    let bound = match protocol {
        Protocol::RndWlk | Protocol::Infinite => Some(bounds::netshuffle_bound(&inputs)),
        Protocol::SmplWlk { p } => bounds::smpl_wlk_bound(&inputs.with_p(*p).ok()?).ok(),
        Protocol::Restricted { clients } => {
            let mut c = clients.clone();
            c.sort_unstable();
            c.dedup();
            bounds::partial_shuffle_bound(&inputs.with_l(c.len()).ok()?).ok()
        }
    }?;
    Some(bound)
}

/// Exact empirical ε of `protocol` on a neighboring pair. Passes iff the
/// empirical ε is at most `ε₀` and, when the closed-form bound for this
/// protocol is valid, at most that bound at the bound's own δ.
pub fn empirical_dp_check(
    protocol: &Protocol,
    cfg: &ProtocolConfig,
    pair: &NeighborPair,
    delta: f64,
    budget: f64,
) -> Result<EmpiricalDpReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let (a, b) = pair.datasets();
    let p = exact_output_distribution(protocol, cfg, &a, budget)?;
    let q = exact_output_distribution(protocol, cfg, &b, budget)?;
    let eps0 = cfg.randomizer.claimed_eps0();
    let theory = theory_bound(protocol, &cfg.randomizer, cfg.n(), delta);
    let valid_theory = theory.as_ref().filter(|t| t.valid);
    let target_eps = valid_theory.and_then(|t| t.eps).unwrap_or(eps0);
    let estimate = estimate_dp(&p, &q, pair, delta, target_eps);

    let eps_at_theory_delta = valid_theory
        .and_then(|t| t.delta)
        .filter(|&d| d > 0.0 && d < 1.0)
        .map(|d| empirical_epsilon(&p, &q, d));
    let theory_pass = match (valid_theory, eps_at_theory_delta) {
        (Some(t), Some(e)) => Some(e <= t.eps_value() + LDP_SLACK),
        _ => None,
    };
    let ldp_pass = estimate.eps_at_delta <= eps0 + LDP_SLACK;
    Ok(EmpiricalDpReport {
        protocol: protocol.name().to_owned(),
        eps0,
        estimate,
        theory,
        eps_at_theory_delta,
        ldp_pass,
        theory_pass,
        pass: ldp_pass && theory_pass.unwrap_or(true),
    })
}

/// Tight local ε of the table against the claimed one.
pub fn ldp_check(randomizer: &Randomizer, instance: Value) -> CheckResult {
    let observed = randomizer.verify_ldp();
    let claimed = randomizer.claimed_eps0();
    CheckResult::new(
        "ldp",
        instance,
        observed,
        claimed,
        observed <= claimed + 1e-12,
    )
}

/// Largest atomwise difference between the stationary-destination output
/// on `data` and on each permutation of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShuffleInvarianceReport {
    pub permutations: usize,
    pub max_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const SHUFFLE_TOLERANCE: f64 = 1e-12;

pub fn shuffle_invariance_check(
    cfg: &ProtocolConfig,
    data: &[usize],
    budget: f64,
) -> Result<ShuffleInvarianceReport> {
    let reference = exact_output_distribution(&Protocol::Infinite, cfg, data, budget)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut permutations = 0;
    let mut max_difference = 0.0f64;
    loop {
        let permuted: Vec<usize> = order.iter().map(|&i| data[i]).collect();
        let dist = exact_output_distribution(&Protocol::Infinite, cfg, &permuted, budget)?;
        for k in reference.joint_support(&dist) {
            max_difference = max_difference.max((reference.prob(k) - dist.prob(k)).abs());
        }
        permutations += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(ShuffleInvarianceReport {
        permutations,
        max_difference,
        tolerance: SHUFFLE_TOLERANCE,
        pass: max_difference <= SHUFFLE_TOLERANCE,
    })
}

/// Lexicographic successor in place; `false` once the last one is reached.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
