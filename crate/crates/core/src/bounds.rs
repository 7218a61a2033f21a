//! Closed-form privacy-amplification calculators.
//!
//! Each calculator reports `valid = false` (and no `eps`/`delta`) outside the
//! region where its formula applies instead of returning an error, so sweeps
//! can emit one row per grid point. All logarithms are natural.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{self, Graph};

/// Parameters shared by the amplification bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub eps0: f64,
    pub delta0: f64,
    pub n: usize,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
}

impl BoundInputs {
    pub fn new(eps0: f64, delta0: f64, n: usize, delta: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::param(format!(
                "eps0 must be positive and finite, got {eps0}"
            )));
        }
        if !(0.0..=1.0).contains(&delta0) {
            return Err(Error::param(format!(
                "delta0 must lie in [0, 1], got {delta0}"
            )));
        }
        if n < 2 {
            return Err(Error::param(format!("n must be at least 2, got {n}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::param(format!(
                "delta must lie in (0, 1], got {delta}"
            )));
        }
        Ok(BoundInputs {
            eps0,
            delta0,
            n,
            delta,
            p: None,
            l: None,
        })
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("p must lie in [0, 1], got {p}")));
        }
        self.p = Some(p);
        Ok(self)
    }

    pub fn with_l(mut self, l: usize) -> Result<Self> {
        if l > self.n {
            return Err(Error::param(format!("l = {l} exceeds n = {}", self.n)));
        }
        self.l = Some(l);
        Ok(self)
    }

    fn n_f(&self) -> f64 {
        self.n as f64
    }
}

/// An `(eps, delta)` guarantee together with the condition under which the
/// formula holds. `eps`/`delta` are `None` when `valid` is false.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyBound {
    pub model: &'static str,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub valid: bool,
    pub validity_condition: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl PrivacyBound {
    fn new(model: &'static str, condition: impl Into<String>, values: Option<(f64, f64)>) -> Self {
        let values = values.filter(|(e, d)| e.is_finite() && d.is_finite());
        PrivacyBound {
            model,
            eps: values.map(|v| v.0),
            delta: values.map(|v| v.1),
            valid: values.is_some(),
            validity_condition: condition.into(),
            notes: Vec::new(),
        }
    }

    fn note(mut self, text: &str) -> Self {
        self.notes.push(text.to_owned());
        self
    }

    /// `eps`, panicking on an invalid bound. For tests and callers that
    /// already checked `valid`.
    pub fn eps_value(&self) -> f64 {
        self.eps.expect("bound is outside its validity region")
    }
}

const DELTA_PRIME_NOTE: &str =
    "delta' is evaluated with the shuffle-stage eps (before the eps0/n walk penalty)";

/// `ln(count / (16 ln(2/δ)))`, the largest ε₀ the shuffle bound accepts
/// with `count` reports. `-∞` when `count <= 0`.
pub fn shuffle_eps0_ceiling(count: f64, delta: f64) -> f64 {
    if count <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (count / (16.0 * (2.0 / delta).ln())).ln()
}

/// `ln(1 + tanh(ε₀/2) (scale · 8√(e^ε₀ ln(4/δ)) / √m + 8 e^ε₀ / m))`.
///
/// `(e^ε₀ − 1)/(e^ε₀ + 1)` is written as `tanh(ε₀/2)`.
fn shuffle_eps(eps0: f64, reports: f64, scale: f64, delta: f64) -> f64 {
    let e0 = eps0.exp();
    let variance_term = scale * 8.0 * (e0 * (4.0 / delta).ln()).sqrt() / reports.sqrt();
    let bias_term = 8.0 * e0 / reports;
    ((eps0 / 2.0).tanh() * (variance_term + bias_term)).ln_1p()
}

/// `δ + (e^ε + 1)(1 + e^−ε₀/2) · count · δ₀`.
///
/// `count` is the number of reports (n, ℓ, or the real `k + nλ(p)`).
pub fn delta_prime(eps: f64, eps0: f64, count: f64, delta: f64, delta0: f64) -> f64 {
    if delta0 == 0.0 {
        return delta;
    }
    delta + (eps.exp() + 1.0) * (1.0 + (-eps0).exp() / 2.0) * count * delta0
}

/// Uniform-shuffle amplification for `n` reports of an (ε₀, δ₀)-local
/// randomizer.
pub fn fmt_shuffle_bound(input: &BoundInputs) -> PrivacyBound {
    let cond = "eps0 <= ln(n / (16 ln(2/delta)))";
    if input.eps0 > shuffle_eps0_ceiling(input.n_f(), input.delta) {
        return PrivacyBound::new("fmt", cond, None);
    }
    let eps = shuffle_eps(input.eps0, input.n_f(), 1.0, input.delta);
    let delta = delta_prime(eps, input.eps0, input.n_f(), input.delta, input.delta0);
    PrivacyBound::new("fmt", cond, Some((eps, delta)))
}

/// Random-walk network shuffle run for the recommended number of rounds:
/// the uniform-shuffle ε plus `ε₀/n`, and δ′ inflated by `e^{ε₀/(2n)}`.
pub fn netshuffle_bound(input: &BoundInputs) -> PrivacyBound {
    let cond = "eps0 <= ln(n / (16 ln(2/delta)))";
    if input.eps0 > shuffle_eps0_ceiling(input.n_f(), input.delta) {
        return PrivacyBound::new("netshuffle", cond, None);
    }
    let n = input.n_f();
    let shuffle = shuffle_eps(input.eps0, n, 1.0, input.delta);
    let eps = input.eps0 / n + shuffle;
    let inner = delta_prime(shuffle, input.eps0, n, input.delta, input.delta0);
    let delta = (input.eps0 / (2.0 * n)).exp() * inner;
    PrivacyBound::new("netshuffle", cond, Some((eps, delta))).note(DELTA_PRIME_NOTE)
}

/// Amplification by sampling `l` of `n` records without replacement:
/// `ε′ = ln(1 + (l/n)(e^ε − 1))`, `δ′ = (l/n) δ`.
pub fn subsample_wor(eps: f64, delta: f64, l: usize, n: usize) -> Result<PrivacyBound> {
    if n == 0 {
        return Err(Error::param("subsampling needs n >= 1"));
    }
    if l > n {
        return Err(Error::param(format!("l = {l} exceeds n = {n}")));
    }
    if !(eps >= 0.0) || !(0.0..=1.0).contains(&delta) {
        return Err(Error::param(
            "subsampling needs eps >= 0 and delta in [0, 1]",
        ));
    }
    let frac = l as f64 / n as f64;
    let (eps_out, delta_out) = if l == n {
        (eps, delta)
    } else {
        ((frac * eps.exp_m1()).ln_1p(), frac * delta)
    };
    Ok(PrivacyBound::new(
        "subsample_wor",
        "0 <= l <= n",
        Some((eps_out, delta_out)),
    ))
}

/// `√((2p(1−p)/n) ln(2/δ)) + (2/(3n)) ln(2/δ)`.
pub fn lambda_p(p: f64, n: usize, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("p must lie in [0, 1], got {p}")));
    }
    if n == 0 {
        return Err(Error::param("lambda(p) needs n >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let n = n as f64;
    let log_term = (2.0 / delta).ln();
    Ok((2.0 * p * (1.0 - p) / n * log_term).sqrt() + 2.0 / (3.0 * n) * log_term)
}

/// Poisson-sampled network shuffle with participation probability `p`
/// (`k = np`, not necessarily an integer).
pub fn smpl_wlk_bound(input: &BoundInputs) -> Result<PrivacyBound> {
    let p = input
        .p
        .ok_or_else(|| Error::param("smpl_wlk bound needs p"))?;
    let cond = "k - n*lambda(p) > 0 and eps0 <= ln((k - n*lambda(p)) / (16 ln(2/delta))), k = n*p";
    let n = input.n_f();
    if input.delta >= 1.0 {
        return Ok(PrivacyBound::new("smpl_wlk", cond, None));
    }
    let lambda = lambda_p(p, input.n, input.delta)?;
    let k = n * p;
    if input.eps0 > shuffle_eps0_ceiling(k - n * lambda, input.delta) {
        return Ok(PrivacyBound::new("smpl_wlk", cond, None));
    }
    let inflation = k / n + lambda;
    let shuffle = shuffle_eps(input.eps0, n, inflation.sqrt(), input.delta);
    let eps = input.eps0 / n + shuffle;
    let inner = delta_prime(
        shuffle,
        input.eps0,
        k + n * lambda,
        input.delta,
        input.delta0,
    );
    let delta = input.delta + inflation * (input.eps0 / (2.0 * n)).exp() * inner;
    Ok(PrivacyBound::new("smpl_wlk", cond, Some((eps, delta))).note(DELTA_PRIME_NOTE))
}

/// Network shuffle where only `l` of the `n` clients report.
pub fn partial_shuffle_bound(input: &BoundInputs) -> Result<PrivacyBound> {
    let l = input
        .l
        .ok_or_else(|| Error::param("partial shuffle bound needs l"))?;
    let cond = "eps0 <= ln(l / (16 ln(2/delta)))";
    let lf = l as f64;
    if input.eps0 > shuffle_eps0_ceiling(lf, input.delta) {
        return Ok(PrivacyBound::new("partial", cond, None));
    }
    let n = input.n_f();
    let shuffle = shuffle_eps(input.eps0, lf, 1.0, input.delta);
    let eps = input.eps0 / n + shuffle;
    let inner = delta_prime(shuffle, input.eps0, lf, input.delta, input.delta0);
    let delta = (input.eps0 / (2.0 * n)).exp() * inner;
    Ok(PrivacyBound::new("partial", cond, Some((eps, delta)))
        .note("validity condition uses delta where the source statement writes delta0")
        .note(DELTA_PRIME_NOTE))
}

/// Topology-dependent quantity `√(Σ π[i]² + (1 − α)^{2T})` from the
/// earlier random-walk analysis (constants not included).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiewMetric {
    pub value: f64,
    /// `√(Σ π[i]²)`, the `T → ∞` limit on an ergodic graph.
    pub stationary_term: f64,
    /// Only computed for finite `T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(rename = "T")]
    pub rounds: Option<usize>,
    pub ergodic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// `rounds = None` means `T → ∞`. Bipartite graphs are accepted with a
/// warning; disconnected graphs are rejected.
pub fn liew_topology_metric(g: &Graph, rounds: Option<usize>) -> Result<LiewMetric> {
    let report = g.ergodicity();
    if !report.connected {
        return Err(Error::NonErgodic {
            connected: false,
            bipartite: report.bipartite,
        });
    }
    let pi = graph::stationary_distribution(g)?;
    let sum_sq: f64 = pi.probs().iter().map(|x| x * x).sum();
    let gap = match rounds {
        Some(_) => Some(graph::spectral_gap(g)?.gap),
        None => None,
    };
    let mixing = match (rounds, gap) {
        (Some(t), Some(gap)) => (1.0 - gap).powf(2.0 * t as f64),
        _ => 0.0,
    };
    let warning = (!report.ergodic).then(|| {
        "graph is bipartite: walks do not converge, the value uses the degree-based stationary distribution"
            .to_owned()
    });
    Ok(LiewMetric {
        value: (sum_sq + mixing).sqrt(),
        stationary_term: sum_sq.sqrt(),
        gap,
        rounds,
        ergodic: report.ergodic,
        warning,
    })
}

/// Bernstein deviation radius `√(2 σ² ln(2/β)) + 2c ln(2/β) / 3` for a sum
/// of independent variables bounded by `c` with total variance `σ²`.
pub fn bernstein_radius(variance: f64, c: f64, beta: f64) -> Result<f64> {
    if !(variance >= 0.0) || !(c > 0.0) || !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param(
            "bernstein radius needs variance >= 0, c > 0, beta in (0, 1)",
        ));
    }
    let log_term = (2.0 / beta).ln();
    Ok((2.0 * variance * log_term).sqrt() + 2.0 * c * log_term / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_topology, Topology};

    fn base() -> BoundInputs {
        BoundInputs::new(1.0, 0.0, 10_000, 1e-6).unwrap()
    }

    #[test]
    fn input_validation() {
        assert!(BoundInputs::new(0.0, 0.0, 10, 0.1).is_err());
        assert!(BoundInputs::new(1.0, 1.5, 10, 0.1).is_err());
        assert!(BoundInputs::new(1.0, 0.0, 1, 0.1).is_err());
        assert!(BoundInputs::new(1.0, 0.0, 10, 0.0).is_err());
        assert!(base().with_l(10_001).is_err());
        assert!(base().with_p(-0.1).is_err());
    }

    #[test]
    fn fmt_reference_point() {
        let b = fmt_shuffle_bound(&base());
        assert!(b.valid);
        assert_close!(b.eps_value(), 0.214021, 1e-5);
        assert_eq!(b.delta, Some(1e-6));
    }

    #[test]
    fn fmt_invalid_for_small_n() {
        let b = fmt_shuffle_bound(&BoundInputs::new(1.0, 0.0, 100, 1e-6).unwrap());
        assert!(!b.valid);
        assert_eq!((b.eps, b.delta), (None, None));
    }

    #[test]
    fn delta_prime_examples() {
        assert_eq!(delta_prime(0.3, 1.0, 100.0, 1e-6, 0.0), 1e-6);
        assert_close!(
            delta_prime(0.0, f64::INFINITY, 10.0, 0.0, 1e-9),
            2e-8,
            1e-22
        );
        let ln2 = 2f64.ln();
        assert_close!(delta_prime(ln2, ln2, 1.0, 1e-9, 1e-9), 4.75e-9, 1e-22);
    }

    #[test]
    fn netshuffle_adds_walk_penalty() {
        let fmt = fmt_shuffle_bound(&base());
        let net = netshuffle_bound(&base());
        assert_close!(net.eps_value(), 0.2141, 1e-4);
        assert_close!(net.eps_value() - fmt.eps_value(), 1e-4, 1e-15);
        assert_close!(net.delta.unwrap(), (5e-5f64).exp() * 1e-6, 1e-20);
    }

    #[test]
    fn netshuffle_with_approximate_randomizer() {
        let input = BoundInputs::new(1.0, 1e-10, 10_000, 1e-6).unwrap();
        let fmt = fmt_shuffle_bound(&input);
        let net = netshuffle_bound(&input);
        let shuffle_eps = fmt.eps_value();
        let want = 1e-6 + (shuffle_eps.exp() + 1.0) * (1.0 + (-1f64).exp() / 2.0) * 1e4 * 1e-10;
        assert_close!(fmt.delta.unwrap(), want, 1e-18);
        assert_close!(net.delta.unwrap(), (5e-5f64).exp() * want, 1e-18);
    }

    #[test]
    fn subsample_examples() {
        let b = subsample_wor(2f64.ln(), 1e-6, 50, 100).unwrap();
        assert_close!(b.eps_value(), 1.5f64.ln(), 1e-12);
        assert_close!(b.eps_value(), 0.405465, 1e-6);
        assert_close!(b.delta.unwrap(), 5e-7, 1e-20);
        let same = subsample_wor(0.37, 1e-5, 100, 100).unwrap();
        assert_eq!((same.eps, same.delta), (Some(0.37), Some(1e-5)));
        let none = subsample_wor(0.37, 1e-5, 0, 100).unwrap();
        assert_eq!((none.eps, none.delta), (Some(0.0), Some(0.0)));
        assert!(subsample_wor(0.37, 1e-5, 101, 100).is_err());
    }

    #[test]
    fn lambda_examples() {
        let edge = 2.0 / (3.0 * 1e4) * (2.0f64 / 1e-6).ln();
        assert_close!(lambda_p(0.0, 10_000, 1e-6).unwrap(), edge, 1e-15);
        assert_close!(lambda_p(1.0, 10_000, 1e-6).unwrap(), edge, 1e-15);
        assert_close!(lambda_p(0.1, 10_000, 1e-6).unwrap(), 0.017127, 1e-5);
        for p in [0.05, 0.2, 0.33, 0.5] {
            assert_close!(
                lambda_p(p, 500, 1e-3).unwrap(),
                lambda_p(1.0 - p, 500, 1e-3).unwrap(),
                1e-15
            );
        }
    }

    #[test]
    fn smpl_wlk_reference_point() {
        let b = smpl_wlk_bound(&base().with_p(0.1).unwrap()).unwrap();
        assert!(b.valid);
        assert_close!(b.eps_value(), 0.0792, 1e-3);
        assert_close!(b.delta.unwrap(), 1.1171e-6, 1e-10);
        assert!(b.eps_value() < netshuffle_bound(&base()).eps_value());
    }

    #[test]
    fn smpl_wlk_invalid_when_sample_too_small() {
        let b = smpl_wlk_bound(&base().with_p(0.01).unwrap()).unwrap();
        assert!(!b.valid);
        assert!(smpl_wlk_bound(&base()).is_err());
    }

    #[test]
    fn smpl_wlk_at_full_participation_only_inflates_by_lambda() {
        let b = smpl_wlk_bound(&base().with_p(1.0).unwrap()).unwrap();
        let net = netshuffle_bound(&base());
        assert!(b.eps_value() >= net.eps_value());
        let lambda = lambda_p(1.0, 10_000, 1e-6).unwrap();
        let inflated = 1e-4 + shuffle_eps(1.0, 1e4, (1.0 + lambda).sqrt(), 1e-6);
        assert_close!(b.eps_value(), inflated, 1e-15);
    }

    #[test]
    fn partial_examples() {
        let full = partial_shuffle_bound(&base().with_l(10_000).unwrap()).unwrap();
        let net = netshuffle_bound(&base());
        assert_eq!(full.eps, net.eps);
        assert_eq!(full.delta, net.delta);

        let b = partial_shuffle_bound(&base().with_l(1000).unwrap()).unwrap();
        assert_close!(b.eps_value(), 0.5663, 1e-4);

        let small = BoundInputs::new(1.0, 0.0, 10_000, 1e-6)
            .unwrap()
            .with_l(100)
            .unwrap();
        assert!(!partial_shuffle_bound(&small).unwrap().valid);
        let zero = base().with_l(0).unwrap();
        assert!(!partial_shuffle_bound(&zero).unwrap().valid);
    }

    #[test]
    fn liew_metric_cases() {
        let k5 = generate_topology(&Topology::Complete, 5, 0).unwrap();
        let m = liew_topology_metric(&k5, None).unwrap();
        assert_close!(m.value, (1.0f64 / 5.0).sqrt(), 1e-15);
        let m0 = liew_topology_metric(&k5, Some(0)).unwrap();
        assert_close!(m0.value, (0.2f64 + 1.0).sqrt(), 1e-15);

        for n in [5usize, 50, 500] {
            let star = generate_topology(&Topology::Star, n, 0).unwrap();
            let m = liew_topology_metric(&star, None).unwrap();
            let leaves = (n - 1) as f64;
            assert_close!(
                m.stationary_term,
                (0.25 + leaves / (4.0 * leaves * leaves)).sqrt(),
                1e-12
            );
            assert!(!m.ergodic && m.warning.is_some());
        }
        let star = generate_topology(&Topology::Star, 5000, 0);
        assert!(
            liew_topology_metric(&star.unwrap(), None)
                .unwrap()
                .stationary_term
                < 0.5001
        );

        let split = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(liew_topology_metric(&split, None).is_err());
    }

    #[test]
    fn bernstein_examples() {
        let two_thirds_log = 2.0 / 3.0 * (2.0f64 / 0.05).ln();
        assert_close!(
            bernstein_radius(0.0, 1.0, 0.05).unwrap(),
            two_thirds_log,
            1e-15
        );
        assert_close!(bernstein_radius(25.0, 1.0, 0.05).unwrap(), 16.040, 1e-3);
        assert!(
            bernstein_radius(25.0, 1.0, 0.01).unwrap() > bernstein_radius(25.0, 1.0, 0.05).unwrap()
        );
        assert!(bernstein_radius(-1.0, 1.0, 0.05).is_err());
    }
}
