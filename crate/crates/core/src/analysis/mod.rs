//! Exact and Monte Carlo verification on small instances.
//!
//! Exact enumeration produces the full law of the curator's view, which
//! the divergence functions turn into empirical privacy parameters. The
//! checks compare walks against the stationary protocol, mixing against its
//! spectral envelope, and sampled participant counts against Bernstein.

mod checks;
mod distribution;
mod enumerate;

pub use checks::{
    empirical_dp_check, estimate_dp, event_ratio_check, ldp_check, lemma1_ratio_check,
    mixing_check, sampling_concentration_check, shuffle_invariance_check, CheckResult, CheckStatus,
    ConcentrationReport, DpEstimate, EmpiricalDpReport, EventRatioReport, Lemma1Report,
    MixingReport, NeighborPair, ShuffleInvarianceReport, MIXING_SLACK, SHUFFLE_TOLERANCE,
};
pub use distribution::{
    empirical_epsilon, hockey_stick, tv_distance, two_sided_hockey_stick, OutcomeDistribution,
    EPSILON_TOLERANCE,
};
pub use enumerate::{
    enumeration_size, exact_output_distribution, monte_carlo_output_distribution, wilson_interval,
    EstimatedDistribution, DEFAULT_BUDGET,
};
