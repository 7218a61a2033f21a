//! Network-shuffle differential privacy.
//!
//! Clients perturb their data with a local randomizer and forward the
//! reports along random walks on their communication graph; the curator sees
//! only how many reports of each value every client ends up holding. This
//! crate simulates those protocols, evaluates the closed-form amplification
//! bounds that apply to them, and checks the underlying probabilistic claims
//! exactly on small instances.
//!
//! - [`graph`]: graphs, walk distributions, spectral gap, round counts.
//! - [`randomizer`]: finite-table local randomizers.
//! - [`protocol`]: seeded simulation of the walk, stationary, sampled and
//!   restricted protocols.
//! - [`bounds`]: privacy-amplification calculators.
//! - [`analysis`]: exact output distributions, divergences and the
//!   verification checks built on them.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }};
}

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod graph;
pub mod protocol;
pub mod randomizer;

pub use error::{Error, Result};
