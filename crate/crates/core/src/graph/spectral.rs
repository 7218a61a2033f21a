use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::Graph;
use crate::error::{Error, Result};

/// Gaps below this are reported as exactly zero.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

const MAX_SWEEPS: usize = 100_000;

/// Spectrum of the walk operator, sorted non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralInfo {
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
}

impl SpectralInfo {
    /// Second largest eigenvalue, or `None` for a one-vertex spectrum.
    pub fn second(&self) -> Option<f64> {
        self.eigenvalues.get(1).copied()
    }

    pub fn smallest(&self) -> f64 {
        *self.eigenvalues.last().expect("spectrum is never empty")
    }
}

/// Spectrum of `P = A D^-1` and its gap `min(1 − α_2, 1 − |α_n|)`.
///
/// `P` is only symmetric on regular graphs, so the eigenproblem is solved
/// on the similar matrix `D^-1/2 A D^-1/2`, which is always symmetric.
pub fn spectral_gap(g: &Graph) -> Result<SpectralInfo> {
    g.require_no_isolated()?;
    let n = g.n();
    let scale: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| 1.0 / (d as f64).sqrt())
        .collect();
    let sym = DMatrix::from_fn(n, n, |u, v| {
        if g.has_edge(u, v) {
            scale[u] * scale[v]
        } else {
            0.0
        }
    });
    let eigen =
        SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS).ok_or(Error::EigenNoConvergence)?;
    let mut eigenvalues: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));

    let raw = match eigenvalues.len() {
        1 => 0.0,
        _ => (1.0 - eigenvalues[1]).min(1.0 - eigenvalues[n - 1].abs()),
    };
    let gap = if raw < EIGEN_TOLERANCE {
        0.0
    } else {
        raw.min(1.0)
    };
    Ok(SpectralInfo { eigenvalues, gap })
}
