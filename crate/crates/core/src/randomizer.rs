//! Finite-range local randomizers given as row-stochastic tables.
//!
//! Keeping the full table (rather than a sampler) lets the analysis code
//! enumerate output distributions exactly and compute the tight local
//! privacy parameter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomizerKind {
    BinaryRr,
    KaryRr,
    Identity,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Randomizer {
    kind: RandomizerKind,
    table: Vec<Vec<f64>>,
    output_size: usize,
    claimed_eps0: f64,
    claimed_delta0: f64,
}

impl Randomizer {
    /// Binary randomized response: keeps the bit with probability
    /// `e^ε₀ / (e^ε₀ + 1)`.
    pub fn binary_rr(eps0: f64) -> Result<Self> {
        let mut r = Self::kary_rr(eps0, 2)?;
        r.kind = RandomizerKind::BinaryRr;
        Ok(r)
    }

    /// k-ary randomized response: keeps the symbol with probability
    /// `e^ε₀ / (e^ε₀ + k − 1)`, otherwise reports one of the other `k − 1`.
    pub fn kary_rr(eps0: f64, k: usize) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::param(format!(
                "eps0 must be positive and finite, got {eps0}"
            )));
        }
        if k < 2 {
            return Err(Error::param(format!(
                "k-ary randomized response needs k >= 2, got {k}"
            )));
        }
        // keep = e^ε / (e^ε + k − 1) = 1 / (1 + (k − 1) e^−ε)
        let other_weight = (k - 1) as f64 * (-eps0).exp();
        let keep = 1.0 / (1.0 + other_weight);
        let flip = (-eps0).exp() * keep;
        let table = (0..k)
            .map(|x| (0..k).map(|y| if x == y { keep } else { flip }).collect())
            .collect();
        Ok(Randomizer {
            kind: RandomizerKind::KaryRr,
            table,
            output_size: k,
            claimed_eps0: eps0,
            claimed_delta0: 0.0,
        })
    }

    /// Deterministic pass-through on `k` symbols. Not private; useful for
    /// studying the partition step on its own.
    pub fn identity(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("identity randomizer needs k >= 1"));
        }
        let table = (0..k)
            .map(|x| (0..k).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(Randomizer {
            kind: RandomizerKind::Identity,
            table,
            output_size: k,
            claimed_eps0: f64::INFINITY,
            claimed_delta0: 0.0,
        })
    }

    /// Validates an arbitrary table. Rows must be probability vectors of a
    /// common length.
    pub fn from_table(
        table: Vec<Vec<f64>>,
        claimed_eps0: f64,
        claimed_delta0: f64,
    ) -> Result<Self> {
        let output_size = table.first().map(Vec::len).unwrap_or(0);
        if table.is_empty() || output_size == 0 {
            return Err(Error::param("randomizer table must be non-empty"));
        }
        for (row, probs) in table.iter().enumerate() {
            let ok = probs.len() == output_size
                && probs.iter().all(|&p| p >= 0.0 && p.is_finite())
                && (probs.iter().sum::<f64>() - 1.0).abs() <= ROW_TOLERANCE;
            if !ok {
                return Err(Error::InvalidTable { row });
            }
        }
        if !(claimed_eps0 >= 0.0) || !(0.0..=1.0).contains(&claimed_delta0) {
            return Err(Error::param("claimed (eps0, delta0) out of range"));
        }
        Ok(Randomizer {
            kind: RandomizerKind::Custom,
            table,
            output_size,
            claimed_eps0,
            claimed_delta0,
        })
    }

    pub fn kind(&self) -> RandomizerKind {
        self.kind
    }

    pub fn input_size(&self) -> usize {
        self.table.len()
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn claimed_eps0(&self) -> f64 {
        self.claimed_eps0
    }

    pub fn claimed_delta0(&self) -> f64 {
        self.claimed_delta0
    }

    pub fn is_private(&self) -> bool {
        self.claimed_eps0.is_finite()
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    /// Output distribution for input `x`.
    pub fn row(&self, x: usize) -> Result<&[f64]> {
        self.table
            .get(x)
            .map(Vec::as_slice)
            .ok_or(Error::SymbolOutOfRange {
                symbol: x,
                domain: self.input_size(),
            })
    }

    /// Samples an output for `x` by inverting the row's CDF.
    pub fn apply<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> Result<usize> {
        let row = self.row(x)?;
        Ok(sample_index(row, rng))
    }

    /// Tight pure-DP parameter of the table; `+∞` if some output is
    /// possible under one input and impossible under another.
    pub fn verify_ldp(&self) -> f64 {
        verify_ldp(self)
    }
}

/// Inverse-CDF draw from a probability vector. Zero-probability entries are
/// never returned.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = i;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// `max_{y, x, x'} ln(R[x][y] / R[x'][y])`, skipping `0/0`.
pub fn verify_ldp(r: &Randomizer) -> f64 {
    let mut worst: f64 = 0.0;
    for y in 0..r.output_size() {
        let column = r.table.iter().map(|row| row[y]);
        let (lo, hi) = column.fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            (lo.min(p), hi.max(p))
        });
        if hi == 0.0 {
            continue;
        }
        if lo == 0.0 {
            return f64::INFINITY;
        }
        worst = worst.max(hi.ln() - lo.ln());
    }
    worst
}

/// Configuration-file form of a randomizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizerSpec {
    pub kind: RandomizerKind,
    #[serde(default)]
    pub eps0: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
}

impl RandomizerSpec {
    pub fn build(&self) -> Result<Randomizer> {
        let eps0 = || {
            self.eps0
                .ok_or_else(|| Error::param("randomizer needs eps0"))
        };
        match self.kind {
            RandomizerKind::BinaryRr => Randomizer::binary_rr(eps0()?),
            RandomizerKind::KaryRr => Randomizer::kary_rr(
                eps0()?,
                self.k.ok_or_else(|| Error::param("kary_rr needs k"))?,
            ),
            RandomizerKind::Identity => {
                Randomizer::identity(self.k.ok_or_else(|| Error::param("identity needs k"))?)
            }
            RandomizerKind::Custom => Err(Error::param(
                "custom randomizers are built from a table, not a spec",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binary_keep_probabilities() {
        let e = std::f64::consts::E;
        let r = Randomizer::binary_rr(1.0).unwrap();
        assert_close!(r.table()[0][0], e / (1.0 + e), 1e-15);
        assert_close!(r.table()[0][0], 0.731059, 1e-6);
        assert_close!(r.table()[1][0], 1.0 / (1.0 + e), 1e-15);
        let r = Randomizer::binary_rr(3f64.ln()).unwrap();
        assert_close!(r.table()[1][1], 0.75, 1e-15);
        let r = Randomizer::binary_rr(1e-12).unwrap();
        assert_close!(r.table()[0][0], 0.5, 1e-12);
        assert!(Randomizer::binary_rr(0.0).is_err());
        assert!(Randomizer::binary_rr(-1.0).is_err());
    }

    #[test]
    fn kary_tables() {
        let r = Randomizer::kary_rr(3f64.ln(), 4).unwrap();
        assert_close!(r.table()[2][2], 0.5, 1e-15);
        assert_close!(r.table()[2][0], 1.0 / 6.0, 1e-15);
        assert_eq!(
            Randomizer::kary_rr(0.7, 2).unwrap().table(),
            Randomizer::binary_rr(0.7).unwrap().table()
        );
        assert!(Randomizer::kary_rr(1.0, 1).is_err());
        for row in Randomizer::kary_rr(2.0, 8).unwrap().table() {
            assert_close!(row.iter().sum::<f64>(), 1.0, 1e-12);
        }
    }

    #[test]
    fn uniform_table_is_accepted_through_from_table() {
        let third = 1.0 / 3.0;
        let r = Randomizer::from_table(vec![vec![third; 3]; 3], 0.0, 0.0).unwrap();
        assert_eq!(r.verify_ldp(), 0.0);
    }

    #[test]
    fn from_table_rejects_bad_rows() {
        assert_eq!(
            Randomizer::from_table(vec![vec![0.5, 0.5], vec![0.7, 0.2]], 1.0, 0.0).unwrap_err(),
            Error::InvalidTable { row: 1 }
        );
        assert!(Randomizer::from_table(vec![vec![1.5, -0.5]], 1.0, 0.0).is_err());
        assert!(Randomizer::from_table(vec![vec![1.0], vec![0.5, 0.5]], 1.0, 0.0).is_err());
    }

    #[test]
    fn verify_ldp_examples() {
        assert_close!(Randomizer::binary_rr(1.0).unwrap().verify_ldp(), 1.0, 1e-12);
        assert_eq!(Randomizer::identity(3).unwrap().verify_ldp(), f64::INFINITY);
        for e in [0.1, 0.5, 1.0, 2.0, 3.0] {
            assert_close!(Randomizer::binary_rr(e).unwrap().verify_ldp(), e, 1e-12);
            for k in [3, 8] {
                assert_close!(Randomizer::kary_rr(e, k).unwrap().verify_ldp(), e, 1e-12);
            }
        }
    }

    #[test]
    fn identity_apply_is_deterministic() {
        let r = Randomizer::identity(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for x in 0..5 {
            assert_eq!(r.apply(x, &mut rng).unwrap(), x);
        }
        assert_eq!(
            r.apply(5, &mut rng).unwrap_err(),
            Error::SymbolOutOfRange {
                symbol: 5,
                domain: 5
            }
        );
    }

    #[test]
    fn apply_is_reproducible() {
        let r = Randomizer::binary_rr(1.0).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32)
                .map(|_| r.apply(0, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn spec_builds() {
        let spec: RandomizerSpec =
            serde_json::from_str(r#"{"kind": "kary_rr", "eps0": 1.0, "k": 3}"#).unwrap();
        assert_eq!(spec.build().unwrap().output_size(), 3);
        let spec: RandomizerSpec = serde_json::from_str(r#"{"kind": "binary_rr"}"#).unwrap();
        assert!(spec.build().is_err());
        assert!(serde_json::from_str::<RandomizerSpec>(r#"{"kind": "identity", "x": 1}"#).is_err());
    }
}
