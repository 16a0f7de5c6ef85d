//! The discrete spline basis and the bijection between k-monotone sequences
//! and nonnegative mixtures.
//!
//! The unnormalized atom with knot `j` is
//! `qbar(k, j, i) = C(j - i + k - 1, k - 1)` for `i <= j` and zero beyond;
//! its mass is `mass(k, j) = C(j + k, k)`, and `qnorm = qbar / mass` is a
//! pmf supported on `{0..j}`. A summable sequence is k-monotone exactly when
//! it is a nonnegative combination of the normalized atoms, with weights
//! `π(j) = (-1)^k Δ^k f(j) · mass(k, j)`; the mixture total equals the
//! sequence mass.
//!
//! Basis values are computed in exact integer arithmetic while they fit in
//! 128 bits (exact for every `k <= 10`, `j <= 10^4`), so Gram matrices built
//! from them are reproducible bit for bit.

use std::collections::BTreeMap;

use crate::seq::{binom, DiscreteSeq};
use crate::{Error, Result};

/// Mixture weights below this threshold are dropped by [`decompose`].
pub const DROP_TOL: f64 = 1e-12;

/// Unnormalized spline atom `Q̄ᵏⱼ(i)`; zero for `i > j`.
pub fn qbar(k: usize, j: usize, i: usize) -> f64 {
    assert!(k >= 1, "spline degree parameter must be at least 1");
    if i > j {
        return 0.0;
    }
    binom((j - i + k - 1) as u64, (k - 1) as u64)
}

/// Mass of the atom: `Σ_i Q̄ᵏⱼ(i) = Q̄ᵏ⁺¹ⱼ(0) = C(j + k, k)`.
pub fn mass(k: usize, j: usize) -> f64 {
    assert!(k >= 1);
    binom((j + k) as u64, k as u64)
}

/// Normalized atom `Qᵏⱼ(i) = Q̄ᵏⱼ(i) / mᵏⱼ`, a pmf supported on `{0..j}`.
pub fn qnorm(k: usize, j: usize, i: usize) -> f64 {
    qbar(k, j, i) / mass(k, j)
}

/// The normalized atom as a dense sequence.
pub fn qnorm_seq(k: usize, j: usize) -> DiscreteSeq {
    DiscreteSeq::new((0..=j).map(|i| qnorm(k, j, i)).collect())
}

/// A nonnegative mixture of normalized spline atoms of a fixed degree
/// parameter `k`: the weights are keyed by knot index and sum to the mass of
/// the composed sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineMixture {
    k: usize,
    weights: BTreeMap<usize, f64>,
}

impl SplineMixture {
    pub fn new(k: usize, weights: BTreeMap<usize, f64>) -> Self {
        assert!(k >= 1);
        SplineMixture { k, weights }
    }

    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Self::new(k, pairs.into_iter().collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &BTreeMap<usize, f64> {
        &self.weights
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights.get(&j).copied().unwrap_or(0.0)
    }

    /// Knot indices carrying positive weight.
    pub fn knots(&self) -> Vec<usize> {
        self.weights.keys().copied().collect()
    }

    pub fn max_knot(&self) -> Option<usize> {
        self.weights.keys().next_back().copied()
    }

    /// Total mixture weight; equals the mass of the composed sequence.
    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Dense sequence `f(i) = Σ_j π(j) Qᵏⱼ(i)`.
    pub fn compose(&self) -> DiscreteSeq {
        let Some(top) = self.max_knot() else {
            return DiscreteSeq::zero();
        };
        let mut values = vec![0.0; top + 1];
        for (&j, &w) in &self.weights {
            let m = mass(self.k, j);
            for (i, v) in values.iter_mut().enumerate().take(j + 1) {
                *v += w * qbar(self.k, j, i) / m;
            }
        }
        DiscreteSeq::new(values)
    }
}

/// Unique mixture representation of a k-monotone sequence, with the default
/// rejection and drop thresholds.
pub fn decompose(f: &DiscreteSeq, k: usize) -> Result<SplineMixture> {
    decompose_with(f, k, crate::seq::DEFAULT_TOL, DROP_TOL)
}

/// As [`decompose`], with explicit tolerances: any signed difference below
/// `-tol` rejects the input as non-k-monotone; weights at or below
/// `drop_tol` are omitted from the mixture.
pub fn decompose_with(
    f: &DiscreteSeq,
    k: usize,
    tol: f64,
    drop_tol: f64,
) -> Result<SplineMixture> {
    assert!(k >= 1);
    let mut weights = BTreeMap::new();
    if let Some(smax) = f.smax() {
        for j in 0..=smax {
            let d = f.signed_diff_at(k, j);
            if d < -tol {
                return Err(Error::NotKMonotone {
                    k,
                    index: j,
                    value: d,
                });
            }
            let w = d * mass(k, j);
            if w > drop_tol {
                weights.insert(j, w);
            }
        }
    }
    Ok(SplineMixture::new(k, weights))
}
