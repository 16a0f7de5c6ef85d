//! Finitely supported real sequences on the nonnegative integers, with the
//! iterated difference operator, iterated primitives, and the k-monotony
//! predicate.
//!
//! All stored sequences are dense arrays trimmed of trailing exact zeros, so
//! the support maximum is just the last index. Sums that formally run to
//! infinity are evaluated up to an explicit horizon; every sequence handled
//! here has finite support, so nothing is lost.

use crate::{Error, Result};

/// Default tolerance for monotony and knot tests. Solver residuals sit at
/// the 1e-12 scale on desk problems; one order of slack.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Exact binomial coefficient, or `None` on u128 overflow.
pub(crate) fn binom_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.checked_mul((n - k + i) as u128)?;
        // Exact: after this step acc == C(n-k+i, i).
        acc /= i as u128;
    }
    Some(acc)
}

/// Binomial coefficient as f64; exact integer arithmetic while the value
/// fits in u128, multiplicative fallback beyond that.
pub fn binom(n: u64, k: u64) -> f64 {
    match binom_u128(n, k) {
        Some(v) => v as f64,
        None => {
            let k = k.min(n - k);
            let mut acc = 1.0_f64;
            for i in 1..=k {
                acc = acc * ((n - k + i) as f64) / (i as f64);
            }
            acc
        }
    }
}

/// Outcome of a k-monotony test: the verdict plus every violating index.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonyReport {
    pub is_monotone: bool,
    pub violations: Vec<usize>,
}

/// A finitely supported real sequence indexed from 0.
///
/// Trailing exact zeros are trimmed on construction, so `smax` (the largest
/// support index) is `values.len() - 1`, or `None` for the zero sequence.
/// Values may be signed; probability sequences get their own wrapper.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteSeq {
    values: Vec<f64>,
}

impl DiscreteSeq {
    pub fn new(mut values: Vec<f64>) -> Self {
        while values.last() == Some(&0.0) {
            values.pop();
        }
        DiscreteSeq { values }
    }

    /// The Dirac sequence at `i`.
    pub fn delta(i: usize) -> Self {
        let mut values = vec![0.0; i + 1];
        values[i] = 1.0;
        DiscreteSeq { values }
    }

    pub fn zero() -> Self {
        DiscreteSeq { values: Vec::new() }
    }

    /// Largest support index, `None` for the zero sequence.
    pub fn smax(&self) -> Option<usize> {
        self.values.len().checked_sub(1)
    }

    /// Value at `i`; zero beyond the stored range.
    pub fn get(&self, i: usize) -> f64 {
        self.values.get(i).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn dot(&self, other: &DiscreteSeq) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Squared l2 distance to `other`.
    pub fn dist_sq(&self, other: &DiscreteSeq) -> f64 {
        let n = self.values.len().max(other.values.len());
        (0..n).map(|i| (self.get(i) - other.get(i)).powi(2)).sum()
    }

    /// Elementwise `a*self + b*other`.
    pub fn axpy(&self, a: f64, other: &DiscreteSeq, b: f64) -> DiscreteSeq {
        let n = self.values.len().max(other.values.len());
        DiscreteSeq::new((0..n).map(|i| a * self.get(i) + b * other.get(i)).collect())
    }

    /// The k-th iterated difference `i -> Δ^k f(i)`, by the binomial closed
    /// form `Δ^k f(i) = Σ_h C(k,h) (-1)^{k-h} f(h+i)`. The closed form avoids
    /// the error accumulation of k repeated first differences; output support
    /// is bounded by the input support.
    pub fn diff(&self, k: usize) -> Result<DiscreteSeq> {
        if k == 0 {
            return Err(Error::ZeroOrder);
        }
        let n = self.values.len();
        let out = (0..n).map(|i| self.diff_at(k, i)).collect();
        Ok(DiscreteSeq::new(out))
    }

    /// `Δ^k f(i)` at a single index.
    pub fn diff_at(&self, k: usize, i: usize) -> f64 {
        debug_assert!(k >= 1);
        let mut acc = 0.0;
        for h in 0..=k {
            let c = binom(k as u64, h as u64);
            let sign = if (k - h).is_multiple_of(2) { 1.0 } else { -1.0 };
            acc += sign * c * self.get(h + i);
        }
        acc
    }

    /// `(-1)^k Δ^k f(i)`, the quantity whose nonnegativity defines k-monotony.
    pub fn signed_diff_at(&self, k: usize, i: usize) -> f64 {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * self.diff_at(k, i)
    }

    /// The iterated primitive `F^order_f(l)`: `order` cumulative-sum passes,
    /// evaluated at `l`.
    pub fn primitive(&self, order: usize, l: usize) -> f64 {
        assert!(order >= 1, "primitive order must be at least 1");
        let mut row: Vec<f64> = (0..=l).map(|i| self.get(i)).collect();
        for _ in 0..order {
            let mut acc = 0.0;
            for v in row.iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        row[l]
    }

    /// All primitives `F^j_f(l)` for `j = 1..=order` at a single `l`.
    /// Cheaper than `order` separate `primitive` calls.
    pub fn primitives_at(&self, order: usize, l: usize) -> Vec<f64> {
        assert!(order >= 1);
        let mut row: Vec<f64> = (0..=l).map(|i| self.get(i)).collect();
        let mut out = Vec::with_capacity(order);
        for _ in 0..order {
            let mut acc = 0.0;
            for v in row.iter_mut() {
                acc += *v;
                *v = acc;
            }
            out.push(row[l]);
        }
        out
    }

    /// Tests `(-1)^k Δ^k f(i) >= -tol` for every `i` up to the support
    /// maximum (the difference looks ahead k steps, so indices up to `smax`
    /// cover everything that can be nonzero).
    pub fn is_kmonotone(&self, k: usize, tol: f64) -> MonotonyReport {
        assert!(k >= 1, "monotony order must be at least 1");
        let mut violations = Vec::new();
        if let Some(smax) = self.smax() {
            for i in 0..=smax {
                if self.signed_diff_at(k, i) < -tol {
                    violations.push(i);
                }
            }
        }
        MonotonyReport {
            is_monotone: violations.is_empty(),
            violations,
        }
    }

    /// The k-knots: indices with `(-1)^k Δ^k f(i) > tol`. Scanning all of
    /// `[0, smax]` doubles as the strict-monotony check (`f` is strictly
    /// k-monotone on its support iff every support index is a knot).
    pub fn knots(&self, k: usize, tol: f64) -> Vec<usize> {
        assert!(k >= 1);
        let Some(smax) = self.smax() else {
            return Vec::new();
        };
        (0..=smax)
            .filter(|&i| self.signed_diff_at(k, i) > tol)
            .collect()
    }
}

impl From<&[f64]> for DiscreteSeq {
    fn from(v: &[f64]) -> Self {
        DiscreteSeq::new(v.to_vec())
    }
}

/// A probability mass function: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbSeq(DiscreteSeq);

impl ProbSeq {
    const SUM_TOL: f64 = 1e-12;

    pub fn new(seq: DiscreteSeq) -> Result<Self> {
        if let Some(&bad) = seq.values().iter().find(|&&v| v < 0.0) {
            return Err(Error::NotProbability(format!("negative entry {bad:e}")));
        }
        let total = seq.sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::NotProbability(format!(
                "mass {total} differs from 1 by more than {:e}",
                Self::SUM_TOL
            )));
        }
        Ok(ProbSeq(seq))
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        ProbSeq::new(DiscreteSeq::new(values))
    }

    pub fn delta(i: usize) -> Self {
        ProbSeq(DiscreteSeq::delta(i))
    }

    pub fn seq(&self) -> &DiscreteSeq {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0.get(i)
    }

    /// Largest observed support index; probability sequences are nonempty.
    pub fn smax(&self) -> usize {
        self.0.smax().expect("probability sequence has mass 1")
    }
}

impl AsRef<DiscreteSeq> for ProbSeq {
    fn as_ref(&self) -> &DiscreteSeq {
        &self.0
    }
}
