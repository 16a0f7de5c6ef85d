//! Loss functions and distribution functionals for the simulation study,
//! plus the replication-level summary (mean, SE, bias, RMSEP).

use serde::Serialize;

use crate::seq::DiscreteSeq;

/// Entries of an estimate may dip this far below zero from rounding before
/// the square-root losses clamp them; anything lower is a real bug.
const NEG_CLAMP: f64 = -1e-12;

/// Squared l2 error `Σ (p(i) - q(i))²`.
pub fn l2_err(p: &DiscreteSeq, q: &DiscreteSeq) -> f64 {
    p.dist_sq(q)
}

/// Squared Hellinger-type error `Σ (√p(i) - √q(i))²`. Estimates with mass
/// above one are used as-is, without renormalization.
pub fn hellinger_err(p: &DiscreteSeq, q: &DiscreteSeq) -> f64 {
    let n = p.values().len().max(q.values().len());
    (0..n)
        .map(|i| {
            let a = clamp_nonneg(p.get(i));
            let b = clamp_nonneg(q.get(i));
            (a.sqrt() - b.sqrt()).powi(2)
        })
        .sum()
}

/// Total variation distance `½ Σ |p(i) - q(i)|`.
pub fn tv_err(p: &DiscreteSeq, q: &DiscreteSeq) -> f64 {
    let n = p.values().len().max(q.values().len());
    0.5 * (0..n).map(|i| (p.get(i) - q.get(i)).abs()).sum::<f64>()
}

/// `Σ f(i) log f(i)` with `0·log 0 = 0`.
pub fn entropy(f: &DiscreteSeq) -> f64 {
    f.values()
        .iter()
        .map(|&v| {
            let v = clamp_nonneg(v);
            if v == 0.0 {
                0.0
            } else {
                v * v.ln()
            }
        })
        .sum()
}

/// `Σ i² f(i) - (Σ i f(i))²`, applied as-is even when the mass is not one.
pub fn variance(f: &DiscreteSeq) -> f64 {
    let mean: f64 = f.values().iter().enumerate().map(|(i, &v)| i as f64 * v).sum();
    let second: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as f64) * (i as f64) * v)
        .sum();
    second - mean * mean
}

pub fn prob_at_zero(f: &DiscreteSeq) -> f64 {
    f.get(0)
}

pub fn total_mass(f: &DiscreteSeq) -> f64 {
    f.sum()
}

fn clamp_nonneg(v: f64) -> f64 {
    assert!(v >= NEG_CLAMP, "entry {v} below the rounding clamp");
    v.max(0.0)
}

/// Replication summary of a scalar: mean, population-convention standard
/// error, bias against the truth, and `RMSEP = √(BIAS² + SE²)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossSummary {
    pub n_reps: usize,
    pub mean: f64,
    pub se: f64,
    pub bias: f64,
    pub rmsep: f64,
}

/// Aggregates per-replication values against a reference truth. The SE
/// divisor is the replication count itself (not count minus one).
pub fn summarize(values: &[f64], truth: f64) -> LossSummary {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let se = var.max(0.0).sqrt();
    let bias = mean - truth;
    LossSummary {
        n_reps: values.len(),
        mean,
        se,
        bias,
        rmsep: (bias * bias + se * se).sqrt(),
    }
}
