//! Finite certificates that a truncated solution is the global projection.
//!
//! The projection `p̂` onto k-monotone probabilities is characterized by
//!
//! ```text
//! gap(l) = F^k_f(l) - F^k_p̃(l) - β(f)·mᵏ_l >= 0   for every l,
//! ```
//!
//! with equality whenever `l` is a k-knot of `f`, where `β(f) = <f, f - p̃>`
//! and `F^j` is the j-th iterated primitive. The cone projection satisfies
//! the same characterization with `β` replaced by zero. The inequality only
//! needs to be checked up to a finite bound: beyond
//! `τ = max(s_f, s̃)` the gap is a polynomial in `l`, so a Cauchy root bound
//! on its coefficients caps the last index at which it could turn negative.
//! For `k` in {3, 4} a much shorter criterion checks the gap up to `τ + 1`
//! together with the lower-order primitive gaps there and the sign of `β`.

use serde::Serialize;

use crate::seq::{DiscreteSeq, ProbSeq, DEFAULT_TOL};
use crate::spline::mass;
use crate::{Error, Result};

/// Default tolerance for the certificate inequalities. Gap magnitudes grow
/// polynomially in `l`, so every comparison is scaled by `1 + mᵏ_l`.
pub const STOP_TOL: f64 = 1e-8;

/// Upper clamp for the Cauchy bound scan.
const BOUND_CAP: f64 = 1e6;

/// `β(f) = Σ_i f(i)(f(i) - p̃(i))`.
pub fn beta(f: &DiscreteSeq, p: &ProbSeq) -> f64 {
    let n = f.values().len().max(p.seq().values().len());
    (0..n).map(|i| f.get(i) * (f.get(i) - p.get(i))).sum()
}

/// The certificate quantity `F^k_f(l) - F^k_p̃(l) - beta·mᵏ_l`, computed
/// from the iterated primitives. Pass `beta = 0` for the cone criterion.
pub fn characterization_gap(f: &DiscreteSeq, p: &ProbSeq, k: usize, l: usize, beta: f64) -> f64 {
    f.primitive(k, l) - p.seq().primitive(k, l) - beta * mass(k, l)
}

/// The gap polynomial for `l >= tau + 1`, in monomial coordinates.
///
/// Expanding the tail identity for `F^k_f - F^k_p̃` and the factorial form
/// of `mᵏ_l` gives `gap(l) = Σ_j a_j l^j` with degree at most `k - 1` when
/// `beta = 0` (the coefficient array still extends to `a_k = -beta/k!`
/// otherwise). `degree` is the largest index whose coefficient survives a
/// relative threshold; `None` means the gap vanishes identically beyond
/// `tau` and the tail condition holds trivially.
#[derive(Debug, Clone, Serialize)]
pub struct PolyBound {
    pub tau: usize,
    /// Monomial coefficients `a_0 ..= a_k`.
    pub coeffs: Vec<f64>,
    pub degree: Option<usize>,
    /// Scan bound: every root of the gap polynomial is at most this, so
    /// nonnegativity up to here certifies nonnegativity everywhere (given a
    /// positive leading coefficient). Clamped to `[tau + 1, 1e6]`.
    pub bound: f64,
    /// True when the clamp was binding (diagnostic: the raw Cauchy bound was
    /// either below `tau + 1` or above the cap).
    pub clamped: bool,
}

impl PolyBound {
    /// Evaluates the tail polynomial at `l` (meaningful for `l >= tau + 1`).
    pub fn eval(&self, l: usize) -> f64 {
        let x = l as f64;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Multiplies `poly` by the linear factor `(x + shift)`.
fn mul_linear(poly: &mut Vec<f64>, shift: f64) {
    poly.push(0.0);
    for i in (0..poly.len() - 1).rev() {
        let v = poly[i];
        poly[i + 1] += v;
        poly[i] *= shift;
    }
}

/// Expands the tail gap polynomial of `f` against `p̃`.
pub fn poly_tail(f: &DiscreteSeq, p: &ProbSeq, k: usize, beta: f64) -> PolyBound {
    assert!(k >= 1);
    let s_f = f.smax().unwrap_or(0);
    let tau = s_f.max(p.smax());
    let prim_f = f.primitives_at(k, tau);
    let prim_p = p.seq().primitives_at(k, tau);

    // Alongside each coefficient, track the magnitude of what was summed
    // into it: the primitive gaps are differences of large values, so a
    // coefficient can be pure cancellation noise. Anything below 1e-12 of
    // its accumulated magnitude counts as zero.
    let mut coeffs = vec![0.0; k + 1];
    let mut mags = vec![0.0; k + 1];
    // Σ_{j=1..k} (F^j_f(τ) - F^j_p̃(τ)) / (k-j)! · (l-τ)(l-τ+1)…(l-τ+k-j-1)
    for j in 1..=k {
        let g = prim_f[j - 1] - prim_p[j - 1];
        let g_scale = prim_f[j - 1].abs().max(prim_p[j - 1].abs());
        let mut poly = vec![1.0];
        for r in 0..(k - j) {
            mul_linear(&mut poly, r as f64 - tau as f64);
        }
        let fact: f64 = (1..=(k - j)).map(|v| v as f64).product();
        for ((c, m), v) in coeffs.iter_mut().zip(mags.iter_mut()).zip(poly.iter()) {
            *c += g * v / fact;
            *m += g_scale * v.abs() / fact;
        }
    }
    // -beta · mᵏ_l = -beta · (l+1)…(l+k)/k!
    if beta != 0.0 {
        let mut poly = vec![1.0];
        for r in 1..=k {
            mul_linear(&mut poly, r as f64);
        }
        let fact: f64 = (1..=k).map(|v| v as f64).product();
        for ((c, m), v) in coeffs.iter_mut().zip(mags.iter_mut()).zip(poly.iter()) {
            *c -= beta * v / fact;
            *m += beta.abs() * v.abs() / fact;
        }
    }

    let max_abs = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut degree = None;
    for (i, (c, m)) in coeffs.iter().zip(mags.iter()).enumerate() {
        if c.abs() > 1e-12 * max_abs.max(1.0 + m) {
            degree = Some(i);
        }
    }

    let (raw_bound, clamped) = match degree {
        None | Some(0) => (tau as f64 + 1.0, false),
        Some(d) => {
            // Cauchy's root bound: every root lies within
            // 1 + max_j |a_j| / |a_d|.
            let lead = coeffs[d].abs();
            let m = coeffs[..d]
                .iter()
                .map(|c| 1.0 + c.abs() / lead)
                .fold(f64::NEG_INFINITY, f64::max);
            let clamped = m < tau as f64 + 1.0 || m > BOUND_CAP;
            (m.clamp(tau as f64 + 1.0, BOUND_CAP), clamped)
        }
    };

    PolyBound {
        tau,
        coeffs,
        degree,
        bound: raw_bound,
        clamped,
    }
}

/// Which certificate produced a [`StopReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    General,
    K34,
}

/// First failed condition of a certificate, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// The leading tail coefficient is not positive.
    LeadingCoeff,
    /// `gap(l) < 0` at some scanned index.
    Tail { l: usize, gap: f64 },
    /// `gap(l) != 0` at a knot of the candidate.
    KnotEquality { l: usize, gap: f64 },
    /// A lower-order primitive inequality fails at `s' + 1`.
    LowerPrimitive { order: usize, gap: f64 },
    /// `β(f)` is positive.
    BetaSign { beta: f64 },
}

/// Outcome of a stopping-criterion check.
#[derive(Debug, Clone, Serialize)]
pub struct StopReport {
    pub criterion: Criterion,
    pub passed: bool,
    pub beta: f64,
    /// Largest index scanned by the tail inequality.
    pub bound: f64,
    /// Diagnostic: the Cauchy bound clamp was binding (general criterion).
    pub bound_clamped: bool,
    pub first_violation: Option<Violation>,
}

impl std::fmt::Display for StopReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?} criterion {}; beta {:.3e}, scan bound {}",
            self.criterion,
            if self.passed { "passed" } else { "failed" },
            self.beta,
            self.bound,
        )?;
        if let Some(v) = &self.first_violation {
            write!(f, ", first violation {v:?}")?;
        }
        Ok(())
    }
}

/// Streams `gap(l)` for `l = 0..=lmax` with incremental primitives, checking
/// nonnegativity everywhere and equality at the given knots.
fn scan_gap(
    f: &DiscreteSeq,
    p: &ProbSeq,
    k: usize,
    beta: f64,
    lmax: usize,
    knots: &[usize],
    tol: f64,
) -> Option<Violation> {
    let mut prim_f = vec![0.0; k];
    let mut prim_p = vec![0.0; k];
    let mut knot_iter = knots.iter().peekable();
    for l in 0..=lmax {
        // One cumulative step for every primitive order.
        let mut vf = f.get(l);
        let mut vp = p.get(l);
        for j in 0..k {
            prim_f[j] += vf;
            prim_p[j] += vp;
            vf = prim_f[j];
            vp = prim_p[j];
        }
        let m = mass(k, l);
        let gap = prim_f[k - 1] - prim_p[k - 1] - beta * m;
        let scale = tol * (1.0 + m);
        let at_knot = knot_iter.peek() == Some(&&l);
        if at_knot {
            knot_iter.next();
            if gap.abs() > scale {
                return Some(Violation::KnotEquality { l, gap });
            }
        } else if gap < -scale {
            return Some(Violation::Tail { l, gap });
        }
    }
    None
}

/// General certificate, valid for every `k >= 1`: the candidate `f` is the
/// global projection iff the tail polynomial has positive leading
/// coefficient, the gap is nonnegative up to the Cauchy bound, and the gap
/// vanishes at every knot of `f`.
pub fn check_general(f: &DiscreteSeq, p: &ProbSeq, k: usize, beta: f64, tol: f64) -> StopReport {
    let pb = poly_tail(f, p, k, beta);
    let knots = f.knots(k, DEFAULT_TOL);

    let mut violation = None;
    if let Some(d) = pb.degree {
        if pb.coeffs[d] <= 0.0 {
            violation = Some(Violation::LeadingCoeff);
        }
    }
    if violation.is_none() {
        violation = scan_gap(f, p, k, beta, pb.bound as usize, &knots, tol);
    }

    StopReport {
        criterion: Criterion::General,
        passed: violation.is_none(),
        beta,
        bound: pb.bound,
        bound_clamped: pb.clamped,
        first_violation: violation,
    }
}

/// Short certificate for `k` in {3, 4}: the gap inequalities up to
/// `s' + 1 = max(s_f, s̃) + 1`, equality at knots, the lower-order primitive
/// inequalities `F^j_f(s'+1) - F^j_p̃(s'+1) >= beta·m^j_{s'+1}` for
/// `j < k`, and `beta <= 0`.
///
/// The `j = 1` inequality is included: it is what keeps the tail polynomial
/// nonnegative when the candidate's mass exceeds one (cone mode); for
/// probability candidates it holds with equality.
pub fn check_k34(
    f: &DiscreteSeq,
    p: &ProbSeq,
    k: usize,
    beta: f64,
    tol: f64,
) -> Result<StopReport> {
    if k != 3 && k != 4 {
        return Err(Error::CriterionOrder(k));
    }
    let s_prime = f.smax().unwrap_or(0).max(p.smax());
    let knots = f.knots(k, DEFAULT_TOL);

    // A positive beta breaks every other condition too; report it as the
    // root cause.
    let mut violation = if beta > tol {
        Some(Violation::BetaSign { beta })
    } else {
        None
    };

    if violation.is_none() {
        violation = scan_gap(f, p, k, beta, s_prime + 1, &knots, tol);
    }
    if violation.is_none() {
        let prim_f = f.primitives_at(k, s_prime + 1);
        let prim_p = p.seq().primitives_at(k, s_prime + 1);
        for order in 1..k {
            let m = mass(order, s_prime + 1);
            let gap = prim_f[order - 1] - prim_p[order - 1] - beta * m;
            if gap < -tol * (1.0 + m) {
                violation = Some(Violation::LowerPrimitive { order, gap });
                break;
            }
        }
    }

    Ok(StopReport {
        criterion: Criterion::K34,
        passed: violation.is_none(),
        beta,
        bound: s_prime as f64 + 1.0,
        bound_clamped: false,
        first_violation: violation,
    })
}

/// Criterion dispatch: the short certificate for `k` in {3, 4}, the general
/// one otherwise (including the convex case, where `beta` is passed as
/// computed rather than assumed zero).
pub fn check_auto(f: &DiscreteSeq, p: &ProbSeq, k: usize, beta: f64, tol: f64) -> StopReport {
    match k {
        3 | 4 => check_k34(f, p, k, beta, tol).expect("k is 3 or 4"),
        _ => check_general(f, p, k, beta, tol),
    }
}

/// `m(a, u) = Σ_{i=0}^{a} (a - i)^u`, the normalizer of the moment
/// comparison.
pub fn moment_normalizer(a: usize, u: u32) -> f64 {
    (0..=a).map(|d| (d as f64).powi(u as i32)).sum()
}

/// Moment comparison margin with the two-sided weight:
/// `Σ_i |i - a|^u (f(i) - p̃(i)) - beta·m(a, u)`.
///
/// Valid as an inequality only where [`moment_gap_truncated`] is (the
/// two-sided weight adds an unsigned right-tail term); kept for
/// reporting alongside the one-sided form.
pub fn moment_gap(f: &DiscreteSeq, p: &ProbSeq, beta: f64, a: usize, u: u32) -> f64 {
    let n = f.values().len().max(p.seq().values().len());
    let lhs: f64 = (0..n)
        .map(|i| {
            let d = (i as f64 - a as f64).abs().powi(u as i32);
            d * (f.get(i) - p.get(i))
        })
        .sum();
    lhs - beta * moment_normalizer(a, u)
}

/// Moment comparison margin with the one-sided weight:
/// `Σ_i (a - i)₊^u (f(i) - p̃(i)) - beta·m(a, u)`.
///
/// For `u >= k - 1` and `a >= 1` the weight normalized by `m(a, u)` is a
/// k-monotone pmf, so this margin is nonnegative whenever `f` is the
/// probability projection (with its `beta`) or the cone projection (with
/// `beta = 0`). For `a = 0` the weight vanishes identically and the
/// comparison carries no content.
pub fn moment_gap_truncated(f: &DiscreteSeq, p: &ProbSeq, beta: f64, a: usize, u: u32) -> f64 {
    let lhs: f64 = (0..=a)
        .map(|i| {
            let d = ((a - i) as f64).powi(u as i32);
            d * (f.get(i) - p.get(i))
        })
        .sum();
    lhs - beta * moment_normalizer(a, u)
}
