//! Support-reduction solver for the truncated least-squares projection.
//!
//! Minimizes `Ψ(π) = Σ_i (Σ_j π(j) Qᵏⱼ(i) - p̃(i))²` over mixtures supported
//! in `{0..L}`, in two modes:
//!
//! - [`Mode::Probability`]: weights sum to one (the projection onto
//!   k-monotone probabilities, truncated at `L`);
//! - [`Mode::Cone`]: weights are only required nonnegative (the projection
//!   onto the k-monotone cone, truncated at `L`).
//!
//! The algorithm alternates a search step (add the grid index with the most
//! negative directional derivative) with an equality-constrained least
//! squares resolve on the augmented support, pruning the support while any
//! resolved weight is negative. Each accepted resolve strictly decreases Ψ,
//! so the iteration is finite; an iteration cap guards against tolerance
//! misconfiguration. One solver instance is single-threaded and owns its
//! state; independent instances may run concurrently.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::seq::{DiscreteSeq, ProbSeq};
use crate::spline::{mass, qbar, SplineMixture};
use crate::{Error, Result};

/// Resolved weights within this of zero are treated as zero.
const WEIGHT_EPS: f64 = 1e-14;

/// Which constraint set the solver projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Mixture weights sum to one: the fit is a pmf.
    #[serde(rename = "prob")]
    Probability,
    /// Mixture weights are nonnegative only: the fit is a k-monotone
    /// sequence with mass at least one.
    #[serde(rename = "seq")]
    Cone,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Probability => write!(f, "prob"),
            Mode::Cone => write!(f, "seq"),
        }
    }
}

/// Solver parameters for one truncated problem.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub k: usize,
    /// Truncation level L: candidate knots are `{0..=L}`.
    pub max_support: usize,
    pub mode: Mode,
    /// Directional-derivative tolerance, compared against
    /// `deriv_tol * max(1, Ψ)` so it stays meaningful near Ψ ≈ 0.
    pub deriv_tol: f64,
    pub max_outer_iters: usize,
}

impl SolverConfig {
    pub fn new(k: usize, max_support: usize, mode: Mode) -> Self {
        SolverConfig {
            k,
            max_support,
            mode,
            deriv_tol: 1e-10,
            // Finite in exact arithmetic; the cap only catches tolerance
            // pathologies.
            max_outer_iters: 10 * (max_support + 1),
        }
    }
}

/// Solver output: the optimal support, weights, and fit for the truncated
/// problem, plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SolverState {
    k: usize,
    mode: Mode,
    support: Vec<usize>,
    weights: Vec<f64>,
    fitted: Vec<f64>,
    p_tilde: Vec<f64>,
    lambda: f64,
    psi_trace: Vec<f64>,
    outer_iters: usize,
    kkt_min_deriv: f64,
    kkt_support_max_abs: f64,
}

impl SolverState {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Knot indices with positive weight, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Mixture weights aligned with [`SolverState::support`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fitted_seq(&self) -> DiscreteSeq {
        DiscreteSeq::new(self.fitted.clone())
    }

    pub fn mixture(&self) -> SplineMixture {
        SplineMixture::from_pairs(
            self.k,
            self.support.iter().copied().zip(self.weights.iter().copied()),
        )
    }

    /// Lagrange multiplier of the last probability-mode resolve.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Ψ after the initial solve and after each accepted resolve.
    pub fn psi_trace(&self) -> &[f64] {
        &self.psi_trace
    }

    pub fn psi(&self) -> f64 {
        *self.psi_trace.last().expect("trace is never empty")
    }

    pub fn iterations(&self) -> usize {
        self.outer_iters
    }

    /// Smallest directional derivative over the grid at exit.
    pub fn kkt_min_deriv(&self) -> f64 {
        self.kkt_min_deriv
    }

    /// Largest |directional derivative| over the support at exit.
    pub fn kkt_support_max_abs(&self) -> f64 {
        self.kkt_support_max_abs
    }
}

/// The least-squares criterion `Ψ(π) = Σ_i (compose(π)(i) - p̃(i))²`.
pub fn psi(mixture: &SplineMixture, p: &ProbSeq) -> f64 {
    mixture.compose().dist_sq(p.seq())
}

/// Directional derivative of Ψ at the current state toward the Dirac
/// mixture at `j`. In probability mode this is the derivative along the
/// simplex segment `(1-ε)π + ε δⱼ`; in cone mode it is the plain gradient
/// coordinate `∂Ψ/∂π(j)`.
pub fn dir_deriv(state: &SolverState, j: usize) -> f64 {
    let k = state.k;
    let m = mass(k, j);
    let mut acc = 0.0;
    for i in 0..state.fitted.len().max(j + 1) {
        let q = if i <= j { qbar(k, j, i) / m } else { 0.0 };
        let f = state.fitted.get(i).copied().unwrap_or(0.0);
        let p = state.p_tilde.get(i).copied().unwrap_or(0.0);
        let dir = match state.mode {
            Mode::Probability => q - f,
            Mode::Cone => q,
        };
        acc += dir * (f - p);
    }
    2.0 * acc
}

/// Constrained least-squares resolve on a fixed support, signs free.
///
/// Probability mode minimizes `Ψ` subject to `Σ π = 1` via the normal
/// equations with a Lagrange correction: with Gram matrix `G`, right-hand
/// side `b(j) = <Qⱼ, p̃>`, and `x0 = G⁻¹b`, `x1 = G⁻¹1`, the multiplier is
/// `λ = (Σx0 - 1)/Σx1` and the weights are `x0 - λ·x1`. Cone mode is the
/// plain normal-equations solve (`λ = 0`).
///
/// Returns the signed weight vector aligned with `support`, plus `λ`.
pub fn solve_on_support(
    k: usize,
    support: &[usize],
    p: &ProbSeq,
    mode: Mode,
) -> Result<(Vec<f64>, f64)> {
    assert!(!support.is_empty(), "support must be nonempty");
    let s = support.len();
    let cols: Vec<Vec<f64>> = support
        .iter()
        .map(|&j| {
            let m = mass(k, j);
            (0..=j).map(|i| qbar(k, j, i) / m).collect()
        })
        .collect();

    let mut gram = DMatrix::zeros(s, s);
    for a in 0..s {
        for b in a..s {
            let dot: f64 = cols[a].iter().zip(cols[b].iter()).map(|(x, y)| x * y).sum();
            gram[(a, b)] = dot;
            gram[(b, a)] = dot;
        }
    }
    let rhs = DVector::from_fn(s, |a, _| {
        cols[a]
            .iter()
            .enumerate()
            .map(|(i, q)| q * p.get(i))
            .sum::<f64>()
    });

    let chol = Cholesky::new(gram).ok_or_else(|| Error::SingularGram {
        support: support.to_vec(),
    })?;
    match mode {
        Mode::Cone => {
            let w = chol.solve(&rhs);
            Ok((w.iter().copied().collect(), 0.0))
        }
        Mode::Probability => {
            let x0 = chol.solve(&rhs);
            let x1 = chol.solve(&DVector::from_element(s, 1.0));
            let lambda = (x0.sum() - 1.0) / x1.sum();
            let w: Vec<f64> = x0.iter().zip(x1.iter()).map(|(a, b)| a - lambda * b).collect();
            Ok((w, lambda))
        }
    }
}

/// Runs support reduction to the exact optimum of the truncated problem.
pub fn run(config: &SolverConfig, p: &ProbSeq) -> Result<SolverState> {
    let k = config.k;
    let level = config.max_support;
    assert!(k >= 1, "degree parameter must be at least 1");
    assert!(
        level >= p.smax(),
        "truncation level {level} below the observed support {}",
        p.smax()
    );
    let horizon = level.max(p.smax());
    let p_tilde: Vec<f64> = (0..=horizon).map(|i| p.get(i)).collect();
    let masses: Vec<f64> = (0..=level).map(|j| mass(k, j)).collect();

    let (mut support, mut weights, mut lambda) = match config.mode {
        Mode::Probability => (vec![level], vec![1.0], 0.0),
        Mode::Cone => {
            let (w, lam) = solve_on_support(k, &[level], p, Mode::Cone)?;
            (vec![level], w, lam)
        }
    };
    let mut fitted = compose_dense(k, &support, &weights, horizon);
    let mut psi_trace = vec![dist_sq(&fitted, &p_tilde)];

    let mut outer = 0;
    let derivs = loop {
        outer += 1;
        if outer > config.max_outer_iters {
            return Err(Error::IterationCap {
                cap: config.max_outer_iters,
                level,
            });
        }

        let derivs = deriv_scan(k, config.mode, &fitted, &p_tilde, &masses, level);
        let threshold = config.deriv_tol * psi_trace.last().unwrap().max(1.0);
        // Derivatives on the current support vanish at the per-support
        // optimum; excluding them from the search guards against selecting
        // float noise.
        let mut entering: Option<(usize, f64)> = None;
        for (j, &d) in derivs.iter().enumerate() {
            if support.binary_search(&j).is_ok() {
                continue;
            }
            if entering.is_none_or(|(_, best)| d < best) {
                entering = Some((j, d));
            }
        }
        let Some((enter, min_deriv)) = entering else {
            break derivs; // support covers the whole grid
        };
        if min_deriv >= -threshold {
            break derivs;
        }

        // Augment, then resolve; prune while any weight went negative. The
        // reduction ratio compares against the weights held on entry to this
        // block, and only coordinates whose value decreased are candidates.
        let pos = support.binary_search(&enter).unwrap_err();
        let mut trial = support.clone();
        trial.insert(pos, enter);
        let entry_weight = |j: usize| -> f64 {
            support
                .binary_search(&j)
                .map(|p| weights[p])
                .unwrap_or(0.0)
        };
        let (accepted, lam) = loop {
            let (w, lam) = solve_on_support(k, &trial, p, config.mode)?;
            if w.iter().all(|&x| x >= -WEIGHT_EPS) {
                break (w, lam);
            }
            let mut removal: Option<(usize, f64)> = None;
            for (pos, (&j, &wj)) in trial.iter().zip(w.iter()).enumerate() {
                let old = entry_weight(j);
                if wj < old {
                    let ratio = old / (old - wj);
                    if removal.is_none_or(|(_, r)| ratio < r) {
                        removal = Some((pos, ratio));
                    }
                }
            }
            let (rm, _) = removal.expect("negative weight implies a decreased coordinate");
            trial.remove(rm);
        };

        support.clear();
        weights.clear();
        for (&j, &w) in trial.iter().zip(accepted.iter()) {
            if w > WEIGHT_EPS {
                support.push(j);
                weights.push(w);
            }
        }
        lambda = lam;
        fitted = compose_dense(k, &support, &weights, horizon);
        psi_trace.push(dist_sq(&fitted, &p_tilde));
    };

    let kkt_min_deriv = derivs.iter().copied().fold(f64::INFINITY, f64::min);
    let kkt_support_max_abs = support
        .iter()
        .map(|&j| derivs[j].abs())
        .fold(0.0, f64::max);

    // Output cleanup: weights at rounding scale are residue of the last
    // resolve, not knots of the optimum. Prune at the documented mixture
    // drop threshold and rebuild the fit from what remains (perturbs the
    // fit by at most |S|·1e-12, far below every certificate tolerance).
    let kept: Vec<(usize, f64)> = support
        .iter()
        .copied()
        .zip(weights.iter().copied())
        .filter(|&(_, w)| w > crate::spline::DROP_TOL)
        .collect();
    if kept.len() != support.len() {
        support = kept.iter().map(|&(j, _)| j).collect();
        weights = kept.iter().map(|&(_, w)| w).collect();
        fitted = compose_dense(k, &support, &weights, horizon);
    }

    Ok(SolverState {
        k,
        mode: config.mode,
        support,
        weights,
        fitted,
        p_tilde,
        lambda,
        psi_trace,
        outer_iters: outer,
        kkt_min_deriv,
        kkt_support_max_abs,
    })
}

/// All directional derivatives at once. `Σ_i Q̄ᵏⱼ(i) r(i) = F^k_r(j)`, so a
/// single k-fold cumulative sum of the residual yields every `<Qⱼ, r>`.
fn deriv_scan(
    k: usize,
    mode: Mode,
    fitted: &[f64],
    p_tilde: &[f64],
    masses: &[f64],
    level: usize,
) -> Vec<f64> {
    let mut r: Vec<f64> = fitted.iter().zip(p_tilde).map(|(f, p)| f - p).collect();
    let proj = match mode {
        Mode::Probability => fitted.iter().zip(r.iter()).map(|(f, x)| f * x).sum(),
        Mode::Cone => 0.0,
    };
    for _ in 0..k {
        let mut acc = 0.0;
        for v in r.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    (0..=level).map(|j| 2.0 * (r[j] / masses[j] - proj)).collect()
}

fn compose_dense(k: usize, support: &[usize], weights: &[f64], horizon: usize) -> Vec<f64> {
    let mut out = vec![0.0; horizon + 1];
    for (&j, &w) in support.iter().zip(weights.iter()) {
        let m = mass(k, j);
        for (i, v) in out.iter_mut().enumerate().take(j + 1) {
            *v += w * qbar(k, j, i) / m;
        }
    }
    out
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}
