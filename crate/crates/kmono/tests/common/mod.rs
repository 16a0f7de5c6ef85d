//! Shared test utilities: a brute-force projected-gradient QP oracle over
//! the full weight grid, independent of the support-reduction code path.
//!
//! The oracle minimizes `||Q w - p||²` over all weights `w >= 0` on
//! `{0..level}` (cone) or over the simplex `w >= 0, Σw = 1` (probability),
//! by FISTA with adaptive restart. Gradients, projections, and convergence
//! checks are implemented here from the basis alone; nothing from the
//! solver module is reused.

use kmono::spline::qnorm;

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Cone,
    Simplex,
}

pub struct OracleResult {
    /// Mixture weights on the full grid (kept for inspection).
    #[allow(dead_code)]
    pub weights: Vec<f64>,
    pub fitted: Vec<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Euclidean projection onto the probability simplex (sort-based).
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn project(mode: OracleMode, v: &[f64]) -> Vec<f64> {
    match mode {
        OracleMode::Cone => v.iter().map(|&x| x.max(0.0)).collect(),
        OracleMode::Simplex => project_simplex(v),
    }
}

/// Projects `p` onto the span of atoms `{0..level}` under the mode's
/// constraint set. `step = None` picks a safe step from a power-iteration
/// bound on the Gram spectrum.
pub fn qp_project(
    k: usize,
    level: usize,
    p: &[f64],
    mode: OracleMode,
    max_iters: usize,
    step: Option<f64>,
) -> OracleResult {
    let horizon = level.max(p.len().saturating_sub(1));
    let cols: Vec<Vec<f64>> = (0..=level)
        .map(|j| (0..=j).map(|i| qnorm(k, j, i)).collect())
        .collect();
    let n = level + 1;

    let apply_q = |w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; horizon + 1];
        for (col, &wj) in cols.iter().zip(w.iter()) {
            if wj != 0.0 {
                for (i, &q) in col.iter().enumerate() {
                    out[i] += wj * q;
                }
            }
        }
        out
    };
    let apply_qt = |r: &[f64]| -> Vec<f64> {
        cols.iter()
            .map(|col| col.iter().zip(r.iter()).map(|(q, x)| q * x).sum())
            .collect()
    };
    let gradient = |w: &[f64]| -> Vec<f64> {
        let mut resid = apply_q(w);
        for (i, r) in resid.iter_mut().enumerate() {
            *r -= p.get(i).copied().unwrap_or(0.0);
        }
        apply_qt(&resid).into_iter().map(|g| 2.0 * g).collect()
    };
    let objective = |w: &[f64]| -> f64 {
        let fitted = apply_q(w);
        (0..=horizon)
            .map(|i| (fitted[i] - p.get(i).copied().unwrap_or(0.0)).powi(2))
            .sum()
    };

    let step = step.unwrap_or_else(|| {
        // Power iteration on G = QᵀQ for a spectral bound.
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 1.0f64;
        for _ in 0..100 {
            let gv = apply_qt(&apply_q(&v));
            lambda = gv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if lambda <= 0.0 {
                break;
            }
            for (vi, gi) in v.iter_mut().zip(gv.iter()) {
                *vi = gi / lambda;
            }
        }
        // FISTA needs step <= 1/L with L = λ_max(2G).
        0.45 / lambda.max(1e-12)
    });

    let kkt_residual = |w: &[f64], g: &[f64]| -> f64 {
        match mode {
            OracleMode::Cone => {
                let mut worst = 0.0f64;
                for (&wj, &gj) in w.iter().zip(g.iter()) {
                    let v = if wj > 1e-12 { gj.abs() } else { (-gj).max(0.0) };
                    worst = worst.max(v);
                }
                worst
            }
            OracleMode::Simplex => {
                let min_all = g.iter().copied().fold(f64::INFINITY, f64::min);
                let mut worst = 0.0f64;
                for (&wj, &gj) in w.iter().zip(g.iter()) {
                    if wj > 1e-12 {
                        worst = worst.max(gj - min_all);
                    }
                }
                worst
            }
        }
    };

    let start = match mode {
        OracleMode::Cone => vec![0.0; n],
        OracleMode::Simplex => vec![1.0 / n as f64; n],
    };
    let mut x = project(mode, &start);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    for iter in 0..max_iters {
        iterations = iter + 1;
        let g = gradient(&y);
        let candidate: Vec<f64> = y.iter().zip(g.iter()).map(|(yi, gi)| yi - step * gi).collect();
        let x_new = project(mode, &candidate);

        // Adaptive restart on the momentum direction.
        let backtrack: f64 = y
            .iter()
            .zip(x_new.iter())
            .zip(x.iter())
            .map(|((yi, ni), oi)| (yi - ni) * (ni - oi))
            .sum();
        if backtrack > 0.0 {
            t = 1.0;
            y = x_new.clone();
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let coef = (t - 1.0) / t_new;
            y = x_new
                .iter()
                .zip(x.iter())
                .map(|(ni, oi)| ni + coef * (ni - oi))
                .collect();
            t = t_new;
        }
        x = x_new;

        if iter % 64 == 63 {
            let gx = gradient(&x);
            residual = kkt_residual(&x, &gx);
            if residual < 1e-13 * objective(&x).max(1.0) {
                break;
            }
        }
    }
    if residual.is_infinite() {
        let gx = gradient(&x);
        residual = kkt_residual(&x, &gx);
    }

    let fitted = apply_q(&x);
    OracleResult {
        weights: x,
        fitted,
        iterations,
        kkt_residual: residual,
    }
}

/// Max absolute difference between two dense sequences of possibly
/// different lengths.
pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs()
        })
        .fold(0.0, f64::max)
}
