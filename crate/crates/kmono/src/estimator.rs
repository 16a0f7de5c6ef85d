//! Top-level estimation driver: pick a truncation level, solve, certify,
//! enlarge until the certificate passes.
//!
//! The truncation schedule starts at `s̃ + 2k` (the fitted support almost
//! never needs more) and doubles with a `+k` offset on each retry; a failed
//! certificate at the cap is surfaced as an error carrying the last report.

use serde_json::{json, Value};

use crate::seq::{DiscreteSeq, ProbSeq};
use crate::solver::{run, Mode, SolverConfig};
use crate::spline::SplineMixture;
use crate::stopping::{beta, check_auto, StopReport, STOP_TOL};
use crate::{Error, Result};

/// Hard cap on the truncation level.
pub const LEVEL_CAP: usize = 100_000;

/// Knobs for [`fit`]; the defaults are right for almost everything.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Directional-derivative tolerance of the inner solver.
    pub deriv_tol: f64,
    /// Tolerance of the stopping certificate.
    pub stop_tol: f64,
    /// Overrides the first truncation level (clamped to at least `s̃`);
    /// later attempts continue the doubling schedule from it.
    pub initial_level: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            deriv_tol: 1e-10,
            stop_tol: STOP_TOL,
            initial_level: None,
        }
    }
}

/// A certified fit: the projection of `p̃` onto k-monotone probabilities
/// (probability mode) or onto the k-monotone cone (cone mode).
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub fitted: DiscreteSeq,
    pub mixture: SplineMixture,
    /// Knot indices of the fit (the mixture support).
    pub knots: Vec<usize>,
    /// `<fitted, fitted - p̃>`; nonpositive in probability mode, zero in
    /// cone mode.
    pub beta: f64,
    /// Largest support index of the fit.
    pub shat: Option<usize>,
    /// Truncation level at which the certificate passed.
    pub level_used: usize,
    pub criterion: StopReport,
    /// Outer solver iterations at the accepted level.
    pub iterations: usize,
    pub mode: Mode,
    pub k: usize,
}

impl EstimateResult {
    pub fn mass(&self) -> f64 {
        self.fitted.sum()
    }

    /// JSON result document.
    pub fn to_json(&self) -> Value {
        let mixture: serde_json::Map<String, Value> = self
            .mixture
            .weights()
            .iter()
            .map(|(j, w)| (j.to_string(), json!(w)))
            .collect();
        json!({
            "mode": self.mode.to_string(),
            "k": self.k,
            "L_used": self.level_used,
            "p_hat": self.fitted.values(),
            "mixture": mixture,
            "knots": self.knots,
            "beta": self.beta,
            "criterion": serde_json::to_value(&self.criterion).expect("report serializes"),
            "mass": self.mass(),
        })
    }
}

/// Truncation level for a given retry attempt: `L₀ = s̃ + 2k`, then
/// `L_{a+1} = 2·L_a + k`, capped at [`LEVEL_CAP`].
pub fn l_schedule(s_tilde: usize, k: usize, attempt: usize) -> Result<usize> {
    let mut level = s_tilde + 2 * k;
    for _ in 0..attempt {
        level = 2 * level + k;
    }
    if level > LEVEL_CAP {
        return Err(Error::TruncationCap {
            cap: LEVEL_CAP,
            last_level: level,
        });
    }
    Ok(level)
}

/// Computes the global constrained least-squares projection of `p̃`.
///
/// Runs the support-reduction solver at increasing truncation levels until
/// the stopping certificate confirms the truncated solution is the global
/// projection. `k = 2` reproduces the convex case (both modes coincide);
/// `k = 1` projects onto nonincreasing sequences through the same machinery.
///
/// ```
/// use kmono::{fit, CountTable, FitOptions, Mode};
///
/// let counts = CountTable::from_samples([0u64, 0, 1, 1, 1, 2, 4])?;
/// let p = counts.empirical_pmf();
/// let result = fit(&p, 3, Mode::Probability, &FitOptions::default())?;
/// assert!(result.criterion.passed);
/// assert!((result.mass() - 1.0).abs() < 1e-12);
/// # Ok::<(), kmono::Error>(())
/// ```
pub fn fit(p: &ProbSeq, k: usize, mode: Mode, options: &FitOptions) -> Result<EstimateResult> {
    assert!(k >= 1, "constraint order must be at least 1");
    let s_tilde = p.smax();
    let mut level = match options.initial_level {
        Some(l) => l.max(s_tilde),
        None => l_schedule(s_tilde, k, 0)?,
    };

    loop {
        let mut config = SolverConfig::new(k, level, mode);
        config.deriv_tol = options.deriv_tol;
        let state = run(&config, p)?;
        let fitted = state.fitted_seq();
        let beta_actual = beta(&fitted, p);
        let beta_criterion = match mode {
            Mode::Probability => beta_actual,
            // The cone projection is characterized with zero in place of
            // beta; its own beta vanishes by orthogonality.
            Mode::Cone => 0.0,
        };
        let report = check_auto(&fitted, p, k, beta_criterion, options.stop_tol);
        if report.passed {
            if k == 2 && beta_actual.abs() > options.stop_tol {
                // Convex projections have beta exactly zero; anything else
                // means the solver tolerances are off.
                return Err(Error::ConvexBeta(beta_actual));
            }
            let mixture = state.mixture();
            let knots = mixture.knots();
            return Ok(EstimateResult {
                shat: fitted.smax(),
                fitted,
                mixture,
                knots,
                beta: beta_actual,
                level_used: level,
                criterion: report,
                iterations: state.iterations(),
                mode,
                k,
            });
        }
        let next = 2 * level + k;
        if next > LEVEL_CAP {
            return Err(Error::CriterionFailed {
                level,
                report: Box::new(report),
            });
        }
        level = next;
    }
}
