//! Reference target distributions for the simulation study: spline-atom
//! pmfs and Poisson pmfs, their monotony thresholds, and seeded samplers.
//!
//! Sampling is inverse-CDF lookup on the (truncated) pmf, driven by a
//! seedable, stream-splittable generator: replication `r` of cell `c` draws
//! from the stream keyed by `(seed, c, r)`, so parallel runs are
//! reproducible regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::empirical::CountTable;
use crate::seq::ProbSeq;
use crate::spline::qnorm_seq;
use crate::{Error, Result};

/// Poisson pmfs are truncated once the remaining tail mass drops below
/// this, then renormalized; far below every tolerance in use.
const POISSON_TAIL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum TargetKind {
    /// The normalized spline atom `Q^degree_knot`.
    Spline { degree: usize, knot: usize },
    Poisson { lambda: f64 },
}

/// A simulation target: its pmf and a cached CDF for sampling.
#[derive(Debug, Clone)]
pub struct TargetDist {
    pub kind: TargetKind,
    pmf: ProbSeq,
    cdf: Vec<f64>,
}

impl TargetDist {
    fn from_pmf(kind: TargetKind, pmf: ProbSeq) -> Self {
        let mut acc = 0.0;
        let cdf = pmf
            .seq()
            .values()
            .iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect();
        TargetDist { kind, pmf, cdf }
    }

    pub fn spline(degree: usize, knot: usize) -> Self {
        let pmf = ProbSeq::new(qnorm_seq(degree, knot)).expect("normalized atom is a pmf");
        TargetDist::from_pmf(TargetKind::Spline { degree, knot }, pmf)
    }

    pub fn poisson(lambda: f64) -> Self {
        assert!(lambda > 0.0 && lambda.is_finite());
        // e^{-lambda} must not underflow for the term recurrence to start.
        assert!(lambda <= 300.0, "rate {lambda} out of the supported range");
        let mut term = (-lambda).exp();
        let mut values = vec![term];
        let mut cum = term;
        let mut i = 0usize;
        while 1.0 - cum >= POISSON_TAIL {
            i += 1;
            term *= lambda / i as f64;
            values.push(term);
            cum += term;
        }
        for v in values.iter_mut() {
            *v /= cum;
        }
        let pmf = ProbSeq::from_values(values).expect("renormalized Poisson is a pmf");
        TargetDist::from_pmf(TargetKind::Poisson { lambda }, pmf)
    }

    pub fn pmf(&self) -> &ProbSeq {
        &self.pmf
    }

    /// Draws `n` i.i.d. values by inverse-CDF lookup.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> CountTable {
        assert!(n >= 1);
        let samples = (0..n).map(|_| {
            let u: f64 = rng.random();
            self.cdf.partition_point(|&c| c <= u) as u64
        });
        CountTable::from_samples(samples).expect("n >= 1")
    }

    /// Parses `spline:J:L` (atom with knot J, degree parameter L) or
    /// `poisson:LAMBDA`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |msg: &str| Error::BadDistSpec {
            spec: spec.to_string(),
            msg: msg.to_string(),
        };
        let mut parts = spec.split(':');
        match parts.next() {
            Some("spline") => {
                let j: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("expected spline:J:L with integer J"))?;
                let ell: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("expected spline:J:L with integer L"))?;
                if parts.next().is_some() {
                    return Err(bad("trailing fields"));
                }
                if ell < 1 {
                    return Err(bad("degree parameter must be at least 1"));
                }
                Ok(TargetDist::spline(ell, j))
            }
            Some("poisson") => {
                let lambda: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("expected poisson:LAMBDA with numeric LAMBDA"))?;
                if parts.next().is_some() {
                    return Err(bad("trailing fields"));
                }
                if !lambda.is_finite() || lambda <= 0.0 || lambda > 300.0 {
                    return Err(bad("lambda must be in (0, 300]"));
                }
                Ok(TargetDist::poisson(lambda))
            }
            _ => Err(bad("expected spline:J:L or poisson:LAMBDA")),
        }
    }

    /// Canonical spec string (round-trips through [`TargetDist::parse`]).
    pub fn label(&self) -> String {
        match &self.kind {
            TargetKind::Spline { degree, knot } => format!("spline:{knot}:{degree}"),
            TargetKind::Poisson { lambda } => format!("poisson:{lambda}"),
        }
    }
}

/// The generator stream for a given (seed, stream index) pair: one ChaCha
/// instance per replication keeps parallel sampling deterministic.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest Poisson rate at which the distribution stays `ell`-monotone
/// (`1 <= ell <= 10`), as the smallest positive root of the alternating
/// polynomial with coefficients `(ell!)² / ((h!)²(ell-h)!)`.
///
/// Those coefficients come from requiring the signed `ell`-th difference of
/// the pmf at 0 to be nonnegative: `C(ell,h)/h!` scaled by `ell!`.
pub fn poisson_kmono_threshold(ell: usize) -> f64 {
    assert!((1..=10).contains(&ell), "threshold implemented for 1 <= ell <= 10");
    let coeffs: Vec<f64> = (0..=ell)
        .map(|h| {
            // (ell!/h!)² / (ell-h)!; every division here is exact.
            let falling = num_factorial(ell) / num_factorial(h);
            ((falling * falling) / num_factorial(ell - h)) as f64
        })
        .collect();
    let eval = |lambda: f64| -> f64 {
        let mut acc = 0.0;
        let mut sign = 1.0;
        let mut pow = 1.0;
        for &c in &coeffs {
            acc += sign * c * pow;
            sign = -sign;
            pow *= lambda;
        }
        acc
    };

    // P(0) = ell! > 0; scan a dyadic grid for the first sign change, then
    // bisect. The grid hits integer points exactly, so λ₁ = 1 comes out
    // exact.
    let step = 1.0 / 1024.0;
    let mut lo = 0.0;
    let mut hi = 0.0;
    for i in 1..(4 * 1024) {
        let x = i as f64 * step;
        let v = eval(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            lo = (i - 1) as f64 * step;
            hi = x;
            break;
        }
    }
    assert!(hi > 0.0, "no sign change located for ell = {ell}");
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let v = eval(mid);
        if v == 0.0 {
            return mid;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn num_factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Whether the Poisson distribution with this rate is `ell`-monotone.
/// The threshold itself is a computed root, so the comparison allows it a
/// 1e-12 boundary slack.
pub fn is_poisson_kmonotone(lambda: f64, ell: usize) -> bool {
    assert!(lambda > 0.0);
    lambda <= poisson_kmono_threshold(ell) + 1e-12
}
