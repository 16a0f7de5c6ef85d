//! Acceptance suite: one test per release criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see them all).
//!
//! Every tolerance is pinned in code here; nothing is deferred to later
//! calibration.

mod common;

use std::time::Instant;

use common::{linf, qp_project, OracleMode};
use kmono::dist::{poisson_kmono_threshold, stream_rng, TargetDist};
use kmono::estimator::{fit, FitOptions};
use kmono::seq::{ProbSeq, DEFAULT_TOL};
use kmono::sim::{run_grid, EstKind, SimConfig};
use kmono::solver::{run, Mode, SolverConfig};
use kmono::spline::{mass, qbar};
use kmono::stopping::{
    beta, check_general, check_k34, moment_gap, moment_gap_truncated, moment_normalizer,
    STOP_TOL,
};

fn delta1() -> ProbSeq {
    ProbSeq::delta(1)
}

fn worked_fit() -> Vec<f64> {
    [91.0, 66.0, 45.0, 28.0, 15.0, 6.0, 1.0]
        .iter()
        .map(|v| v / 238.0)
        .collect()
}

/// The simulation-design targets, spline family first.
fn target_pool() -> Vec<TargetDist> {
    vec![
        TargetDist::spline(2, 10),
        TargetDist::spline(3, 10),
        TargetDist::spline(4, 10),
        TargetDist::spline(10, 10),
        TargetDist::poisson(0.3),
        TargetDist::poisson(0.35),
        TargetDist::poisson(0.45),
        TargetDist::poisson(2.0 - 2.0f64.sqrt()),
        TargetDist::poisson(0.7),
        TargetDist::poisson(1.0),
    ]
}

#[test]
fn criterion_1_worked_projection_of_dirac() {
    let start = Instant::now();

    let result = fit(&delta1(), 3, Mode::Cone, &FitOptions::default()).unwrap();
    let expect = worked_fit();
    let fit_err = linf(result.fitted.values(), &expect);
    assert!(fit_err < 1e-9, "fitted sequence off by {fit_err:.3e}");

    // Unnormalized-basis weights: 3/238 and 1/238 exactly.
    let alpha = result.mixture.weight(5) / mass(3, 5);
    let gamma = result.mixture.weight(6) / mass(3, 6);
    assert!((alpha - 3.0 / 238.0).abs() < 1e-9, "alpha {alpha}");
    assert!((gamma - 1.0 / 238.0).abs() < 1e-9, "gamma {gamma}");

    // Mass arbitrated by the independent QP oracle on the grid {0..12}.
    let oracle = qp_project(3, 12, &[0.0, 1.0], OracleMode::Cone, 1_000_000, Some(1e-3));
    let oracle_err = linf(result.fitted.values(), &oracle.fitted);
    assert!(oracle_err < 1e-6, "oracle disagreement {oracle_err:.3e}");
    let oracle_mass: f64 = oracle.fitted.iter().sum();
    assert!((result.mass() - 252.0 / 238.0).abs() < 1e-9);
    assert!((oracle_mass - 252.0 / 238.0).abs() < 1e-6);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 1: PASS: Dirac-at-1 cone projection exact (fit err {fit_err:.1e}, \
         oracle err {oracle_err:.1e} at kkt {:.1e} after {} iterations, mass {:.6} = 252/238, \
         {elapsed:.2?})",
        oracle.kkt_residual,
        oracle.iterations,
        result.mass()
    );
}

#[test]
fn criterion_2_basis_exactness() {
    let row5: Vec<f64> = (0..=5).map(|i| qbar(3, 5, i)).collect();
    assert_eq!(row5, vec![21.0, 15.0, 10.0, 6.0, 3.0, 1.0]);
    let row6: Vec<f64> = (0..=6).map(|i| qbar(3, 6, i)).collect();
    assert_eq!(row6, vec![28.0, 21.0, 15.0, 10.0, 6.0, 3.0, 1.0]);

    let mut checked = 0;
    for k in 1..=6 {
        for j in 0..=60 {
            assert_eq!(mass(k, j), qbar(k + 1, j, 0), "k={k} j={j}");
            checked += 1;
        }
    }
    println!(
        "criterion 2: PASS: atom rows exact and mass identity bit-exact on {checked} (k, j) pairs"
    );
}

#[test]
fn criterion_3_poisson_thresholds() {
    let l1 = poisson_kmono_threshold(1);
    assert_eq!(l1, 1.0, "lambda_1 must be exactly 1");
    let l2 = poisson_kmono_threshold(2);
    assert!((l2 - (2.0 - 2.0f64.sqrt())).abs() <= 1e-12, "lambda_2 {l2}");
    let expected = [(3, 0.415), (4, 0.322), (5, 0.264)];
    for (ell, want) in expected {
        let got = poisson_kmono_threshold(ell);
        assert!((got - want).abs() <= 1e-3, "lambda_{ell} {got} vs {want}");
    }
    // Monotony cross-check on the truncated pmfs either side of the root.
    for ell in 1..=5 {
        let lam = poisson_kmono_threshold(ell);
        let below = TargetDist::poisson(lam - 0.01);
        let above = TargetDist::poisson(lam + 0.01);
        assert!(below.pmf().seq().is_kmonotone(ell, DEFAULT_TOL).is_monotone);
        assert!(!above.pmf().seq().is_kmonotone(ell, DEFAULT_TOL).is_monotone);
    }
    println!(
        "criterion 3: PASS: thresholds 1, {:.12}, {:.4}, {:.4}, {:.4} with ±0.01 monotony checks",
        poisson_kmono_threshold(2),
        poisson_kmono_threshold(3),
        poisson_kmono_threshold(4),
        poisson_kmono_threshold(5),
    );
}

#[test]
fn criterion_4_kkt_characterization_suite() {
    let start = Instant::now();
    let pool = target_pool();
    let ns = [20usize, 100];
    let ks = [2usize, 3, 4];
    let total = 200;
    let mut two_sided_violations = 0usize;

    for i in 0..total {
        let target = &pool[i % pool.len()];
        let n = ns[i % ns.len()];
        let k = ks[i % ks.len()];
        let mut rng = stream_rng(0xACCE97, i as u64);
        let p = target.sample(n, &mut rng).empirical_pmf();

        let prob = fit(&p, k, Mode::Probability, &FitOptions::default()).unwrap();
        let cone = fit(&p, k, Mode::Cone, &FitOptions::default()).unwrap();
        let label = format!("instance {i} ({}, n={n}, k={k})", target.label());

        // Characterization with equality at knots, certified per mode.
        assert!(prob.criterion.passed, "{label}: prob criterion");
        assert!(cone.criterion.passed, "{label}: cone criterion");

        assert!(prob.beta <= 1e-10, "{label}: beta(p̂) = {}", prob.beta);
        let cone_beta = beta(&cone.fitted, &p);
        assert!(cone_beta.abs() <= 1e-10, "{label}: beta(p̂*) = {cone_beta}");
        assert!(
            cone.mass() >= 1.0 - 1e-10,
            "{label}: mass(p̂*) = {}",
            cone.mass()
        );

        // Moment comparisons for u in {1,2,3}. What the characterization
        // actually proves, and what holds without exception here, is the
        // one-sided comparison with weight (a-i)₊ᵘ for u >= k-1 and a >= 1
        // (the normalized weight is a k-monotone pmf direction then),
        // plus the Dirac-at-0 bound f(0) - p̃(0) >= beta. The two-sided
        // |i-a|ᵘ variant over the wider exponent range fails on real
        // fits; its violations are tallied and pinned by
        // `moment_comparison_stated_range_is_false`.
        for (fitres, b, tag) in [(&prob, prob.beta, "prob"), (&cone, 0.0, "seq")] {
            let shat = fitres.shat.unwrap_or(0);
            assert!(
                fitres.fitted.get(0) - p.get(0) >= b - 1e-10,
                "{label} {tag}: value-at-0 bound"
            );
            for u in 1..=3u32 {
                for a in 0..=shat {
                    let scale = 1e-9 * (1.0 + moment_normalizer(a, u));
                    if (u as usize) >= k - 1 && a >= 1 {
                        let g = moment_gap_truncated(&fitres.fitted, &p, b, a, u);
                        assert!(g >= -scale, "{label} {tag}: moment gap u={u} a={a}: {g:.3e}");
                    }
                    if moment_gap(&fitres.fitted, &p, b, a, u) < -scale {
                        two_sided_violations += 1;
                    }
                }
            }
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 4: PASS: {total} random instances certified with KKT, beta, mass, \
         value-at-0, and one-sided moment comparisons at the provable exponents u >= k-1; \
         the two-sided variant failed {two_sided_violations} (u, a) checks on the same \
         corpus (defect pinned separately)"
    );
}

#[test]
fn moment_comparison_stated_range_is_false() {
    // Documents the defect: the moment comparison with exponent u < k-1
    // fails on real fits (the backing direction (a-i)₊ᵘ is not k-monotone
    // there). Instance found on the acceptance corpus; the worked Dirac
    // projection gives a by-hand case (Σ|i-4|·f = 688/238 < 3).
    let target = TargetDist::spline(3, 10);
    let mut rng = stream_rng(0xACCE97, 1);
    let p = target.sample(100, &mut rng).empirical_pmf();
    let r = fit(&p, 3, Mode::Probability, &FitOptions::default()).unwrap();
    assert!(r.criterion.passed);
    let worst = (0..=r.shat.unwrap())
        .map(|a| moment_gap(&r.fitted, &p, r.beta, a, 1))
        .fold(f64::INFINITY, f64::min);
    assert!(
        worst < -1e-6,
        "expected a u=1 violation on this certified fit, found none (min gap {worst:.3e})"
    );
    println!(
        "moment-range counterexample: PASS: certified k=3 fit violates the u=1 comparison \
         by {worst:.3e}"
    );
}

#[test]
fn criterion_5_oracle_equivalence() {
    let start = Instant::now();
    let pool = target_pool();
    let mut convex_checked = 0;
    for i in 0..50u64 {
        let mut rng = stream_rng(0x04AC1E, i);
        let target = &pool[(i as usize) % pool.len()];
        let n = 5 + (i as usize * 7) % 46; // 5..=50
        let k = 2 + (i as usize) % 3;
        let p = target.sample(n, &mut rng).empirical_pmf();
        let level = (p.smax() + 2 * k).min(15).max(p.smax());
        let dense: Vec<f64> = (0..=p.smax()).map(|j| p.get(j)).collect();

        for mode in [Mode::Probability, Mode::Cone] {
            let state = run(&SolverConfig::new(k, level, mode), &p).unwrap();
            let oracle_mode = match mode {
                Mode::Probability => OracleMode::Simplex,
                Mode::Cone => OracleMode::Cone,
            };
            let oracle = qp_project(k, level, &dense, oracle_mode, 400_000, None);
            let err = linf(state.fitted_seq().values(), &oracle.fitted);
            assert!(
                err < 1e-6,
                "instance {i} k={k} L={level} mode={mode:?}: {err:.3e}"
            );
        }

        if k == 2 {
            // Mode coincidence is a statement about the certified global
            // estimators, not about a common truncation level.
            let prob = fit(&p, 2, Mode::Probability, &FitOptions::default()).unwrap();
            let cone = fit(&p, 2, Mode::Cone, &FitOptions::default()).unwrap();
            let err = linf(prob.fitted.values(), cone.fitted.values());
            assert!(err < 1e-9, "instance {i}: convex modes differ {err:.3e}");
            convex_checked += 1;
        }
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 5: PASS: 50 instances match the QP oracle to 1e-6; \
         convex modes coincide to 1e-9 on {convex_checked} of them ({elapsed:.2?})"
    );
}

#[test]
fn criterion_6_norm_domination() {
    // (target, admissible ks with k <= monotony degree of the target)
    let cells: Vec<(TargetDist, Vec<usize>)> = vec![
        (TargetDist::spline(2, 10), vec![1, 2]),
        (TargetDist::spline(3, 10), vec![2, 3]),
        (TargetDist::spline(4, 10), vec![2, 3, 4]),
        (TargetDist::spline(10, 10), vec![2, 3, 4]),
        (TargetDist::poisson(0.3), vec![2, 3, 4]),
        (TargetDist::poisson(0.35), vec![2, 3]),
        (TargetDist::poisson(0.45), vec![2]),
        (TargetDist::poisson(2.0 - 2.0f64.sqrt()), vec![2]),
        (TargetDist::poisson(0.7), vec![1]),
    ];
    let reps = 25;
    let mut checked = 0;
    for (cell_idx, (target, ks)) in cells.iter().enumerate() {
        let truth = target.pmf().seq();
        for &k in ks {
            for n in [20usize, 100] {
                for rep in 0..reps {
                    let stream = ((cell_idx * 1000 + k * 100 + n + rep) as u64) << 1;
                    let mut rng = stream_rng(0xD0314, stream);
                    let p = target.sample(n, &mut rng).empirical_pmf();
                    let r = fit(&p, k, Mode::Probability, &FitOptions::default()).unwrap();
                    let d_hat = truth.dist_sq(&r.fitted);
                    let d_emp = truth.dist_sq(p.seq());
                    assert!(
                        d_hat <= d_emp + 1e-12,
                        "({}, k={k}, n={n}, rep={rep}): {d_hat} > {d_emp}",
                        target.label()
                    );
                    checked += 1;
                }
            }
        }
    }
    println!(
        "criterion 6: PASS: l2 domination of the empirical estimator held in {checked}/{checked} \
         well-specified replications"
    );
}

#[test]
fn criterion_7_table_cell_reproduction() {
    let start = Instant::now();
    let config = SimConfig {
        targets: vec!["spline:10:2".into()],
        ns: vec![20],
        ks: vec![2],
        modes: vec![EstKind::Empirical, EstKind::Prob],
        reps: 1000,
        seed: 20_26,
        threads: None,
    };
    let records = run_grid(&config).unwrap();
    let rec = &records[0];
    assert!(rec.error.is_none(), "{:?}", rec.error);

    let p0 = 11.0 / 66.0;
    let scaled = |mode: EstKind, which: fn(&kmono::metrics::LossSummary) -> f64| -> f64 {
        let row = rec
            .rows
            .iter()
            .find(|r| r.mode == mode && r.metric == "p0")
            .expect("p0 row");
        (20.0f64).sqrt() * which(&row.summary) / p0
    };
    // The reference table's dispersion column holds deviation about the
    // TRUTH (our rmsep for the p(0) functional), not about the replication
    // mean: under the about-mean reading the reference's own companion
    // claims are impossible (the characterization forces fit(0) >= p̃(0),
    // hence nonnegative bias), while the about-truth reading reproduces
    // the full table block at Monte-Carlo resolution. Both quantities are
    // measured here; the about-mean one is pinned OUTSIDE the window to
    // keep the discrepancy visible.
    let emp = scaled(EstKind::Empirical, |s| s.se);
    let hat_about_truth = scaled(EstKind::Prob, |s| s.rmsep);
    let hat_about_mean = scaled(EstKind::Prob, |s| s.se);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    assert!(
        (emp - 2.25).abs() <= 0.15,
        "empirical column: {emp:.4} vs 2.25 ± 0.15"
    );
    assert!(
        (hat_about_truth - 1.800).abs() <= 0.15,
        "fit column (about-truth deviation): {hat_about_truth:.4} vs 1.800 ± 0.15"
    );
    assert!(
        (hat_about_mean - 1.800).abs() > 0.15,
        "about-mean deviation {hat_about_mean:.4} unexpectedly entered the reference window; \
         the label-discrepancy analysis behind this test would need revisiting"
    );
    println!(
        "criterion 7: PASS: triangular target, n=20, k=2, 1000 reps: sqrt(n)/p(0) × \
         (empirical SE {emp:.3} vs 2.25; fit deviation-about-truth {hat_about_truth:.3} vs \
         1.800; about-mean reading {hat_about_mean:.3} documented outside the window) \
         ({elapsed:.2?})"
    );
}

#[test]
fn criterion_8_misspecification_trend() {
    let start = Instant::now();
    let config = SimConfig {
        targets: vec!["spline:10:2".into()],
        ns: vec![20, 10_000],
        ks: vec![3],
        modes: vec![EstKind::Empirical, EstKind::Prob],
        reps: 200,
        seed: 31_337,
        threads: None,
    };
    let records = run_grid(&config).unwrap();
    let ratio_at = |n: usize| -> f64 {
        records
            .iter()
            .find(|r| r.n == n)
            .and_then(|r| {
                r.rows
                    .iter()
                    .find(|row| row.mode == EstKind::Prob && row.metric == "l2")
            })
            .map(|row| row.ratio_vs_empirical)
            .expect("l2 row")
    };
    let small = ratio_at(20);
    let large = ratio_at(10_000);
    assert!(small < 1.0, "l2 ratio at n=20: {small}");
    assert!(large > 3.0, "l2 ratio at n=10000: {large}");
    let elapsed = start.elapsed();
    println!(
        "criterion 8: PASS: misspecified k=3 on a convex target: l2 ratio {small:.3} at n=20, \
         {large:.2} at n=10000 ({elapsed:.2?})"
    );
}

#[test]
fn criterion_9_stopping_criteria_cross_validation() {
    // Short and general certificates agree on every converged fit with
    // k in {3, 4}.
    let pool = target_pool();
    let mut agreements = 0;
    for i in 0..60u64 {
        let mut rng = stream_rng(0x57C9, i);
        let target = &pool[(i as usize) % pool.len()];
        let n = [20usize, 100][(i as usize) % 2];
        let k = [3usize, 4][(i as usize) % 2];
        let p = target.sample(n, &mut rng).empirical_pmf();
        for mode in [Mode::Probability, Mode::Cone] {
            let r = fit(&p, k, mode, &FitOptions::default()).unwrap();
            let b = match mode {
                Mode::Probability => r.beta,
                Mode::Cone => 0.0,
            };
            let short = check_k34(&r.fitted, &p, k, b, STOP_TOL).unwrap();
            let general = check_general(&r.fitted, &p, k, b, STOP_TOL);
            assert!(short.passed && general.passed, "instance {i} mode={mode:?}");
            agreements += 1;
        }
    }

    // Deliberately under-truncated solves fail the certificate, and the
    // level schedule recovers from exactly that starting point.
    let mut undertruncated = 0;
    let mut examples: Vec<(ProbSeq, usize, Mode)> = vec![(delta1(), 3, Mode::Cone)];
    for i in 0..20u64 {
        let mut rng = stream_rng(0x7A11, i);
        let target = &pool[(i as usize) % pool.len()];
        let p = target.sample(20, &mut rng).empirical_pmf();
        examples.push((p, [3, 4][(i % 2) as usize], Mode::Probability));
    }
    for (p, k, mode) in examples {
        let full = fit(&p, k, mode, &FitOptions::default()).unwrap();
        let Some(shat) = full.shat else { continue };
        if shat <= p.smax() {
            continue; // truncation at s̃ would already be exact
        }
        let state = run(&SolverConfig::new(k, p.smax(), mode), &p).unwrap();
        let f = state.fitted_seq();
        let b = match mode {
            Mode::Probability => beta(&f, &p),
            Mode::Cone => 0.0,
        };
        let report = check_k34(&f, &p, k, b, STOP_TOL).unwrap();
        assert!(
            !report.passed,
            "truncation at s̃ = {} should fail (k={k}, {mode:?})",
            p.smax()
        );
        assert!(report.first_violation.is_some());

        let recovered = fit(
            &p,
            k,
            mode,
            &FitOptions {
                initial_level: Some(p.smax()),
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(recovered.level_used > p.smax(), "schedule did not escalate");
        let err = linf(recovered.fitted.values(), full.fitted.values());
        assert!(err < 1e-9, "schedule recovery differs by {err:.3e}");
        undertruncated += 1;
    }
    assert!(undertruncated >= 5, "only {undertruncated} under-truncated cases exercised");
    println!(
        "criterion 9: PASS: certificates agree on {agreements} converged fits; \
         {undertruncated} under-truncated solves failed and recovered via the level schedule"
    );
}

#[test]
fn support_window_respected_on_acceptance_corpus() {
    // Companion check to criterion 4: whenever the fit extends beyond the
    // data, the extension is knot-free except at its last two indices.
    // Tighter windows do not hold: certified, oracle-verified fits carry
    // knots at shat-1 for both parities and inside the data region down
    // to s̃-k+2, so this is the invariant asserted on every fit.
    let pool = target_pool();
    let mut extended = 0;
    let mut shrunk = 0; // whether ŝ >= s̃ always holds for k >= 3 is open; monitored only
    for i in 0..60u64 {
        let mut rng = stream_rng(0xBEEF, i);
        let target = &pool[(i as usize) % pool.len()];
        let k = [2usize, 3, 4][(i as usize) % 3];
        let p = target.sample(20, &mut rng).empirical_pmf();
        for mode in [Mode::Probability, Mode::Cone] {
            let r = fit(&p, k, mode, &FitOptions::default()).unwrap();
            let Some(shat) = r.shat else { continue };
            if shat > p.smax() {
                extended += 1;
            }
            if shat < p.smax() {
                shrunk += 1;
            }
            for &j in &r.knots {
                assert!(
                    j <= p.smax() || j + 1 >= shat,
                    "instance {i} k={k} {mode:?}: tail knot {j} strictly inside ({}, {})",
                    p.smax(),
                    shat - 1
                );
            }
        }
    }
    println!(
        "support-window check: PASS: {extended} extended fits, tail knots only at the last \
         pair; fits with shat < s̃ (monitored, not asserted): {shrunk}"
    );
}

#[test]
fn fitted_sequences_are_valid() {
    // Companion hygiene check: probability fits are pmfs and k-monotone;
    // cone fits are k-monotone with mass >= 1.
    let pool = target_pool();
    for i in 0..30u64 {
        let mut rng = stream_rng(0xF17, i);
        let target = &pool[(i as usize) % pool.len()];
        let k = [2usize, 3, 4][(i as usize) % 3];
        let p = target.sample(50, &mut rng).empirical_pmf();

        let prob = fit(&p, k, Mode::Probability, &FitOptions::default()).unwrap();
        assert!((prob.mass() - 1.0).abs() < 1e-12);
        assert!(prob.fitted.values().iter().all(|&v| v >= -1e-12));
        assert!(prob.fitted.is_kmonotone(k, DEFAULT_TOL).is_monotone);

        let cone = fit(&p, k, Mode::Cone, &FitOptions::default()).unwrap();
        assert!(cone.mass() >= 1.0 - 1e-10);
        assert!(cone.fitted.is_kmonotone(k, DEFAULT_TOL).is_monotone);
    }
    println!("fitted-validity check: PASS");
}

#[test]
fn dirac_probability_fit_agrees_with_oracle() {
    // The probability-mode counterpart of criterion 1's instance.
    let r = fit(&delta1(), 3, Mode::Probability, &FitOptions::default()).unwrap();
    let oracle = qp_project(3, 12, &[0.0, 1.0], OracleMode::Simplex, 1_000_000, Some(1e-3));
    let err = linf(r.fitted.values(), &oracle.fitted);
    assert!(err < 1e-6, "{err:.3e}");
    assert!((r.mass() - 1.0).abs() < 1e-12);
    assert!(r.beta <= 1e-12);
    println!("dirac probability-fit oracle check: PASS");
}
