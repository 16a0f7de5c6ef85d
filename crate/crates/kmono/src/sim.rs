//! Seeded, reproducible Monte Carlo over the (target × n × k) design grid.
//!
//! Each cell draws `reps` samples; every replication gets its own generator
//! stream keyed by `(seed, cell index, replication index)`, replications are
//! evaluated in parallel, and per-replication results land in preallocated
//! slots that are reduced in a fixed order. Output is therefore identical
//! for any worker count. A fit failure aborts its cell with a diagnostic
//! record; the rest of the grid still runs.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{stream_rng, TargetDist};
use crate::estimator::{fit, FitOptions};
use crate::metrics::{self, LossSummary};
use crate::seq::DiscreteSeq;
use crate::solver::Mode;
use crate::{Error, Result};

/// Which estimators a simulation records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstKind {
    #[serde(rename = "empirical")]
    Empirical,
    #[serde(rename = "prob")]
    Prob,
    #[serde(rename = "seq")]
    Seq,
}

impl EstKind {
    fn label(self) -> &'static str {
        match self {
            EstKind::Empirical => "empirical",
            EstKind::Prob => "prob",
            EstKind::Seq => "seq",
        }
    }
}

pub const METRICS: [&str; 7] = ["l2", "hellinger", "tv", "entropy", "variance", "p0", "mass"];

/// One simulation design: the grid, the replication count, and the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Target spec strings, e.g. `spline:10:2`, `poisson:0.35`.
    pub targets: Vec<String>,
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    #[serde(default = "default_modes")]
    pub modes: Vec<EstKind>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_modes() -> Vec<EstKind> {
    vec![EstKind::Empirical, EstKind::Prob, EstKind::Seq]
}

fn default_reps() -> usize {
    1000
}

/// One (metric, estimator) summary within a cell.
#[derive(Debug, Clone, Serialize)]
pub struct LossRow {
    pub mode: EstKind,
    pub metric: &'static str,
    pub summary: LossSummary,
    /// Mean-loss ratio against the empirical estimator for the losses,
    /// RMSEP ratio for the functionals. NaN when the denominator vanishes.
    pub ratio_vs_empirical: f64,
}

/// Aggregated results (or the failure diagnostic) of one grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct SimRecord {
    pub target: String,
    pub n: usize,
    pub k: usize,
    pub rows: Vec<LossRow>,
    pub error: Option<String>,
}

/// Per-replication metric values for one estimator: losses against the
/// truth pmf, then functional estimates.
#[derive(Debug, Clone, Copy)]
struct RepMetrics {
    values: [f64; 7],
}

fn eval_metrics(truth: &DiscreteSeq, estimate: &DiscreteSeq) -> RepMetrics {
    RepMetrics {
        values: [
            metrics::l2_err(truth, estimate),
            metrics::hellinger_err(truth, estimate),
            metrics::tv_err(truth, estimate),
            metrics::entropy(estimate),
            metrics::variance(estimate),
            metrics::prob_at_zero(estimate),
            metrics::total_mass(estimate),
        ],
    }
}

/// Truth values the functional estimates are measured against; the losses
/// target zero.
fn truth_values(truth: &DiscreteSeq) -> [f64; 7] {
    [
        0.0,
        0.0,
        0.0,
        metrics::entropy(truth),
        metrics::variance(truth),
        metrics::prob_at_zero(truth),
        1.0,
    ]
}

fn is_loss_metric(idx: usize) -> bool {
    idx < 3
}

struct CellOutcome {
    reps: Vec<[Option<RepMetrics>; 3]>, // indexed [empirical, prob, seq]
}

fn run_cell(
    config: &SimConfig,
    target: &TargetDist,
    n: usize,
    k: usize,
    cell_idx: usize,
) -> std::result::Result<CellOutcome, String> {
    let want_prob = config.modes.contains(&EstKind::Prob);
    let want_seq = config.modes.contains(&EstKind::Seq);
    let truth = target.pmf().seq().clone();
    let results: Vec<std::result::Result<[Option<RepMetrics>; 3], String>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let stream = ((cell_idx as u64) << 32) | rep as u64;
            let mut rng = stream_rng(config.seed, stream);
            let table = target.sample(n, &mut rng);
            let p = table.empirical_pmf();
            let empirical = eval_metrics(&truth, p.seq());
            let mut out = [Some(empirical), None, None];
            if want_prob {
                let r = fit(&p, k, Mode::Probability, &FitOptions::default())
                    .map_err(|e| format!("rep {rep} prob fit: {e}"))?;
                out[1] = Some(eval_metrics(&truth, &r.fitted));
            }
            if want_seq {
                let r = fit(&p, k, Mode::Cone, &FitOptions::default())
                    .map_err(|e| format!("rep {rep} seq fit: {e}"))?;
                out[2] = Some(eval_metrics(&truth, &r.fitted));
            }
            Ok(out)
        })
        .collect();

    let mut reps_out = Vec::with_capacity(config.reps);
    for r in results {
        reps_out.push(r?);
    }
    Ok(CellOutcome { reps: reps_out })
}

/// Runs the whole grid. Deterministic for a given `(config, seed)` pair
/// regardless of thread count.
pub fn run_grid(config: &SimConfig) -> Result<Vec<SimRecord>> {
    assert!(config.reps >= 1, "at least one replication");
    let targets: Vec<TargetDist> = config
        .targets
        .iter()
        .map(|s| TargetDist::parse(s))
        .collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::BadDistSpec {
            spec: "threads".into(),
            msg: e.to_string(),
        })?;

    let mut records = Vec::new();
    let mut cell_idx = 0usize;
    for target in &targets {
        for &n in &config.ns {
            for &k in &config.ks {
                let outcome = pool.install(|| run_cell(config, target, n, k, cell_idx));
                let record = match outcome {
                    Ok(cell) => summarize_cell(target, n, k, &config.modes, &cell),
                    Err(msg) => SimRecord {
                        target: target.label(),
                        n,
                        k,
                        rows: Vec::new(),
                        error: Some(msg),
                    },
                };
                records.push(record);
                cell_idx += 1;
            }
        }
    }
    Ok(records)
}

fn summarize_cell(
    target: &TargetDist,
    n: usize,
    k: usize,
    modes: &[EstKind],
    cell: &CellOutcome,
) -> SimRecord {
    let truth = target.pmf().seq();
    let truths = truth_values(truth);

    let collect = |slot: usize, metric: usize| -> Vec<f64> {
        cell.reps
            .iter()
            .map(|r| r[slot].expect("slot filled").values[metric])
            .collect()
    };

    let slot_of = |kind: EstKind| match kind {
        EstKind::Empirical => 0usize,
        EstKind::Prob => 1,
        EstKind::Seq => 2,
    };

    let mut rows = Vec::new();
    let empirical_summaries: Vec<LossSummary> = (0..METRICS.len())
        .map(|m| metrics::summarize(&collect(0, m), truths[m]))
        .collect();

    for &mode in modes {
        let slot = slot_of(mode);
        if cell.reps.first().map(|r| r[slot].is_none()) == Some(true) {
            continue;
        }
        for (m, &name) in METRICS.iter().enumerate() {
            let summary = if slot == 0 {
                empirical_summaries[m]
            } else {
                metrics::summarize(&collect(slot, m), truths[m])
            };
            let (num, den) = if is_loss_metric(m) {
                (summary.mean, empirical_summaries[m].mean)
            } else {
                (summary.rmsep, empirical_summaries[m].rmsep)
            };
            let ratio = if den > 0.0 { num / den } else { f64::NAN };
            rows.push(LossRow {
                mode,
                metric: name,
                summary,
                ratio_vs_empirical: ratio,
            });
        }
    }

    SimRecord {
        target: target.label(),
        n,
        k,
        rows,
        error: None,
    }
}

/// Long-format CSV: one row per (cell, mode, metric).
pub fn emit_csv(records: &[SimRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "target,n,k,mode,loss,mean,se,bias,rmsep,ratio_vs_empirical")?;
    for rec in records {
        for row in &rec.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                rec.target,
                rec.n,
                rec.k,
                row.mode.label(),
                row.metric,
                row.summary.mean,
                row.summary.se,
                row.summary.bias,
                row.summary.rmsep,
                row.ratio_vs_empirical,
            )?;
        }
    }
    Ok(())
}

/// Plot-ready CSV: ratio-versus-n series grouped per (target, k, metric,
/// mode).
pub fn emit_plotdata(records: &[SimRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "target,k,mode,loss,n,ratio")?;
    let mut keys: Vec<(&str, usize, &'static str, EstKind)> = Vec::new();
    for rec in records {
        for row in &rec.rows {
            let key = (rec.target.as_str(), rec.k, row.metric, row.mode);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    for (target, k, metric, mode) in keys {
        let mut series: Vec<(usize, f64)> = records
            .iter()
            .filter(|r| r.target == target && r.k == k)
            .flat_map(|r| {
                r.rows
                    .iter()
                    .filter(|row| row.metric == metric && row.mode == mode)
                    .map(|row| (r.n, row.ratio_vs_empirical))
            })
            .collect();
        series.sort_by_key(|&(n, _)| n);
        for (n, ratio) in series {
            writeln!(w, "{target},{k},{},{metric},{n},{ratio}", mode.label())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(threads: Option<usize>) -> SimConfig {
        SimConfig {
            targets: vec!["spline:6:2".into(), "poisson:0.35".into()],
            ns: vec![20, 50],
            ks: vec![2, 3],
            modes: default_modes(),
            reps: 8,
            seed: 123,
            threads,
        }
    }

    #[test]
    fn grid_smoke_and_row_count() {
        let records = run_grid(&tiny_config(Some(2))).unwrap();
        assert_eq!(records.len(), 2 * 2 * 2);
        for rec in &records {
            assert!(rec.error.is_none());
            assert_eq!(rec.rows.len(), 3 * METRICS.len());
            for row in &rec.rows {
                if row.metric == "l2" && row.mode != EstKind::Empirical {
                    assert!(row.ratio_vs_empirical.is_finite());
                    assert!(row.ratio_vs_empirical > 0.0);
                }
            }
        }
    }

    #[test]
    fn identical_output_across_thread_counts() {
        let a = run_grid(&tiny_config(Some(1))).unwrap();
        let b = run_grid(&tiny_config(Some(8))).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        emit_csv(&a, &mut csv_a).unwrap();
        emit_csv(&b, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b, "CSV differs across thread counts");

        let mut plot_a = Vec::new();
        let mut plot_b = Vec::new();
        emit_plotdata(&a, &mut plot_a).unwrap();
        emit_plotdata(&b, &mut plot_b).unwrap();
        assert_eq!(plot_a, plot_b);
    }

    #[test]
    fn empirical_l2_loss_decreases_with_n() {
        let config = SimConfig {
            targets: vec!["spline:10:2".into()],
            ns: vec![20, 100, 500],
            ks: vec![2],
            modes: vec![EstKind::Empirical],
            reps: 60,
            seed: 7,
            threads: Some(2),
        };
        let records = run_grid(&config).unwrap();
        let means: Vec<f64> = records
            .iter()
            .map(|r| {
                r.rows
                    .iter()
                    .find(|row| row.metric == "l2")
                    .unwrap()
                    .summary
                    .mean
            })
            .collect();
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }

    #[test]
    fn well_specified_fit_beats_empirical_at_large_n() {
        let config = SimConfig {
            targets: vec!["spline:10:2".into()],
            ns: vec![1000],
            ks: vec![2],
            modes: vec![EstKind::Empirical, EstKind::Prob],
            reps: 200,
            seed: 11,
            threads: Some(2),
        };
        let records = run_grid(&config).unwrap();
        let ratio = records[0]
            .rows
            .iter()
            .find(|row| row.mode == EstKind::Prob && row.metric == "l2")
            .unwrap()
            .ratio_vs_empirical;
        assert!(ratio < 1.0, "l2 ratio {ratio} should stay below 1");
    }

    #[test]
    fn csv_round_trips() {
        let records = run_grid(&tiny_config(Some(2))).unwrap();
        let mut buf = Vec::new();
        emit_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "target,n,k,mode,loss,mean,se,bias,rmsep,ratio_vs_empirical"
        );
        let mut rows = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 10);
            fields[1].parse::<usize>().unwrap();
            fields[5].parse::<f64>().unwrap();
            rows += 1;
        }
        assert_eq!(rows, records.iter().map(|r| r.rows.len()).sum::<usize>());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = tiny_config(None);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: SimConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.targets, cfg.targets);
        assert_eq!(back.reps, cfg.reps);
        assert_eq!(back.seed, cfg.seed);
    }
}
