//! Command-line front end: fit estimators, check monotony, print basis
//! rows and Poisson thresholds, and run simulation grids.
//!
//! Exit codes: 0 success, 1 usage or input parse errors, 2 partial
//! simulation failure, 3 stopping-criterion failure.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kmono::dist::{poisson_kmono_threshold, TargetDist};
use kmono::empirical::{read_counts, CountTable, InputFormat};
use kmono::estimator::{fit, FitOptions};
use kmono::seq::DEFAULT_TOL;
use kmono::sim::{emit_csv, emit_plotdata, run_grid, EstKind, SimConfig};
use kmono::solver::Mode;
use kmono::spline::{mass, qbar, qnorm};
use kmono::Error;

#[derive(Parser)]
#[command(
    name = "kmono",
    version,
    about = "Least-squares estimation of discrete pmfs under k-monotony constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// CSV with header `value,count`.
    Counts,
    /// One integer per line.
    Samples,
}

impl From<FormatArg> for InputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Counts => InputFormat::Counts,
            FormatArg::Samples => InputFormat::Samples,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Projection onto k-monotone probabilities.
    Prob,
    /// Projection onto the k-monotone cone (mass >= 1).
    Seq,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Prob => Mode::Probability,
            ModeArg::Seq => Mode::Cone,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the constrained least-squares estimator and write the result as JSON.
    Fit {
        /// Input data file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "counts")]
        format: FormatArg,
        /// Monotony order of the constraint.
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Output path for the JSON result.
        #[arg(long)]
        out: PathBuf,
        /// Stopping-certificate tolerance.
        #[arg(long, default_value_t = kmono::stopping::STOP_TOL)]
        tol: f64,
    },
    /// Report whether the input pmf is k-monotone and list its knots.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "counts")]
        format: FormatArg,
        #[arg(long)]
        k: usize,
    },
    /// Print one spline atom: its unnormalized row, mass, and pmf row, as CSV.
    Basis {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        j: usize,
    },
    /// Print the Poisson monotony thresholds as CSV.
    Thresholds {
        /// Largest monotony order to print (at most 10).
        #[arg(long, default_value_t = 5)]
        lmax: usize,
    },
    /// Run a simulation grid and write results.csv + plotdata.csv.
    Simulate {
        /// JSON config file; inline flags are ignored when present
        /// (except --threads and --seed, which override).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Canned study design filling targets/ns/ks: `desk` stops at
        /// n = 1000, `full` adds n ∈ {10000, 100000} (slow; prints a
        /// runtime warning).
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        /// Target specs, e.g. spline:10:2 or poisson:0.35.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        /// RNG seed; reproducibility is a feature, so there is no
        /// wall-clock default.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Desk-scale study: both target families, n up to 1000.
    Desk,
    /// Full study including the large-n asymptotic points.
    Full,
}

/// The canned design grid: spline atoms at knot 10 for several degrees and
/// the Poisson rates bracketing the monotony thresholds.
fn preset_design(preset: PresetArg) -> (Vec<String>, Vec<usize>, Vec<usize>) {
    let targets = vec![
        "spline:10:2".into(),
        "spline:10:3".into(),
        "spline:10:4".into(),
        "spline:10:10".into(),
        "poisson:0.3".into(),
        "poisson:0.35".into(),
        "poisson:0.45".into(),
        format!("poisson:{}", 2.0 - 2.0f64.sqrt()),
        "poisson:0.7".into(),
        "poisson:1".into(),
    ];
    let mut ns = vec![20, 50, 100, 250, 500, 1000];
    if matches!(preset, PresetArg::Full) {
        ns.extend([10_000, 100_000]);
    }
    (targets, ns, vec![2, 3, 4])
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2; parse/usage errors are exit 1 here.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match &err {
                Error::CriterionFailed { .. } | Error::TruncationCap { .. } => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn read_table(path: &PathBuf, format: FormatArg) -> kmono::Result<CountTable> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_counts(BufReader::new(file), format.into())
}

fn dispatch(command: Command) -> kmono::Result<ExitCode> {
    match command {
        Command::Fit {
            input,
            format,
            k,
            mode,
            out,
            tol,
        } => {
            let table = read_table(&input, format)?;
            let p = table.empirical_pmf();
            let options = FitOptions {
                stop_tol: tol,
                ..FitOptions::default()
            };
            let mode: Mode = mode.into();
            let result = fit(&p, k, mode, &options)?;
            let json = serde_json::to_string_pretty(&result.to_json()).expect("serializable");
            std::fs::write(&out, json + "\n")
                .map_err(|e| Error::io(out.display().to_string(), e))?;
            println!(
                "k={} mode={} shat={} beta={:.6e} L_used={} criterion={}",
                k,
                mode,
                result.shat.map_or("-".into(), |s| s.to_string()),
                result.beta,
                result.level_used,
                if result.criterion.passed { "pass" } else { "fail" },
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { input, format, k } => {
            let table = read_table(&input, format)?;
            let p = table.empirical_pmf();
            let report = p.seq().is_kmonotone(k, DEFAULT_TOL);
            println!("k-monotone: {}", report.is_monotone);
            if report.is_monotone {
                let knots = p.seq().knots(k, DEFAULT_TOL);
                println!(
                    "knots: {}",
                    knots
                        .iter()
                        .map(|j| j.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            } else {
                println!(
                    "violations: {}",
                    report
                        .violations
                        .iter()
                        .map(|j| j.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Basis { k, j } => {
            if k < 1 {
                return Err(Error::BadDistSpec {
                    spec: format!("k={k}"),
                    msg: "degree parameter must be at least 1".into(),
                });
            }
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            let qbar_row: Vec<String> = (0..=j).map(|i| format!("{}", qbar(k, j, i))).collect();
            let q_row: Vec<String> = (0..=j).map(|i| format!("{}", qnorm(k, j, i))).collect();
            writeln!(w, "qbar,{}", qbar_row.join(",")).ok();
            writeln!(w, "mass,{}", mass(k, j)).ok();
            writeln!(w, "q,{}", q_row.join(",")).ok();
            Ok(ExitCode::SUCCESS)
        }
        Command::Thresholds { lmax } => {
            if !(1..=10).contains(&lmax) {
                return Err(Error::BadDistSpec {
                    spec: format!("lmax={lmax}"),
                    msg: "supported range is 1..=10".into(),
                });
            }
            println!("ell,lambda");
            for ell in 1..=lmax {
                println!("{ell},{}", poisson_kmono_threshold(ell));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            preset,
            targets,
            ns,
            ks,
            reps,
            seed,
            threads,
            out,
        } => {
            let mut sim_config = match config {
                Some(path) => {
                    let file =
                        File::open(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
                    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
                        line: e.line(),
                        msg: e.to_string(),
                    })?
                }
                None => {
                    let Some(seed) = seed else {
                        return Err(Error::BadDistSpec {
                            spec: "--seed".into(),
                            msg: "a seed is required (reproducibility is a feature)".into(),
                        });
                    };
                    let (targets, ns, ks) = match preset {
                        Some(p) => {
                            if matches!(p, PresetArg::Full) {
                                eprintln!(
                                    "warning: the full preset includes n = 100000 cells and \
                                     can take hours at 1000 replications"
                                );
                            }
                            preset_design(p)
                        }
                        None => {
                            if targets.is_empty() || ns.is_empty() || ks.is_empty() {
                                return Err(Error::BadDistSpec {
                                    spec: "--targets/--ns/--ks".into(),
                                    msg: "required without --config or --preset".into(),
                                });
                            }
                            (targets, ns, ks)
                        }
                    };
                    // Validate specs early for a usable error.
                    for t in &targets {
                        TargetDist::parse(t)?;
                    }
                    SimConfig {
                        targets,
                        ns,
                        ks,
                        modes: vec![EstKind::Empirical, EstKind::Prob, EstKind::Seq],
                        reps,
                        seed,
                        threads,
                    }
                }
            };
            if let Some(seed) = seed {
                sim_config.seed = seed;
            }
            if threads.is_some() {
                sim_config.threads = threads;
            }

            std::fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
            let records = run_grid(&sim_config)?;

            let csv_path = out.join("results.csv");
            let mut csv = Vec::new();
            emit_csv(&records, &mut csv).expect("in-memory write");
            std::fs::write(&csv_path, csv)
                .map_err(|e| Error::io(csv_path.display().to_string(), e))?;

            let plot_path = out.join("plotdata.csv");
            let mut plot = Vec::new();
            emit_plotdata(&records, &mut plot).expect("in-memory write");
            std::fs::write(&plot_path, plot)
                .map_err(|e| Error::io(plot_path.display().to_string(), e))?;

            let failures: Vec<&kmono::sim::SimRecord> =
                records.iter().filter(|r| r.error.is_some()).collect();
            for f in &failures {
                eprintln!(
                    "cell ({}, n={}, k={}) failed: {}",
                    f.target,
                    f.n,
                    f.k,
                    f.error.as_deref().unwrap_or("unknown")
                );
            }
            println!(
                "{} cells, {} failed; results in {}",
                records.len(),
                failures.len(),
                out.display()
            );
            if failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
    }
}
