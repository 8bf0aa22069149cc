//! Command-line entry point: `run <config>`, `validate`, `sweep <config>`.
//!
//! Exit codes: 0 success, 1 validation failures, 2 config parse error,
//! 3 cone exit (partial output written), 4 numerical or I/O failure.
//! `RGFLOW_PARALLEL` caps sweep-cell concurrency.

use clap::{Parser, Subcommand};
use rgflow::config::{InitialSpec, RunConfig};
use rgflow::output::{self, RunSummary};
use rgflow::validation::{self, CheckStatus};
use rgflow::{flow, Error, FlowParams, Termination};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "rgflow", version, about = "Normalized second-order renormalization group flow on closed surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write diagnostics, snapshots and plots.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress progress output.
        #[arg(long)]
        quiet: bool,
        /// Override the sample stride.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Run the full validation battery; nonzero exit iff any check fails.
    Validate {
        /// Directory for the JSON report (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Cartesian sweep over [sweep] alpha_primes x amplitudes.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
        #[arg(long)]
        stride: Option<usize>,
    },
}

const EXIT_OK: i32 = 0;
const EXIT_CHECK_FAILED: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_CONE: i32 = 3;
const EXIT_NUMERICAL: i32 = 4;

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, quiet, stride } => cmd_run(&config, out, quiet, stride),
        Command::Validate { out, quiet } => cmd_validate(out, quiet),
        Command::Sweep { config, out, quiet, stride } => cmd_sweep(&config, out, quiet, stride),
    };
    std::process::exit(code);
}

fn classify_error(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidResolution { .. } | Error::TooManySubdivisions(_) => {
            EXIT_CONFIG
        }
        Error::ConeExit { .. } => EXIT_CONE,
        _ => EXIT_NUMERICAL,
    }
}

fn cmd_run(config_path: &Path, out: Option<PathBuf>, quiet: bool, stride: Option<usize>) -> i32 {
    let start = Instant::now();
    let mut config = match RunConfig::parse_file(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(s) = stride {
        config.flow.sample_stride = s.max(1);
    }
    if let Some(dir) = out {
        config.out_dir = Some(dir);
    }
    let out_dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));

    match execute_run(&config, &out_dir, quiet, start) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("run failed: {e}");
            classify_error(&e)
        }
    }
}

fn execute_run(config: &RunConfig, out_dir: &Path, quiet: bool, start: Instant) -> rgflow::Result<i32> {
    std::fs::create_dir_all(out_dir)?;
    let domain = std::sync::Arc::new(config.build_domain()?);
    let u0 = config.initial_field(&domain)?;
    if !quiet {
        println!(
            "running {} with {} nodes, alpha' = {}, t_end = {}",
            domain.kind().label(),
            domain.node_count(),
            config.flow.alpha_prime,
            config.flow.t_end
        );
    }
    let traj = flow::run(&domain, u0, &config.flow)?;

    output::write_diagnostics_csv(&out_dir.join("diagnostics.csv"), &traj)?;
    output::write_snapshots(&out_dir.join("snapshots"), &traj)?;
    if config.plots {
        output::write_svg_plots(&out_dir.join("plots"), &traj)?;
    }

    // Battery subset evaluated on the produced trajectory.
    let mut battery = Vec::new();
    battery.push(validation::check_volume_conservation(&traj));
    battery.push(validation::check_gauss_bonnet(&traj));
    battery.extend(validation::check_bounds(&traj));
    battery.push(validation::check_entropy_monotone(&traj));
    battery.extend(validation::check_evolution_residuals(&traj, None));

    let summary = RunSummary {
        config: config.clone(),
        termination: traj.termination.label().to_string(),
        final_time: traj.final_time,
        final_diagnostics: traj.samples.last().map(|(_, d)| d.clone()),
        battery,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    output::write_summary_json(&out_dir.join("summary.json"), &summary)?;

    if !quiet {
        println!(
            "{} at t = {:.6} after {:.2}s; wrote {}",
            traj.termination.label(),
            traj.final_time,
            summary.wall_seconds,
            out_dir.display()
        );
    }
    Ok(match traj.termination {
        Termination::Completed => EXIT_OK,
        Termination::ConeExit => EXIT_CONE,
        Termination::StepUnderflow => EXIT_NUMERICAL,
    })
}

fn cmd_validate(out: Option<PathBuf>, quiet: bool) -> i32 {
    // Desk-scale battery: t_end = 0.5 keeps every scenario under a minute
    // on commodity hardware; the acceptance test suite runs t_end = 1.
    let base = FlowParams {
        t_end: 0.5,
        ..FlowParams::default()
    };
    let report = match validation::run_battery(&base, 42) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("battery failed to run: {e}");
            return EXIT_NUMERICAL;
        }
    };
    if !quiet {
        for r in &report.results {
            let mark = match r.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "SKIP",
            };
            println!(
                "{mark}  {:<42} measured {:>12.4e}  threshold {:>10.3e}  {}",
                r.name, r.measured, r.threshold, r.context
            );
        }
        println!(
            "battery: {} checks in {:.1}s",
            report.results.len(),
            report.wall_seconds
        );
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir).map_err(Error::from).and_then(|_| {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
        std::fs::write(out_dir.join("validation_report.json"), text)?;
        Ok(())
    }) {
        eprintln!("could not write report: {e}");
        return EXIT_NUMERICAL;
    }
    if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn cmd_sweep(config_path: &Path, out: Option<PathBuf>, quiet: bool, stride: Option<usize>) -> i32 {
    let start = Instant::now();
    let mut base = match RunConfig::parse_file(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(s) = stride {
        base.flow.sample_stride = s.max(1);
    }
    let Some(sweep) = base.sweep.clone() else {
        eprintln!("config error: sweep command needs a [sweep] section");
        return EXIT_CONFIG;
    };
    let out_root = out
        .or_else(|| base.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("sweep_out"));

    // Cells: Cartesian product of couplings and amplitudes.
    let mut cells = Vec::new();
    for &alpha in &sweep.alpha_primes {
        for &amp in &sweep.amplitudes {
            let mut cfg = base.clone();
            cfg.flow.alpha_prime = alpha;
            cfg.initial = match cfg.initial {
                InitialSpec::Sinusoid { kx, ky, .. } => InitialSpec::Sinusoid {
                    amplitude: amp,
                    kx,
                    ky,
                },
                InitialSpec::Bump { center, width, .. } => InitialSpec::Bump {
                    center,
                    width,
                    height: amp,
                },
                other => {
                    eprintln!("config error: sweep needs a sinusoid or bump initial condition, got {other:?}");
                    return EXIT_CONFIG;
                }
            };
            let label = format!("alpha_{alpha}_amp_{amp}");
            cells.push((label, cfg));
        }
    }

    let cap = std::env::var("RGFLOW_PARALLEL")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1));

    #[derive(serde::Serialize)]
    struct CellOutcome {
        label: String,
        exit_code: i32,
        detail: String,
    }

    let next = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<Option<CellOutcome>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..cap.min(cells.len()) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= cells.len() {
                    break;
                }
                let (label, cfg) = &cells[idx];
                let cell_dir = out_root.join(label);
                let cell_start = Instant::now();
                let (code, detail) = match execute_run(cfg, &cell_dir, true, cell_start) {
                    Ok(code) => (code, String::from("ok")),
                    Err(e) => (classify_error(&e), e.to_string()),
                };
                if !quiet {
                    println!("cell {label}: exit {code} ({detail})");
                }
                outcomes.lock().expect("poisoned").as_mut_slice()[idx] = Some(CellOutcome {
                    label: label.clone(),
                    exit_code: code,
                    detail,
                });
            });
        }
    });

    let outcomes: Vec<CellOutcome> = outcomes
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|o| o.expect("cell filled"))
        .collect();
    let worst = outcomes.iter().map(|o| o.exit_code).max().unwrap_or(EXIT_OK);

    #[derive(serde::Serialize)]
    struct SweepSummary {
        cells: Vec<CellOutcome>,
        wall_seconds: f64,
    }
    let summary = SweepSummary {
        cells: outcomes,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    if std::fs::create_dir_all(&out_root).is_err()
        || std::fs::write(
            out_root.join("sweep_summary.json"),
            serde_json::to_string_pretty(&summary).expect("serialize"),
        )
        .is_err()
    {
        eprintln!("could not write sweep summary");
        return EXIT_NUMERICAL;
    }
    if !quiet {
        println!(
            "sweep: {} cells in {:.1}s -> {}",
            summary.cells.len(),
            summary.wall_seconds,
            out_root.display()
        );
    }
    worst
}
