//! Command-line front end. Log verbosity follows `UAVNAV_LOG`
//! (`error`, `warn`, `info`, `debug`, `trace`; default `warn`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use uavnav::navigator::MacroAction;
use uavnav::sim::metrics::metrics_from_path;
use uavnav::sim::suite::write_report;
use uavnav::sim::{
    compute_metrics, emit_csv, emit_svg_plots, run_episode, run_suite, ControllerKind, EpisodeStatus, Metrics,
    Scenario, SimError, TraceTable,
};

#[derive(Debug, Parser)]
#[command(
    name = "uavnav",
    version,
    about = "Language-guided quadrotor navigation with NMPC obstacle avoidance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, plots.svg and summary.json.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario controller.
        #[arg(long, value_parser = parse_controller)]
        controller: Option<ControllerKind>,
    },
    /// Run every *.json scenario in a directory and print the aggregate table.
    Suite {
        /// Directory of scenario JSON files.
        dir: PathBuf,
        /// Also write suite.txt and suite.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a trace CSV to SVG.
    Plot {
        /// Trace CSV written by `run`.
        trace: PathBuf,
        /// Output file (default: the trace path with an .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute episode metrics from a trace CSV.
    Metrics {
        /// Trace CSV written by `run`.
        trace: PathBuf,
        /// Scenario the trace was flown on.
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn parse_controller(s: &str) -> Result<ControllerKind, String> {
    match s {
        "nmpc" => Ok(ControllerKind::Nmpc),
        "pid" => Ok(ControllerKind::Pid),
        _ => Err(format!("unknown controller {s:?} (expected nmpc or pid)")),
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    controller: &'a str,
    status: EpisodeStatus,
    message: Option<&'a str>,
    metrics: Metrics,
    actions: &'a [MacroAction],
    steps: usize,
    rate_limited_steps: usize,
    median_solve_ms: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn print_metrics(m: &Metrics) {
    println!("SR             {:.0}", m.sr);
    println!("SPL            {:.4}", m.spl);
    println!("NE (m)         {:.3}", m.ne);
    println!("path (m)       {:.3}", m.path_length);
    println!("reference (m)  {:.3}", m.reference_length);
    println!("clearance (m)  {:.3}", m.min_clearance);
}

fn run(scenario: &Path, out: &Path, seed: Option<u64>, controller: Option<ControllerKind>) -> Result<i32, SimError> {
    let mut s = Scenario::load(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(c) = controller {
        s.controller = c;
    }
    let trace = run_episode(&s)?;
    std::fs::create_dir_all(out).map_err(|e| SimError::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    emit_csv(&trace, &out.join("trace.csv"))?;
    emit_svg_plots(&TraceTable::from_trace(&trace), &out.join("plots.svg"))?;
    let metrics = compute_metrics(&trace, &s, s.reference_length());
    let summary = Summary {
        scenario: &s.name,
        controller: &trace.controller,
        status: trace.status,
        message: trace.message.as_deref(),
        metrics,
        actions: &trace.actions,
        steps: trace.records.len(),
        rate_limited_steps: trace.rate_limited_steps(),
        median_solve_ms: median(trace.solve_times_ms()),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| SimError::Format(e.to_string()))?;
    let path = out.join("summary.json");
    std::fs::write(&path, json + "\n").map_err(|e| SimError::Io {
        path: path.display().to_string(),
        source: e,
    })?;

    println!("{} [{}]: {:?}", s.name, trace.controller, trace.status);
    if let Some(m) = &trace.message {
        println!("  {m}");
    }
    let actions: Vec<String> = trace.actions.iter().map(|a| a.to_string()).collect();
    println!("actions        {}", actions.join(", "));
    print_metrics(&metrics);
    println!("wrote {}", out.display());
    Ok(trace.status.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32, SimError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            controller,
        } => run(&scenario, &out, seed, controller),
        Command::Suite { dir, out } => {
            let report = run_suite(&dir)?;
            print!("{}", report.to_table());
            if let Some(out) = out {
                write_report(&report, &out)?;
            }
            Ok(report.exit_code())
        }
        Command::Plot { trace, out } => {
            let table = TraceTable::read_csv(&trace)?;
            let out = out.unwrap_or_else(|| trace.with_extension("svg"));
            emit_svg_plots(&table, &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Metrics { trace, scenario } => {
            let s = Scenario::load(&scenario)?;
            let table = TraceTable::read_csv(&trace)?;
            let goal = s.goal_landmark().expect("validated").position;
            let dist = table.column("obs_dist_min").expect("known column");
            let m = metrics_from_path(&table.positions(), &dist, &goal, s.goal.radius, s.reference_length());
            print_metrics(&m);
            Ok(if m.sr > 0.0 { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UAVNAV_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
