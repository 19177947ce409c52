//! Command-line front end: scenario runs, the single-mass switching demo,
//! parameter sweeps, the stiffness-adaptation demo and offline metric
//! recomputation.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 simulation
//! divergence (the trace up to the last finite state is still written).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::metrics::{compute_report, Trace};
use crate::scenario::{load_scenario, Scenario};
use crate::sim::{SimError, Simulator};
use crate::toymodel::{poincare_convergence, section_crossings, toy_simulate, ToyParams};

#[derive(Parser)]
#[command(name = "vmrock", version, about = "Virtual-model rocking-cut simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace, metrics, report and energy files.
    Simulate(SimArgs),
    /// Run the single-mass switching model for one or more initial conditions.
    Toy(ToyArgs),
    /// Run a scenario repeatedly along one parameter axis.
    Sweep(SweepArgs),
    /// Run a scenario with online stiffness adaptation reporting.
    Adapt(SimArgs),
    /// Recompute metrics.csv and report.txt from an existing trace.csv.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario duration, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Override the controller step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 10.0)]
    k: f64,
    #[arg(long, default_value_t = 1.0)]
    r1: f64,
    #[arg(long, default_value_t = -1.0)]
    r2: f64,
    #[arg(long, default_value_t = 0.8)]
    x1: f64,
    #[arg(long, default_value_t = -0.8)]
    x2: f64,
    /// Initial condition `x,xdot`; repeat for several.
    #[arg(long = "ic", required = true)]
    ics: Vec<String>,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Swept parameter: board_height | knife | food | thickness | k2.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Existing trace.csv.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path with code 0
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Simulate(args) => run_simulate(&args, false),
        Command::Adapt(args) => run_simulate(&args, true),
        Command::Toy(args) => run_toy(&args),
        Command::Sweep(args) => run_sweep(&args),
        Command::Metrics(args) => run_metrics(&args),
    }
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    2
}

fn load_with_overrides(args: &SimArgs) -> Result<Scenario, String> {
    let mut scn = load_scenario(&args.scenario).map_err(|e| e.to_string())?;
    if let Some(d) = args.duration {
        scn.run.duration = d;
    }
    if let Some(dt) = args.dt {
        scn.run.dt = dt;
    }
    if let Some(seed) = args.seed {
        scn.run.seed = seed;
    }
    scn.validate().map_err(|e| e.to_string())?;
    Ok(scn)
}

fn run_simulate(args: &SimArgs, adapt: bool) -> i32 {
    let scn = match load_with_overrides(args) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if adapt && !scn.controller.adaptation.enabled {
        return fail("adapt requires `adapt_enabled = true` in the scenario");
    }
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return fail(format_args!("cannot create {:?}: {e}", args.out));
    }
    let mut sim = match Simulator::from_scenario(&scn) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let run_result = sim.run(scn.run.duration);
    // the trace keeps every completed control step even on divergence
    if let Err(e) = write_outputs(&sim, &args.out) {
        return fail(e);
    }
    if adapt {
        if let Err(e) = write_adaptation(&sim, &args.out) {
            return fail(e);
        }
    }
    match run_result {
        Ok(()) => 0,
        Err(SimError::Diverged(t)) => {
            eprintln!("error: simulation diverged at t = {t}; partial trace written");
            3
        }
        Err(e) => fail(e),
    }
}

fn write_outputs(sim: &Simulator, out: &Path) -> Result<(), String> {
    sim.trace
        .write_csv(&out.join("trace.csv"))
        .map_err(|e| e.to_string())?;
    let report = compute_report(&sim.trace, None);
    report
        .write_csv(&out.join("metrics.csv"))
        .map_err(|e| e.to_string())?;
    report
        .write_report(&out.join("report.txt"))
        .map_err(|e| e.to_string())?;
    write_energy(&sim.trace, &out.join("energy.csv")).map_err(|e| e.to_string())?;
    Ok(())
}

/// Ledger columns plus the closure residual E_R + E_VMC + Wdiss - Welast,
/// which stays near its initial value for a well-posed run.
fn write_energy(trace: &Trace, path: &Path) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "t,E_R,E_VMC,Wdiss_cum,Welast_cum,balance")?;
    for r in &trace.rows {
        let balance = r.e_r + r.e_vmc + r.wdiss_cum - r.welast_cum;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t, r.e_r, r.e_vmc, r.wdiss_cum, r.welast_cum, balance
        )?;
    }
    Ok(())
}

fn write_adaptation(sim: &Simulator, out: &Path) -> Result<(), String> {
    let mut k2 = String::from("t,k2\n");
    for (t, v) in &sim.k2_log {
        let _ = writeln!(k2, "{t},{v}");
    }
    std::fs::write(out.join("k2_timeline.csv"), k2).map_err(|e| e.to_string())?;
    let mut sep = String::from("cycle,separated\n");
    for (cycle, ok) in &sim.separation_log {
        let _ = writeln!(sep, "{cycle},{}", *ok as u8);
    }
    std::fs::write(out.join("separation.csv"), sep).map_err(|e| e.to_string())?;
    Ok(())
}

fn run_toy(args: &ToyArgs) -> i32 {
    let p = ToyParams {
        m: args.m,
        c: args.c,
        k: args.k,
        r1: args.r1,
        r2: args.r2,
        x1: args.x1,
        x2: args.x2,
    };
    if let Err(e) = p.validate() {
        return fail(e);
    }
    if !(args.dt > 0.0) || args.duration < 0.0 {
        return fail("need dt > 0 and duration >= 0");
    }
    let mut ics = Vec::new();
    for raw in &args.ics {
        let Some((x, v)) = raw.split_once(',') else {
            return fail(format_args!("initial condition `{raw}` is not `x,xdot`"));
        };
        match (x.trim().parse::<f64>(), v.trim().parse::<f64>()) {
            (Ok(x), Ok(v)) => ics.push((x, v)),
            _ => return fail(format_args!("initial condition `{raw}` is not numeric")),
        }
    }
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return fail(format_args!("cannot create {:?}: {e}", args.out));
    }

    for (i, &ic) in ics.iter().enumerate() {
        let trace = toy_simulate(&p, ic, args.duration, args.dt);
        let mut csv = String::from("t,x,xdot,r,E\n");
        for s in &trace.samples {
            let _ = writeln!(csv, "{},{},{},{},{}", s.t, s.x, s.xdot, s.r, s.energy);
        }
        if let Err(e) = std::fs::write(args.out.join(format!("toy_ic{i}.csv")), csv) {
            return fail(e);
        }
    }

    let mut summary = String::new();
    if ics.len() >= 2 {
        let report = match poincare_convergence(&p, &ics, args.duration, args.dt) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        for (i, (seq, limit)) in report.sequences.iter().zip(&report.limits).enumerate() {
            let _ = writeln!(
                summary,
                "ic{i}: crossings = {}, limit = {}",
                seq.len(),
                limit.map(|l| format!("{l:.6}")).unwrap_or_else(|| "none".into())
            );
        }
        let _ = writeln!(summary, "converged = {}", report.converged);
        match report.spread {
            Some(s) => {
                let _ = writeln!(summary, "spread = {s:.3e}");
            }
            None => {
                let _ = writeln!(summary, "spread = n/a");
            }
        }
    } else {
        let trace = toy_simulate(&p, ics[0], args.duration, args.dt);
        let seq = section_crossings(&trace, p.x1);
        let _ = writeln!(summary, "ic0: crossings = {}", seq.len());
        let _ = writeln!(summary, "sequence = {seq:?}");
    }
    if let Err(e) = std::fs::write(args.out.join("poincare.txt"), summary) {
        return fail(e);
    }
    0
}

fn run_sweep(args: &SweepArgs) -> i32 {
    let values: Vec<&str> = args
        .values
        .iter()
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return fail("sweep needs at least one --values entry");
    }
    let base = match load_with_overrides(&args.sim) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if let Err(e) = std::fs::create_dir_all(&args.sim.out) {
        return fail(format_args!("cannot create {:?}: {e}", args.sim.out));
    }

    let mut table = String::from("value,status,f_cut,F_peak,mean_cycle_work\n");
    for value in &values {
        let mut scn = base.clone();
        // the controller parameters themselves stay fixed across every axis
        // except the explicit k2 sweep
        let applied = match args.axis.as_str() {
            "board_height" => value
                .parse::<f64>()
                .map(|h| scn.environment.board_height = h)
                .map_err(|_| format!("`{value}` is not a number")),
            "knife" => {
                scn.environment.knife = value.to_string();
                Ok(())
            }
            "food" => {
                scn.environment.food =
                    if *value == "none" { None } else { Some(value.to_string()) };
                Ok(())
            }
            "thickness" => value
                .parse::<f64>()
                .map(|t| scn.controller.slice_thickness = t)
                .map_err(|_| format!("`{value}` is not a number")),
            "k2" => value
                .parse::<f64>()
                .map(|k| scn.controller.k2 = k)
                .map_err(|_| format!("`{value}` is not a number")),
            other => {
                return fail(format_args!(
                    "unknown sweep axis `{other}` (use board_height, knife, food, thickness or k2)"
                ))
            }
        };
        let sub_out = args.sim.out.join(format!("{}_{value}", args.axis));
        let outcome = applied
            .and_then(|()| scn.validate().map_err(|e| e.to_string()))
            .and_then(|()| {
                std::fs::create_dir_all(&sub_out).map_err(|e| e.to_string())?;
                let mut sim = Simulator::from_scenario(&scn).map_err(|e| e.to_string())?;
                let run = sim.run(scn.run.duration);
                write_outputs(&sim, &sub_out)?;
                run.map_err(|e| e.to_string())?;
                Ok(compute_report(&sim.trace, None))
            });
        match outcome {
            Ok(report) => {
                let f_cut = report
                    .cycles
                    .is_empty()
                    .then_some(f64::NAN)
                    .or(report.f_cut)
                    .unwrap_or(f64::NAN);
                let f_peak = report
                    .cycles
                    .iter()
                    .map(|c| c.f_peak)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mean_work = if report.cycles.is_empty() {
                    f64::NAN
                } else {
                    report.cycles.iter().map(|c| c.work).sum::<f64>()
                        / report.cycles.len() as f64
                };
                let _ = writeln!(table, "{value},ok,{f_cut},{f_peak},{mean_work}");
            }
            Err(e) => {
                eprintln!("sweep {}={value} failed: {e}", args.axis);
                let _ = writeln!(table, "{value},failed,,,");
            }
        }
    }
    if let Err(e) = std::fs::write(args.sim.out.join("comparison.csv"), table) {
        return fail(e);
    }
    0
}

fn run_metrics(args: &MetricsArgs) -> i32 {
    let trace = match Trace::read_csv(&args.trace) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return fail(format_args!("cannot create {:?}: {e}", args.out));
    }
    let report = compute_report(&trace, None);
    if let Err(e) = report.write_csv(&args.out.join("metrics.csv")) {
        return fail(e);
    }
    if let Err(e) = report.write_report(&args.out.join("report.txt")) {
        return fail(e);
    }
    0
}
