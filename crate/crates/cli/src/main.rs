mod checks;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use spinchain::counters::Counters;
use spinchain::inchworm::memory_estimate;
use spinchain::resummation::{ChainResult, ChainSolver};
use spinchain::{load_config, ChainConfig};

#[derive(Parser)]
#[command(name = "spinchain", version, about = "Ising chains with a harmonic bath on every spin")]
struct Cli {
    /// Worker threads (overrides the config value).
    #[arg(long, global = true, env = "SIM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute <sigma_z(t)> trajectories and write them as CSV.
    Run(RunArgs),
    /// Count bath-functional evaluations of single-spin solves over several grid sizes.
    CostScan(ScanArgs),
    /// Compare the engine with the independent references.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
    /// Observed spin (0-based) or `all`; defaults to the config's `observable_spin`.
    #[arg(long)]
    target: Option<Target>,
    /// Directory for propagator checkpoints; existing ones are loaded instead of solved.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Also write a matplotlib script next to the CSV.
    #[arg(long)]
    emit_plot_script: bool,
    /// Write the bath correlation table of every spin class to this CSV path.
    #[arg(long)]
    dump_bath_table: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    config: PathBuf,
    /// Grid sizes to scan, e.g. `16,32,64`.
    #[arg(long, value_delimiter = ',', required = true)]
    steps: Vec<usize>,
    #[arg(long)]
    m_bar: Option<usize>,
    #[arg(long)]
    n_bar: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    config: PathBuf,
    /// Perturb the resummation quadrature weights (negative control).
    #[arg(long, hide = true)]
    corrupt_weight: bool,
}

#[derive(Clone, Copy, Debug)]
enum Target {
    One(usize),
    All,
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(Target::All);
        }
        s.parse()
            .map(Target::One)
            .map_err(|_| format!("expected a spin index or `all`, got `{s}`"))
    }
}

/// Summary printed after `run`.
#[derive(Debug, Serialize)]
struct RunReport {
    targets: Vec<usize>,
    spin_classes: usize,
    inchworm_seconds: f64,
    resummation_seconds: f64,
    influence_evaluations: u64,
    kernel_evaluations: u64,
    memory_estimate_bytes: usize,
    output: PathBuf,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = (|| {
        let config = |path: &Path| -> Result<ChainConfig, Failure> {
            let mut cfg = load_config(path)
                .with_context(|| format!("loading {}", path.display()))
                .map_err(Failure::Usage)?;
            if let Some(n) = cli.threads {
                cfg.numerics.threads = n;
            }
            Ok(cfg)
        };
        match &cli.command {
            Command::Run(args) => {
                let cfg = config(&args.config)?;
                with_pool(&cfg, || cmd_run(&cfg, args)).map_err(Failure::Runtime)
            }
            Command::CostScan(args) => {
                let cfg = config(&args.config)?;
                if cfg.len() != 1 {
                    return Err(Failure::Usage(anyhow::anyhow!(
                        "cost-scan needs a single-spin config, got {} spins",
                        cfg.len()
                    )));
                }
                with_pool(&cfg, || cmd_cost_scan(&cfg, args)).map_err(Failure::Runtime)
            }
            Command::Oracle(args) => {
                let cfg = config(&args.config)?;
                let passed = with_pool(&cfg, || checks::run_all(&cfg, args.corrupt_weight)).map_err(Failure::Runtime)?;
                if passed {
                    Ok(())
                } else {
                    Err(Failure::Check)
                }
            }
        }
    })();
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn with_pool<T>(cfg: &ChainConfig, f: impl FnOnce() -> anyhow::Result<T> + Send) -> anyhow::Result<T>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.numerics.threads.max(1))
        .build()
        .context("building the worker pool")?;
    pool.install(f)
}

fn cmd_run(cfg: &ChainConfig, args: &RunArgs) -> anyhow::Result<()> {
    let targets: Vec<usize> = match args.target {
        None => vec![cfg.observable_spin],
        Some(Target::All) => (0..cfg.len()).collect(),
        Some(Target::One(k)) if k < cfg.len() => vec![k],
        Some(Target::One(k)) => bail!("target {k} out of range for a chain of {} spins", cfg.len()),
    };
    let counters = Counters::new();
    let mut solver = ChainSolver::new(cfg, &counters)?;
    if let Some(dir) = &args.checkpoint {
        solver = solver.with_checkpoints(dir)?;
    }
    if let Some(path) = &args.dump_bath_table {
        dump_bath_tables(&solver, path)?;
    }
    let memory = estimate_memory(cfg, &solver, &targets);
    eprintln!("estimated propagator storage: {:.1} MiB", memory as f64 / (1024.0 * 1024.0));
    let mut results: Vec<ChainResult> = Vec::with_capacity(targets.len());
    let (mut solve_time, mut sum_time) = (0.0, 0.0);
    for &target in &targets {
        let start = Instant::now();
        solver.prepare(target)?;
        solve_time += start.elapsed().as_secs_f64();
        let start = Instant::now();
        results.push(solver.trajectory(target)?);
        sum_time += start.elapsed().as_secs_f64();
    }
    write_csv(&args.out, &results)?;
    if args.emit_plot_script {
        write_plot_script(&args.out)?;
    }
    let snapshot = counters.snapshot();
    let report = RunReport {
        targets,
        spin_classes: solver.classes().len(),
        inchworm_seconds: solve_time,
        resummation_seconds: sum_time,
        influence_evaluations: snapshot.influence,
        kernel_evaluations: snapshot.kernel,
        memory_estimate_bytes: memory,
        output: args.out.clone(),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// Bytes of all stores the requested targets need.
fn estimate_memory(cfg: &ChainConfig, solver: &ChainSolver, targets: &[usize]) -> usize {
    let classes = solver.classes();
    (0..classes.len())
        .filter(|&c| !solver.bath_table(c).is_zero())
        .map(|c| {
            let members = &classes.members[c];
            let as_target = members.iter().any(|k| targets.contains(k));
            let as_spectator = targets.iter().any(|t| members.iter().any(|k| k != t));
            let observables = as_target as usize + as_spectator as usize;
            memory_estimate(cfg.numerics.n_steps, cfg.numerics.n_bar, observables)
        })
        .sum()
}

fn write_csv(path: &Path, results: &[ChainResult]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "t,spin,re,im")?;
    for r in results {
        for (t, v) in r.times().iter().zip(&r.values) {
            writeln!(out, "{:.16e},{},{:.16e},{:.16e}", t, r.target, v.re, v.im)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_plot_script(csv: &Path) -> anyhow::Result<()> {
    let script = csv.with_extension("py");
    let name = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let text = format!(
        r#"import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = defaultdict(list)
with open(os.path.join(here, "{name}")) as f:
    for row in csv.DictReader(f):
        series[int(row["spin"])].append((float(row["t"]), float(row["re"])))
for spin, points in sorted(series.items()):
    t, v = zip(*points)
    plt.plot(t, v, label=f"spin {{spin}}")
plt.xlabel("t")
plt.ylabel("<sigma_z>")
plt.legend()
plt.savefig(os.path.join(here, "{stem}.png"), dpi=150)
"#,
        stem = csv.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
    );
    std::fs::write(&script, text).with_context(|| format!("writing {}", script.display()))
}

fn dump_bath_tables(solver: &ChainSolver, path: &Path) -> anyhow::Result<()> {
    let count = solver.classes().len();
    for c in 0..count {
        let target = if count == 1 {
            path.to_path_buf()
        } else {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            path.with_file_name(format!("{stem}.class{c}.csv"))
        };
        let file = File::create(&target).with_context(|| format!("creating {}", target.display()))?;
        let mut out = BufWriter::new(file);
        solver.bath_table(c).write_csv(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_cost_scan(cfg: &ChainConfig, args: &ScanArgs) -> anyhow::Result<()> {
    println!("{:>6} {:>16} {:>16} {:>10} {:>8}", "L", "influence", "kernel", "seconds", "slope");
    let mut prev: Option<(usize, u64)> = None;
    for &n in &args.steps {
        let mut scan = cfg.clone();
        scan.numerics.n_steps = n;
        if let Some(m) = args.m_bar {
            scan.numerics.m_bar = m;
        }
        if let Some(m) = args.n_bar {
            scan.numerics.n_bar = m;
        }
        let counters = Counters::new();
        let mut solver = ChainSolver::new(&scan, &counters)?;
        if solver.bath_table(0).is_zero() {
            bail!("cost-scan needs a coupled bath (xi > 0)");
        }
        let start = Instant::now();
        solver.propagators(0, true)?;
        let seconds = start.elapsed().as_secs_f64();
        let snap = counters.snapshot();
        let slope = match prev {
            Some((l, c)) if c > 0 => format!("{:.3}", (snap.influence as f64 / c as f64).ln() / (n as f64 / l as f64).ln()),
            _ => "-".to_string(),
        };
        println!("{:>6} {:>16} {:>16} {:>10.3} {:>8}", n, snap.influence, snap.kernel, seconds, slope);
        prev = Some((n, snap.influence));
    }
    Ok(())
}
