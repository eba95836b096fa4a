//! `bicw`: command-line front end for the two-population Curie-Weiss tools.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bicw_core::io::{equilibria_json, to_json_string, write_ensemble_csv, write_sweep_csv, write_trajectory_csv};
use bicw_core::mean_field::{integrate, OdeConfig, OdeMethod};
use bicw_core::phase::{find_equilibria, phase_region, sweep, GridAxis, SweepCell, SweepSpec};
use bicw_core::sim::{ensemble, simulate, uniform_grid, RecordMode, SimConfig};
use bicw_core::validation::{run_suite, Suite};
use bicw_core::{MagnetizationPair, PopulationSizes};

use config::{parse_pair, parse_range, parse_triple, Format, RunConfig};

#[derive(Parser)]
#[command(name = "bicw", version, about = "Two-population Curie-Weiss dynamics and phase diagram")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stochastic simulation: one trajectory or an ensemble on a grid.
    Simulate(SimulateArgs),
    /// Mean-field ODE trajectory.
    Ode(OdeArgs),
    /// Zero-field equilibria with stability and phase label.
    Equilibria(EquilibriaArgs),
    /// Phase labels and equilibrium counts over an (alpha j11, j12) grid.
    PhaseSweep(SweepArgs),
    /// Run a pinned validation suite.
    Validate(ValidateArgs),
}

/// Model and run flags shared by the commands; each overrides the config file.
#[derive(Args, Default)]
struct ModelFlags {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fraction of spins in the first group.
    #[arg(long)]
    alpha: Option<f64>,
    /// Couplings `j11,j12,j22`.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    j: Option<[f64; 3]>,
    /// Fields `h1,h2`.
    #[arg(long = "h", value_parser = parse_pair, allow_hyphen_values = true)]
    h: Option<[f64; 2]>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl ModelFlags {
    fn overlay(&self) -> RunConfig {
        RunConfig {
            alpha: self.alpha,
            j11: self.j.map(|j| j[0]),
            j12: self.j.map(|j| j[1]),
            j22: self.j.map(|j| j[2]),
            h1: self.h.map(|h| h[0]),
            h2: self.h.map(|h| h[1]),
            t_end: self.t_end,
            output: self.output.clone(),
            format: self.format,
            ..RunConfig::default()
        }
    }

    fn resolve(&self, extra: RunConfig) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(file.overlay(self.overlay()).overlay(extra).with_defaults())
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Total number of spins.
    #[arg(long)]
    n: Option<usize>,
    /// Probability that an initial spin is +1.
    #[arg(long)]
    lambda_plus: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Sampling grid step (the config key `dt`). A single trial without a
    /// grid records every jump.
    #[arg(long, alias = "dt")]
    grid_dt: Option<f64>,
}

#[derive(Args)]
struct OdeArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Initial magnetizations `m1,m2`; defaults to `2 lambda_plus - 1` in both groups.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    m0: Option<[f64; 2]>,
    /// RK4 step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    lambda_plus: Option<f64>,
    /// Use the adaptive Dormand-Prince integrator instead of fixed RK4.
    #[arg(long)]
    adaptive: bool,
}

#[derive(Args)]
struct EquilibriaArgs {
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args)]
struct SweepArgs {
    /// `lo:hi:n` for alpha j11.
    #[arg(long = "aj11-range", alias = "ajll-range", value_parser = parse_range, allow_hyphen_values = true)]
    aj11_range: GridAxis,
    /// `lo:hi:n` for j12.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    j12_range: GridAxis,
    /// Fixed value of (1 - alpha) j22.
    #[arg(long)]
    bj22: f64,
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// balance, gibbs, master, lln or all.
    suite: String,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Open the output target: a file, or standard output.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Write `<output>.config.json` next to a file output.
fn write_sidecar<T: Serialize>(output: Option<&Path>, effective: &T) -> Result<()> {
    if let Some(p) = output {
        let mut name = p.as_os_str().to_owned();
        name.push(".config.json");
        std::fs::write(PathBuf::from(name), to_json_string(effective)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TimePoint {
    t: f64,
    m1: f64,
    m2: f64,
}

fn write_samples(out: &mut dyn Write, format: Format, samples: &[(f64, MagnetizationPair)]) -> Result<()> {
    match format {
        Format::Csv => write_trajectory_csv(out, samples)?,
        Format::Json => {
            let rows: Vec<TimePoint> = samples.iter().map(|(t, m)| TimePoint { t: *t, m1: m.m1, m2: m.m2 }).collect();
            out.write_all(to_json_string(&rows)?.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<ExitCode> {
    let cfg = a.model.resolve(RunConfig {
        n: a.n,
        lambda_plus: a.lambda_plus,
        seed: a.seed,
        trials: a.trials,
        dt: a.grid_dt,
        ..RunConfig::default()
    })?;
    let params = cfg.params()?;
    let n = cfg.n.context("simulate needs `n`, the total number of spins")?;
    let sizes = PopulationSizes::split(n, params.alpha)?;
    let trials = cfg.trials.unwrap_or(1);
    let format = cfg.format.unwrap_or_default();
    let t_end = cfg.t_end()?;
    let record = match (trials, cfg.dt) {
        (1, None) => RecordMode::Events,
        (_, dt) => RecordMode::UniformGrid { dt: dt.unwrap_or(0.01) },
    };
    let cfg = RunConfig {
        dt: match record {
            RecordMode::UniformGrid { dt } => Some(dt),
            RecordMode::Events => None,
        },
        ..cfg
    };
    let sim = SimConfig::new(params, sizes, t_end, cfg.lambda_plus.unwrap_or(0.5), cfg.seed.unwrap_or(0), record)?;

    let start = Instant::now();
    let mut out = sink(cfg.output.as_deref())?;
    let jumps = if trials == 1 {
        let traj = simulate(&sim);
        write_samples(&mut *out, format, &traj.samples)?;
        traj.jump_count
    } else {
        let RecordMode::UniformGrid { dt } = record else { unreachable!("ensembles always sample a grid") };
        let stats = ensemble(&sim, trials, &uniform_grid(t_end, dt))?;
        match format {
            Format::Csv => write_ensemble_csv(&mut *out, &stats)?,
            Format::Json => {
                #[derive(Serialize)]
                struct Row {
                    t: f64,
                    mean_m1: f64,
                    mean_m2: f64,
                    var_m1: f64,
                    var_m2: f64,
                    trials: usize,
                }
                let rows: Vec<Row> = (0..stats.times.len())
                    .map(|i| Row {
                        t: stats.times[i],
                        mean_m1: stats.mean[i].m1,
                        mean_m2: stats.mean[i].m2,
                        var_m1: stats.variance[i].m1,
                        var_m2: stats.variance[i].m2,
                        trials,
                    })
                    .collect();
                out.write_all(to_json_string(&rows)?.as_bytes())?;
            }
        }
        stats.total_jumps
    };
    out.flush()?;
    drop(out);
    let secs = start.elapsed().as_secs_f64();
    eprintln!(
        "jumps {jumps}, wall time {secs:.3} s, {:.3e} events/s",
        if secs > 0.0 { jumps as f64 / secs } else { 0.0 }
    );
    write_sidecar(cfg.output.as_deref(), &cfg)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_ode(a: &OdeArgs) -> Result<ExitCode> {
    let cfg = a.model.resolve(RunConfig {
        dt: a.dt,
        lambda_plus: a.lambda_plus,
        ..RunConfig::default()
    })?;
    let params = cfg.params()?;
    let m0 = match a.m0 {
        Some([m1, m2]) => MagnetizationPair::checked(m1, m2)?,
        None => {
            let m = 2.0 * cfg.lambda_plus.unwrap_or(0.5) - 1.0;
            MagnetizationPair::checked(m, m)?
        }
    };
    let method = if a.adaptive {
        OdeMethod::Adaptive { rtol: 1e-9, atol: 1e-12 }
    } else {
        OdeMethod::Rk4 { dt: cfg.dt.unwrap_or(1e-3) }
    };
    let path = integrate(&OdeConfig::new(m0, cfg.t_end()?).with_method(method), &params)?;
    let mut out = sink(cfg.output.as_deref())?;
    write_samples(&mut *out, cfg.format.unwrap_or_default(), &path)?;
    out.flush()?;
    drop(out);

    #[derive(Serialize)]
    struct Effective<'a> {
        #[serde(flatten)]
        config: &'a RunConfig,
        m0: [f64; 2],
        method: OdeMethod,
    }
    write_sidecar(
        cfg.output.as_deref(),
        &Effective {
            config: &cfg,
            m0: m0.to_array(),
            method,
        },
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_equilibria(a: &EquilibriaArgs) -> Result<ExitCode> {
    let cfg = a.model.resolve(RunConfig::default())?;
    let params = cfg.params()?;
    let points = find_equilibria(&params)?;
    let region = phase_region(&params)?;
    let report = serde_json::json!({
        "region": region.label.as_str(),
        "expected_count": region.expected_count,
        "boundary": region.boundary,
        "j12_critical": region.j12_critical,
        "j12_tilde_critical": region.j12_tilde_critical,
        "equilibria": equilibria_json(&points),
    });
    let mut out = sink(cfg.output.as_deref())?;
    out.write_all(to_json_string(&report)?.as_bytes())?;
    out.flush()?;
    drop(out);
    write_sidecar(cfg.output.as_deref(), &cfg)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_phase_sweep(a: &SweepArgs) -> Result<ExitCode> {
    let spec = SweepSpec {
        alpha: a.alpha,
        beta2: a.bj22,
        beta1_axis: a.aj11_range,
        j12_axis: a.j12_range,
    };
    let cells: Vec<SweepCell> = sweep(&spec)?;
    for c in cells.iter().filter(|c| c.error.is_some()) {
        eprintln!("cell ({}, {}): {}", c.alpha_j11, c.j12, c.error.as_deref().unwrap_or_default());
    }
    let mut out = sink(a.output.as_deref())?;
    write_sweep_csv(&mut *out, &cells)?;
    out.flush()?;
    drop(out);
    write_sidecar(a.output.as_deref(), &spec)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(a: &ValidateArgs) -> Result<ExitCode> {
    let suites = Suite::parse(&a.suite).with_context(|| format!("unknown suite `{}` (balance, gibbs, master, lln, all)", a.suite))?;
    let reports: Vec<_> = suites.into_iter().map(run_suite).collect();
    let passed = reports.iter().all(|r| r.passed);
    for r in &reports {
        eprintln!("[{}] {} ({:.2} s)", if r.passed { "PASS" } else { "FAIL" }, r.suite.name(), r.seconds);
    }
    let report = serde_json::json!({ "passed": passed, "suites": reports });
    let mut out = sink(a.output.as_deref())?;
    out.write_all(to_json_string(&report)?.as_bytes())?;
    out.flush()?;
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Ode(a) => cmd_ode(a),
        Command::Equilibria(a) => cmd_equilibria(a),
        Command::PhaseSweep(a) => cmd_phase_sweep(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
