use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::ExperimentConfig;
use super::contraction::measure_constants;
use super::problem::{initial_state, Problem};
use super::report::{emit_report, run_label, ExperimentReport, LabeledRecord};
use super::runner::{contraction_suite, decay_suite, fan_out};
use crate::closed_loop::integrate_closed_loop;
use crate::error::{Error, Result};
use crate::feedback_law::estimate_delta;
use crate::spectral_m::{build_m_basis, classify_length, DEFAULT_PAIR_TOL};

/// Smallest accepted `R^2` of the decay fit.
pub const MIN_R_SQUARED: f64 = 0.9;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_EXPERIMENT_FAILED: i32 = 2;
pub const EXIT_SYNTHESIS_FAILED: i32 = 3;
pub const EXIT_BAD_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "kdvfb",
    version,
    about = "Boundary feedback experiments for KdV on critical lengths"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the length and list its critical pairs.
    Classify,
    /// Build the basis of M and export it.
    Basis,
    /// Build the steering library and save it.
    Synthesize,
    /// Integrate the closed loop and write the trajectories.
    Simulate,
    /// Fit the decay rate of the Lyapunov functional.
    Decay,
    /// Check the one-period contraction.
    Contract,
}

/// Overrides of the defaults; a config file overrides these in turn.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Key-value or JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Length as a number or `pair:l,k`.
    #[arg(long, global = true)]
    pub length: Option<String>,
    /// Grid nodes.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Comma-separated gains; 0 means no feedback.
    #[arg(long, global = true)]
    pub eps: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `delayed` or `per_step`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub periods: Option<usize>,
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl Flags {
    /// Defaults, then flags, then the config file.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let pairs: [(&str, Option<String>); 10] = [
            ("length", self.length.clone()),
            ("grid", self.grid.map(|v| v.to_string())),
            ("dt", self.dt.map(|v| v.to_string())),
            ("eps", self.eps.clone()),
            ("seeds", self.seed.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("mode", self.mode.clone()),
            ("periods", self.periods.map(|v| v.to_string())),
            ("amplitude", self.amplitude.map(|v| v.to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if let Some(path) = &self.config {
            cfg.apply_file(path).map_err(|e| match e {
                Error::Io { path, source } => {
                    Error::Config(format!("{}: {source}", path.display()))
                }
                e => e,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Format(_) => EXIT_BAD_CONFIG,
        Error::Synthesis(_)
        | Error::DegenerateTarget { .. }
        | Error::LibraryInvalid(_)
        | Error::UnsupportedClass(_)
        | Error::IllPosedTarget(_)
        | Error::EmptySubspace(_) => EXIT_SYNTHESIS_FAILED,
        Error::BlowUp { .. } | Error::FixedPointDivergence { .. } | Error::Smallness { .. } => {
            EXIT_EXPERIMENT_FAILED
        }
        _ => EXIT_OTHER,
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_BAD_CONFIG
            } else {
                EXIT_SUCCESS
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let cfg = cli.flags.resolve()?;
    match cli.command {
        Command::Classify => classify(&cfg),
        Command::Basis => basis(&cfg),
        Command::Synthesize => synthesize(&cfg),
        Command::Simulate => simulate(&cfg),
        Command::Decay => decay(&cfg),
        Command::Contract => contract(&cfg),
    }
}

fn classify(cfg: &ExperimentConfig) -> Result<i32> {
    let c = classify_length(cfg.length, DEFAULT_PAIR_TOL);
    println!("length {:.15}", cfg.length);
    println!("class {} dim M {}", c.tag, c.dim_m);
    for p in &c.pairs {
        match p.period() {
            Some(per) => println!(
                "pair ({}, {}) omega {:.12} period {:.12}",
                p.l,
                p.k,
                p.omega(),
                per
            ),
            None => println!("pair ({}, {}) stationary", p.l, p.k),
        }
    }
    Ok(EXIT_SUCCESS)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(cfg.out.clone())
}

fn basis(cfg: &ExperimentConfig) -> Result<i32> {
    let grid = crate::grid_kdv::SpatialGrid::new(cfg.length, cfg.grid)?;
    let m = build_m_basis(cfg.length, grid)?;
    let path = out_dir(cfg)?.join("basis.csv");
    m.export_csv(&path)?;
    println!("dim M {}", m.dim());
    for (p, per) in m.planes().iter().zip(m.periods()) {
        println!(
            "plane ({}, {}) omega {:.12} period {:?}",
            p.pair.l, p.pair.k, p.omega, per
        );
    }
    println!("ode residual {:.3e}", m.ode_residual());
    println!("boundary residual {:.3e}", m.boundary_residual());
    println!("wrote {}", path.display());
    Ok(EXIT_SUCCESS)
}

fn synthesize(cfg: &ExperimentConfig) -> Result<i32> {
    let problem = Problem::setup(cfg)?;
    let lib = &problem.library;
    let dir = out_dir(cfg)?;
    lib.save(&dir.join("library.bin"))?;
    lib.write_csv(&dir.join("library.csv"))?;
    let seed = cfg.seeds[0];
    let est = estimate_delta(lib, &problem.stepper, cfg.delta_samples, seed)?;
    println!(
        "period {:.12} ({} steps of {:.6e})",
        lib.period(),
        lib.period_steps,
        lib.dt
    );
    for (j, i, w) in lib.windows() {
        println!(
            "plane {} window {}: steps {}..{} gain {:.4e} sup {:.4e}",
            j + 1,
            i + 1,
            w.start,
            w.end(),
            w.gain,
            w.sup()
        );
    }
    println!("predicted delta {:.6}", lib.delta);
    println!(
        "cascade delta {:.6} over {} directions (first order {:.2e}, target error {:.2e})",
        est.delta, est.samples, est.max_first_order, est.max_target_error
    );
    println!("lipschitz bound {:.6}", lib.lipschitz);
    Ok(EXIT_SUCCESS)
}

fn simulate(cfg: &ExperimentConfig) -> Result<i32> {
    let problem = Problem::setup(cfg)?;
    let jobs: Vec<(f64, u64)> = cfg
        .epsilons
        .iter()
        .flat_map(|&e| cfg.seeds.iter().map(move |&s| (e, s)))
        .collect();
    let duration = cfg.periods as f64 * problem.period();
    let runs = fan_out(
        &jobs,
        cfg.threads,
        |&(eps, seed)| -> Result<LabeledRecord> {
            let y0 = initial_state(problem.space(), seed, cfg.amplitude, cfg.m_fraction)?;
            let lc = problem.loop_config(cfg, eps, duration)?;
            Ok(LabeledRecord {
                label: run_label("sim", eps, seed),
                record: integrate_closed_loop(&problem.stepper, &y0, 0.0, &lc)?,
            })
        },
    );
    let records = runs.into_iter().collect::<Result<Vec<_>>>()?;
    for r in &records {
        let last = r.record.samples.last().expect("non-empty record");
        println!(
            "{}: |P_H y| {:.6e} |P_M y| {:.6e} at t = {:.6}",
            r.label, last.norm_h, last.norm_m, last.t
        );
    }
    emit_report(cfg, &records, &[], &out_dir(cfg)?)?;
    Ok(EXIT_SUCCESS)
}

fn decay(cfg: &ExperimentConfig) -> Result<i32> {
    let problem = Problem::setup(cfg)?;
    let (fits, records) = decay_suite(&problem, cfg)?;
    let mut ok = true;
    for f in fits.iter().filter(|f| f.epsilon > 0.0) {
        if !(f.lambda_hat > 0.0 && f.r_squared >= MIN_R_SQUARED) {
            eprintln!(
                "decay eps={} seed={}: lambda_hat {:.3e}, R^2 {:.4}",
                f.epsilon, f.seed, f.lambda_hat, f.r_squared
            );
            ok = false;
        }
    }
    let reports: Vec<ExperimentReport> = fits.into_iter().map(ExperimentReport::Decay).collect();
    emit_report(cfg, &records, &reports, &out_dir(cfg)?)?;
    print!(
        "{}",
        std::fs::read_to_string(cfg.out.join("summary.txt")).unwrap_or_default()
    );
    Ok(if ok {
        EXIT_SUCCESS
    } else {
        EXIT_EXPERIMENT_FAILED
    })
}

fn contract(cfg: &ExperimentConfig) -> Result<i32> {
    let problem = Problem::setup(cfg)?;
    let consts = measure_constants(&problem, cfg)?;
    let reports = contraction_suite(&problem, cfg, &consts)?;
    let ok = reports.iter().all(|r| r.passed);
    for r in reports.iter().filter(|r| !r.passed) {
        eprintln!(
            "contraction eps={} violated in {:?}",
            r.epsilon,
            r.failing_regimes()
        );
    }
    let reports: Vec<ExperimentReport> = reports
        .into_iter()
        .map(ExperimentReport::Contraction)
        .collect();
    emit_report(cfg, &[], &reports, &out_dir(cfg)?)?;
    print!(
        "{}",
        std::fs::read_to_string(cfg.out.join("summary.txt")).unwrap_or_default()
    );
    Ok(if ok {
        EXIT_SUCCESS
    } else {
        EXIT_EXPERIMENT_FAILED
    })
}
