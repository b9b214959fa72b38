//! The `simulate` command line: one subcommand per analysis, the stochastic
//! method and its settings as flags, results written to an output directory.

mod manifest;
mod report;

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpcsim_core::circuit::units::parse_value;
use gpcsim_core::circuit::AnalysisSpec;
use gpcsim_core::engine::EngineError;
use gpcsim_core::post::{self, CoefficientExport, PostError, StatSeries};
use gpcsim_core::uq::{self, Analysis, McOptions, Method, ScOptions, SgSolver, StSolver, UqError};
use gpcsim_core::{CircuitError, NewtonConfig, Scheme, StochasticCircuit, TranOptions};
use serde::Serialize;
use thiserror::Error;

pub use manifest::{netlist_digest, Manifest};
pub use report::{report_costs, CostRow, CostTable, ReportError};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_DC: u8 = 3;
pub const EXIT_TRANSIENT: u8 = 4;
pub const EXIT_SELECTION: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "simulate", version, about = "Stochastic circuit simulation with polynomial chaos")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Operating point.
    Dc(RunArgs),
    /// DC sweep given by the netlist's `.dcsweep` card.
    Dcsweep(RunArgs),
    /// Transient analysis; `.tran` card or `--tstop`.
    Tran(RunArgs),
    /// Small-signal analysis given by the netlist's `.ac` card (stochastic testing only).
    Ac(RunArgs),
    /// Cost comparison table from run manifests.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    St,
    Sg,
    Sc,
    Mc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::St => Method::St,
            MethodArg::Sg => Method::Sg,
            MethodArg::Sc => Method::Sc,
            MethodArg::Mc => Method::Mc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Be,
    Tr,
    Gear2,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Be => Scheme::BackwardEuler,
            SchemeArg::Tr => Scheme::Trapezoidal,
            SchemeArg::Gear2 => Scheme::Gear2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

fn engineering(s: &str) -> Result<f64, String> {
    parse_value(&s.to_ascii_lowercase()).ok_or_else(|| format!("`{s}` is not a number"))
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Netlist file.
    pub netlist: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::St)]
    pub method: MethodArg,
    /// Total polynomial order. For Monte Carlo, order 0 pins every sample to the germ means.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Testing-node rank threshold (stochastic testing only).
    #[arg(long, value_parser = engineering)]
    pub beta: Option<f64>,
    /// Random seed (Monte Carlo only).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample count (Monte Carlo only); defaults to 1000.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Shared transient step (collocation and Monte Carlo only); defaults to t_stop/2000.
    #[arg(long = "fixed-step", value_parser = engineering)]
    pub fixed_step: Option<f64>,
    /// Evaluate every Monte Carlo sample at the germ means.
    #[arg(long)]
    pub mean_point: bool,
    #[arg(long, value_enum, default_value_t = SchemeArg::Gear2)]
    pub scheme: SchemeArg,
    #[arg(long, value_parser = engineering)]
    pub abstol: Option<f64>,
    #[arg(long, value_parser = engineering)]
    pub reltol: Option<f64>,
    /// Relative LTE tolerance of adaptive stepping.
    #[arg(long, value_parser = engineering)]
    pub ltetol: Option<f64>,
    /// Stop time, overriding the `.tran` card.
    #[arg(long, value_parser = engineering)]
    pub tstop: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Manifest files written by earlier runs.
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisKind {
    Dc,
    DcSweep,
    Tran,
    Ac,
}

impl AnalysisKind {
    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Dc => "dc",
            AnalysisKind::DcSweep => "dcsweep",
            AnalysisKind::Tran => "tran",
            AnalysisKind::Ac => "ac",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:\n{source}")]
    Netlist {
        path: PathBuf,
        #[source]
        source: CircuitError,
    },
    #[error("{0}")]
    Config(String),
    #[error("{source}")]
    Solve {
        kind: AnalysisKind,
        #[source]
        source: UqError,
    },
    #[error(transparent)]
    Post(#[from] PostError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Netlist { source, .. } => match source {
                CircuitError::Parse(_) | CircuitError::Empty | CircuitError::Device { .. } => EXIT_PARSE,
                _ => EXIT_OTHER,
            },
            CliError::Solve { kind, source } => solve_exit_code(*kind, source),
            _ => EXIT_OTHER,
        }
    }
}

fn solve_exit_code(kind: AnalysisKind, err: &UqError) -> u8 {
    let transient = kind == AnalysisKind::Tran;
    match err {
        UqError::Selection(_) => EXIT_SELECTION,
        UqError::Circuit(CircuitError::Parse(_)) => EXIT_PARSE,
        UqError::TooManyFailures { .. } if transient => EXIT_TRANSIENT,
        UqError::TooManyFailures { .. } => EXIT_DC,
        _ => match err.engine_error() {
            Some(EngineError::DcFailure { .. }) => EXIT_DC,
            Some(_) if transient => EXIT_TRANSIENT,
            Some(_) => EXIT_DC,
            None => EXIT_OTHER,
        },
    }
}

/// Validated settings of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: AnalysisKind,
    pub netlist: PathBuf,
    pub method: Method,
    pub order: usize,
    pub beta: f64,
    pub seed: u64,
    pub samples: usize,
    pub mean_point: bool,
    pub fixed_step: Option<f64>,
    pub tstop: Option<f64>,
    pub newton: NewtonConfig,
    pub tran: TranOptions,
    pub out: PathBuf,
    pub format: Format,
    pub jobs: Option<usize>,
}

pub const DEFAULT_BETA: f64 = 1e-2;
pub const DEFAULT_SAMPLES: usize = 1000;

impl RunConfig {
    pub fn from_args(kind: AnalysisKind, a: &RunArgs) -> Result<Self, CliError> {
        let method = Method::from(a.method);
        let only = |set: bool, flag: &str, who: &[Method], what: &str| {
            if set && !who.contains(&method) {
                Err(CliError::Config(format!("{flag} applies only to {what}")))
            } else {
                Ok(())
            }
        };
        only(a.samples.is_some(), "--samples", &[Method::Mc], "--method mc")?;
        only(a.seed.is_some(), "--seed", &[Method::Mc], "--method mc")?;
        only(a.mean_point, "--mean-point", &[Method::Mc], "--method mc")?;
        only(a.beta.is_some(), "--beta", &[Method::St], "--method st")?;
        only(a.fixed_step.is_some(), "--fixed-step", &[Method::Sc, Method::Mc], "--method sc and mc")?;
        if kind == AnalysisKind::Ac && method != Method::St {
            return Err(CliError::Config("ac supports only --method st".into()));
        }
        if a.jobs == Some(0) {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        if a.samples == Some(0) {
            return Err(CliError::Config("--samples must be at least 1".into()));
        }
        let mut newton = NewtonConfig::default();
        if let Some(v) = a.abstol {
            newton.abstol = v;
        }
        if let Some(v) = a.reltol {
            newton.reltol = v;
        }
        newton.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let mut tran = TranOptions::new(1.0);
        tran.newton = newton;
        tran.control.scheme = a.scheme.into();
        if let Some(v) = a.ltetol {
            if !(v > 0.0) {
                return Err(CliError::Config("--ltetol must be positive".into()));
            }
            tran.control.lte_tol = v;
        }
        Ok(RunConfig {
            kind,
            netlist: a.netlist.clone(),
            method,
            order: a.order,
            beta: a.beta.unwrap_or(DEFAULT_BETA),
            seed: a.seed.unwrap_or(0),
            samples: a.samples.unwrap_or(DEFAULT_SAMPLES),
            mean_point: a.mean_point || (method == Method::Mc && a.order == 0),
            fixed_step: a.fixed_step,
            tstop: a.tstop,
            newton,
            tran,
            out: a.out.clone(),
            format: a.format,
            jobs: a.jobs,
        })
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: Manifest,
    pub stats: StatSeries,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn analysis_for(kind: AnalysisKind, circuit: &StochasticCircuit, cfg: &RunConfig) -> Result<Analysis, CliError> {
    let find = |pred: fn(&AnalysisSpec) -> bool, card: &str| {
        circuit
            .analyses()
            .iter()
            .find(|a| pred(a))
            .cloned()
            .ok_or_else(|| CliError::Config(format!("netlist has no {card} card")))
    };
    let solve_err = |source| CliError::Solve { kind, source };
    match kind {
        AnalysisKind::Dc => Ok(Analysis::Dc),
        AnalysisKind::DcSweep => {
            let spec = find(|a| matches!(a, AnalysisSpec::DcSweep { .. }), ".dcsweep")?;
            Analysis::from_spec(circuit, &spec, &cfg.tran).map_err(solve_err)
        }
        AnalysisKind::Tran => {
            let spec = match (cfg.tstop, find(|a| matches!(a, AnalysisSpec::Tran { .. }), ".tran")) {
                (Some(t), Ok(AnalysisSpec::Tran { hmax, .. })) => AnalysisSpec::Tran { tstop: t, hmax },
                (Some(t), _) => AnalysisSpec::Tran { tstop: t, hmax: None },
                (None, card) => card?,
            };
            Analysis::from_spec(circuit, &spec, &cfg.tran).map_err(solve_err)
        }
        AnalysisKind::Ac => Err(CliError::Config("ac is handled separately".into())),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(PostError::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize)]
struct EnsembleExport<'a> {
    method: Method,
    samples: &'a [Vec<f64>],
    weights: &'a [f64],
    failures: usize,
    stats: &'a StatSeries,
}

#[derive(Debug, Serialize)]
struct AcExport {
    freqs: Vec<f64>,
    coefficients_re: CoefficientExport,
    coefficients_im: CoefficientExport,
}

/// Per-run bookkeeping shared by all methods.
struct Outcome {
    stats: StatSeries,
    json: Option<(String, serde_json::Value)>,
    basis_size: usize,
    nodes: usize,
    cond_phi: Option<f64>,
    failures: usize,
    run_stats: uq::RunStats,
    grid_points: usize,
    fixed_step: Option<f64>,
    t_stop: Option<f64>,
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Post(PostError::Json(e)))
}

fn solve(cfg: &RunConfig, circuit: &StochasticCircuit) -> Result<Outcome, CliError> {
    let kind = cfg.kind;
    let solve_err = |source| CliError::Solve { kind, source };
    let names = circuit.state_names().to_vec();
    if kind == AnalysisKind::Ac {
        let spec = circuit
            .analyses()
            .iter()
            .find_map(|a| match a {
                AnalysisSpec::Ac {
                    fstart,
                    fstop,
                    points_per_decade,
                } => Some((*fstart, *fstop, *points_per_decade)),
                _ => None,
            })
            .ok_or_else(|| CliError::Config("netlist has no .ac card".into()))?;
        let mut st = StSolver::new(circuit, cfg.order, cfg.beta).map_err(solve_err)?;
        st.newton = cfg.newton;
        let dc = st.solve(&Analysis::Dc).map_err(solve_err)?;
        let freqs = uq::log_frequencies(spec.0, spec.1, spec.2);
        let ac = uq::ac_solve(circuit, &st.nodes, &dc.coeffs[0], &freqs).map_err(solve_err)?;
        // Long-format statistics of the real and imaginary parts.
        let mut stat_names = Vec::with_capacity(2 * names.len());
        stat_names.extend(names.iter().map(|n| format!("re({n})")));
        stat_names.extend(names.iter().map(|n| format!("im({n})")));
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for f in 0..freqs.len() {
            let (mr, sr) = ac.re_state(f).moments();
            let (mi, si) = ac.im_state(f).moments();
            mean.push([mr, mi].concat());
            std.push([sr, si].concat());
        }
        let stats = StatSeries {
            grid: freqs.clone(),
            names: stat_names,
            mean,
            std,
            stderr: None,
        };
        let traj = |coeffs: Vec<Vec<f64>>| uq::GpcTrajectory {
            coeffs,
            grid: freqs.clone(),
            steps: Vec::new(),
            ..dc.clone()
        };
        let export = AcExport {
            freqs: freqs.clone(),
            coefficients_re: CoefficientExport::new(&traj(ac.re.clone()), &st.basis, &names, Some(&st.nodes)),
            coefficients_im: CoefficientExport::new(&traj(ac.im.clone()), &st.basis, &names, Some(&st.nodes)),
        };
        return Ok(Outcome {
            stats,
            json: Some(("ac_coefficients.json".into(), to_value(&export)?)),
            basis_size: st.basis.len(),
            nodes: st.nodes.len(),
            cond_phi: Some(st.nodes.cond_estimate),
            failures: 0,
            run_stats: dc.stats,
            grid_points: freqs.len(),
            fixed_step: None,
            t_stop: None,
        });
    }

    let analysis = analysis_for(kind, circuit, cfg)?;
    let t_stop = match &analysis {
        Analysis::Tran(o) => Some(o.t_stop),
        _ => None,
    };
    let shared_step = |o: &Analysis| match o {
        Analysis::Tran(o) => Some(cfg.fixed_step.unwrap_or(o.t_stop / uq::DEFAULT_FIXED_STEPS)),
        _ => None,
    };
    match cfg.method {
        Method::St => {
            let mut st = StSolver::new(circuit, cfg.order, cfg.beta).map_err(solve_err)?;
            st.newton = cfg.newton;
            let traj = st.solve(&analysis).map_err(solve_err)?;
            let export = CoefficientExport::new(&traj, &st.basis, &names, Some(&st.nodes));
            Ok(Outcome {
                stats: post::stats_over_time(&traj, &names),
                json: Some(("coefficients.json".into(), to_value(&export)?)),
                basis_size: st.basis.len(),
                nodes: st.nodes.len(),
                cond_phi: Some(st.nodes.cond_estimate),
                failures: 0,
                run_stats: traj.stats,
                grid_points: traj.len(),
                fixed_step: None,
                t_stop,
            })
        }
        Method::Sg => {
            let mut sg = SgSolver::new(circuit, cfg.order).map_err(solve_err)?;
            sg.newton = cfg.newton;
            let traj = sg.solve(&analysis).map_err(solve_err)?;
            let export = CoefficientExport::new(&traj, &sg.basis, &names, None);
            Ok(Outcome {
                stats: post::stats_over_time(&traj, &names),
                json: Some(("coefficients.json".into(), to_value(&export)?)),
                basis_size: sg.basis.len(),
                nodes: traj.stats.nodes,
                cond_phi: None,
                failures: 0,
                run_stats: traj.stats,
                grid_points: traj.len(),
                fixed_step: None,
                t_stop,
            })
        }
        Method::Sc => {
            let opts = ScOptions {
                order: cfg.order,
                h_fixed: cfg.fixed_step,
                newton: cfg.newton,
            };
            let out = uq::sc_solve(circuit, &opts, &analysis).map_err(solve_err)?;
            let basis = gpcsim_core::GpcBasisSet::new(circuit.distributions(), cfg.order)
                .map_err(|e| solve_err(UqError::Basis(e)))?;
            let export = CoefficientExport::new(&out.trajectory, &basis, &names, None);
            Ok(Outcome {
                stats: post::stats_over_time(&out.trajectory, &names),
                json: Some(("coefficients.json".into(), to_value(&export)?)),
                basis_size: out.trajectory.k,
                nodes: out.trajectory.stats.nodes,
                cond_phi: None,
                failures: 0,
                run_stats: out.trajectory.stats,
                grid_points: out.trajectory.len(),
                fixed_step: shared_step(&analysis),
                t_stop,
            })
        }
        Method::Mc => {
            let opts = McOptions {
                samples: cfg.samples,
                seed: cfg.seed,
                mean_point: cfg.mean_point,
                h_fixed: cfg.fixed_step,
                newton: cfg.newton,
            };
            let ens = uq::mc_solve(circuit, &opts, &analysis).map_err(solve_err)?;
            let stats = post::stats_of_ensemble(&ens, &names);
            let export = EnsembleExport {
                method: Method::Mc,
                samples: &ens.samples,
                weights: &ens.weights,
                failures: ens.failures,
                stats: &stats,
            };
            let json = to_value(&export)?;
            Ok(Outcome {
                json: Some(("ensemble.json".into(), json)),
                stats,
                basis_size: 0,
                nodes: ens.samples.len(),
                cond_phi: None,
                failures: ens.failures,
                run_stats: ens.stats,
                grid_points: ens.grid.len(),
                fixed_step: shared_step(&analysis),
                t_stop,
            })
        }
    }
}

/// Parses the netlist, solves, and writes results under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let text = fs::read_to_string(&cfg.netlist).map_err(|source| CliError::Io {
        path: cfg.netlist.clone(),
        source,
    })?;
    let circuit = StochasticCircuit::from_text(&text).map_err(|source| CliError::Netlist {
        path: cfg.netlist.clone(),
        source,
    })?;
    let start = Instant::now();
    let outcome = match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| solve(cfg, &circuit))?,
        None => solve(cfg, &circuit)?,
    };
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(&cfg.out).map_err(|source| CliError::Io {
        path: cfg.out.clone(),
        source,
    })?;
    let mut files = Vec::new();
    if matches!(cfg.format, Format::Csv | Format::Both) {
        let name = if cfg.kind == AnalysisKind::Ac { "ac_stats.csv" } else { "stats.csv" };
        let path = cfg.out.join(name);
        let mut w = create(&path)?;
        post::write_stats_csv(&outcome.stats, &mut w)?;
        w.flush().map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        files.push(path);
    }
    if matches!(cfg.format, Format::Json | Format::Both) {
        if let Some((name, value)) = &outcome.json {
            let path = cfg.out.join(name);
            write_json(&path, value)?;
            files.push(path);
        }
    }

    let rs = outcome.run_stats;
    let manifest = Manifest {
        netlist: cfg.netlist.display().to_string(),
        netlist_sha256: netlist_digest(&text),
        analysis: cfg.kind.name().into(),
        method: cfg.method,
        order: cfg.order,
        germs: circuit.germs(),
        basis_size: outcome.basis_size,
        nodes: outcome.nodes,
        cond_phi: outcome.cond_phi,
        beta: (cfg.method == Method::St).then_some(cfg.beta),
        samples: (cfg.method == Method::Mc).then_some(cfg.samples),
        seed: (cfg.method == Method::Mc).then_some(cfg.seed),
        failures: outcome.failures,
        scheme: cfg.tran.control.scheme,
        lte_tol: cfg.tran.control.lte_tol,
        abstol: cfg.newton.abstol,
        reltol: cfg.newton.reltol,
        t_stop: outcome.t_stop,
        fixed_step: outcome.fixed_step,
        grid_points: outcome.grid_points,
        time_steps: if cfg.kind == AnalysisKind::Tran {
            outcome.grid_points.saturating_sub(1)
        } else {
            0
        },
        wall_time_s: wall,
        newton_iters: rs.newton_iters,
        accepted_steps: rs.accepted_steps,
        rejected_steps: rs.rejected_steps,
        max_lte_ratio: rs.max_lte_ratio,
    };
    let path = cfg.out.join("manifest.json");
    write_json(&path, &manifest)?;
    files.push(path);
    Ok(RunOutput {
        manifest,
        stats: outcome.stats,
        files,
        warnings: circuit.warnings().to_vec(),
    })
}

fn report(args: &ReportArgs) -> Result<String, CliError> {
    let manifests = args
        .manifests
        .iter()
        .map(|p| {
            Manifest::read(p).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = report_costs(&manifests)?;
    if args.json {
        serde_json::to_string_pretty(&table).map_err(|e| CliError::Post(PostError::Json(e)))
    } else {
        Ok(table.render())
    }
}

/// Entry point: parses arguments, runs, prints diagnostics and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_OTHER } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, args) = match &cli.command {
        Command::Dc(a) => (AnalysisKind::Dc, a),
        Command::Dcsweep(a) => (AnalysisKind::DcSweep, a),
        Command::Tran(a) => (AnalysisKind::Tran, a),
        Command::Ac(a) => (AnalysisKind::Ac, a),
        Command::Report(r) => {
            return match report(r) {
                Ok(text) => {
                    println!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code())
                }
            };
        }
    };
    let result = RunConfig::from_args(kind, args).and_then(|cfg| run(&cfg));
    match result {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let m = &out.manifest;
            println!(
                "{} {} order {}: K = {}, nodes = {}, newton iterations = {}, {:.3} s",
                m.analysis, m.method, m.order, m.basis_size, m.nodes, m.newton_iters, m.wall_time_s
            );
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
