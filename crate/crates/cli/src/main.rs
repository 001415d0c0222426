mod config;
mod tables;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lifemax_core::admm::{run_admm, InitPolicy, Objective};
use lifemax_core::harness::{compare, rho_sweep, rho_sweep_parallel};
use lifemax_core::lp::{oracle, LpSolution};
use lifemax_core::report::{trace_csv, Algorithm, RunStatus, SolveReport};
use lifemax_core::subgradient::{run_subgradient, StepRule, SubgradConfig};
use lifemax_core::topology::{SinkPlacement, Topology};
use serde::Serialize;

use config::RunConfigFile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("topology: {0}")]
    Topology(lifemax_core::Error),
    #[error("{0}")]
    Solver(lifemax_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        use lifemax_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Topology(E::ConnectivityFailure { .. }) => 3,
            CliError::Topology(_) => 2,
            CliError::Solver(E::NumericalDivergence { .. }) => 5,
            CliError::Solver(E::InvalidParam(_)) => 2,
            CliError::Solver(_) => 1,
        }
    }
}

const EXIT_OK: u8 = 0;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "lifemax", version, about = "Sensor-network lifetime maximization by distributed ADMM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random connected topology.
    Gen(GenArgs),
    /// Solve a topology with the LP oracle, ADMM or the subgradient baseline.
    Solve(SolveArgs),
    /// Run ADMM for a fixed budget at every value of a penalty grid.
    Sweep(SweepArgs),
    /// Race ADMM against the subgradient baseline to an oracle-gap target.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SinkArg {
    Center,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Lp,
    Admm,
    Subgrad,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Zero,
    Heuristic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StepArg {
    Harmonic,
    InvSqrt,
}

#[derive(Debug, Args)]
struct TopologyFlags {
    /// Number of sensors (the sink is added on top).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    comm_range: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Initial energy of every sensor.
    #[arg(long)]
    energy: Option<f64>,
    /// Generation rate of every sensor.
    #[arg(long)]
    gen_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    sink: Option<SinkArg>,
    #[arg(long)]
    max_attempts: Option<u32>,
}

#[derive(Debug, Args)]
struct SolverFlags {
    #[arg(long)]
    rho: Option<f64>,
    /// Primal residual tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// Dual residual tolerance.
    #[arg(long)]
    eps_dual: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Subgradient step rule: a/(b+k) or a/sqrt(k).
    #[arg(long, value_enum)]
    step_rule: Option<StepArg>,
    #[arg(long)]
    step_a: Option<f64>,
    #[arg(long)]
    step_b: Option<f64>,
    #[arg(long)]
    subgrad_max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    topology: TopologyFlags,
    /// Output topology file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Topology file produced by `gen`.
    topology: PathBuf,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    solver: SolverFlags,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-iteration trace CSV path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    topology: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    solver: SolverFlags,
    /// Comma-separated penalty values.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Rounds per grid value.
    #[arg(long)]
    budget: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Sweep CSV path.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Sweep JSON path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    topology: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    solver: SolverFlags,
    /// Relative oracle gap both solvers must reach.
    #[arg(long)]
    target: Option<f64>,
    /// Comparison CSV path.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Comparison JSON path.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn base_config(args: &ConfigArgs) -> Result<RunConfigFile, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    cfg.apply_env()?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_topology_flags(cfg: &mut RunConfigFile, f: &TopologyFlags) {
    let t = &mut cfg.topology;
    set(&mut t.sensors, f.n);
    set(&mut t.radius, f.radius);
    set(&mut t.comm_range, f.comm_range);
    set(&mut t.alpha, f.alpha);
    set(&mut t.beta, f.beta);
    set(&mut t.energy, f.energy);
    set(&mut t.gen_rate, f.gen_rate);
    set(&mut t.seed, f.seed);
    set(
        &mut t.sink,
        f.sink.map(|s| match s {
            SinkArg::Center => SinkPlacement::Center,
            SinkArg::Random => SinkPlacement::Random,
        }),
    );
    set(&mut t.max_attempts, f.max_attempts);
}

fn apply_solver_flags(cfg: &mut RunConfigFile, f: &SolverFlags) {
    let s = &mut cfg.solver;
    set(&mut s.rho, f.rho);
    set(&mut s.eps, f.eps);
    set(&mut s.eps_dual, f.eps_dual);
    set(&mut s.max_iter, f.max_iter);
    set(
        &mut s.objective,
        f.objective.map(|o| match o {
            ObjectiveArg::Linear => Objective::Linear,
            ObjectiveArg::Quadratic => Objective::Quadratic,
        }),
    );
    set(
        &mut s.init,
        f.init.map(|i| match i {
            InitArg::Zero => InitPolicy::Zero,
            InitArg::Heuristic => InitPolicy::Heuristic,
        }),
    );
    let (mut a, mut b, mut sqrt) = match s.step {
        StepRule::Harmonic { a, b } => (a, b, false),
        StepRule::InvSqrt { a } => (a, 0.0, true),
    };
    if let Some(rule) = f.step_rule {
        sqrt = matches!(rule, StepArg::InvSqrt);
    }
    set(&mut a, f.step_a);
    set(&mut b, f.step_b);
    s.step = if sqrt { StepRule::InvSqrt { a } } else { StepRule::Harmonic { a, b } };
    set(&mut s.subgrad_max_iter, f.subgrad_max_iter);
}

/// Prints the configuration when asked; returns whether the caller should stop.
fn finish_config(cfg: &RunConfigFile, args: &ConfigArgs) -> Result<bool, CliError> {
    cfg.validate()?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    Ok(false)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn load_topology(path: &Path) -> Result<Topology, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Topology::from_json(&text).map_err(CliError::Topology)
}

fn solve_oracle(topo: &Topology) -> Result<LpSolution, CliError> {
    oracle(topo).map_err(CliError::Solver)
}

fn cmd_gen(args: GenArgs) -> Result<u8, CliError> {
    let mut cfg = base_config(&args.config)?;
    apply_topology_flags(&mut cfg, &args.topology);
    set(&mut cfg.output.topology, args.output.map(Some));
    if finish_config(&cfg, &args.config)? {
        return Ok(EXIT_OK);
    }
    let out = cfg
        .output
        .topology
        .clone()
        .ok_or_else(|| CliError::Usage("no output path: pass -o or set output.topology".into()))?;
    let topo = Topology::generate(&cfg.topology.params()).map_err(|e| match e {
        lifemax_core::Error::InvalidParam(m) => CliError::Usage(m),
        other => CliError::Topology(other),
    })?;
    write_file(&out, &topo.to_json())?;
    println!("nodes {} edges {} attempts {}", topo.node_count(), topo.edges().len(), topo.attempts());
    Ok(EXIT_OK)
}

fn summary(report: &SolveReport) {
    let status = match report.status {
        RunStatus::Converged => "converged",
        RunStatus::MaxIterations => "stopped",
    };
    println!(
        "{} {status} after {} rounds: q {} lifetime {} gap {}",
        report.algorithm.name(),
        report.iterations,
        report.q,
        report.lifetime,
        report.oracle_gap.unwrap_or(f64::NAN)
    );
}

fn cmd_solve(args: SolveArgs) -> Result<u8, CliError> {
    let mut cfg = base_config(&args.config)?;
    apply_solver_flags(&mut cfg, &args.solver);
    set(
        &mut cfg.solver.algorithm,
        args.algo.map(|a| match a {
            AlgoArg::Lp => Algorithm::Lp,
            AlgoArg::Admm => Algorithm::Admm,
            AlgoArg::Subgrad => Algorithm::Subgrad,
        }),
    );
    set(&mut cfg.output.report, args.report.map(Some));
    set(&mut cfg.output.trace, args.trace.map(Some));
    if finish_config(&cfg, &args.config)? {
        return Ok(EXIT_OK);
    }
    let topo = load_topology(&args.topology)?;
    let lp = solve_oracle(&topo)?;
    let (report, trace) = match cfg.solver.algorithm {
        Algorithm::Lp => {
            println!("lp optimal: q {} lifetime {}", lp.q, lp.lifetime);
            if let Some(path) = &cfg.output.report {
                write_file(path, &to_json(&lp))?;
            }
            if cfg.output.trace.is_some() {
                eprintln!("note: the LP oracle has no iteration trace; --trace ignored");
            }
            return Ok(EXIT_OK);
        }
        Algorithm::Admm => {
            let run = run_admm(&topo, &cfg.solver.admm()).map_err(CliError::Solver)?;
            (run.report.with_oracle(lp.q), run.trace)
        }
        Algorithm::Subgrad => {
            let sg = SubgradConfig {
                oracle_q: Some(lp.q),
                ..cfg.solver.subgrad()
            };
            let run = run_subgradient(&topo, &sg).map_err(CliError::Solver)?;
            (run.report, run.trace)
        }
    };
    summary(&report);
    if let Some(path) = &cfg.output.report {
        write_file(path, &to_json(&report))?;
    }
    if let Some(path) = &cfg.output.trace {
        write_file(path, &trace_csv(report.algorithm, &trace))?;
    }
    Ok(match report.status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::MaxIterations => EXIT_NOT_CONVERGED,
    })
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, CliError> {
    let mut cfg = base_config(&args.config)?;
    apply_solver_flags(&mut cfg, &args.solver);
    set(&mut cfg.solver.grid, args.grid);
    set(&mut cfg.solver.budget, args.budget);
    set(&mut cfg.solver.jobs, args.jobs);
    set(&mut cfg.output.table, args.output.map(Some));
    set(&mut cfg.output.report, args.report.map(Some));
    if finish_config(&cfg, &args.config)? {
        return Ok(EXIT_OK);
    }
    let topo = load_topology(&args.topology)?;
    let q_star = solve_oracle(&topo)?.q;
    let s = &cfg.solver;
    let sweep = if s.jobs > 1 {
        rho_sweep_parallel(&topo, &s.grid, s.budget, &s.admm(), q_star, s.jobs)
    } else {
        rho_sweep(&topo, &s.grid, s.budget, &s.admm(), q_star)
    }
    .map_err(CliError::Solver)?;
    match sweep.best {
        Some(b) => println!(
            "best rho {} of {} values ({})",
            sweep.cells[b].rho,
            sweep.cells.len(),
            if sweep.best_is_interior() { "interior" } else { "endpoint" }
        ),
        None => println!("every grid value diverged"),
    }
    if let Some(path) = &cfg.output.table {
        write_file(path, &tables::sweep_csv(&sweep))?;
    }
    if let Some(path) = &cfg.output.report {
        write_file(path, &to_json(&sweep))?;
    }
    Ok(EXIT_OK)
}

fn cmd_compare(args: CompareArgs) -> Result<u8, CliError> {
    let mut cfg = base_config(&args.config)?;
    apply_solver_flags(&mut cfg, &args.solver);
    set(&mut cfg.solver.target, args.target);
    set(&mut cfg.output.table, args.output.map(Some));
    set(&mut cfg.output.report, args.report.map(Some));
    if finish_config(&cfg, &args.config)? {
        return Ok(EXIT_OK);
    }
    let topo = load_topology(&args.topology)?;
    let q_star = solve_oracle(&topo)?.q;
    let s = &cfg.solver;
    let cmp = compare(&topo, &s.admm(), &s.subgrad(), s.target, q_star).map_err(CliError::Solver)?;
    let show = |o: &lifemax_core::harness::SolverOutcome| match o.iterations_to_target {
        Some(k) => k.to_string(),
        None => format!(">{}", o.iterations_run),
    };
    println!("admm {} rounds, subgrad {} rounds to gap {}", show(&cmp.admm), show(&cmp.subgrad), cmp.target);
    eprintln!("wall time: admm {:.3}s, subgrad {:.3}s", cmp.admm.wall_seconds, cmp.subgrad.wall_seconds);
    if let Some(path) = &cfg.output.table {
        write_file(path, &tables::comparison_csv(&cmp, topo.node_count()))?;
    }
    if let Some(path) = &cfg.output.report {
        write_file(path, &to_json(&cmp))?;
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
