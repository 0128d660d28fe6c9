use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcs_alloc::mpft::compute_bounds;
use mcs_alloc::report::{run_solver, RunReport, SolverName, SolverSpec, REPORT_CSV_HEADER};
use mcs_alloc::scenario::{
    instance_to_string, load_instance, load_towers, save_instance, Distribution, Instance, InstanceFile,
    ProblemMode, ScenarioConfig,
};
use mcs_alloc::tsp::TspSolver;
use mcs_alloc::Error;

mod sweep;

/// Worker threads for sweeps; defaults to the available parallelism.
pub const WORKERS_ENV: &str = "MCS_ALLOC_WORKERS";

#[derive(Parser)]
#[command(name = "mcs-alloc", version, about = "Multi-task allocation for mobile crowd sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance file.
    Generate(GenerateArgs),
    /// Run one solver on an instance and print a report.
    Solve(SolveArgs),
    /// Run a solver over a parameter grid and print CSV rows.
    Sweep(sweep::SweepArgs),
    /// Print the objective bounds of an mpft instance.
    Bounds { instance: PathBuf },
    /// Check an instance file and its invariants.
    Validate { instance: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fpmt,
    Mpft,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DistributionArg {
    Compact,
    Scattered,
    Hybrid,
}

impl From<DistributionArg> for Distribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Compact => Distribution::Compact,
            DistributionArg::Scattered => Distribution::Scattered,
            DistributionArg::Hybrid => Distribution::Hybrid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TspArg {
    Exact,
    Christofides,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Scenario flags shared by `generate` and structural sweeps.
#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// Base config file (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Participants (fpmt) or areas (mpft).
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long, value_enum)]
    distribution: Option<DistributionArg>,
    /// Meters per minute.
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    area_count: Option<u32>,
    /// Snap generated points to the nearest tower of an `id,lat,lon` CSV.
    #[arg(long)]
    towers: Option<PathBuf>,
}

impl ConfigArgs {
    /// The config file (if any) with flags applied; `mode` wins over the file.
    pub fn build(&self, mode: Option<ProblemMode>) -> Result<ScenarioConfig, Error> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                ScenarioConfig::from_toml_str(&text)?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(mode) = mode {
            c.mode = mode;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.m = self.m.or(c.m);
        c.n = self.n.or(c.n);
        c.q = self.q.or(c.q);
        c.p = self.p.or(c.p);
        if let Some(d) = self.distribution {
            c.distribution = d.into();
        }
        if let Some(s) = self.speed {
            c.speed = s;
        }
        if let Some(a) = self.area_count {
            c.area_count = a;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn towers(&self) -> Result<Option<Vec<mcs_alloc::scenario::Tower>>, Error> {
        self.towers.as_deref().map(load_towers).transpose()
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output path; without it the file goes to stdout and the digest to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Solver knobs shared by `solve` and `sweep`.
#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Nearest-task pool size for mtp-mcmf.
    #[arg(long)]
    k: Option<usize>,
    /// Incentive weight (distance weight defaults to 1 - k1).
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    /// Incentive budget for c-ilp and c-grd.
    #[arg(long)]
    budget: Option<f64>,
    /// Route solver for task-set costs (default: exact up to 21 nodes).
    #[arg(long, value_enum)]
    tsp: Option<TspArg>,
    /// Maximum routes a task-set enumeration may compute.
    #[arg(long, default_value_t = mcs_alloc::fpmt::DEFAULT_ROUTE_BUDGET)]
    route_budget: usize,
}

impl SolverArgs {
    pub fn spec(&self, solver: SolverName) -> SolverSpec {
        SolverSpec {
            solver,
            k: self.k,
            k1: self.k1,
            k2: self.k2,
            budget: self.budget,
            tsp: self.tsp.map(|t| match t {
                TspArg::Exact => TspSolver::Exact,
                TspArg::Christofides => TspSolver::Christofides,
            }),
            route_budget: self.route_budget,
            speed: None,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_parser = parse_solver)]
    solver: SolverName,
    #[command(flatten)]
    knobs: SolverArgs,
    /// Meters per minute for completion times (default: instance config).
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

pub fn parse_solver(s: &str) -> Result<SolverName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Writes a line to stdout; a closed reader ends the process quietly.
pub fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{text}").is_err() {
        std::process::exit(0);
    }
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_)
        | Error::InfeasibleBudget { .. }
        | Error::InfeasibleFlowValue { .. }
        | Error::NoCandidates
        | Error::Unbounded => 4,
        Error::SizeLimit { .. } | Error::EnumerationBudget { .. } => 5,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Bounds { instance } => {
            let file = load_instance(&instance)?;
            let Instance::Mpft(inst) = &file.instance else {
                return Err(Error::ModeMismatchProblem {
                    solver: "bounds",
                    instance: file.mode().as_str(),
                });
            };
            let b = compute_bounds(inst)?;
            emit(&serde_json::to_string_pretty(&b).expect("bounds serialize"));
            Ok(())
        }
        Command::Validate { instance } => {
            let file = load_instance(&instance)?;
            match &file.instance {
                Instance::Fpmt(i) => emit(&format!("ok: fpmt instance, m={} n={} q={}", i.m(), i.n(), i.q())),
                Instance::Mpft(i) => emit(&format!(
                    "ok: mpft instance, areas={} tasks={} supply={} demand={}",
                    i.m(),
                    i.n(),
                    i.supply(),
                    i.total_demand()
                )),
            }
            Ok(())
        }
    }
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let mode = match args.mode {
        ModeArg::Fpmt => ProblemMode::Fpmt,
        ModeArg::Mpft => ProblemMode::Mpft,
    };
    let config = args.config.build(Some(mode))?;
    let towers = args.config.towers()?;
    let file = InstanceFile::generate(&config, towers.as_deref())?;
    match &args.out {
        Some(path) => {
            let text = save_instance(path, &file)?;
            emit(&mcs_alloc::report::digest_text(&text));
        }
        None => {
            let text = instance_to_string(&file)?;
            emit(text.trim_end_matches('\n'));
            eprintln!("{}", mcs_alloc::report::digest_text(&text));
        }
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), Error> {
    let file = load_instance(&args.instance)?;
    let mut spec = args.knobs.spec(args.solver);
    spec.speed = args.speed;
    let report: RunReport = run_solver(&file, &spec)?;
    match args.format {
        FormatArg::Json => emit(&report.to_json()),
        FormatArg::Csv => {
            emit(REPORT_CSV_HEADER);
            emit(&report.csv_row());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NoCandidates), 4);
        assert_eq!(exit_code(&Error::Param("x".into())), 3);
        assert_eq!(
            exit_code(&Error::EnumerationBudget {
                routes: 2,
                budget: 1
            }),
            5
        );
    }
}
