//! Parameter sweeps emitting one CSV row per grid point and seed.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use mcs_alloc::mpft::compute_bounds;
use mcs_alloc::report::{run_solver, RunReport, SolverName, SolverSpec};
use mcs_alloc::scenario::{load_instance, Distribution, Instance, InstanceFile, ProblemMode};
use mcs_alloc::Error;
use rayon::prelude::*;

use crate::{emit, parse_solver, ConfigArgs, SolverArgs, WORKERS_ENV};

/// Column order is stable; new columns are only ever appended.
pub const SWEEP_CSV_HEADER: &str = "row,axis,value,seed,solver,param,accomplished,total_distance_m,mean_completion_min,incentive,runtime_ms,non_dominated";

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Tasks,
    Participants,
    Q,
    K,
    Weights,
    Budgets,
    Distribution,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Tasks => "tasks",
            Axis::Participants => "participants",
            Axis::Q => "q",
            Axis::K => "k",
            Axis::Weights => "weights",
            Axis::Budgets => "budgets",
            Axis::Distribution => "distribution",
        }
    }

    fn structural(self) -> bool {
        matches!(self, Axis::Tasks | Axis::Participants | Axis::Q | Axis::Distribution)
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SweepMode {
    Fpmt,
    Mpft,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    axis: Axis,
    /// Fixed instance (k, weights and budgets axes only).
    #[arg(long, conflicts_with = "seeds")]
    instance: Option<PathBuf>,
    /// Problem to generate when no instance is given.
    #[arg(long, value_enum)]
    mode: Option<SweepMode>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Grid: `a,b,c`, `a..b` (half-open) or `a..=b`. Budgets are fractions of
    /// the [c_min, c_max] range; weights are values of k1.
    #[arg(long)]
    values: Option<String>,
    /// Grid size for weights (interior points) and budgets (endpoints included).
    #[arg(long)]
    points: Option<usize>,
    /// Seeds `a..b` (half-open) or `a..=b`; adds mean and stddev rows.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated solvers; defaults depend on the axis and mode.
    #[arg(long, value_delimiter = ',', value_parser = parse_solver)]
    solvers: Vec<SolverName>,
    #[command(flatten)]
    knobs: SolverArgs,
}

/// Integer ranges `a..b` / `a..=b` or a comma list.
fn parse_u64_list(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Param(format!("cannot parse integer list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let (b, inclusive) = match b.strip_prefix('=') {
            Some(b) => (b, true),
            None => (b, false),
        };
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        let v: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
        return if v.is_empty() { Err(bad()) } else { Ok(v) };
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Param(format!("cannot parse number list `{s}`")))
        })
        .collect()
}

struct Job {
    value: String,
    seed: Option<u64>,
    param: String,
    file: Arc<InstanceFile>,
    spec: SolverSpec,
}

/// Rows of one (grid value, solver) pair across seeds.
struct Block {
    jobs: std::ops::Range<usize>,
}

fn default_solvers(axis: Axis, mode: ProblemMode) -> Vec<SolverName> {
    match (axis, mode) {
        (Axis::K, _) => vec![SolverName::MtpMcmf],
        (Axis::Weights, _) => vec![SolverName::WIlp],
        (Axis::Budgets, _) => vec![SolverName::CIlp],
        (_, ProblemMode::Fpmt) => vec![SolverName::MtMcmf, SolverName::MtGrdpt],
        (_, ProblemMode::Mpft) => vec![SolverName::WIlp],
    }
}

pub fn run(args: SweepArgs) -> Result<(), Error> {
    let axis = args.axis;
    if axis.structural() && args.instance.is_some() {
        return Err(Error::Param(format!(
            "axis `{}` varies the scenario; pass config flags instead of --instance",
            axis.name()
        )));
    }
    let mode = args.mode.map(|m| match m {
        SweepMode::Fpmt => ProblemMode::Fpmt,
        SweepMode::Mpft => ProblemMode::Mpft,
    });

    // Base instances, one per seed, for the non-structural axes.
    let (config, seeds, fixed): (_, Vec<Option<u64>>, Vec<Arc<InstanceFile>>) = match &args.instance {
        Some(path) => {
            let file = load_instance(path)?;
            let seed = file.config.as_ref().map(|c| c.seed);
            (None, vec![seed], vec![Arc::new(file)])
        }
        None => {
            let config = args.config.build(mode)?;
            let seeds = match &args.seeds {
                Some(s) => parse_u64_list(s)?,
                None => vec![config.seed],
            };
            let towers = args.config.towers()?;
            let fixed = if axis.structural() {
                Vec::new()
            } else {
                seeds
                    .iter()
                    .map(|&s| {
                        let mut c = config.clone();
                        c.seed = s;
                        InstanceFile::generate(&c, towers.as_deref()).map(Arc::new)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            (Some((config, towers)), seeds.into_iter().map(Some).collect(), fixed)
        }
    };
    let problem = fixed
        .first()
        .map(|f| f.mode())
        .or(config.as_ref().map(|(c, _)| c.mode))
        .unwrap_or(ProblemMode::Fpmt);
    let solvers = if args.solvers.is_empty() {
        default_solvers(axis, problem)
    } else {
        args.solvers.clone()
    };

    let values: Vec<String> = match (axis, &args.values) {
        (Axis::Distribution, None) => Distribution::ALL.iter().map(|d| d.as_str().to_string()).collect(),
        (Axis::Distribution, Some(v)) => v.split(',').map(|s| s.trim().to_string()).collect(),
        (Axis::Weights, None) => {
            let p = args.points.unwrap_or(9);
            (1..=p).map(|s| (s as f64 / (p as f64 + 1.0)).to_string()).collect()
        }
        (Axis::Budgets, None) => {
            let p = args.points.unwrap_or(6).max(2);
            (0..p).map(|s| (s as f64 / (p - 1) as f64).to_string()).collect()
        }
        (Axis::Weights | Axis::Budgets, Some(v)) => parse_f64_list(v)?.iter().map(f64::to_string).collect(),
        (_, Some(v)) => parse_u64_list(v)?.iter().map(u64::to_string).collect(),
        (_, None) => {
            return Err(Error::Param(format!("axis `{}` needs --values", axis.name())));
        }
    };

    let bounds = match axis {
        Axis::Budgets => fixed
            .iter()
            .map(|f| match &f.instance {
                Instance::Mpft(i) => compute_bounds(i),
                Instance::Fpmt(_) => Err(Error::ModeMismatchProblem {
                    solver: "budget sweep",
                    instance: "fpmt",
                }),
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => Vec::new(),
    };

    let mut jobs: Vec<Job> = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    for value in &values {
        // Structural axes: one generated instance per seed, shared by solvers.
        let generated: Vec<Arc<InstanceFile>> = if axis.structural() {
            let (base, towers) = config.as_ref().expect("structural axes use a config");
            seeds
                .iter()
                .map(|&seed| {
                    let mut c = base.clone();
                    c.seed = seed.expect("config sweeps have seeds");
                    let parse = || -> Result<u32, Error> {
                        value
                            .parse()
                            .map_err(|_| Error::Param(format!("bad value `{value}`")))
                    };
                    match axis {
                        Axis::Tasks => c.n = Some(parse()?),
                        Axis::Participants => c.m = Some(parse()?),
                        Axis::Q => c.q = Some(parse()?),
                        Axis::Distribution => {
                            c.distribution = Distribution::ALL
                                .into_iter()
                                .find(|d| d.as_str() == value)
                                .ok_or_else(|| Error::Param(format!("unknown distribution `{value}`")))?
                        }
                        _ => unreachable!(),
                    }
                    c.validate()?;
                    InstanceFile::generate(&c, towers.as_deref()).map(Arc::new)
                })
                .collect::<Result<_, _>>()?
        } else {
            fixed.clone()
        };
        for &solver in &solvers {
            let start = jobs.len();
            for (s, &seed) in seeds.iter().enumerate() {
                let mut spec = args.knobs.spec(solver);
                let param = match axis {
                    Axis::K => {
                        spec.k = Some(value.parse().map_err(|_| Error::Param(format!("bad k `{value}`")))?);
                        format!("k={value}")
                    }
                    Axis::Weights => {
                        let k1: f64 = value.parse().expect("validated above");
                        spec.k1 = Some(k1);
                        spec.k2 = Some(1.0 - k1);
                        format!("k1={k1};k2={}", 1.0 - k1)
                    }
                    Axis::Budgets => {
                        let t: f64 = value.parse().expect("validated above");
                        let b = &bounds[s];
                        let budget = match t {
                            t if t <= 0.0 => b.c_min,
                            t if t >= 1.0 => b.c_max,
                            t => b.c_min + t * (b.c_max - b.c_min),
                        };
                        spec.budget = Some(budget);
                        format!("budget={budget}")
                    }
                    _ => spec.k.map(|k| format!("k={k}")).unwrap_or_default(),
                };
                jobs.push(Job {
                    value: value.clone(),
                    seed,
                    param,
                    file: generated[s].clone(),
                    spec,
                });
            }
            blocks.push(Block { jobs: start..jobs.len() });
        }
    }

    let workers = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Param(format!("cannot start workers: {e}")))?;
    let mut results: Vec<Result<RunReport, Error>> =
        pool.install(|| jobs.par_iter().map(|j| run_solver(&j.file, &j.spec)).collect());

    let front = match axis {
        Axis::Weights | Axis::Budgets => non_dominated_flags(&jobs, &results),
        _ => vec![None; jobs.len()],
    };

    emit(SWEEP_CSV_HEADER);
    for block in &blocks {
        let mut cells = Vec::new();
        for idx in block.jobs.clone() {
            let job = &jobs[idx];
            let row = match &results[idx] {
                Ok(r) => Cells::of(r),
                Err(_) => {
                    let failed = std::mem::replace(&mut results[idx], Err(Error::NoCandidates));
                    return Err(failed.unwrap_err());
                }
            };
            emit(&csv_line("run", axis, job, job.seed, &job.param, &row, front[idx]));
            cells.push(row);
        }
        if cells.len() > 1 {
            let first = &jobs[block.jobs.start];
            let same_param = jobs[block.jobs.clone()].iter().all(|j| j.param == first.param);
            let param = if same_param { first.param.as_str() } else { "" };
            let (mean, sd) = Cells::mean_stddev(&cells);
            emit(&csv_line("mean", axis, first, None, param, &mean, None));
            emit(&csv_line("stddev", axis, first, None, param, &sd, None));
        }
    }
    Ok(())
}

/// Per seed and solver, whether each grid point's objective pair is
/// dominated by another grid point of the same sweep.
fn non_dominated_flags(jobs: &[Job], results: &[Result<RunReport, Error>]) -> Vec<Option<bool>> {
    let key = |i: usize| (jobs[i].seed, jobs[i].spec.solver);
    let point = |i: usize| {
        results[i]
            .as_ref()
            .ok()
            .map(|r| (r.objectives.incentive.unwrap_or(0.0), r.objectives.total_distance_m))
    };
    (0..jobs.len())
        .map(|i| {
            let (c, d) = point(i)?;
            let dominated = (0..jobs.len()).filter(|&o| o != i && key(o) == key(i)).any(|o| {
                point(o).is_some_and(|(oc, od)| oc <= c && od <= d && (oc < c || od < d))
            });
            Some(!dominated)
        })
        .collect()
}

#[derive(Default)]
struct Cells {
    accomplished: Option<f64>,
    distance: Option<f64>,
    completion: Option<f64>,
    incentive: Option<f64>,
    runtime: Option<f64>,
}

impl Cells {
    fn of(r: &RunReport) -> Cells {
        Cells {
            accomplished: r.objectives.accomplished.map(|a| a as f64),
            distance: Some(r.objectives.total_distance_m),
            completion: r.objectives.mean_completion_min,
            incentive: r.objectives.incentive,
            runtime: Some(r.runtime_ms),
        }
    }

    /// Mean and sample standard deviation of each column.
    fn mean_stddev(rows: &[Cells]) -> (Cells, Cells) {
        let stat = |f: &dyn Fn(&Cells) -> Option<f64>| -> (Option<f64>, Option<f64>) {
            let Some(xs) = rows.iter().map(f).collect::<Option<Vec<f64>>>() else {
                return (None, None);
            };
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (Some(mean), Some(var.sqrt()))
        };
        let a = stat(&|c| c.accomplished);
        let d = stat(&|c| c.distance);
        let m = stat(&|c| c.completion);
        let i = stat(&|c| c.incentive);
        let r = stat(&|c| c.runtime);
        (
            Cells {
                accomplished: a.0,
                distance: d.0,
                completion: m.0,
                incentive: i.0,
                runtime: r.0,
            },
            Cells {
                accomplished: a.1,
                distance: d.1,
                completion: m.1,
                incentive: i.1,
                runtime: r.1,
            },
        )
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_line(
    row: &str,
    axis: Axis,
    job: &Job,
    seed: Option<u64>,
    param: &str,
    c: &Cells,
    non_dominated: Option<bool>,
) -> String {
    format!(
        "{row},{},{},{},{},{param},{},{},{},{},{},{}",
        axis.name(),
        job.value,
        seed.map(|s| s.to_string()).unwrap_or_default(),
        job.spec.solver,
        cell(c.accomplished),
        cell(c.distance),
        cell(c.completion),
        cell(c.incentive),
        c.runtime.map(|r| format!("{r:.3}")).unwrap_or_default(),
        non_dominated.map(|b| b.to_string()).unwrap_or_default(),
    )
}
