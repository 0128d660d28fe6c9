//! Solver dispatch over instance files and the per-run report.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fpmt::{
    assignment_metrics, enumerate_full, enumerate_pruned, exact_oracle, solve_mt_grdpt, solve_mt_mcmf,
    EnumerationOptions, FpmtAssignment, DEFAULT_ROUTE_BUDGET,
};
use crate::mpft::{
    compute_bounds_with_corners, exact_enum_oracle, solve_c_grd_with_bounds, solve_c_ilp_with_bounds,
    solve_w_grd_with_bounds, solve_w_ilp_with_bounds, AllocationMatrix, BoundsWithCorners,
};
use crate::scenario::{instance_to_string, Instance, InstanceFile, ProblemMode};
use crate::tsp::TspSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    MtMcmf,
    MtpMcmf,
    MtGrdpt,
    WIlp,
    CIlp,
    WGrd,
    CGrd,
    Oracle,
}

impl SolverName {
    pub const ALL: [SolverName; 8] = [
        SolverName::MtMcmf,
        SolverName::MtpMcmf,
        SolverName::MtGrdpt,
        SolverName::WIlp,
        SolverName::CIlp,
        SolverName::WGrd,
        SolverName::CGrd,
        SolverName::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverName::MtMcmf => "mt-mcmf",
            SolverName::MtpMcmf => "mtp-mcmf",
            SolverName::MtGrdpt => "mt-grdpt",
            SolverName::WIlp => "w-ilp",
            SolverName::CIlp => "c-ilp",
            SolverName::WGrd => "w-grd",
            SolverName::CGrd => "c-grd",
            SolverName::Oracle => "oracle",
        }
    }

    /// Problem the solver applies to; `None` for the oracle, which has one
    /// variant per problem.
    pub fn mode(self) -> Option<ProblemMode> {
        match self {
            SolverName::MtMcmf | SolverName::MtpMcmf | SolverName::MtGrdpt => Some(ProblemMode::Fpmt),
            SolverName::WIlp | SolverName::CIlp | SolverName::WGrd | SolverName::CGrd => Some(ProblemMode::Mpft),
            SolverName::Oracle => None,
        }
    }
}

impl FromStr for SolverName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Param(format!("unknown solver `{s}`")))
    }
}

impl std::fmt::Display for SolverName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Solver choice plus every knob a solver may read.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub solver: SolverName,
    /// Nearest-task pool size (mtp-mcmf).
    pub k: Option<usize>,
    /// Incentive weight; the distance weight defaults to `1 - k1`.
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub budget: Option<f64>,
    pub tsp: Option<TspSolver>,
    pub route_budget: usize,
    /// Meters per minute; falls back to the instance's config echo.
    pub speed: Option<f64>,
}

impl SolverSpec {
    pub fn new(solver: SolverName) -> Self {
        SolverSpec {
            solver,
            k: None,
            k1: None,
            k2: None,
            budget: None,
            tsp: None,
            route_budget: DEFAULT_ROUTE_BUDGET,
            speed: None,
        }
    }

    fn weights(&self) -> (f64, f64) {
        match (self.k1, self.k2) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, 1.0 - a),
            (None, Some(b)) => (1.0 - b, b),
            (None, None) => (0.5, 0.5),
        }
    }

    fn enumeration(&self) -> EnumerationOptions {
        EnumerationOptions {
            solver: self.tsp,
            route_budget: self.route_budget,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accomplished: Option<usize>,
    pub total_distance_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_completion_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub performer_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incentive: Option<f64>,
    /// Weighted normalized objective (weighted solvers only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalarized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Details {
    Assignment(FpmtAssignment),
    Allocation(AllocationMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: SolverName,
    /// SHA-256 of the instance file's canonical text.
    pub instance_digest: String,
    pub parameters: Map<String, Value>,
    pub objectives: Objectives,
    pub details: Details,
    /// Wall clock; excluded from determinism.
    pub runtime_ms: f64,
}

/// Header of [`RunReport::csv_row`].
pub const REPORT_CSV_HEADER: &str =
    "solver,instance_digest,accomplished,total_distance_m,mean_completion_min,performer_variance,incentive,scalarized,runtime_ms";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl RunReport {
    pub fn csv_row(&self) -> String {
        let o = &self.objectives;
        format!(
            "{},{},{},{},{},{},{},{},{:.3}",
            self.solver,
            self.instance_digest,
            opt(o.accomplished),
            o.total_distance_m,
            opt(o.mean_completion_min),
            opt(o.performer_variance),
            opt(o.incentive),
            opt(o.scalarized),
            self.runtime_ms
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The report with its runtime zeroed, for determinism comparisons.
    pub fn without_runtime(&self) -> RunReport {
        RunReport {
            runtime_ms: 0.0,
            ..self.clone()
        }
    }
}

pub fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn instance_digest(file: &InstanceFile) -> Result<String> {
    Ok(digest_text(&instance_to_string(file)?))
}

/// Runs one solver on an instance file.
pub fn run_solver(file: &InstanceFile, spec: &SolverSpec) -> Result<RunReport> {
    let digest = instance_digest(file)?;
    if let Some(mode) = spec.solver.mode() {
        if mode != file.mode() {
            return Err(Error::ModeMismatchProblem {
                solver: spec.solver.as_str(),
                instance: file.mode().as_str(),
            });
        }
    }
    let start = Instant::now();
    let (parameters, objectives, details) = match &file.instance {
        Instance::Fpmt(inst) => {
            let speed = spec.speed.unwrap_or_else(|| file.speed());
            let mut params = Map::new();
            let a = match spec.solver {
                SolverName::MtMcmf => solve_mt_mcmf(inst, &enumerate_full(inst, &spec.enumeration())?)?,
                SolverName::MtpMcmf => {
                    let k = spec
                        .k
                        .ok_or_else(|| Error::Param("mtp-mcmf needs a pool size k".into()))?;
                    params.insert("k".into(), json!(k));
                    solve_mt_mcmf(inst, &enumerate_pruned(inst, k, &spec.enumeration())?)?
                }
                SolverName::MtGrdpt => solve_mt_grdpt(inst)?,
                SolverName::Oracle => exact_oracle(inst, &enumerate_full(inst, &spec.enumeration())?)?,
                _ => unreachable!("mode checked above"),
            };
            params.insert("quota".into(), json!(inst.quota));
            params.insert("speed".into(), json!(speed));
            let m = assignment_metrics(&a, speed)?;
            let objectives = Objectives {
                accomplished: Some(a.accomplished),
                total_distance_m: a.total_distance,
                mean_completion_min: Some(m.mean_completion_minutes),
                performer_variance: Some(m.performer_variance),
                ..Default::default()
            };
            (params, objectives, Details::Assignment(a))
        }
        Instance::Mpft(inst) => {
            let corners = compute_bounds_with_corners(inst)?;
            let (alloc, params) = solve_mpft(inst, &corners, spec)?;
            let scalarized = params.get("k1").map(|_| {
                let (k1, k2) = spec.weights();
                corners.bounds.scalarize(k1, k2, alloc.incentive, alloc.distance)
            });
            let objectives = Objectives {
                total_distance_m: alloc.distance,
                incentive: Some(alloc.incentive),
                scalarized,
                ..Default::default()
            };
            (params, objectives, Details::Allocation(alloc))
        }
    };
    Ok(RunReport {
        solver: spec.solver,
        instance_digest: digest,
        parameters,
        objectives,
        details,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn solve_mpft(
    inst: &crate::mpft::MpftInstance,
    corners: &BoundsWithCorners,
    spec: &SolverSpec,
) -> Result<(AllocationMatrix, Map<String, Value>)> {
    let mut params = Map::new();
    let (k1, k2) = spec.weights();
    let budget = || spec.budget.ok_or_else(|| Error::Param(format!("{} needs a budget", spec.solver)));
    let weighted = |params: &mut Map<String, Value>| {
        params.insert("k1".into(), json!(k1));
        params.insert("k2".into(), json!(k2));
    };
    let alloc = match spec.solver {
        SolverName::WIlp => {
            weighted(&mut params);
            solve_w_ilp_with_bounds(inst, corners, k1, k2)?
        }
        SolverName::WGrd => {
            weighted(&mut params);
            solve_w_grd_with_bounds(inst, &corners.bounds, k1, k2)?
        }
        SolverName::CIlp => {
            let b = budget()?;
            params.insert("budget".into(), json!(b));
            solve_c_ilp_with_bounds(inst, corners, b)?
        }
        SolverName::CGrd => {
            let b = budget()?;
            params.insert("budget".into(), json!(b));
            solve_c_grd_with_bounds(inst, corners, b)?
        }
        SolverName::Oracle => {
            // Budget given: minimum distance within it. Otherwise: minimum
            // weighted objective.
            let all = exact_enum_oracle(inst, spec.budget)?;
            let best = if let Some(b) = spec.budget {
                params.insert("budget".into(), json!(b));
                all.into_iter().min_by(|a, b| {
                    a.distance.total_cmp(&b.distance).then(a.incentive.total_cmp(&b.incentive))
                })
            } else {
                weighted(&mut params);
                let s = |a: &AllocationMatrix| corners.bounds.scalarize(k1, k2, a.incentive, a.distance);
                all.into_iter().min_by(|a, b| s(a).total_cmp(&s(b)))
            };
            best.ok_or(Error::InfeasibleBudget {
                budget: spec.budget.unwrap_or(f64::NAN),
                c_min: corners.bounds.c_min,
            })?
        }
        _ => unreachable!("mode checked by caller"),
    };
    Ok((alloc, params))
}
