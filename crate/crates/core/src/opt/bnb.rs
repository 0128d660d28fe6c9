//! Depth-first branch-and-bound over LP relaxations.

use serde::{Deserialize, Serialize};

use super::simplex::{simplex_solve, LinearProgram, LpOutcome};
use crate::error::{Error, Result};

/// A relaxation value within this distance of an integer counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Integer variables are exact integers; empty when infeasible.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Relaxations solved.
    pub nodes: usize,
    /// Branching operations performed.
    pub branches: usize,
}

/// Optimal solution with `integer_vars` restricted to integers.
///
/// Branches on the most fractional variable (lowest index on ties), explores
/// the floor child first, and prunes any node whose relaxation bound is not
/// strictly better than the incumbent.
pub fn branch_and_bound(lp: &LinearProgram, integer_vars: &[usize]) -> Result<MilpSolution> {
    branch_and_bound_from(lp, integer_vars, None)
}

/// [`branch_and_bound`] seeded with a known feasible integral point, which
/// only tightens pruning. A start that violates the constraints is rejected.
pub fn branch_and_bound_from(
    lp: &LinearProgram,
    integer_vars: &[usize],
    start: Option<Vec<f64>>,
) -> Result<MilpSolution> {
    lp.validate()?;
    if let Some(&j) = integer_vars.iter().find(|&&j| j >= lp.num_vars()) {
        return Err(Error::Param(format!("integer variable {j} out of range")));
    }
    let mut root = lp.clone();
    for &j in integer_vars {
        let (lo, hi) = root.bounds[j];
        root.bounds[j] = (lo.ceil(), if hi.is_finite() { hi.floor() } else { hi });
    }

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    if let Some(values) = start {
        if values.len() != lp.num_vars() || !lp.is_feasible(&values, 1e-9) {
            return Err(Error::Param("starting point is infeasible".into()));
        }
        if integer_vars.iter().any(|&j| values[j].fract() != 0.0) {
            return Err(Error::Param("starting point is not integral".into()));
        }
        let objective = lp.evaluate(&values);
        incumbent = Some((values, objective));
    }
    let mut nodes = 0usize;
    let mut branches = 0usize;
    let mut stack: Vec<Vec<(f64, f64)>> = vec![root.bounds.clone()];
    let mut node_lp = root;

    while let Some(bounds) = stack.pop() {
        if bounds.iter().any(|&(lo, hi)| lo > hi) {
            continue;
        }
        node_lp.bounds = bounds;
        nodes += 1;
        let (values, objective) = match simplex_solve(&node_lp)? {
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => return Err(Error::Unbounded),
            LpOutcome::Optimal { values, objective } => (values, objective),
        };
        if let Some((_, best)) = &incumbent {
            if objective >= best - 1e-9 * best.abs().max(1.0) {
                continue;
            }
        }

        // Round-off can push a value just outside its node bounds; clamping
        // keeps every branch strictly tighter than its parent.
        let mut values = values;
        for &j in integer_vars {
            let (lo, hi) = node_lp.bounds[j];
            values[j] = values[j].clamp(lo, hi);
        }
        let mut branch_var: Option<(usize, f64)> = None;
        for &j in integer_vars {
            let v = values[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > INTEGRALITY_TOL && branch_var.is_none_or(|(bj, bf)| frac > bf || frac == bf && j < bj)
            {
                branch_var = Some((j, frac));
            }
        }

        match branch_var {
            None => {
                for &j in integer_vars {
                    values[j] = values[j].round();
                }
                let objective = lp.evaluate(&values);
                incumbent = Some((values, objective));
            }
            Some((j, _)) => {
                branches += 1;
                let v = values[j];
                        let mut up = node_lp.bounds.clone();
                up[j].0 = v.ceil();
                let mut down = node_lp.bounds.clone();
                down[j].1 = v.floor();
                // Stack: push the ceil child first so the floor child is explored first.
                stack.push(up);
                stack.push(down);
            }
        }
    }

    Ok(match incumbent {
        Some((values, objective)) => MilpSolution {
            status: MilpStatus::Optimal,
            values,
            objective,
            nodes,
            branches,
        },
        None => MilpSolution {
            status: MilpStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            nodes,
            branches,
        },
    })
}
