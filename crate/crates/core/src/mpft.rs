//! More participants, few tasks: participants are pooled by working area and
//! each performs one task. An allocation `x[i][j]` sends that many people from
//! area `i` to task `j`; objectives are total incentive and total distance.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{distance, Location};
use crate::opt::{
    branch_and_bound_from, min_cost_flow, FlowNetwork, FlowTarget, LinearProgram, MilpStatus, Relation,
};

/// Desk-scale limits for [`exact_enum_oracle`].
pub const ORACLE_MAX_AREAS: usize = 4;
pub const ORACLE_MAX_TASKS: usize = 4;
pub const ORACLE_MAX_DEMAND: u32 = 3;

/// Relative slack used when an objective value becomes a constraint.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub id: u32,
    /// Reference point distances are measured from.
    pub location: Location,
    /// Registered participants.
    pub participants: u32,
    /// Payment per participant.
    pub incentive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpftTask {
    pub id: u32,
    pub location: Location,
    /// Participants required.
    pub demand: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpftInstance {
    pub areas: Vec<Area>,
    pub tasks: Vec<MpftTask>,
    /// `dist[i][j]`: meters from area `i` to task `j`.
    pub dist: Vec<Vec<f64>>,
}

impl MpftInstance {
    pub fn new(areas: Vec<Area>, tasks: Vec<MpftTask>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let inst = MpftInstance { areas, tasks, dist };
        inst.validate()?;
        Ok(inst)
    }

    /// Distances measured from each area's reference location.
    pub fn from_locations(areas: Vec<Area>, tasks: Vec<MpftTask>) -> Result<Self> {
        let dist = areas
            .iter()
            .map(|a| tasks.iter().map(|t| distance(&a.location, &t.location)).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(areas, tasks, dist)
    }

    pub fn m(&self) -> usize {
        self.areas.len()
    }

    pub fn n(&self) -> usize {
        self.tasks.len()
    }

    pub fn supply(&self) -> u64 {
        self.areas.iter().map(|a| a.participants as u64).sum()
    }

    pub fn total_demand(&self) -> u64 {
        self.tasks.iter().map(|t| t.demand as u64).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.areas.is_empty() || self.tasks.is_empty() {
            return bad("need at least one area and one task".into());
        }
        let mut ids = BTreeSet::new();
        for a in &self.areas {
            if !ids.insert(a.id) {
                return bad(format!("duplicate area id {}", a.id));
            }
            if !(a.incentive.is_finite() && a.incentive > 0.0) {
                return bad(format!("area {} incentive must be positive", a.id));
            }
        }
        ids.clear();
        for t in &self.tasks {
            if !ids.insert(t.id) {
                return bad(format!("duplicate task id {}", t.id));
            }
            if t.demand == 0 {
                return bad(format!("task {} has zero demand", t.id));
            }
        }
        if self.dist.len() != self.m() || self.dist.iter().any(|r| r.len() != self.n()) {
            return bad(format!("distance matrix must be {}x{}", self.m(), self.n()));
        }
        if self.dist.iter().flatten().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("distances must be finite and non-negative".into());
        }
        let mode = self.areas[0].location.mode;
        for l in self
            .areas
            .iter()
            .map(|a| &a.location)
            .chain(self.tasks.iter().map(|t| &t.location))
        {
            l.validate()?;
            if l.mode != mode {
                return Err(Error::ModeMismatch(mode, l.mode));
            }
        }
        if self.supply() < self.total_demand() {
            return Err(Error::Infeasible(format!(
                "areas supply {} participants but tasks demand {}",
                self.supply(),
                self.total_demand()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationMatrix {
    /// `x[i][j]`: participants from area `i` on task `j`.
    pub x: Vec<Vec<u32>>,
    pub incentive: f64,
    pub distance: f64,
}

impl AllocationMatrix {
    /// Wraps counts and computes both objectives.
    pub fn from_counts(instance: &MpftInstance, x: Vec<Vec<u32>>) -> Self {
        let (incentive, distance) = objectives(instance, &x);
        AllocationMatrix { x, incentive, distance }
    }

    /// Checks area capacity, exact demand and stored objectives.
    pub fn check(&self, instance: &MpftInstance) -> Result<()> {
        let fail = |msg: String| Err(Error::Infeasible(msg));
        if self.x.len() != instance.m() || self.x.iter().any(|r| r.len() != instance.n()) {
            return fail("allocation shape does not match instance".into());
        }
        for (row, area) in self.x.iter().zip(&instance.areas) {
            if row.iter().map(|&v| v as u64).sum::<u64>() > area.participants as u64 {
                return fail(format!("area {} over capacity", area.id));
            }
        }
        for (j, task) in instance.tasks.iter().enumerate() {
            if self.x.iter().map(|r| r[j] as u64).sum::<u64>() != task.demand as u64 {
                return fail(format!("task {} demand not met exactly", task.id));
            }
        }
        if objectives(instance, &self.x) != (self.incentive, self.distance) {
            return fail("stored objectives differ from recomputed ones".into());
        }
        Ok(())
    }
}

fn objectives(instance: &MpftInstance, x: &[Vec<u32>]) -> (f64, f64) {
    let mut incentive = 0.0;
    let mut dist = 0.0;
    for (i, row) in x.iter().enumerate() {
        let people: u32 = row.iter().sum();
        incentive += instance.areas[i].incentive * people as f64;
        for (j, &v) in row.iter().enumerate() {
            dist += instance.dist[i][j] * v as f64;
        }
    }
    (incentive, dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBounds {
    pub c_min: f64,
    pub c_max: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl ObjectiveBounds {
    /// `(incentive - c_min) / (c_max - c_min)`, or 0 when the range is empty.
    pub fn scale_incentive(&self, c: f64) -> f64 {
        scaled(c, self.c_min, self.c_max)
    }

    pub fn scale_distance(&self, d: f64) -> f64 {
        scaled(d, self.d_min, self.d_max)
    }

    /// Weighted sum of the normalized objectives.
    pub fn scalarize(&self, k1: f64, k2: f64, incentive: f64, distance: f64) -> f64 {
        k1 * self.scale_incentive(incentive) + k2 * self.scale_distance(distance)
    }

    fn unit_coefficient(&self, k1: f64, k2: f64, incentive: f64, distance: f64) -> f64 {
        let c = if self.c_max > self.c_min {
            k1 * incentive / (self.c_max - self.c_min)
        } else {
            0.0
        };
        let d = if self.d_max > self.d_min {
            k2 * distance / (self.d_max - self.d_min)
        } else {
            0.0
        };
        c + d
    }
}

fn scaled(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Bounds together with the allocations attaining the two corners.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsWithCorners {
    pub bounds: ObjectiveBounds,
    /// Minimum incentive, then minimum distance among those.
    pub min_incentive: AllocationMatrix,
    /// Minimum distance, then minimum incentive among those.
    pub min_distance: AllocationMatrix,
}

/// Transportation problem with per-unit cost `cost(i, j)` solved as a flow.
fn transport(instance: &MpftInstance, cost: impl Fn(usize, usize) -> f64) -> Result<AllocationMatrix> {
    let supply: Vec<u32> = instance.areas.iter().map(|a| a.participants).collect();
    transport_with_supply(instance, &supply, cost)
}

/// As [`transport`], with area `i` able to send at most `supply[i]` units.
fn transport_with_supply(
    instance: &MpftInstance,
    supply: &[u32],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<AllocationMatrix> {
    let (m, n) = (instance.m(), instance.n());
    let sink = m + n + 1;
    let mut net = FlowNetwork::new(m + n + 2, 0, sink)?;
    for (i, &s) in supply.iter().enumerate() {
        net.add_arc(0, 1 + i, s as i64, 0.0)?;
    }
    let mut cells = Vec::with_capacity(m * n);
    for i in 0..m {
        for (j, t) in instance.tasks.iter().enumerate() {
            cells.push(net.add_arc(1 + i, 1 + m + j, t.demand as i64, cost(i, j))?);
        }
    }
    for (j, t) in instance.tasks.iter().enumerate() {
        net.add_arc(1 + m + j, sink, t.demand as i64, 0.0)?;
    }
    let flow = min_cost_flow(&net, FlowTarget::Exactly(instance.total_demand() as i64))?;
    let x = (0..m)
        .map(|i| (0..n).map(|j| flow.arc_flow[cells[i * n + j]] as u32).collect())
        .collect();
    Ok(AllocationMatrix::from_counts(instance, x))
}

/// Which side of a constrained allocation problem carries the per-cell
/// distance; the other carries the per-area incentive.
#[derive(Clone, Copy, PartialEq)]
enum Minimize {
    /// Minimize distance subject to an incentive cap.
    Distance,
    /// Minimize incentive subject to a distance cap.
    Incentive,
}

/// Exact constrained allocation.
///
/// Incentive depends on an allocation only through the area totals `u_i`,
/// and for integral totals the remaining transportation problem has an
/// integral optimum. So only the `m` totals are branched on; the cells stay
/// continuous and a final flow with supplies fixed to the totals recovers an
/// integral allocation that is at least as good on the distance side.
fn constrained_ilp(instance: &MpftInstance, minimize: Minimize, rhs: f64) -> Result<Option<AllocationMatrix>> {
    let (m, n) = (instance.m(), instance.n());
    let c = |i: usize, _j: usize| instance.areas[i].incentive;
    let d = |i: usize, j: usize| instance.dist[i][j];
    let cells = m * n;
    let total = |i: usize| cells + i;

    let mut cell_row = vec![0.0; cells + m];
    let mut area_row = vec![0.0; cells + m];
    for i in 0..m {
        area_row[total(i)] = instance.areas[i].incentive;
        for j in 0..n {
            cell_row[i * n + j] = instance.dist[i][j];
        }
    }
    let (objective, side) = match minimize {
        Minimize::Distance => (cell_row, area_row),
        Minimize::Incentive => (area_row, cell_row),
    };
    let mut lp = LinearProgram::new(objective);
    for i in 0..m {
        let mut row = vec![0.0; cells + m];
        row[i * n..(i + 1) * n].fill(1.0);
        row[total(i)] = -1.0;
        lp.add_constraint(row, Relation::Eq, 0.0);
        lp.bounds[total(i)] = (0.0, instance.areas[i].participants as f64);
    }
    for (j, t) in instance.tasks.iter().enumerate() {
        let mut row = vec![0.0; cells + m];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        lp.add_constraint(row, Relation::Eq, t.demand as f64);
    }
    lp.add_constraint(side, Relation::Le, rhs);

    let start = match minimize {
        Minimize::Distance => lagrangian_start(instance, &d, &c, rhs)?,
        Minimize::Incentive => lagrangian_start(instance, &c, &d, rhs)?,
    };
    let start = start.map(|a| {
        let mut v: Vec<f64> = a.x.iter().flatten().map(|&x| x as f64).collect();
        v.extend(a.x.iter().map(|row| row.iter().sum::<u32>() as f64));
        v
    });
    let totals: Vec<usize> = (0..m).map(total).collect();
    let sol = branch_and_bound_from(&lp, &totals, start)?;
    if sol.status == MilpStatus::Infeasible {
        return Ok(None);
    }
    let supply: Vec<u32> = totals.iter().map(|&t| sol.values[t] as u32).collect();
    transport_with_supply(instance, &supply, d).map(Some)
}

/// Best `side`-feasible allocation among the flow optima of
/// `objective + lambda * side`, bisecting on `lambda`. Gives branch-and-bound
/// a tight incumbent at the cost of a few dozen flow solves.
fn lagrangian_start(
    instance: &MpftInstance,
    objective: &dyn Fn(usize, usize) -> f64,
    side: &dyn Fn(usize, usize) -> f64,
    rhs: f64,
) -> Result<Option<AllocationMatrix>> {
    let (m, n) = (instance.m(), instance.n());
    let total = |a: &AllocationMatrix, f: &dyn Fn(usize, usize) -> f64| -> f64 {
        (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a.x[i][j] as f64 * f(i, j)).sum()
    };
    let mut best: Option<(f64, AllocationMatrix)> = None;
    let mut probe = |lambda: f64| -> Result<bool> {
        let a = transport(instance, |i, j| objective(i, j) + lambda * side(i, j))?;
        let ok = total(&a, side) <= rhs;
        if ok {
            let value = total(&a, objective);
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, a));
            }
        }
        Ok(ok)
    };
    if probe(0.0)? {
        return Ok(best.map(|(_, a)| a));
    }
    let mut hi = 1.0;
    while !probe(hi)? {
        hi *= 4.0;
        if hi > 1e12 {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(best.map(|(_, a)| a))
}

fn with_slack(v: f64) -> f64 {
    v + BOUND_SLACK * v.abs().max(1.0)
}

/// Payoff-table bounds: each objective's minimum, and each objective's value
/// at the other's lexicographic optimum.
pub fn compute_bounds_with_corners(instance: &MpftInstance) -> Result<BoundsWithCorners> {
    instance.validate()?;
    let c = |i: usize, _j: usize| instance.areas[i].incentive;
    let d = |i: usize, j: usize| instance.dist[i][j];
    let c_min = transport(instance, c)?.incentive;
    let d_min = transport(instance, d)?.distance;

    let min_incentive = constrained_ilp(instance, Minimize::Distance, with_slack(c_min))?
        .ok_or_else(|| Error::Infeasible("no allocation attains the minimum incentive".into()))?;
    let min_distance = constrained_ilp(instance, Minimize::Incentive, with_slack(d_min))?
        .ok_or_else(|| Error::Infeasible("no allocation attains the minimum distance".into()))?;
    // Read every bound off a corner allocation so that the corner identities
    // hold bit-for-bit; the flow optima only differ by summation order.
    debug_assert!(min_incentive.incentive <= with_slack(c_min));
    debug_assert!(min_distance.distance <= with_slack(d_min));
    let bounds = ObjectiveBounds {
        c_min: min_incentive.incentive,
        c_max: min_distance.incentive.max(min_incentive.incentive),
        d_min: min_distance.distance,
        d_max: min_incentive.distance.max(min_distance.distance),
    };
    Ok(BoundsWithCorners {
        bounds,
        min_incentive,
        min_distance,
    })
}

pub fn compute_bounds(instance: &MpftInstance) -> Result<ObjectiveBounds> {
    compute_bounds_with_corners(instance).map(|b| b.bounds)
}

fn check_weights(k1: f64, k2: f64) -> Result<()> {
    if !(k1.is_finite() && k2.is_finite() && k1 >= 0.0 && k2 >= 0.0 && k1 + k2 > 0.0) {
        return Err(Error::Param(format!(
            "weights must be non-negative with a positive sum, got ({k1}, {k2})"
        )));
    }
    Ok(())
}

/// Weighted-sum allocation given precomputed bounds.
pub fn solve_w_ilp_with_bounds(
    instance: &MpftInstance,
    corners: &BoundsWithCorners,
    k1: f64,
    k2: f64,
) -> Result<AllocationMatrix> {
    check_weights(k1, k2)?;
    // Pure corners are lexicographic: the other objective breaks ties.
    if k2 == 0.0 {
        return Ok(corners.min_incentive.clone());
    }
    if k1 == 0.0 {
        return Ok(corners.min_distance.clone());
    }
    let b = &corners.bounds;
    transport(instance, |i, j| {
        b.unit_coefficient(k1, k2, instance.areas[i].incentive, instance.dist[i][j])
    })
}

/// Minimizes `k1 * scaled incentive + k2 * scaled distance`.
pub fn solve_w_ilp(instance: &MpftInstance, k1: f64, k2: f64) -> Result<AllocationMatrix> {
    check_weights(k1, k2)?;
    let corners = compute_bounds_with_corners(instance)?;
    solve_w_ilp_with_bounds(instance, &corners, k1, k2)
}

/// Minimum distance with total incentive at most `budget`. At either end of
/// the budget range the lexicographic corner allocation is returned.
pub fn solve_c_ilp_with_bounds(
    instance: &MpftInstance,
    corners: &BoundsWithCorners,
    budget: f64,
) -> Result<AllocationMatrix> {
    let bounds = &corners.bounds;
    check_budget(bounds, budget)?;
    if budget >= bounds.c_max {
        return Ok(corners.min_distance.clone());
    }
    if budget <= with_slack(bounds.c_min) {
        return Ok(corners.min_incentive.clone());
    }
    constrained_ilp(instance, Minimize::Distance, with_slack(budget))?.ok_or(Error::InfeasibleBudget {
        budget,
        c_min: bounds.c_min,
    })
}

pub fn solve_c_ilp(instance: &MpftInstance, budget: f64) -> Result<AllocationMatrix> {
    let corners = compute_bounds_with_corners(instance)?;
    solve_c_ilp_with_bounds(instance, &corners, budget)
}

fn check_budget(bounds: &ObjectiveBounds, budget: f64) -> Result<()> {
    if budget.is_nan() || budget < bounds.c_min - BOUND_SLACK * bounds.c_min.abs().max(1.0) {
        return Err(Error::InfeasibleBudget {
            budget,
            c_min: bounds.c_min,
        });
    }
    Ok(())
}

/// Assigns one unit at a time to the cheapest open (area, task) cell under
/// `cost`, ties by lower area then lower task.
fn unit_greedy(instance: &MpftInstance, cost: impl Fn(usize, usize) -> f64) -> AllocationMatrix {
    let (m, n) = (instance.m(), instance.n());
    let mut cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    // Stable sort keeps (area, task) order among equal costs.
    cells.sort_by(|a, b| cost(a.0, a.1).total_cmp(&cost(b.0, b.1)));
    let mut spare: Vec<u32> = instance.areas.iter().map(|a| a.participants).collect();
    let mut need: Vec<u32> = instance.tasks.iter().map(|t| t.demand).collect();
    let mut x = vec![vec![0u32; n]; m];
    // Taking a cell repeatedly until it closes equals unit-at-a-time picking,
    // because the cheapest open cell stays cheapest while it is open.
    for (i, j) in cells {
        let units = spare[i].min(need[j]);
        x[i][j] += units;
        spare[i] -= units;
        need[j] -= units;
    }
    debug_assert!(need.iter().all(|&v| v == 0));
    AllocationMatrix::from_counts(instance, x)
}

pub fn solve_w_grd_with_bounds(
    instance: &MpftInstance,
    bounds: &ObjectiveBounds,
    k1: f64,
    k2: f64,
) -> Result<AllocationMatrix> {
    check_weights(k1, k2)?;
    Ok(unit_greedy(instance, |i, j| {
        bounds.unit_coefficient(k1, k2, instance.areas[i].incentive, instance.dist[i][j])
    }))
}

/// Greedy on the per-unit weighted coefficient.
pub fn solve_w_grd(instance: &MpftInstance, k1: f64, k2: f64) -> Result<AllocationMatrix> {
    check_weights(k1, k2)?;
    let bounds = compute_bounds(instance)?;
    solve_w_grd_with_bounds(instance, &bounds, k1, k2)
}

pub fn solve_c_grd_with_bounds(
    instance: &MpftInstance,
    corners: &BoundsWithCorners,
    budget: f64,
) -> Result<AllocationMatrix> {
    check_budget(&corners.bounds, budget)?;
    let (m, n) = (instance.m(), instance.n());
    let inc = |i: usize| instance.areas[i].incentive;
    let mut alloc = unit_greedy(instance, |i, j| instance.dist[i][j]);
    let limit = with_slack(budget);
    let mut spare: Vec<u32> = instance
        .areas
        .iter()
        .zip(&alloc.x)
        .map(|(a, row)| a.participants - row.iter().sum::<u32>())
        .collect();

    while alloc.incentive > limit {
        // Best move of one unit (i, j) -> (k, j) with C_k < C_i: largest
        // incentive saving per added meter; free or shortening moves first.
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for i in 0..m {
            for j in 0..n {
                if alloc.x[i][j] == 0 {
                    continue;
                }
                for k in 0..m {
                    if spare[k] == 0 || inc(k) >= inc(i) {
                        continue;
                    }
                    let saving = inc(i) - inc(k);
                    let added = instance.dist[k][j] - instance.dist[i][j];
                    let ratio = if added > 0.0 { saving / added } else { f64::INFINITY };
                    if best.is_none_or(|(r, ..)| ratio > r) {
                        best = Some((ratio, i, j, k));
                    }
                }
            }
        }
        let Some((_, i, j, k)) = best else {
            let fallback = &corners.min_incentive;
            return if fallback.incentive <= limit {
                Ok(fallback.clone())
            } else {
                Err(Error::InfeasibleBudget {
                    budget,
                    c_min: corners.bounds.c_min,
                })
            };
        };
        alloc.x[i][j] -= 1;
        alloc.x[k][j] += 1;
        spare[i] += 1;
        spare[k] -= 1;
        alloc = AllocationMatrix::from_counts(instance, std::mem::take(&mut alloc.x));
    }
    Ok(alloc)
}

/// Min-distance greedy, then unit moves to cheaper areas until within budget.
pub fn solve_c_grd(instance: &MpftInstance, budget: f64) -> Result<AllocationMatrix> {
    let corners = compute_bounds_with_corners(instance)?;
    solve_c_grd_with_bounds(instance, &corners, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Weights { k1: f64, k2: f64 },
    Budget { budget: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub incentive: f64,
    pub distance: f64,
    pub parameter: SweepParameter,
    pub allocation: AllocationMatrix,
}

impl ParetoPoint {
    /// No worse in both objectives and better in one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.incentive <= other.incentive
            && self.distance <= other.distance
            && (self.incentive < other.incentive || self.distance < other.distance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    Weights(Vec<(f64, f64)>),
    Budgets(Vec<f64>),
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        match self {
            SweepGrid::Weights(w) => w.len(),
            SweepGrid::Budgets(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `points` weight pairs `(k, 1 - k)` with `k` evenly spaced inside (0, 1).
    pub fn interior_weights(points: usize) -> Self {
        let step = 1.0 / (points as f64 + 1.0);
        SweepGrid::Weights(
            (1..=points)
                .map(|s| {
                    let k1 = s as f64 * step;
                    (k1, 1.0 - k1)
                })
                .collect(),
        )
    }

    /// `points` budgets evenly spaced from `c_min` to `c_max` inclusive.
    pub fn budget_range(bounds: &ObjectiveBounds, points: usize) -> Self {
        let span = bounds.c_max - bounds.c_min;
        SweepGrid::Budgets(
            (0..points)
                .map(|s| match (s, points) {
                    (0, _) => bounds.c_min,
                    (s, p) if s + 1 == p => bounds.c_max,
                    (s, p) => bounds.c_min + span * s as f64 / (p - 1) as f64,
                })
                .collect(),
        )
    }
}

/// One exact solve per grid point, in grid order.
pub fn sweep_points(instance: &MpftInstance, grid: &SweepGrid) -> Result<Vec<ParetoPoint>> {
    if grid.is_empty() {
        return Err(Error::Param("sweep grid is empty".into()));
    }
    if let SweepGrid::Weights(w) = grid {
        if let Some(&(k1, k2)) = w.iter().find(|(k1, k2)| ((k1 + k2) - 1.0).abs() > 1e-9) {
            return Err(Error::Param(format!("weights ({k1}, {k2}) do not sum to 1")));
        }
    }
    let corners = compute_bounds_with_corners(instance)?;
    let params: Vec<SweepParameter> = match grid {
        SweepGrid::Weights(w) => w.iter().map(|&(k1, k2)| SweepParameter::Weights { k1, k2 }).collect(),
        SweepGrid::Budgets(b) => b.iter().map(|&budget| SweepParameter::Budget { budget }).collect(),
    };
    params
        .into_par_iter()
        .map(|parameter| {
            let allocation = match parameter {
                SweepParameter::Weights { k1, k2 } => solve_w_ilp_with_bounds(instance, &corners, k1, k2)?,
                SweepParameter::Budget { budget } => {
                    solve_c_ilp_with_bounds(instance, &corners, budget)?
                }
            };
            Ok(ParetoPoint {
                incentive: allocation.incentive,
                distance: allocation.distance,
                parameter,
                allocation,
            })
        })
        .collect()
}

/// Drops dominated points and repeated objective pairs (first kept), then
/// sorts by incentive.
pub fn non_dominated(points: Vec<ParetoPoint>) -> Vec<ParetoPoint> {
    let mut keep: Vec<ParetoPoint> = Vec::with_capacity(points.len());
    for (idx, p) in points.iter().enumerate() {
        let dominated = points.iter().any(|o| o.dominates(p));
        let repeated = points[..idx]
            .iter()
            .any(|o| o.incentive == p.incentive && o.distance == p.distance);
        if !dominated && !repeated {
            keep.push(p.clone());
        }
    }
    keep.sort_by(|a, b| a.incentive.total_cmp(&b.incentive).then(a.distance.total_cmp(&b.distance)));
    keep
}

pub fn pareto_sweep(instance: &MpftInstance, grid: &SweepGrid) -> Result<Vec<ParetoPoint>> {
    sweep_points(instance, grid).map(non_dominated)
}

/// Every feasible allocation, optionally restricted to incentive <= budget.
pub fn exact_enum_oracle(instance: &MpftInstance, budget: Option<f64>) -> Result<Vec<AllocationMatrix>> {
    instance.validate()?;
    let (m, n) = (instance.m(), instance.n());
    let limit = |what, got, limit| Err(Error::SizeLimit { what, got, limit });
    if m > ORACLE_MAX_AREAS {
        return limit("oracle area count", m, ORACLE_MAX_AREAS);
    }
    if n > ORACLE_MAX_TASKS {
        return limit("oracle task count", n, ORACLE_MAX_TASKS);
    }
    if let Some(t) = instance.tasks.iter().find(|t| t.demand > ORACLE_MAX_DEMAND) {
        return limit("oracle task demand", t.demand as usize, ORACLE_MAX_DEMAND as usize);
    }

    // Fill column by column, area by area.
    fn fill(
        inst: &MpftInstance,
        i: usize,
        j: usize,
        left: u32,
        spare: &mut [u32],
        x: &mut Vec<Vec<u32>>,
        out: &mut Vec<AllocationMatrix>,
    ) {
        let (m, n) = (inst.m(), inst.n());
        if j == n {
            out.push(AllocationMatrix::from_counts(inst, x.clone()));
            return;
        }
        if i + 1 == m {
            if left <= spare[i] {
                x[i][j] = left;
                spare[i] -= left;
                let next = inst.tasks.get(j + 1).map_or(0, |t| t.demand);
                fill(inst, 0, j + 1, next, spare, x, out);
                spare[i] += left;
                x[i][j] = 0;
            }
            return;
        }
        for v in 0..=left.min(spare[i]) {
            x[i][j] = v;
            spare[i] -= v;
            fill(inst, i + 1, j, left - v, spare, x, out);
            spare[i] += v;
        }
        x[i][j] = 0;
    }

    let mut out = Vec::new();
    let mut spare: Vec<u32> = instance.areas.iter().map(|a| a.participants).collect();
    let mut x = vec![vec![0u32; n]; m];
    fill(instance, 0, 0, instance.tasks[0].demand, &mut spare, &mut x, &mut out);
    if let Some(b) = budget {
        out.retain(|a| a.incentive <= with_slack(b));
    }
    Ok(out)
}
