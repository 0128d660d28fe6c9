//! Few participants, more tasks: every selected participant performs exactly
//! `q` tasks, each task accepts at most `p_j` performers. Objectives are the
//! number of accomplished tasks (maximize) and the total travel distance
//! (minimize).
//!
//! Candidate task sets are enumerated per participant (all `C(n, q)` sets, or
//! the `C(k, q)` sets drawn from the participant's `k` nearest tasks), costed
//! by an open-path route, and wired into a four-layer flow network:
//! source -> participant -> task set -> task -> sink. Blocks of `q` units are
//! then pushed through the cheapest feasible participant/task-set pair until
//! none remains.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{build_distance_matrix, DistanceMatrix, Location};
use crate::opt::{Flow, FlowNetwork};
use crate::tsp::{christofides, held_karp, path_length, TspSolver};

/// Default cap on the number of routes an enumeration may compute.
pub const DEFAULT_ROUTE_BUDGET: usize = 1_000_000;

/// Desk-scale limits for [`exact_oracle`].
pub const ORACLE_MAX_PARTICIPANTS: usize = 5;
pub const ORACLE_MAX_CANDIDATES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: u32,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpmtTask {
    pub id: u32,
    pub location: Location,
    /// Maximum number of performers.
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpmtInstance {
    pub quota: u32,
    pub participants: Vec<Participant>,
    pub tasks: Vec<FpmtTask>,
}

impl FpmtInstance {
    pub fn new(participants: Vec<Participant>, tasks: Vec<FpmtTask>, quota: u32) -> Result<Self> {
        let inst = FpmtInstance {
            quota,
            participants,
            tasks,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.quota == 0 {
            return bad("quota q must be at least 1".into());
        }
        if self.participants.is_empty() {
            return bad("no participants".into());
        }
        if (self.quota as usize) > self.tasks.len() {
            return bad(format!(
                "quota {} exceeds task count {}",
                self.quota,
                self.tasks.len()
            ));
        }
        if let Some(t) = self.tasks.iter().find(|t| t.capacity == 0) {
            return bad(format!("task {} has zero capacity", t.id));
        }
        if let Some(id) = first_duplicate(self.participants.iter().map(|p| p.id)) {
            return bad(format!("duplicate participant id {id}"));
        }
        if let Some(id) = first_duplicate(self.tasks.iter().map(|t| t.id)) {
            return bad(format!("duplicate task id {id}"));
        }
        let locs = self.locations();
        for l in &locs {
            l.validate()?;
        }
        if let Some(l) = locs.iter().find(|l| l.mode != locs[0].mode) {
            return Err(Error::ModeMismatch(locs[0].mode, l.mode));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.participants.len()
    }

    pub fn n(&self) -> usize {
        self.tasks.len()
    }

    pub fn q(&self) -> usize {
        self.quota as usize
    }

    /// Participants first, then tasks.
    fn locations(&self) -> Vec<Location> {
        self.participants
            .iter()
            .map(|p| p.location)
            .chain(self.tasks.iter().map(|t| t.location))
            .collect()
    }

    /// Distances over participants (indices `0..m`) followed by tasks
    /// (indices `m..m+n`).
    pub fn distance_matrix(&self) -> Result<DistanceMatrix> {
        build_distance_matrix(&self.locations())
    }
}

fn first_duplicate(ids: impl Iterator<Item = u32>) -> Option<u32> {
    let mut seen = std::collections::BTreeSet::new();
    ids.into_iter().find(|&id| !seen.insert(id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    /// Route solver; `None` picks exact when `q + 1` nodes are admissible.
    pub solver: Option<TspSolver>,
    pub route_budget: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            solver: None,
            route_budget: DEFAULT_ROUTE_BUDGET,
        }
    }
}

/// One participant's candidate task sets, stored flat: candidate `c` owns
/// `tasks[c*q..(c+1)*q]` (sorted task indices) and `routes[c*q..(c+1)*q]`
/// (the same tasks in visiting order).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSets {
    quota: usize,
    tasks: Vec<u32>,
    routes: Vec<u32>,
    costs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<'a> {
    pub tasks: &'a [u32],
    pub route: &'a [u32],
    pub cost: f64,
}

impl CandidateSets {
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn get(&self, c: usize) -> Candidate<'_> {
        let q = self.quota;
        Candidate {
            tasks: &self.tasks[c * q..(c + 1) * q],
            route: &self.routes[c * q..(c + 1) * q],
            cost: self.costs[c],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Candidate<'_>> + '_ {
        (0..self.len()).map(move |c| self.get(c))
    }
}

/// Candidate task sets with precomputed routes, per participant.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSetFamily {
    quota: usize,
    solver: TspSolver,
    per_participant: Vec<CandidateSets>,
}

impl TaskSetFamily {
    pub fn quota(&self) -> usize {
        self.quota
    }

    pub fn solver(&self) -> TspSolver {
        self.solver
    }

    pub fn participants(&self) -> &[CandidateSets] {
        &self.per_participant
    }

    pub fn candidates(&self, participant: usize) -> &CandidateSets {
        &self.per_participant[participant]
    }

    pub fn total_candidates(&self) -> usize {
        self.per_participant.iter().map(|c| c.len()).sum()
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Calls `f` with every sorted `q`-subset of `pool`, in lexicographic order.
fn for_each_subset(pool: &[u32], q: usize, mut f: impl FnMut(&[u32])) {
    let n = pool.len();
    if q > n {
        return;
    }
    let mut idx: Vec<usize> = (0..q).collect();
    let mut subset: Vec<u32> = vec![0; q];
    loop {
        for (s, &i) in subset.iter_mut().zip(&idx) {
            *s = pool[i];
        }
        f(&subset);
        // Advance the rightmost index that can still move.
        let mut i = q;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - q + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..q {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn enumerate_from_pools(
    instance: &FpmtInstance,
    pools: Vec<Vec<u32>>,
    options: &EnumerationOptions,
) -> Result<TaskSetFamily> {
    instance.validate()?;
    let q = instance.q();
    let m = instance.m();
    let routes: u128 = pools
        .iter()
        .map(|p| binomial(p.len(), q))
        .fold(0u128, |a, b| a.saturating_add(b));
    if routes > options.route_budget as u128 {
        return Err(Error::EnumerationBudget {
            routes,
            budget: options.route_budget,
        });
    }
    let solver = options.solver.unwrap_or_else(|| TspSolver::default_for(q + 1));
    if solver == TspSolver::Exact && q + 1 > crate::tsp::EXACT_NODE_LIMIT {
        return Err(Error::SizeLimit {
            what: "exact route solver node count",
            got: q + 1,
            limit: crate::tsp::EXACT_NODE_LIMIT,
        });
    }
    let dist = instance.distance_matrix()?;

    let per_participant: Vec<CandidateSets> = pools
        .into_par_iter()
        .enumerate()
        .map(|(p, pool)| {
            let count = binomial(pool.len(), q) as usize;
            let mut out = CandidateSets {
                quota: q,
                tasks: Vec::with_capacity(count * q),
                routes: Vec::with_capacity(count * q),
                costs: Vec::with_capacity(count),
            };
            let mut scratch = Vec::new();
            let mut nodes = vec![p; q + 1];
            for_each_subset(&pool, q, |set| {
                for (slot, &t) in nodes[1..].iter_mut().zip(set) {
                    *slot = m + t as usize;
                }
                let d = |a: usize, b: usize| dist.get(nodes[a], nodes[b]);
                let order = match solver {
                    TspSolver::Exact => held_karp(q + 1, 0, d, false, &mut scratch),
                    TspSolver::Christofides => christofides(q + 1, 0, d),
                };
                out.costs.push(path_length(&order, d));
                out.tasks.extend_from_slice(set);
                out.routes.extend(order[1..].iter().map(|&local| set[local - 1]));
            });
            debug_assert_eq!(out.costs.len(), count);
            out
        })
        .collect();
    debug_assert_eq!(per_participant.len(), m);

    Ok(TaskSetFamily {
        quota: q,
        solver,
        per_participant,
    })
}

/// Every `q`-subset of the tasks for every participant.
pub fn enumerate_full(instance: &FpmtInstance, options: &EnumerationOptions) -> Result<TaskSetFamily> {
    let all: Vec<u32> = (0..instance.n() as u32).collect();
    enumerate_from_pools(instance, vec![all; instance.m()], options)
}

/// Indices of the `k` tasks nearest to `participant` (ties by task index),
/// returned in ascending index order.
pub fn nearest_tasks(dist: &DistanceMatrix, m: usize, n: usize, participant: usize, k: usize) -> Vec<u32> {
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| {
        dist.get(participant, m + a as usize)
            .total_cmp(&dist.get(participant, m + b as usize))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Every `q`-subset of each participant's `k` nearest tasks.
pub fn enumerate_pruned(
    instance: &FpmtInstance,
    k: usize,
    options: &EnumerationOptions,
) -> Result<TaskSetFamily> {
    instance.validate()?;
    if k < instance.q() || k > instance.n() {
        return Err(Error::Param(format!(
            "k = {k} must satisfy q = {} <= k <= n = {}",
            instance.q(),
            instance.n()
        )));
    }
    let dist = instance.distance_matrix()?;
    let (m, n) = (instance.m(), instance.n());
    let pools = (0..m).map(|p| nearest_tasks(&dist, m, n, p, k)).collect();
    enumerate_from_pools(instance, pools, options)
}

/// Flow network of an instance and family, with arc indices for each layer.
#[derive(Debug, Clone)]
pub struct FpmtNetwork {
    pub network: FlowNetwork,
    /// Source -> participant, per participant.
    pub source_arcs: Vec<usize>,
    /// Participant -> task set, per participant per candidate.
    pub candidate_arcs: Vec<Vec<usize>>,
    /// Distinct task set id, per participant per candidate.
    pub candidate_sets: Vec<Vec<usize>>,
    /// Distinct task sets, lexicographically ordered.
    pub sets: Vec<Vec<u32>>,
    /// Task set -> task arcs, per distinct set, in member order.
    pub set_arcs: Vec<Vec<usize>>,
    /// Task -> sink, per task.
    pub sink_arcs: Vec<usize>,
}

/// Builds the source/participant/task-set/task/sink network.
///
/// Task-set nodes are shared between participants, so a set can carry flow
/// from at most one participant: each set -> task arc has capacity 1. The
/// participant -> set arc has capacity `q` and per-unit cost
/// `route cost / q`, so a full `q`-unit block costs exactly the route length.
pub fn build_network(instance: &FpmtInstance, family: &TaskSetFamily) -> Result<FpmtNetwork> {
    instance.validate()?;
    let (m, n, q) = (instance.m(), instance.n(), instance.q());
    if family.per_participant.len() != m || family.quota != q {
        return Err(Error::Param("task-set family does not match the instance".into()));
    }

    let mut set_index: BTreeMap<&[u32], usize> = BTreeMap::new();
    for cands in &family.per_participant {
        for c in cands.iter() {
            if c.tasks.iter().any(|&t| t as usize >= n) {
                return Err(Error::Param("candidate references a missing task".into()));
            }
            set_index.entry(c.tasks).or_insert(0);
        }
    }
    for (i, v) in set_index.values_mut().enumerate() {
        *v = i;
    }
    let s = set_index.len();
    let source = 0;
    let participant_node = |p: usize| 1 + p;
    let set_node = |i: usize| 1 + m + i;
    let task_node = |t: usize| 1 + m + s + t;
    let sink = 1 + m + s + n;
    let mut net = FlowNetwork::new(sink + 1, source, sink)?;

    let q_cap = q as i64;
    let source_arcs = (0..m)
        .map(|p| net.add_arc(source, participant_node(p), q_cap, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let mut candidate_arcs = Vec::with_capacity(m);
    let mut candidate_sets = Vec::with_capacity(m);
    for (p, cands) in family.per_participant.iter().enumerate() {
        let mut arcs = Vec::with_capacity(cands.len());
        let mut ids = Vec::with_capacity(cands.len());
        for c in cands.iter() {
            let id = set_index[c.tasks];
            arcs.push(net.add_arc(participant_node(p), set_node(id), q_cap, c.cost / q as f64)?);
            ids.push(id);
        }
        candidate_arcs.push(arcs);
        candidate_sets.push(ids);
    }
    let sets: Vec<Vec<u32>> = set_index.keys().map(|k| k.to_vec()).collect();
    let mut set_arcs = Vec::with_capacity(s);
    for (i, set) in sets.iter().enumerate() {
        let arcs = set
            .iter()
            .map(|&t| net.add_arc(set_node(i), task_node(t as usize), 1, 0.0))
            .collect::<Result<Vec<_>>>()?;
        set_arcs.push(arcs);
    }
    let sink_arcs = instance
        .tasks
        .iter()
        .enumerate()
        .map(|(t, task)| net.add_arc(task_node(t), sink, task.capacity as i64, 0.0))
        .collect::<Result<Vec<_>>>()?;

    Ok(FpmtNetwork {
        network: net,
        source_arcs,
        candidate_arcs,
        candidate_sets,
        sets,
        set_arcs,
        sink_arcs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRoute {
    pub participant: u32,
    /// Task ids in visiting order; empty when unassigned.
    pub tasks: Vec<u32>,
    pub distance: f64,
    /// False when the participant holds fewer than `q` tasks.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpmtAssignment {
    pub quota: u32,
    /// One entry per participant, in instance order.
    pub routes: Vec<ParticipantRoute>,
    /// Performer ids per task, in instance order; ids ascending.
    pub performers: Vec<Vec<u32>>,
    pub accomplished: usize,
    pub total_distance: f64,
}

impl FpmtAssignment {
    /// Assembles an assignment from per-participant task routes (task
    /// indices), computing distances and totals.
    fn from_routes(instance: &FpmtInstance, dist: &DistanceMatrix, routes: Vec<Vec<u32>>) -> Self {
        let m = instance.m();
        let q = instance.q();
        let mut performers = vec![Vec::new(); instance.n()];
        let routes: Vec<ParticipantRoute> = routes
            .into_iter()
            .enumerate()
            .map(|(p, tasks)| {
                let mut nodes = vec![p];
                nodes.extend(tasks.iter().map(|&t| m + t as usize));
                let distance = path_length(&nodes, |a, b| dist.get(a, b));
                for &t in &tasks {
                    performers[t as usize].push(instance.participants[p].id);
                }
                ParticipantRoute {
                    participant: instance.participants[p].id,
                    complete: tasks.len() == q,
                    tasks: tasks.iter().map(|&t| instance.tasks[t as usize].id).collect(),
                    distance,
                }
            })
            .collect();
        for list in &mut performers {
            list.sort_unstable();
        }
        let mut a = FpmtAssignment {
            quota: instance.quota,
            routes,
            performers,
            accomplished: 0,
            total_distance: 0.0,
        };
        (a.accomplished, a.total_distance) = a.recompute_totals();
        a
    }

    /// Accomplished task count and total distance summed over routes.
    pub fn recompute_totals(&self) -> (usize, f64) {
        let accomplished = self.routes.iter().map(|r| r.tasks.len()).sum();
        let distance = self.routes.iter().map(|r| r.distance).sum();
        (accomplished, distance)
    }

    pub fn assigned_participants(&self) -> usize {
        self.routes.iter().filter(|r| r.complete).count()
    }

    /// Checks per-participant quota, per-task capacity, totals and, when
    /// `unique_sets` is set, that no task set serves two participants.
    pub fn check(&self, instance: &FpmtInstance, unique_sets: bool) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInstance(msg));
        let q = instance.q();
        if self.routes.len() != instance.m() || self.performers.len() != instance.n() {
            return fail("assignment shape does not match instance".into());
        }
        let index: BTreeMap<u32, usize> =
            instance.tasks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
        let mut load = vec![0usize; instance.n()];
        let mut seen_sets = std::collections::BTreeSet::new();
        for r in &self.routes {
            if r.tasks.len() > q || r.complete != (r.tasks.len() == q) {
                return fail(format!("participant {} has {} tasks", r.participant, r.tasks.len()));
            }
            let mut set = Vec::with_capacity(r.tasks.len());
            for t in &r.tasks {
                let Some(&i) = index.get(t) else {
                    return fail(format!("unknown task {t}"));
                };
                load[i] += 1;
                set.push(i);
            }
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return fail(format!("participant {} repeats a task", r.participant));
            }
            if unique_sets && !set.is_empty() && !seen_sets.insert(set) {
                return fail(format!("task set of participant {} reused", r.participant));
            }
        }
        for (i, task) in instance.tasks.iter().enumerate() {
            if load[i] > task.capacity as usize || self.performers[i].len() != load[i] {
                return fail(format!("task {} capacity or performer list violated", task.id));
            }
        }
        if self.recompute_totals() != (self.accomplished, self.total_distance) {
            return fail("stored totals differ from recomputed totals".into());
        }
        Ok(())
    }
}

/// Result of the block-augmentation solver, with the flow it induces.
#[derive(Debug, Clone)]
pub struct McmfOutcome {
    pub assignment: FpmtAssignment,
    pub network: FpmtNetwork,
    pub flow: Flow,
}

/// Block augmentation: repeatedly take the cheapest feasible
/// (participant, candidate set) pair and push `q` units through it.
///
/// A pair is feasible while the participant is unassigned, the set has not
/// been taken by another participant and every member task has residual
/// sink capacity. Ties go to the lower participant id, then the
/// lexicographically smaller set.
pub fn solve_mt_mcmf_with_flow(instance: &FpmtInstance, family: &TaskSetFamily) -> Result<McmfOutcome> {
    if family.total_candidates() == 0 {
        return Err(Error::NoCandidates);
    }
    let fnet = build_network(instance, family)?;
    let dist = instance.distance_matrix()?;
    let (m, q) = (instance.m(), instance.q());

    let mut order: Vec<(usize, usize)> = family
        .per_participant
        .iter()
        .enumerate()
        .flat_map(|(p, c)| (0..c.len()).map(move |i| (p, i)))
        .collect();
    order.sort_unstable_by(|&(pa, ca), &(pb, cb)| {
        let a = family.per_participant[pa].get(ca);
        let b = family.per_participant[pb].get(cb);
        a.cost
            .total_cmp(&b.cost)
            .then(instance.participants[pa].id.cmp(&instance.participants[pb].id))
            .then(a.tasks.cmp(b.tasks))
    });

    let mut flow = Flow::zero(&fnet.network);
    let mut residual: Vec<u32> = instance.tasks.iter().map(|t| t.capacity).collect();
    let mut set_used = vec![false; fnet.sets.len()];
    let mut routes: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut assigned = 0usize;

    for (p, c) in order {
        if assigned == m {
            break;
        }
        if !routes[p].is_empty() {
            continue;
        }
        let set_id = fnet.candidate_sets[p][c];
        let cand = family.per_participant[p].get(c);
        if set_used[set_id] || cand.tasks.iter().any(|&t| residual[t as usize] == 0) {
            continue;
        }
        set_used[set_id] = true;
        flow.arc_flow[fnet.source_arcs[p]] += q as i64;
        flow.arc_flow[fnet.candidate_arcs[p][c]] += q as i64;
        for (&t, &arc) in cand.tasks.iter().zip(&fnet.set_arcs[set_id]) {
            residual[t as usize] -= 1;
            flow.arc_flow[arc] += 1;
            flow.arc_flow[fnet.sink_arcs[t as usize]] += 1;
        }
        routes[p] = cand.route.to_vec();
        assigned += 1;
    }
    flow.recompute(&fnet.network);
    let assignment = FpmtAssignment::from_routes(instance, &dist, routes);
    Ok(McmfOutcome {
        assignment,
        network: fnet,
        flow,
    })
}

pub fn solve_mt_mcmf(instance: &FpmtInstance, family: &TaskSetFamily) -> Result<FpmtAssignment> {
    solve_mt_mcmf_with_flow(instance, family).map(|o| o.assignment)
}

/// Block augmentation over each participant's `k` nearest tasks.
pub fn solve_mtp_mcmf(
    instance: &FpmtInstance,
    k: usize,
    options: &EnumerationOptions,
) -> Result<FpmtAssignment> {
    let family = enumerate_pruned(instance, k, options)?;
    solve_mt_mcmf(instance, &family)
}

/// Nearest-task greedy: participants in id order each walk to the nearest
/// task with remaining capacity, `q` times, starting from their own location.
pub fn solve_mt_grdpt(instance: &FpmtInstance) -> Result<FpmtAssignment> {
    instance.validate()?;
    let dist = instance.distance_matrix()?;
    let (m, n, q) = (instance.m(), instance.n(), instance.q());
    let mut residual: Vec<u32> = instance.tasks.iter().map(|t| t.capacity).collect();
    let mut by_id: Vec<usize> = (0..m).collect();
    by_id.sort_by_key(|&p| instance.participants[p].id);
    let mut routes = vec![Vec::new(); m];
    for p in by_id {
        let mut here = p;
        let mut route: Vec<u32> = Vec::with_capacity(q);
        for _ in 0..q {
            let next = (0..n)
                .filter(|&t| residual[t] > 0 && !route.contains(&(t as u32)))
                .min_by(|&a, &b| dist.get(here, m + a).total_cmp(&dist.get(here, m + b)).then(a.cmp(&b)));
            let Some(t) = next else {
                break;
            };
            residual[t] -= 1;
            route.push(t as u32);
            here = m + t;
        }
        routes[p] = route;
    }
    Ok(FpmtAssignment::from_routes(instance, &dist, routes))
}

/// Exhaustive search over assignments of participants to candidate sets,
/// maximizing accomplished tasks and then minimizing total distance.
pub fn exact_oracle(instance: &FpmtInstance, family: &TaskSetFamily) -> Result<FpmtAssignment> {
    instance.validate()?;
    let m = instance.m();
    if m > ORACLE_MAX_PARTICIPANTS {
        return Err(Error::SizeLimit {
            what: "oracle participant count",
            got: m,
            limit: ORACLE_MAX_PARTICIPANTS,
        });
    }
    if family.per_participant.len() != m {
        return Err(Error::Param("task-set family does not match the instance".into()));
    }
    if let Some(c) = family.per_participant.iter().find(|c| c.len() > ORACLE_MAX_CANDIDATES) {
        return Err(Error::SizeLimit {
            what: "oracle candidates per participant",
            got: c.len(),
            limit: ORACLE_MAX_CANDIDATES,
        });
    }

    struct Search<'a> {
        family: &'a TaskSetFamily,
        residual: Vec<u32>,
        used: Vec<&'a [u32]>,
        choice: Vec<Option<usize>>,
        best: Option<(usize, f64, Vec<Option<usize>>)>,
    }

    impl<'a> Search<'a> {
        fn run(&mut self, p: usize, count: usize, distance: f64) {
            if p == self.choice.len() {
                let better = match &self.best {
                    None => true,
                    Some((bc, bd, _)) => count > *bc || count == *bc && distance < *bd,
                };
                if better {
                    self.best = Some((count, distance, self.choice.clone()));
                }
                return;
            }
            let cands = &self.family.per_participant[p];
            for c in 0..cands.len() {
                let cand = cands.get(c);
                if cand.tasks.iter().any(|&t| self.residual[t as usize] == 0)
                    || self.used.contains(&cand.tasks)
                {
                    continue;
                }
                cand.tasks.iter().for_each(|&t| self.residual[t as usize] -= 1);
                self.used.push(cand.tasks);
                self.choice[p] = Some(c);
                self.run(p + 1, count + cand.tasks.len(), distance + cand.cost);
                self.choice[p] = None;
                self.used.pop();
                cand.tasks.iter().for_each(|&t| self.residual[t as usize] += 1);
            }
            self.run(p + 1, count, distance);
        }
    }

    let mut search = Search {
        family,
        residual: instance.tasks.iter().map(|t| t.capacity).collect(),
        used: Vec::new(),
        choice: vec![None; m],
        best: None,
    };
    search.run(0, 0, 0.0);
    let (_, _, choice) = search.best.expect("the empty assignment is always feasible");
    let routes = choice
        .iter()
        .enumerate()
        .map(|(p, c)| match c {
            Some(c) => family.per_participant[p].get(*c).route.to_vec(),
            None => Vec::new(),
        })
        .collect();
    let dist = instance.distance_matrix()?;
    Ok(FpmtAssignment::from_routes(instance, &dist, routes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpmtMetrics {
    pub total_distance: f64,
    pub accomplished: usize,
    /// Travel time in minutes per participant with a non-empty route.
    pub completion_minutes: Vec<f64>,
    pub mean_completion_minutes: f64,
    /// Population variance of the performer count across tasks.
    pub performer_variance: f64,
}

pub fn assignment_metrics(a: &FpmtAssignment, speed_m_per_min: f64) -> Result<FpmtMetrics> {
    if !(speed_m_per_min.is_finite() && speed_m_per_min > 0.0) {
        return Err(Error::Param(format!("speed must be positive, got {speed_m_per_min}")));
    }
    let completion_minutes: Vec<f64> = a
        .routes
        .iter()
        .filter(|r| !r.tasks.is_empty())
        .map(|r| r.distance / speed_m_per_min)
        .collect();
    let mean_completion_minutes = if completion_minutes.is_empty() {
        0.0
    } else {
        completion_minutes.iter().sum::<f64>() / completion_minutes.len() as f64
    };
    let counts: Vec<f64> = a.performers.iter().map(|p| p.len() as f64).collect();
    let performer_variance = population_variance(&counts);
    Ok(FpmtMetrics {
        total_distance: a.total_distance,
        accomplished: a.accomplished,
        completion_minutes,
        mean_completion_minutes,
        performer_variance,
    })
}

pub(crate) fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_instance(people: &[(f64, f64)], tasks: &[(f64, f64, u32)], q: u32) -> FpmtInstance {
        FpmtInstance::new(
            people
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| Participant {
                    id: i as u32,
                    location: Location::planar(x, y),
                })
                .collect(),
            tasks
                .iter()
                .enumerate()
                .map(|(i, &(x, y, cap))| FpmtTask {
                    id: i as u32,
                    location: Location::planar(x, y),
                    capacity: cap,
                })
                .collect(),
            q,
        )
        .unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(3, 2), 3);
        assert_eq!(binomial(15, 5), 3003);
        assert_eq!(binomial(12, 5), 792);
        assert_eq!(binomial(5, 6), 0);
        assert_eq!(binomial(30, 5), 142_506);
    }

    #[test]
    fn subsets_are_lexicographic() {
        let mut out = Vec::new();
        for_each_subset(&[1, 4, 7, 9], 2, |s| out.push(s.to_vec()));
        assert_eq!(
            out,
            vec![vec![1, 4], vec![1, 7], vec![1, 9], vec![4, 7], vec![4, 9], vec![7, 9]]
        );
        let mut n = 0;
        for_each_subset(&[0, 1, 2], 3, |_| n += 1);
        assert_eq!(n, 1);
    }

    #[test]
    fn validation() {
        let p = |id| Participant {
            id,
            location: Location::planar(0.0, 0.0),
        };
        let t = |id, capacity| FpmtTask {
            id,
            location: Location::planar(1.0, 0.0),
            capacity,
        };
        assert!(FpmtInstance::new(vec![p(0)], vec![t(0, 1)], 0).is_err());
        assert!(FpmtInstance::new(vec![p(0)], vec![t(0, 1)], 2).is_err());
        assert!(FpmtInstance::new(vec![p(0)], vec![t(0, 0)], 1).is_err());
        assert!(FpmtInstance::new(vec![p(0), p(0)], vec![t(0, 1)], 1).is_err());
        assert!(FpmtInstance::new(vec![p(0)], vec![t(1, 1), t(1, 1)], 1).is_err());
        let mixed = FpmtTask {
            id: 0,
            location: Location::lat_lon(0.0, 0.0),
            capacity: 1,
        };
        assert!(matches!(
            FpmtInstance::new(vec![p(0)], vec![mixed], 1),
            Err(Error::ModeMismatch(..))
        ));
    }

    #[test]
    fn enumeration_counts() {
        let inst = planar_instance(
            &[(0.0, 0.0), (5.0, 5.0)],
            &[(1.0, 0.0, 1), (2.0, 0.0, 1), (3.0, 0.0, 1)],
            2,
        );
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        assert_eq!(fam.candidates(0).len(), 3);
        assert_eq!(fam.total_candidates(), 6);

        let forced = planar_instance(&[(0.0, 0.0)], &[(1.0, 0.0, 1), (2.0, 0.0, 1)], 2);
        let fam = enumerate_full(&forced, &EnumerationOptions::default()).unwrap();
        assert_eq!(fam.candidates(0).len(), 1);
        assert_eq!(fam.candidates(0).get(0).route, &[0, 1]);
        assert_eq!(fam.candidates(0).get(0).cost, 2.0);
    }

    #[test]
    fn enumeration_budget() {
        let tasks: Vec<_> = (0..15).map(|i| (i as f64, 1.0, 6)).collect();
        let people: Vec<_> = (0..10).map(|i| (i as f64, 0.0)).collect();
        let inst = planar_instance(&people, &tasks, 5);
        let tight = EnumerationOptions {
            route_budget: 30_029,
            ..Default::default()
        };
        match enumerate_full(&inst, &tight) {
            Err(Error::EnumerationBudget { routes, .. }) => assert_eq!(routes, 30_030),
            other => panic!("expected budget error, got {other:?}"),
        }
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        assert_eq!(fam.candidates(0).len(), 3003);
        assert_eq!(fam.total_candidates(), 30_030);
        let pruned = enumerate_pruned(&inst, 12, &EnumerationOptions::default()).unwrap();
        assert_eq!(pruned.candidates(3).len(), 792);
    }

    #[test]
    fn pruned_extremes() {
        let inst = planar_instance(
            &[(0.0, 0.0), (100.0, 0.0)],
            &[(10.0, 0.0, 2), (20.0, 0.0, 2), (90.0, 0.0, 2), (95.0, 0.0, 2)],
            2,
        );
        let opts = EnumerationOptions::default();
        assert_eq!(
            enumerate_pruned(&inst, 4, &opts).unwrap(),
            enumerate_full(&inst, &opts).unwrap()
        );
        let fam = enumerate_pruned(&inst, 2, &opts).unwrap();
        assert_eq!(fam.candidates(0).get(0).tasks, &[0, 1]);
        assert_eq!(fam.candidates(1).get(0).tasks, &[2, 3]);
        assert!(enumerate_pruned(&inst, 1, &opts).is_err());
        assert!(enumerate_pruned(&inst, 5, &opts).is_err());
    }

    #[test]
    fn network_shape() {
        let inst = planar_instance(&[(0.0, 0.0)], &[(1.0, 0.0, 1), (2.0, 0.0, 1)], 2);
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        let net = build_network(&inst, &fam).unwrap();
        assert_eq!(net.network.nodes(), 6);
        // s->u, u->TT, TT->t1, TT->t2, t1->sink, t2->sink
        assert_eq!(net.network.arcs().len(), 6);

        let tasks: Vec<_> = (0..5).map(|i| (i as f64, 3.0, 6)).collect();
        let inst = planar_instance(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], &tasks, 2);
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        let net = build_network(&inst, &fam).unwrap();
        assert_eq!(net.network.sink_capacity(), 5 * 6);
        assert_eq!(net.network.source_capacity(), 3 * 2);
        // Shared set nodes: C(5,2) of them.
        assert_eq!(net.sets.len(), 10);
    }

    #[test]
    fn forced_single_set() {
        let inst = planar_instance(&[(0.0, 0.0)], &[(1.0, 0.0, 1), (2.0, 0.0, 1)], 2);
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        let out = solve_mt_mcmf_with_flow(&inst, &fam).unwrap();
        assert_eq!(out.assignment.accomplished, 2);
        assert_eq!(out.flow.value, 2);
        out.flow.check(&out.network.network).unwrap();
        out.assignment.check(&inst, true).unwrap();
    }

    #[test]
    fn two_participants_two_tasks() {
        // Matching u1->t1, u2->t2 costs 20; the crossed matching 2*sqrt(100^2+10^2).
        let inst = planar_instance(
            &[(0.0, 0.0), (100.0, 0.0)],
            &[(0.0, 10.0, 1), (100.0, 10.0, 1)],
            1,
        );
        let crossed = 2.0 * (100f64 * 100.0 + 10.0 * 10.0).sqrt();
        assert!(20.0 < crossed);
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        let a = solve_mt_mcmf(&inst, &fam).unwrap();
        assert_eq!(a.total_distance, 20.0);
        assert_eq!(a.routes[0].tasks, vec![0]);
        assert_eq!(a.routes[1].tasks, vec![1]);
        let oracle = exact_oracle(&inst, &fam).unwrap();
        assert_eq!(oracle.total_distance, 20.0);
    }

    #[test]
    fn blocked_participant_stays_unassigned() {
        // One set only; the second participant cannot reuse it.
        let inst = planar_instance(&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0, 2), (2.0, 0.0, 2)], 2);
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        let a = solve_mt_mcmf(&inst, &fam).unwrap();
        assert_eq!(a.accomplished, 2);
        assert_eq!(a.assigned_participants(), 1);
        assert!(a.routes[0].tasks.is_empty());
        assert!(!a.routes[0].complete);
        a.check(&inst, true).unwrap();
    }

    #[test]
    fn greedy_walks_collinear_tasks() {
        let inst = planar_instance(
            &[(0.0, 0.0)],
            &[(30.0, 0.0, 1), (10.0, 0.0, 1), (20.0, 0.0, 1)],
            3,
        );
        let a = solve_mt_grdpt(&inst).unwrap();
        assert_eq!(a.routes[0].tasks, vec![1, 2, 0]);
        assert_eq!(a.total_distance, 30.0);
        a.check(&inst, false).unwrap();
    }

    #[test]
    fn greedy_flags_incomplete_routes() {
        let inst = planar_instance(&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0, 1), (2.0, 0.0, 1)], 2);
        let a = solve_mt_grdpt(&inst).unwrap();
        assert!(a.routes[0].complete);
        assert!(a.routes[1].tasks.is_empty() && !a.routes[1].complete);
        a.check(&inst, false).unwrap();
    }

    #[test]
    fn greedy_not_shorter_than_optimal_order() {
        let inst = planar_instance(
            &[(0.0, 0.0)],
            &[(10.0, 0.0, 1), (-12.0, 0.0, 1), (25.0, 0.0, 1)],
            3,
        );
        let a = solve_mt_grdpt(&inst).unwrap();
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        assert!(a.total_distance >= fam.candidates(0).get(0).cost);
        assert_eq!(fam.candidates(0).get(0).cost, 12.0 + 12.0 + 25.0);
    }

    #[test]
    fn oracle_single_participant_picks_cheapest() {
        let inst = planar_instance(
            &[(0.0, 0.0)],
            &[(50.0, 0.0, 1), (10.0, 0.0, 1), (5.0, 5.0, 1), (-40.0, 0.0, 1)],
            2,
        );
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        let best = fam.candidates(0).iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
        let a = exact_oracle(&inst, &fam).unwrap();
        assert_eq!(a.total_distance, best);
    }

    #[test]
    fn oracle_respects_capacity() {
        let inst = planar_instance(&[(0.0, 0.0), (0.0, 1.0)], &[(0.0, 0.5, 1), (50.0, 0.0, 1)], 1);
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        let a = exact_oracle(&inst, &fam).unwrap();
        a.check(&inst, true).unwrap();
        assert_eq!(a.accomplished, 2);
        assert_eq!(a.performers[0].len(), 1);
    }

    #[test]
    fn oracle_limits() {
        let people: Vec<_> = (0..6).map(|i| (i as f64, 0.0)).collect();
        let inst = planar_instance(&people, &[(1.0, 1.0, 6), (2.0, 2.0, 6)], 1);
        let fam = enumerate_full(&inst, &EnumerationOptions::default()).unwrap();
        assert!(matches!(exact_oracle(&inst, &fam), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn metrics() {
        let a = FpmtAssignment {
            quota: 2,
            routes: vec![ParticipantRoute {
                participant: 0,
                tasks: vec![0, 1],
                distance: 1400.0,
                complete: true,
            }],
            performers: vec![vec![0], vec![0]],
            accomplished: 2,
            total_distance: 1400.0,
        };
        let m = assignment_metrics(&a, 70.0).unwrap();
        assert_eq!(m.completion_minutes, vec![20.0]);
        assert_eq!(m.mean_completion_minutes, 20.0);
        assert_eq!(m.performer_variance, 0.0);
        assert!(assignment_metrics(&a, 0.0).is_err());
        assert_eq!(population_variance(&[2.0, 2.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn christofides_family() {
        let inst = planar_instance(
            &[(0.0, 0.0)],
            &[(1.0, 0.0, 1), (1.0, 1.0, 1), (0.0, 1.0, 1)],
            3,
        );
        let opts = EnumerationOptions {
            solver: Some(TspSolver::Christofides),
            ..Default::default()
        };
        let fam = enumerate_full(&inst, &opts).unwrap();
        assert_eq!(fam.solver(), TspSolver::Christofides);
        assert_eq!(fam.candidates(0).get(0).cost, 3.0);
    }
}
