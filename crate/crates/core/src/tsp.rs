//! Open-path routing from a participant through a set of task locations.
//!
//! The participant starts at `start` and visits every other node once without
//! returning. [`exact_open_path`] is Held-Karp dynamic programming over
//! subsets; [`christofides_open_path`] builds the Christofides tour (Prim
//! spanning tree, exact minimum-weight matching of odd vertices, Eulerian
//! circuit, shortcutting) and drops the edge that closes the cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::DistanceMatrix;

/// Largest node count (participant plus tasks) admitted by the exact solver.
pub const EXACT_NODE_LIMIT: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TspSolver {
    Exact,
    Christofides,
}

impl TspSolver {
    /// Exact when the node count is admissible, Christofides otherwise.
    pub fn default_for(nodes: usize) -> Self {
        if nodes <= EXACT_NODE_LIMIT {
            TspSolver::Exact
        } else {
            TspSolver::Christofides
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteProblem {
    dist: DistanceMatrix,
    start: usize,
}

impl RouteProblem {
    pub fn new(dist: DistanceMatrix, start: usize) -> Result<Self> {
        if start >= dist.len() {
            return Err(Error::Param(format!(
                "start node {start} out of range for {} nodes",
                dist.len()
            )));
        }
        Ok(RouteProblem { dist, start })
    }

    pub fn dist(&self) -> &DistanceMatrix {
        &self.dist
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    /// Visiting order; `order[0]` is the start node.
    pub order: Vec<usize>,
    /// Sum of consecutive-pair distances along `order`, no return edge.
    pub length: f64,
}

/// Length of the open path visiting `order` under the distance function.
pub fn path_length(order: &[usize], d: impl Fn(usize, usize) -> f64) -> f64 {
    order.windows(2).map(|w| d(w[0], w[1])).sum()
}

pub fn exact_open_path(p: &RouteProblem) -> Result<Route> {
    check_exact_limit(p.len())?;
    let d = |i: usize, j: usize| p.dist.get(i, j);
    let order = held_karp(p.len(), p.start, d, false, &mut Vec::new());
    let length = path_length(&order, d);
    Ok(Route { order, length })
}

pub fn christofides_open_path(p: &RouteProblem) -> Result<Route> {
    let d = |i: usize, j: usize| p.dist.get(i, j);
    let order = christofides(p.len(), p.start, d);
    let length = path_length(&order, d);
    Ok(Route { order, length })
}

pub fn open_path(p: &RouteProblem, solver: TspSolver) -> Result<Route> {
    match solver {
        TspSolver::Exact => exact_open_path(p),
        TspSolver::Christofides => christofides_open_path(p),
    }
}

/// Closed-tour length for the chosen solver: the optimal Hamiltonian cycle
/// for `Exact`, the Christofides tour for `Christofides`.
pub fn cycle_length(p: &RouteProblem, solver: TspSolver) -> Result<f64> {
    let d = |i: usize, j: usize| p.dist.get(i, j);
    let order = match solver {
        TspSolver::Exact => {
            check_exact_limit(p.len())?;
            held_karp(p.len(), p.start, d, true, &mut Vec::new())
        }
        TspSolver::Christofides => christofides(p.len(), p.start, d),
    };
    Ok(closed_length(&order, d))
}

fn closed_length(order: &[usize], d: impl Fn(usize, usize) -> f64) -> f64 {
    let ret = match (order.first(), order.last()) {
        (Some(&a), Some(&b)) if order.len() > 1 => d(b, a),
        _ => 0.0,
    };
    path_length(order, &d) + ret
}

fn check_exact_limit(n: usize) -> Result<()> {
    if n > EXACT_NODE_LIMIT {
        return Err(Error::SizeLimit {
            what: "exact route solver node count",
            got: n,
            limit: EXACT_NODE_LIMIT,
        });
    }
    Ok(())
}

/// Held-Karp over local nodes `0..n`. Returns the visiting order starting at
/// `start`; with `closed` the return edge is part of the objective.
///
/// `suffix[mask][v]` is the cheapest completion when the visited set is
/// `mask` and the walker stands on `v`. Reconstruction walks forward taking
/// the lowest-index successor that attains the minimum, so among equal-length
/// routes the lexicographically smallest order is returned.
pub(crate) fn held_karp(
    n: usize,
    start: usize,
    d: impl Fn(usize, usize) -> f64,
    closed: bool,
    scratch: &mut Vec<f64>,
) -> Vec<usize> {
    if n <= 1 {
        return vec![start; n];
    }
    // Local index k in 0..n-1 stands for node others[k]; ascending, so index
    // order and node order agree.
    let others: Vec<usize> = (0..n).filter(|&v| v != start).collect();
    let k = others.len();
    let full = (1usize << k) - 1;
    scratch.clear();
    scratch.resize((full + 1) * k, f64::INFINITY);
    let suffix = scratch;

    for v in 0..k {
        suffix[full * k + v] = if closed { d(others[v], start) } else { 0.0 };
    }
    for mask in (1..full).rev() {
        for v in 0..k {
            if mask & (1 << v) == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut rest = full & !mask;
            while rest != 0 {
                let w = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let c = d(others[v], others[w]) + suffix[(mask | (1 << w)) * k + w];
                if c < best {
                    best = c;
                }
            }
            suffix[mask * k + v] = best;
        }
    }

    let mut order = Vec::with_capacity(n);
    order.push(start);
    let mut mask = 0usize;
    let mut cur = start;
    while mask != full {
        let mut best = f64::INFINITY;
        let mut pick = usize::MAX;
        let mut rest = full & !mask;
        while rest != 0 {
            let w = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let c = d(cur, others[w]) + suffix[(mask | (1 << w)) * k + w];
            if c < best {
                best = c;
                pick = w;
            }
        }
        mask |= 1 << pick;
        cur = others[pick];
        order.push(cur);
    }
    order
}

/// Christofides tour over local nodes `0..n`, returned as the shortcut order
/// starting at `start` (the closing edge back to `start` is implicit).
pub(crate) fn christofides(n: usize, start: usize, d: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    if n <= 2 {
        let mut order = vec![start];
        order.extend((0..n).filter(|&v| v != start));
        return order;
    }

    // Prim, rooted at start; ties go to the lowest index.
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    key[start] = 0.0;
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || key[v] < key[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push((parent[u], u));
        }
        for v in 0..n {
            if !in_tree[v] {
                let w = d(u, v);
                if w < key[v] {
                    key[v] = w;
                    parent[v] = u;
                }
            }
        }
    }

    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let odd: Vec<usize> = (0..n).filter(|&v| degree[v] % 2 == 1).collect();
    edges.extend(min_weight_perfect_matching(&odd, &d));

    let circuit = euler_circuit(n, start, &edges);
    let mut seen = vec![false; n];
    circuit
        .into_iter()
        .filter(|&v| !std::mem::replace(&mut seen[v], true))
        .collect()
}

/// Exact minimum-weight perfect matching on `verts` (even count) by DP over
/// subsets, always matching the lowest unmatched vertex first.
fn min_weight_perfect_matching(
    verts: &[usize],
    d: &impl Fn(usize, usize) -> f64,
) -> Vec<(usize, usize)> {
    let k = verts.len();
    debug_assert!(k.is_multiple_of(2));
    if k == 0 {
        return Vec::new();
    }
    let full = (1usize << k) - 1;
    // best[mask] = min cost to match the vertices NOT in mask.
    let mut best = vec![f64::INFINITY; full + 1];
    let mut choice = vec![usize::MAX; full + 1];
    best[full] = 0.0;
    for mask in (0..full).rev() {
        let free = !mask & full;
        let i = free.trailing_zeros() as usize;
        let mut rest = free & !(1 << i);
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let next = mask | (1 << i) | (1 << j);
            let c = d(verts[i], verts[j]) + best[next];
            if c < best[mask] {
                best[mask] = c;
                choice[mask] = j;
            }
        }
    }
    let mut pairs = Vec::with_capacity(k / 2);
    let mut mask = 0usize;
    while mask != full {
        let i = (!mask & full).trailing_zeros() as usize;
        let j = choice[mask];
        pairs.push((verts[i], verts[j]));
        mask |= (1 << i) | (1 << j);
    }
    pairs
}

/// Hierholzer's algorithm on the multigraph `edges`; neighbours are taken in
/// ascending node order.
fn euler_circuit(n: usize, start: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (id, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, id));
        adj[b].push((a, id));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let mut used = vec![false; edges.len()];
    let mut cursor = vec![0usize; n];
    let mut stack = vec![start];
    let mut circuit = Vec::with_capacity(edges.len() + 1);
    while let Some(&v) = stack.last() {
        while cursor[v] < adj[v].len() && used[adj[v][cursor[v]].1] {
            cursor[v] += 1;
        }
        if cursor[v] == adj[v].len() {
            circuit.push(v);
            stack.pop();
        } else {
            let (w, id) = adj[v][cursor[v]];
            used[id] = true;
            stack.push(w);
        }
    }
    circuit.reverse();
    circuit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{build_distance_matrix, Location};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planar(points: &[(f64, f64)]) -> DistanceMatrix {
        let pts: Vec<_> = points.iter().map(|&(x, y)| Location::planar(x, y)).collect();
        build_distance_matrix(&pts).unwrap()
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> RouteProblem {
        let pts: Vec<_> = (0..n)
            .map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)))
            .collect();
        let start = rng.gen_range(0..n);
        RouteProblem::new(planar(&pts), start).unwrap()
    }

    /// Every permutation of `items`, by swapping recursion.
    fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permutations(items, k + 1, out);
            items.swap(k, i);
        }
    }

    fn brute_force(p: &RouteProblem, closed: bool) -> f64 {
        let mut rest: Vec<usize> = (0..p.len()).filter(|&v| v != p.start()).collect();
        let mut perms = Vec::new();
        permutations(&mut rest, 0, &mut perms);
        perms
            .into_iter()
            .map(|perm| {
                let mut order = vec![p.start()];
                order.extend(perm);
                let d = |i: usize, j: usize| p.dist().get(i, j);
                if closed {
                    closed_length(&order, d)
                } else {
                    path_length(&order, d)
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn assert_valid_route(p: &RouteProblem, r: &Route) {
        assert_eq!(r.order[0], p.start());
        let mut sorted = r.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..p.len()).collect::<Vec<_>>());
        let recomputed = path_length(&r.order, |i, j| p.dist().get(i, j));
        assert!((recomputed - r.length).abs() <= 1e-9 * recomputed.max(1.0));
    }

    #[test]
    fn two_nodes_forced() {
        let p = RouteProblem::new(planar(&[(0.0, 0.0), (3.0, 4.0)]), 1).unwrap();
        for solver in [TspSolver::Exact, TspSolver::Christofides] {
            let r = open_path(&p, solver).unwrap();
            assert_eq!(r.order, vec![1, 0]);
            assert_eq!(r.length, 5.0);
        }
    }

    #[test]
    fn collinear_tasks_in_order() {
        let p = RouteProblem::new(
            planar(&[(0.0, 0.0), (20.0, 0.0), (30.0, 0.0), (10.0, 0.0)]),
            0,
        )
        .unwrap();
        let r = exact_open_path(&p).unwrap();
        assert_eq!(r.order, vec![0, 3, 1, 2]);
        assert_eq!(r.length, 30.0);
    }

    #[test]
    fn unit_square() {
        let p = RouteProblem::new(
            planar(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]),
            0,
        )
        .unwrap();
        let r = christofides_open_path(&p).unwrap();
        assert_eq!(r.length, 3.0);
        assert_eq!(cycle_length(&p, TspSolver::Christofides).unwrap(), 4.0);
        assert_eq!(cycle_length(&p, TspSolver::Exact).unwrap(), 4.0);
        assert_eq!(exact_open_path(&p).unwrap().length, 3.0);
    }

    #[test]
    fn equilateral_triangle() {
        let dist = DistanceMatrix::from_rows(&[
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let p = RouteProblem::new(dist, 2).unwrap();
        assert_eq!(cycle_length(&p, TspSolver::Exact).unwrap(), 3.0);
        assert_eq!(cycle_length(&p, TspSolver::Christofides).unwrap(), 3.0);
    }

    #[test]
    fn lexicographic_tie_break() {
        // Square with start at a corner: two optimal open paths of length 3.
        let p = RouteProblem::new(
            planar(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]),
            0,
        )
        .unwrap();
        assert_eq!(exact_open_path(&p).unwrap().order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn exact_matches_brute_force_on_six_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = random_problem(&mut rng, 6);
            let r = exact_open_path(&p).unwrap();
            assert_valid_route(&p, &r);
            let oracle = brute_force(&p, false);
            assert!((r.length - oracle).abs() <= 1e-9 * oracle, "{} vs {oracle}", r.length);
        }
    }

    #[test]
    fn christofides_never_beats_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let p = random_problem(&mut rng, 7);
            let c = christofides_open_path(&p).unwrap();
            let e = exact_open_path(&p).unwrap();
            assert_valid_route(&p, &c);
            assert!(e.length <= c.length + 1e-9);
        }
    }

    #[test]
    fn christofides_within_three_halves_on_cycles() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 2..=10 {
            for _ in 0..20 {
                let p = random_problem(&mut rng, n);
                let opt = cycle_length(&p, TspSolver::Exact).unwrap();
                let chr = cycle_length(&p, TspSolver::Christofides).unwrap();
                assert!(chr <= 1.5 * opt + 1e-9, "n={n}: {chr} > 1.5 * {opt}");
                if n <= 7 {
                    let bf = brute_force(&p, true);
                    assert!((opt - bf).abs() <= 1e-9 * bf.max(1.0));
                }
            }
        }
    }

    #[test]
    fn coincident_task_costs_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let mut pts: Vec<(f64, f64)> = (0..5)
                .map(|_| (rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
                .collect();
            let base = exact_open_path(&RouteProblem::new(planar(&pts), 0).unwrap()).unwrap();
            pts.push(pts[0]);
            let dup = exact_open_path(&RouteProblem::new(planar(&pts), 0).unwrap()).unwrap();
            assert!((dup.length - base.length).abs() <= 1e-9 * base.length.max(1.0));
        }
    }

    #[test]
    fn size_limit() {
        let dist = DistanceMatrix::from_fn(EXACT_NODE_LIMIT + 1, |i, j| (i + j) as f64);
        let p = RouteProblem::new(dist, 0).unwrap();
        assert!(matches!(exact_open_path(&p), Err(Error::SizeLimit { .. })));
        assert!(christofides_open_path(&p).is_ok());
        assert!(RouteProblem::new(DistanceMatrix::from_fn(3, |_, _| 1.0), 3).is_err());
    }

    #[test]
    fn single_node() {
        let p = RouteProblem::new(DistanceMatrix::from_fn(1, |_, _| 0.0), 0).unwrap();
        assert_eq!(exact_open_path(&p).unwrap().order, vec![0]);
        assert_eq!(christofides_open_path(&p).unwrap().length, 0.0);
    }
}
