//! Successive-shortest-path minimum-cost flow with node potentials.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
    pub cost: f64,
}

/// Directed network with integral capacities and non-negative costs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    nodes: usize,
    arcs: Vec<Arc>,
    source: usize,
    sink: usize,
}

impl FlowNetwork {
    pub fn new(nodes: usize, source: usize, sink: usize) -> Result<Self> {
        if source >= nodes || sink >= nodes || source == sink {
            return Err(Error::Param(format!(
                "invalid source/sink ({source}, {sink}) for {nodes} nodes"
            )));
        }
        Ok(FlowNetwork {
            nodes,
            arcs: Vec::new(),
            source,
            sink,
        })
    }

    /// Adds an arc and returns its index.
    pub fn add_arc(&mut self, from: usize, to: usize, capacity: i64, cost: f64) -> Result<usize> {
        if from >= self.nodes || to >= self.nodes {
            return Err(Error::Param(format!("arc ({from}, {to}) out of range")));
        }
        if capacity < 0 {
            return Err(Error::Param(format!("arc ({from}, {to}) has negative capacity")));
        }
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::Param(format!("arc ({from}, {to}) has invalid cost {cost}")));
        }
        if to == self.source {
            return Err(Error::Param("arc into the source".into()));
        }
        if from == self.sink {
            return Err(Error::Param("arc out of the sink".into()));
        }
        self.arcs.push(Arc {
            from,
            to,
            capacity,
            cost,
        });
        Ok(self.arcs.len() - 1)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Sum of capacities on arcs leaving the source.
    pub fn source_capacity(&self) -> i64 {
        self.arcs
            .iter()
            .filter(|a| a.from == self.source)
            .map(|a| a.capacity)
            .sum()
    }

    /// Sum of capacities on arcs entering the sink.
    pub fn sink_capacity(&self) -> i64 {
        self.arcs
            .iter()
            .filter(|a| a.to == self.sink)
            .map(|a| a.capacity)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub arc_flow: Vec<i64>,
    pub value: i64,
    pub cost: f64,
}

impl Flow {
    pub fn zero(net: &FlowNetwork) -> Self {
        Flow {
            arc_flow: vec![0; net.arcs.len()],
            value: 0,
            cost: 0.0,
        }
    }

    /// Recomputes `value` and `cost` from the per-arc flows.
    pub fn recompute(&mut self, net: &FlowNetwork) {
        self.value = net
            .arcs
            .iter()
            .zip(&self.arc_flow)
            .filter(|(a, _)| a.from == net.source)
            .map(|(_, &f)| f)
            .sum();
        self.cost = net
            .arcs
            .iter()
            .zip(&self.arc_flow)
            .map(|(a, &f)| f as f64 * a.cost)
            .sum();
    }

    /// Capacity bounds and conservation at every node except source and sink.
    pub fn check(&self, net: &FlowNetwork) -> Result<()> {
        if self.arc_flow.len() != net.arcs.len() {
            return Err(Error::Param("flow/arc count mismatch".into()));
        }
        let mut balance = vec![0i64; net.nodes];
        for (a, &f) in net.arcs.iter().zip(&self.arc_flow) {
            if f < 0 || f > a.capacity {
                return Err(Error::Param(format!(
                    "flow {f} on arc ({}, {}) outside [0, {}]",
                    a.from, a.to, a.capacity
                )));
            }
            balance[a.from] -= f;
            balance[a.to] += f;
        }
        for (v, &b) in balance.iter().enumerate() {
            if v != net.source && v != net.sink && b != 0 {
                return Err(Error::Param(format!("conservation violated at node {v}")));
            }
        }
        if -balance[net.source] != self.value || balance[net.sink] != self.value {
            return Err(Error::Param("flow value does not match source/sink balance".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowTarget {
    /// Maximum flow value.
    Maximum,
    /// The requested value, or the maximum if smaller.
    AtMost(i64),
    /// Exactly the requested value; error if the maximum is smaller.
    Exactly(i64),
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, node).
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let m = net.arcs.len();
        let mut r = Residual {
            head: Vec::with_capacity(2 * m),
            cap: Vec::with_capacity(2 * m),
            cost: Vec::with_capacity(2 * m),
            adj: vec![Vec::new(); net.nodes],
        };
        // Edge 2i is arc i forward, 2i+1 its reverse.
        for a in &net.arcs {
            r.adj[a.from].push(r.head.len());
            r.head.push(a.to);
            r.cap.push(a.capacity);
            r.cost.push(a.cost);
            r.adj[a.to].push(r.head.len());
            r.head.push(a.from);
            r.cap.push(0);
            r.cost.push(-a.cost);
        }
        r
    }
}

/// Minimum-cost integral flow of the requested value.
///
/// Each round runs Dijkstra on reduced costs `c(u,v) + pi(u) - pi(v)` and
/// augments along the cheapest source-sink path. Potentials are raised by
/// `min(dist(v), dist(sink))`, which keeps every residual reduced cost
/// non-negative, including on reversed arcs.
pub fn min_cost_flow(net: &FlowNetwork, target: FlowTarget) -> Result<Flow> {
    let limit = match target {
        FlowTarget::Maximum => i64::MAX,
        FlowTarget::AtMost(v) | FlowTarget::Exactly(v) => {
            if v < 0 {
                return Err(Error::Param(format!("negative flow target {v}")));
            }
            v
        }
    };
    let n = net.nodes;
    let mut res = Residual::new(net);
    let mut potential = vec![0.0f64; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut prev_edge = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut value = 0i64;

    while value < limit {
        dist.fill(f64::INFINITY);
        prev_edge.fill(usize::MAX);
        done.fill(false);
        dist[net.source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem {
            dist: 0.0,
            node: net.source,
        });
        while let Some(HeapItem { dist: du, node: u }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for &e in &res.adj[u] {
                if res.cap[e] <= 0 {
                    continue;
                }
                let v = res.head[e];
                let reduced = (res.cost[e] + potential[u] - potential[v]).max(0.0);
                let nd = du + reduced;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev_edge[v] = e;
                    heap.push(HeapItem { dist: nd, node: v });
                }
            }
        }
        let dt = dist[net.sink];
        if !dt.is_finite() {
            break;
        }
        for v in 0..n {
            potential[v] += dist[v].min(dt);
        }

        let mut push = limit - value;
        let mut v = net.sink;
        while v != net.source {
            let e = prev_edge[v];
            push = push.min(res.cap[e]);
            v = res.head[e ^ 1];
        }
        let mut v = net.sink;
        while v != net.source {
            let e = prev_edge[v];
            res.cap[e] -= push;
            res.cap[e ^ 1] += push;
            v = res.head[e ^ 1];
        }
        value += push;
    }

    if let FlowTarget::Exactly(v) = target {
        if value < v {
            return Err(Error::InfeasibleFlowValue {
                requested: v,
                maximum: value,
            });
        }
    }

    let arc_flow = net
        .arcs
        .iter()
        .enumerate()
        .map(|(i, a)| a.capacity - res.cap[2 * i])
        .collect();
    let mut flow = Flow {
        arc_flow,
        value: 0,
        cost: 0.0,
    };
    flow.recompute(net);
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn single_arc() {
        let mut net = FlowNetwork::new(2, 0, 1).unwrap();
        net.add_arc(0, 1, 3, 2.0).unwrap();
        let f = min_cost_flow(&net, FlowTarget::Maximum).unwrap();
        assert_eq!(f.value, 3);
        assert_eq!(f.cost, 6.0);
        f.check(&net).unwrap();
    }

    #[test]
    fn cheaper_parallel_arc() {
        let mut net = FlowNetwork::new(2, 0, 1).unwrap();
        net.add_arc(0, 1, 1, 1.0).unwrap();
        net.add_arc(0, 1, 1, 5.0).unwrap();
        let f = min_cost_flow(&net, FlowTarget::AtMost(1)).unwrap();
        assert_eq!(f.value, 1);
        assert_eq!(f.cost, 1.0);
        assert_eq!(f.arc_flow, vec![1, 0]);
    }

    #[test]
    fn exact_target_beyond_maximum() {
        let mut net = FlowNetwork::new(2, 0, 1).unwrap();
        net.add_arc(0, 1, 2, 1.0).unwrap();
        let err = min_cost_flow(&net, FlowTarget::Exactly(3)).unwrap_err();
        assert!(matches!(
            err,
            Error::InfeasibleFlowValue {
                requested: 3,
                maximum: 2
            }
        ));
        assert_eq!(min_cost_flow(&net, FlowTarget::AtMost(3)).unwrap().value, 2);
    }

    #[test]
    fn needs_reverse_arc() {
        // Classic case where the first shortest path must be partially undone.
        let mut net = FlowNetwork::new(4, 0, 3).unwrap();
        net.add_arc(0, 1, 1, 1.0).unwrap();
        net.add_arc(0, 2, 1, 1.0).unwrap();
        net.add_arc(1, 2, 1, 0.0).unwrap();
        net.add_arc(1, 3, 1, 10.0).unwrap();
        net.add_arc(2, 3, 1, 1.0).unwrap();
        let f = min_cost_flow(&net, FlowTarget::Maximum).unwrap();
        assert_eq!(f.value, 2);
        assert_eq!(f.cost, 13.0);
        f.check(&net).unwrap();
    }

    #[test]
    fn network_invariants_enforced() {
        let mut net = FlowNetwork::new(3, 0, 2).unwrap();
        assert!(net.add_arc(1, 0, 1, 0.0).is_err());
        assert!(net.add_arc(2, 1, 1, 0.0).is_err());
        assert!(net.add_arc(0, 1, -1, 0.0).is_err());
        assert!(net.add_arc(0, 1, 1, -1.0).is_err());
        assert!(FlowNetwork::new(3, 1, 1).is_err());
    }

    /// Minimum cost per achievable flow value, by enumerating every integral
    /// arc-flow vector.
    fn enumerate_flows(net: &FlowNetwork) -> BTreeMap<i64, f64> {
        let arcs = net.arcs();
        let mut best = BTreeMap::new();
        let mut flows = vec![0i64; arcs.len()];
        loop {
            let mut balance = vec![0i64; net.nodes()];
            for (a, &f) in arcs.iter().zip(&flows) {
                balance[a.from] -= f;
                balance[a.to] += f;
            }
            let ok = (0..net.nodes())
                .all(|v| v == net.source() || v == net.sink() || balance[v] == 0);
            if ok {
                let value = -balance[net.source()];
                let cost: f64 = arcs.iter().zip(&flows).map(|(a, &f)| f as f64 * a.cost).sum();
                let e = best.entry(value).or_insert(f64::INFINITY);
                if cost < *e {
                    *e = cost;
                }
            }
            // Odometer increment.
            let mut i = 0;
            loop {
                if i == flows.len() {
                    return best;
                }
                if flows[i] < arcs[i].capacity {
                    flows[i] += 1;
                    break;
                }
                flows[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn matches_brute_force_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let n = 8;
            let mut net = FlowNetwork::new(n, 0, n - 1).unwrap();
            let arcs = rng.gen_range(6..=11);
            while net.arcs().len() < arcs {
                let from = rng.gen_range(0..n - 1);
                let to = rng.gen_range(1..n);
                if from == to {
                    continue;
                }
                let cap = rng.gen_range(1..=2);
                let cost = rng.gen_range(0..10) as f64;
                net.add_arc(from, to, cap, cost).unwrap();
            }
            let oracle = enumerate_flows(&net);
            for (&value, &cost) in &oracle {
                let f = min_cost_flow(&net, FlowTarget::Exactly(value)).unwrap();
                f.check(&net).unwrap();
                assert_eq!(f.value, value);
                assert_eq!(f.cost, cost, "value {value}");
            }
            let max = *oracle.keys().last().unwrap();
            assert_eq!(min_cost_flow(&net, FlowTarget::Maximum).unwrap().value, max);
        }
    }
}
