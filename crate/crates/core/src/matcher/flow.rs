//! Min-cost max-flow by successive shortest paths.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
}

pub(crate) struct FlowGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

#[derive(PartialEq)]
struct State(f64, usize);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FlowGraph {
    pub(crate) fn new(nodes: usize) -> Self {
        FlowGraph {
            edges: Vec::new(),
            adj: (0..nodes).map(|_| Vec::new()).collect(),
        }
    }

    /// Adds an arc and returns its id. Costs must be nonnegative.
    pub(crate) fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        debug_assert!(cost >= 0.0);
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.adj[from].push(id);
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[to].push(id + 1);
        id
    }

    /// Flow carried by arc `id`.
    pub(crate) fn flow(&self, id: usize) -> i64 {
        self.edges[id + 1].cap
    }

    /// Pushes as much flow as possible from `s` to `t` at least cost.
    /// Returns the flow value.
    pub(crate) fn min_cost_max_flow(&mut self, s: usize, t: usize) -> i64 {
        let n = self.adj.len();
        let mut potential = vec![0.0f64; n];
        let mut total = 0;
        loop {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev: Vec<Option<usize>> = vec![None; n];
            dist[s] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(State(0.0, s));
            while let Some(State(d, u)) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &id in &self.adj[u] {
                    let e = &self.edges[id];
                    if e.cap <= 0 {
                        continue;
                    }
                    let reduced = (e.cost + potential[u] - potential[e.to]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[e.to] {
                        dist[e.to] = nd;
                        prev[e.to] = Some(id);
                        heap.push(State(nd, e.to));
                    }
                }
            }
            if !dist[t].is_finite() {
                return total;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut push = i64::MAX;
            let mut v = t;
            while let Some(id) = prev[v] {
                push = push.min(self.edges[id].cap);
                v = self.edges[id ^ 1].to;
            }
            let mut v = t;
            while let Some(id) = prev[v] {
                self.edges[id].cap -= push;
                self.edges[id ^ 1].cap += push;
                v = self.edges[id ^ 1].to;
            }
            total += push;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force assignment over all permutations.
    fn best_assignment(cost: &[[f64; 3]; 3]) -> f64 {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        perms
            .iter()
            .map(|p| (0..3).map(|i| cost[i][p[i]]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn solves_assignment() {
        let cost = [[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
        let mut g = FlowGraph::new(8);
        let mut arcs = Vec::new();
        for i in 0..3 {
            g.add_edge(0, 2 + i, 1, 0.0);
            g.add_edge(5 + i, 1, 1, 0.0);
            for j in 0..3 {
                arcs.push((i, j, g.add_edge(2 + i, 5 + j, 1, cost[i][j])));
            }
        }
        assert_eq!(g.min_cost_max_flow(0, 1), 3);
        let total: f64 = arcs.iter().filter(|a| g.flow(a.2) == 1).map(|a| cost[a.0][a.1]).sum();
        assert_eq!(total, best_assignment(&cost));
    }

    #[test]
    fn respects_capacity() {
        let mut g = FlowGraph::new(4);
        g.add_edge(0, 2, 5, 0.0);
        g.add_edge(2, 3, 2, 1.0);
        g.add_edge(3, 1, 10, 0.0);
        assert_eq!(g.min_cost_max_flow(0, 1), 2);
    }
}
