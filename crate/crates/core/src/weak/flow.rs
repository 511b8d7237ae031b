//! Exact s-t max-flow / min-cut on integer capacities (Dinic's algorithm).
//!
//! The interface follows the usual graph-cut energy layout: every node gets
//! terminal capacities to the source and sink plus symmetric or asymmetric
//! neighbor edges. After [`FlowGraph::maxflow`] the source segment is the set
//! of nodes still reachable from the source in the residual graph.

use std::collections::VecDeque;

pub type Capacity = i64;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    rev: usize,
    cap: Capacity,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    // Two extra vertices at the end: source, sink.
    adj: Vec<Vec<Arc>>,
    nodes: usize,
    source_side: Option<Vec<bool>>,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        FlowGraph {
            adj: vec![Vec::new(); nodes + 2],
            nodes,
            source_side: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    fn source(&self) -> usize {
        self.nodes
    }

    fn sink(&self) -> usize {
        self.nodes + 1
    }

    fn push_arc(&mut self, u: usize, v: usize, cap: Capacity, rev_cap: Capacity) {
        let ru = self.adj[v].len();
        let rv = self.adj[u].len();
        self.adj[u].push(Arc { to: v, rev: ru, cap });
        self.adj[v].push(Arc {
            to: u,
            rev: rv,
            cap: rev_cap,
        });
    }

    /// Adds capacity `cap` from `u` to `v` and `rev_cap` from `v` to `u`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: Capacity, rev_cap: Capacity) {
        assert!(u < self.nodes && v < self.nodes && u != v);
        assert!(cap >= 0 && rev_cap >= 0, "negative capacity");
        self.source_side = None;
        if cap > 0 || rev_cap > 0 {
            self.push_arc(u, v, cap, rev_cap);
        }
    }

    /// Terminal capacities: `to_source` is cut when `node` ends up on the sink
    /// side, `to_sink` when it ends up on the source side.
    pub fn add_terminal(&mut self, node: usize, to_source: Capacity, to_sink: Capacity) {
        assert!(node < self.nodes);
        assert!(to_source >= 0 && to_sink >= 0, "negative capacity");
        self.source_side = None;
        let (s, t) = (self.source(), self.sink());
        if to_source > 0 {
            self.push_arc(s, node, to_source, 0);
        }
        if to_sink > 0 {
            self.push_arc(node, t, to_sink, 0);
        }
    }

    fn bfs_levels(&self, level: &mut [i32]) -> bool {
        level.fill(-1);
        let s = self.source();
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for a in &self.adj[u] {
                if a.cap > 0 && level[a.to] < 0 {
                    level[a.to] = level[u] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        level[self.sink()] >= 0
    }

    /// Finds one augmenting path in the level graph with an explicit stack
    /// (paths on large grids are too long for recursion) and pushes its
    /// bottleneck. Returns the amount pushed, 0 when the level graph is
    /// blocked.
    fn augment(&mut self, level: &[i32], next: &mut [usize], path: &mut Vec<(usize, usize)>) -> Capacity {
        let (s, t) = (self.source(), self.sink());
        path.clear();
        let mut u = s;
        loop {
            if u == t {
                let pushed = path
                    .iter()
                    .map(|&(v, i)| self.adj[v][i].cap)
                    .min()
                    .unwrap_or(0);
                for &(v, i) in path.iter() {
                    let (to, rev) = {
                        let a = &mut self.adj[v][i];
                        a.cap -= pushed;
                        (a.to, a.rev)
                    };
                    self.adj[to][rev].cap += pushed;
                }
                return pushed;
            }
            let mut advanced = false;
            while next[u] < self.adj[u].len() {
                let a = &self.adj[u][next[u]];
                if a.cap > 0 && level[a.to] == level[u] + 1 {
                    path.push((u, next[u]));
                    u = a.to;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                // Dead end: retreat and skip the arc that led here.
                match path.pop() {
                    Some((prev, _)) => {
                        next[prev] += 1;
                        u = prev;
                    }
                    None => return 0,
                }
            }
        }
    }

    /// Computes the maximum flow, leaving the residual graph in place.
    pub fn maxflow(&mut self) -> Capacity {
        let n = self.adj.len();
        let mut level = vec![-1; n];
        let mut next = vec![0usize; n];
        let mut path = Vec::new();
        let mut flow: Capacity = 0;
        while self.bfs_levels(&mut level) {
            next.fill(0);
            loop {
                let pushed = self.augment(&level, &mut next, &mut path);
                if pushed == 0 {
                    break;
                }
                flow += pushed;
            }
        }
        self.compute_source_side();
        flow
    }

    fn compute_source_side(&mut self) {
        let mut seen = vec![false; self.adj.len()];
        let s = self.source();
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for a in &self.adj[u] {
                if a.cap > 0 && !seen[a.to] {
                    seen[a.to] = true;
                    stack.push(a.to);
                }
            }
        }
        seen.truncate(self.nodes);
        self.source_side = Some(seen);
    }

    /// Whether `node` lies in the source segment of the minimum cut.
    ///
    /// # Panics
    /// If called before [`maxflow`](Self::maxflow).
    pub fn in_source_segment(&self, node: usize) -> bool {
        self.source_side.as_ref().expect("maxflow not run")[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Instance {
        n: usize,
        terminals: Vec<(Capacity, Capacity)>,
        edges: Vec<(usize, usize, Capacity, Capacity)>,
    }

    impl Instance {
        fn cut_cost(&self, source_side: &[bool]) -> Capacity {
            let mut c = 0;
            for (i, &(s, t)) in self.terminals.iter().enumerate() {
                c += if source_side[i] { t } else { s };
            }
            for &(u, v, a, b) in &self.edges {
                if source_side[u] && !source_side[v] {
                    c += a;
                }
                if source_side[v] && !source_side[u] {
                    c += b;
                }
            }
            c
        }

        fn brute_force_min_cut(&self) -> Capacity {
            (0..1u32 << self.n)
                .map(|mask| {
                    let side: Vec<bool> = (0..self.n).map(|i| mask >> i & 1 == 1).collect();
                    self.cut_cost(&side)
                })
                .min()
                .unwrap()
        }
    }

    #[test]
    fn matches_enumeration_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=10);
            let terminals: Vec<_> = (0..n)
                .map(|_| (rng.random_range(0..20), rng.random_range(0..20)))
                .collect();
            let mut edges = Vec::new();
            for _ in 0..rng.random_range(0..3 * n) {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u != v {
                    edges.push((u, v, rng.random_range(0..15), rng.random_range(0..15)));
                }
            }
            let inst = Instance {
                n,
                terminals,
                edges,
            };
            let mut g = FlowGraph::new(n);
            for (i, &(s, t)) in inst.terminals.iter().enumerate() {
                g.add_terminal(i, s, t);
            }
            for &(u, v, a, b) in &inst.edges {
                g.add_edge(u, v, a, b);
            }
            let flow = g.maxflow();
            let best = inst.brute_force_min_cut();
            assert_eq!(flow, best);
            let side: Vec<bool> = (0..n).map(|i| g.in_source_segment(i)).collect();
            assert_eq!(inst.cut_cost(&side), best);
        }
    }

    #[test]
    fn long_chain_does_not_overflow_stack() {
        let n = 200_000;
        let mut g = FlowGraph::new(n);
        g.add_terminal(0, 5, 0);
        g.add_terminal(n - 1, 0, 5);
        for i in 0..n - 1 {
            g.add_edge(i, i + 1, 3, 3);
        }
        assert_eq!(g.maxflow(), 3);
    }

    #[test]
    fn isolated_nodes_go_to_sink() {
        let mut g = FlowGraph::new(3);
        g.add_terminal(1, 4, 1);
        assert_eq!(g.maxflow(), 1);
        assert!(!g.in_source_segment(0));
        assert!(g.in_source_segment(1));
        assert!(!g.in_source_segment(2));
    }
}
