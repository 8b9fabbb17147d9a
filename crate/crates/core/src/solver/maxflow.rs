//! Dinic's maximum flow on real capacities.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: f64,
}

/// A directed flow network; arcs are stored in forward/backward pairs.
#[derive(Clone, Debug)]
pub struct FlowGraph {
    adj: Vec<Vec<usize>>,
    arcs: Vec<Arc>,
}

impl FlowGraph {
    pub fn new(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n], arcs: Vec::new() }
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64) {
        debug_assert!(cap >= 0.0);
        if cap == 0.0 || u == v {
            return;
        }
        self.adj[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, cap });
        self.adj[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, cap: 0.0 });
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.n()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap > 0.0 && level[arc.to] == usize::MAX {
                    level[arc.to] = level[u] + 1;
                    q.push_back(arc.to);
                }
            }
        }
        level
    }

    /// One blocking flow on the level graph, found by iterative DFS.
    fn blocking_flow(&mut self, s: usize, t: usize, level: &mut [usize]) -> f64 {
        let mut next = vec![0; self.n()];
        let mut path: Vec<usize> = Vec::new();
        let mut total = 0.0;
        let mut u = s;
        loop {
            if u == t {
                let b = path.iter().map(|&a| self.arcs[a].cap).fold(f64::INFINITY, f64::min);
                let mut cut_at = path.len();
                for (k, &a) in path.iter().enumerate() {
                    self.arcs[a].cap -= b;
                    self.arcs[a ^ 1].cap += b;
                    if self.arcs[a].cap <= 0.0 && cut_at == path.len() {
                        cut_at = k;
                    }
                }
                total += b;
                path.truncate(cut_at);
                u = path.last().map_or(s, |&a| self.arcs[a].to);
                continue;
            }
            let mut advanced = false;
            while next[u] < self.adj[u].len() {
                let a = self.adj[u][next[u]];
                let arc = &self.arcs[a];
                if arc.cap > 0.0 && level[arc.to] == level[u] + 1 {
                    path.push(a);
                    u = arc.to;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                if u == s {
                    return total;
                }
                level[u] = usize::MAX;
                let a = path.pop().unwrap();
                u = self.arcs[a ^ 1].to;
                next[u] += 1;
            }
        }
    }

    /// Returns the maximum flow value; afterwards [`Self::source_side`] gives a
    /// minimum cut.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            let mut level = self.levels(s);
            if level[t] == usize::MAX {
                return flow;
            }
            flow += self.blocking_flow(s, t, &mut level);
        }
    }

    /// Nodes reachable from `s` in the residual graph.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).iter().map(|&l| l != usize::MAX).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1: max flow 23.
        let mut g = FlowGraph::new(6);
        for (u, v, c) in [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (2, 1, 4.0),
            (1, 3, 12.0),
            (3, 2, 9.0),
            (2, 4, 14.0),
            (4, 3, 7.0),
            (3, 5, 20.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 23.0);
        let side = g.source_side(0);
        assert!(side[0] && !side[5]);
    }

    #[test]
    fn infinite_arcs_are_never_cut() {
        let mut g = FlowGraph::new(4);
        g.add_edge(0, 1, 2.0);
        g.add_edge(1, 2, f64::INFINITY);
        g.add_edge(2, 3, 5.0);
        g.add_edge(0, 2, 1.0);
        assert_eq!(g.max_flow(0, 3), 3.0);
    }
}
