//! Exact s-t max-flow / min-cut on small sparse networks.
//!
//! The solver is Dinic's algorithm over real-valued capacities with an
//! `f64::INFINITY` sentinel for uncuttable arcs. Networks here are tiny (one
//! node per blob plus one per cost term), so asymptotics matter less than
//! exactness: the public contract is that the returned flow equals the
//! minimum cut capacity and that the returned source side is the residual
//! reachability set, which never cuts an infinite arc when a finite cut
//! exists.

use crate::{Error, Result};

/// Capacity sentinel for arcs that must never cross the cut.
pub const INF: f64 = f64::INFINITY;

/// Residual capacities below this are treated as saturated.
const EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    /// Remaining (residual) capacity.
    cap: f64,
}

/// A directed flow network with a distinguished source and sink.
///
/// Arcs are added with a forward capacity; the paired reverse arc has
/// capacity 0 and exists only as a residual.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    source: usize,
    sink: usize,
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

/// Outcome of a max-flow solve.
#[derive(Debug, Clone)]
pub struct MaxFlowResult {
    /// Max-flow value = min-cut capacity.
    pub value: f64,
    /// `source_side[v]` is true iff `v` is reachable from the source in the
    /// residual graph; the cut is the arc set leaving this side.
    pub source_side: Vec<bool>,
}

impl FlowNetwork {
    /// A network over `n_nodes` nodes. Panics if `source == sink` or either
    /// is out of range.
    pub fn new(n_nodes: usize, source: usize, sink: usize) -> Self {
        assert!(source < n_nodes && sink < n_nodes && source != sink);
        FlowNetwork { source, sink, arcs: Vec::new(), adj: vec![Vec::new(); n_nodes] }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Add a directed arc `u -> v` with capacity `cap` (finite >= 0 or [`INF`]).
    pub fn add_arc(&mut self, u: usize, v: usize, cap: f64) {
        assert!(u < self.adj.len() && v < self.adj.len(), "arc endpoint out of range");
        assert!(cap >= 0.0 && !cap.is_nan(), "capacity must be >= 0 or INF");
        if u == v {
            return;
        }
        self.adj[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, cap });
        self.adj[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, cap: 0.0 });
    }

    /// Forward arcs as `(from, to, capacity)` in insertion order.
    pub fn forward_arcs(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.arcs.len() / 2);
        for (u, idxs) in self.adj.iter().enumerate() {
            for &e in idxs {
                if e % 2 == 0 {
                    out.push((u, self.arcs[e].to, self.arcs[e].cap));
                }
            }
        }
        out
    }

    /// Debug dump in DIMACS max-flow text format (1-indexed nodes).
    pub fn to_dimacs(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let arcs = self.forward_arcs();
        let _ = writeln!(s, "p max {} {}", self.n_nodes(), arcs.len());
        let _ = writeln!(s, "n {} s", self.source + 1);
        let _ = writeln!(s, "n {} t", self.sink + 1);
        for (u, v, cap) in arcs {
            if cap.is_infinite() {
                let _ = writeln!(s, "a {} {} inf", u + 1, v + 1);
            } else {
                let _ = writeln!(s, "a {} {} {}", u + 1, v + 1, cap);
            }
        }
        s
    }

    /// True iff the sink is reachable from the source using infinite arcs
    /// only — exactly the condition under which no finite cut exists.
    fn has_infinite_path(&self) -> bool {
        let mut seen = vec![false; self.n_nodes()];
        let mut stack = vec![self.source];
        seen[self.source] = true;
        while let Some(u) = stack.pop() {
            if u == self.sink {
                return true;
            }
            for &e in &self.adj[u] {
                let a = &self.arcs[e];
                if e % 2 == 0 && a.cap.is_infinite() && !seen[a.to] {
                    seen[a.to] = true;
                    stack.push(a.to);
                }
            }
        }
        false
    }

    fn bfs_levels(&self) -> Option<Vec<i32>> {
        let mut level = vec![-1; self.n_nodes()];
        let mut queue = std::collections::VecDeque::new();
        level[self.source] = 0;
        queue.push_back(self.source);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let a = &self.arcs[e];
                if a.cap > EPS && level[a.to] < 0 {
                    level[a.to] = level[u] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        if level[self.sink] >= 0 {
            Some(level)
        } else {
            None
        }
    }

    fn dfs_augment(&mut self, u: usize, pushed: f64, level: &[i32], iter: &mut [usize]) -> f64 {
        if u == self.sink {
            return pushed;
        }
        while iter[u] < self.adj[u].len() {
            let e = self.adj[u][iter[u]];
            let (to, cap) = (self.arcs[e].to, self.arcs[e].cap);
            if cap > EPS && level[to] == level[u] + 1 {
                let d = self.dfs_augment(to, pushed.min(cap), level, iter);
                if d > EPS {
                    self.arcs[e].cap -= d;
                    self.arcs[e ^ 1].cap += d;
                    return d;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    /// Solve max-flow on a copy of the network; the network itself is left
    /// untouched so callers can inspect original capacities afterwards.
    pub fn max_flow(&self) -> Result<MaxFlowResult> {
        if self.has_infinite_path() {
            return Err(Error::UnboundedCut);
        }
        let mut residual = self.clone();
        let mut value = 0.0;
        while let Some(level) = residual.bfs_levels() {
            let mut iter = vec![0usize; residual.n_nodes()];
            loop {
                let pushed = residual.dfs_augment(residual.source, INF, &level, &mut iter);
                if pushed <= EPS {
                    break;
                }
                value += pushed;
            }
        }
        let mut source_side = vec![false; residual.n_nodes()];
        let mut stack = vec![residual.source];
        source_side[residual.source] = true;
        while let Some(u) = stack.pop() {
            for &e in &residual.adj[u] {
                let a = &residual.arcs[e];
                if a.cap > EPS && !source_side[a.to] {
                    source_side[a.to] = true;
                    stack.push(a.to);
                }
            }
        }
        Ok(MaxFlowResult { value, source_side })
    }

    /// Capacity of the cut induced by a source-side indicator over the
    /// original capacities.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        let mut total = 0.0;
        for (u, v, cap) in self.forward_arcs() {
            if source_side[u] && !source_side[v] {
                total += cap;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_arc() {
        let mut net = FlowNetwork::new(2, 0, 1);
        net.add_arc(0, 1, 5.0);
        let r = net.max_flow().unwrap();
        assert_eq!(r.value, 5.0);
        assert_eq!(r.source_side, vec![true, false]);
    }

    #[test]
    fn disconnected_terminals() {
        let net = FlowNetwork::new(3, 0, 2);
        let r = net.max_flow().unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.source_side[0] && !r.source_side[2]);
    }

    #[test]
    fn diamond_matches_cut_enumeration() {
        // s=0, a=1, b=2, t=3; min over the four cuts {s}, {s,a}, {s,b},
        // {s,a,b} is 5.
        let mut net = FlowNetwork::new(4, 0, 3);
        net.add_arc(0, 1, 3.0);
        net.add_arc(0, 2, 2.0);
        net.add_arc(1, 3, 2.0);
        net.add_arc(2, 3, 3.0);
        net.add_arc(1, 2, 1.0);
        let r = net.max_flow().unwrap();
        assert!((r.value - 5.0).abs() < 1e-9);
        assert!((net.cut_capacity(&r.source_side) - r.value).abs() < 1e-9);
    }

    #[test]
    fn infinite_path_is_an_error() {
        let mut net = FlowNetwork::new(3, 0, 2);
        net.add_arc(0, 1, INF);
        net.add_arc(1, 2, INF);
        assert!(matches!(net.max_flow(), Err(Error::UnboundedCut)));
    }

    #[test]
    fn infinite_arc_off_any_path_is_fine() {
        let mut net = FlowNetwork::new(3, 0, 2);
        net.add_arc(0, 1, INF);
        net.add_arc(1, 2, 4.0);
        let r = net.max_flow().unwrap();
        assert!((r.value - 4.0).abs() < 1e-9);
        // The infinite arc stays inside the source side.
        assert!(r.source_side[1]);
    }

    /// Exhaustive min-cut over all source-side subsets containing s and not t.
    fn brute_force_min_cut(net: &FlowNetwork) -> f64 {
        let n = net.n_nodes();
        let others: Vec<usize> = (0..n).filter(|&v| v != net.source() && v != net.sink()).collect();
        let arcs = net.forward_arcs();
        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << others.len()) {
            let mut side = vec![false; n];
            side[net.source()] = true;
            for (i, &v) in others.iter().enumerate() {
                side[v] = mask & (1 << i) != 0;
            }
            let cap: f64 =
                arcs.iter().filter(|&&(u, v, _)| side[u] && !side[v]).map(|&(_, _, c)| c).sum();
            best = best.min(cap);
        }
        best
    }

    #[test]
    fn random_networks_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..120 {
            let extra = rng.random_range(1..=6);
            let n = extra + 2;
            let mut net = FlowNetwork::new(n, 0, 1);
            let n_arcs = rng.random_range(1..=14);
            for _ in 0..n_arcs {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u == v {
                    continue;
                }
                let cap = if rng.random_bool(0.1) { INF } else { rng.random_range(0.0..10.0) };
                net.add_arc(u, v, cap);
            }
            match net.max_flow() {
                Ok(r) => {
                    let want = brute_force_min_cut(&net);
                    assert!(
                        (r.value - want).abs() < 1e-9,
                        "case {case}: flow {} vs brute force {want}",
                        r.value
                    );
                    assert!((net.cut_capacity(&r.source_side) - r.value).abs() < 1e-9);
                }
                Err(Error::UnboundedCut) => {
                    assert_eq!(brute_force_min_cut(&net), f64::INFINITY, "case {case}");
                }
                Err(e) => panic!("unexpected error on case {case}: {e}"),
            }
        }
    }

    #[test]
    fn scaling_capacities_scales_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.random_range(3..=6);
            let mut arcs = Vec::new();
            for _ in 0..rng.random_range(2..=10) {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u != v {
                    arcs.push((u, v, rng.random_range(0.1..5.0)));
                }
            }
            let lambda = 3.5;
            let mut base = FlowNetwork::new(n, 0, 1);
            let mut scaled = FlowNetwork::new(n, 0, 1);
            for &(u, v, c) in &arcs {
                base.add_arc(u, v, c);
                scaled.add_arc(u, v, c * lambda);
            }
            let rb = base.max_flow().unwrap();
            let rs = scaled.max_flow().unwrap();
            assert!((rs.value - lambda * rb.value).abs() < 1e-9);
            // The scaled solver's cut is optimal for the base network too.
            assert!((base.cut_capacity(&rs.source_side) - rb.value).abs() < 1e-9);
        }
    }

    #[test]
    fn dimacs_dump_shape() {
        let mut net = FlowNetwork::new(3, 0, 2);
        net.add_arc(0, 1, 2.5);
        net.add_arc(1, 2, INF);
        let d = net.to_dimacs();
        assert!(d.starts_with("p max 3 2\n"));
        assert!(d.contains("n 1 s"));
        assert!(d.contains("n 3 t"));
        assert!(d.contains("a 1 2 2.5"));
        assert!(d.contains("a 2 3 inf"));
    }
}
