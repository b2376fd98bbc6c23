use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub len: f64,
    pub red: bool,
}

impl Edge {
    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

/// Multigraph on `0..n`. The position of an edge in `edges` is its id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Multigraph {
    pub n: usize,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// Surplus zero.
    Empty,
    /// Surplus one: the core is a single cycle.
    Cycle { len: f64 },
    Graph(KernelGraph),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelGraph {
    /// Kernel multigraph on `0..k`, edge lengths are path sums.
    pub graph: Multigraph,
    /// Original label of each kernel vertex.
    pub vertices: Vec<usize>,
    /// Original edge ids making up each kernel edge, in path order.
    pub paths: Vec<Vec<usize>>,
    /// Original degree-2 core vertices inside each kernel edge.
    pub interior: Vec<Vec<usize>>,
}

impl Kernel {
    pub fn total_length(&self) -> f64 {
        match self {
            Kernel::Empty => 0.0,
            Kernel::Cycle { len } => *len,
            Kernel::Graph(k) => k.graph.total_length(),
        }
    }

    pub fn surplus(&self) -> i64 {
        match self {
            Kernel::Empty => 0,
            Kernel::Cycle { .. } => 1,
            Kernel::Graph(k) => k.graph.edges.len() as i64 - k.graph.n as i64 + 1,
        }
    }

    pub fn is_three_regular(&self) -> bool {
        match self {
            Kernel::Graph(k) => k.graph.degrees().iter().all(|&d| d == 3),
            _ => false,
        }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl Multigraph {
    pub fn new(n: usize) -> Self {
        Multigraph { n, edges: Vec::new() }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut g = Multigraph::new(n);
        for &(u, v) in pairs {
            g.add_edge(u, v);
        }
        g
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> usize {
        self.add_edge_len(u, v, 1.0)
    }

    pub fn add_edge_len(&mut self, u: usize, v: usize, len: f64) -> usize {
        debug_assert!(u < self.n && v < self.n);
        self.edges.push(Edge { u, v, len, red: false });
        self.edges.len() - 1
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.edges.iter().enumerate() {
            if e.u >= self.n || e.v >= self.n {
                return invalid(format!("edge {i} has an endpoint out of range"));
            }
            if !(e.len.is_finite() && e.len >= 0.0) {
                return invalid(format!("edge {i} has length {}", e.len));
            }
        }
        Ok(())
    }

    /// Loops count twice.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for e in &self.edges {
            d[e.u] += 1;
            d[e.v] += 1;
        }
        d
    }

    /// `(neighbour, edge id)` lists; a loop is listed once.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, i));
            if !e.is_loop() {
                adj[e.v].push((e.u, i));
            }
        }
        adj
    }

    pub fn is_simple(&self) -> bool {
        let mut key = self.edge_key();
        if key.iter().any(|&(u, v)| u == v) {
            return false;
        }
        let before = key.len();
        key.dedup();
        key.len() == before
    }

    /// Sorted `(min, max)` endpoint pairs, with multiplicity.
    pub fn edge_key(&self) -> Vec<(usize, usize)> {
        let mut key: Vec<(usize, usize)> =
            self.edges.iter().map(|e| (e.u.min(e.v), e.u.max(e.v))).collect();
        key.sort_unstable();
        key
    }

    /// Component label of each vertex; labels follow the smallest vertex.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &adj[x] {
                    if label[y] == usize::MAX {
                        label[y] = count;
                        queue.push_back(y);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Vertex classes, largest first, ties by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let (label, count) = self.component_labels();
        let mut comps = vec![Vec::new(); count];
        for (v, &l) in label.iter().enumerate() {
            comps[l].push(v);
        }
        // labels were handed out in order of smallest vertex, so a stable sort
        // by size keeps the tie-break
        comps.sort_by(|a, b| b.len().cmp(&a.len()));
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.component_labels().1 == 1
    }

    /// Surplus of the sub-multigraph induced on a connected vertex set.
    pub fn surplus_of(&self, comp: &[usize]) -> Result<i64> {
        let (sub, _, _) = self.induced(comp);
        sub.surplus()
    }

    /// |E| - |V| + 1 for a connected graph.
    pub fn surplus(&self) -> Result<i64> {
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(self.edges.len() as i64 - self.n as i64 + 1)
    }

    /// Sub-multigraph induced on `verts`, plus maps new vertex -> old vertex
    /// and new edge -> old edge.
    pub fn induced(&self, verts: &[usize]) -> (Multigraph, Vec<usize>, Vec<usize>) {
        let mut pos = vec![usize::MAX; self.n];
        for (i, &v) in verts.iter().enumerate() {
            pos[v] = i;
        }
        let mut g = Multigraph::new(verts.len());
        let mut emap = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if pos[e.u] != usize::MAX && pos[e.v] != usize::MAX {
                g.edges.push(Edge { u: pos[e.u], v: pos[e.v], len: e.len, red: e.red });
                emap.push(i);
            }
        }
        (g, verts.to_vec(), emap)
    }

    /// Same vertex set, only the listed edges (in the given order).
    pub fn edge_subgraph(&self, ids: &[usize]) -> Multigraph {
        Multigraph { n: self.n, edges: ids.iter().map(|&i| self.edges[i].clone()).collect() }
    }

    /// Bridge flag per edge. Loops are never bridges.
    pub fn bridges(&self) -> Vec<bool> {
        let adj = self.adjacency();
        let n = self.n;
        let mut tin = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut bridge = vec![false; self.edges.len()];
        let mut timer = 0;
        let mut stack: Vec<(usize, usize, usize)> = Vec::new();
        for root in 0..n {
            if tin[root] != usize::MAX {
                continue;
            }
            tin[root] = timer;
            low[root] = timer;
            timer += 1;
            stack.push((root, usize::MAX, 0));
            while let Some(top) = stack.last_mut() {
                let (v, pe) = (top.0, top.1);
                if top.2 < adj[v].len() {
                    let (w, e) = adj[v][top.2];
                    top.2 += 1;
                    if e == pe || w == v {
                        continue;
                    }
                    if tin[w] == usize::MAX {
                        tin[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, e, 0));
                    } else {
                        low[v] = low[v].min(tin[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(parent) = stack.last() {
                        let p = parent.0;
                        low[p] = low[p].min(low[v]);
                        if low[v] > tin[p] {
                            bridge[pe] = true;
                        }
                    }
                }
            }
        }
        bridge
    }

    /// Edge ids whose removal keeps the graph connected.
    pub fn conne(&self) -> Result<Vec<usize>> {
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(self.bridges().iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i).collect())
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.len).sum()
    }

    /// 2-core followed by contraction of degree-2 paths.
    pub fn kernel(&self) -> Result<Kernel> {
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        let adj = self.adjacency();
        let (deg, edge_alive) = self.core_flags(&adj);
        let core_edges: Vec<usize> = (0..self.edges.len()).filter(|&i| edge_alive[i]).collect();
        if core_edges.is_empty() {
            return Ok(Kernel::Empty);
        }
        let is_kernel: Vec<bool> = deg.iter().map(|&d| d >= 3).collect();
        if !is_kernel.iter().any(|&b| b) {
            let len = core_edges.iter().map(|&i| self.edges[i].len).sum();
            return Ok(Kernel::Cycle { len });
        }
        let vertices: Vec<usize> = (0..self.n).filter(|&v| is_kernel[v]).collect();
        let mut idx = vec![usize::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            idx[v] = i;
        }
        let mut used = vec![false; self.edges.len()];
        let mut graph = Multigraph::new(vertices.len());
        let mut paths = Vec::new();
        let mut interior = Vec::new();
        for &k in &vertices {
            for &(_, e0) in &adj[k] {
                if !edge_alive[e0] || used[e0] {
                    continue;
                }
                used[e0] = true;
                let mut path = vec![e0];
                let mut inner = Vec::new();
                let mut len = self.edges[e0].len;
                let mut prev_edge = e0;
                let mut cur = self.edges[e0].other(k);
                while !is_kernel[cur] {
                    inner.push(cur);
                    let next = adj[cur]
                        .iter()
                        .map(|&(_, e)| e)
                        .find(|&e| edge_alive[e] && e != prev_edge && !used[e])
                        .expect("degree-2 core vertex has a second core edge");
                    used[next] = true;
                    path.push(next);
                    len += self.edges[next].len;
                    prev_edge = next;
                    cur = self.edges[next].other(cur);
                }
                graph.add_edge_len(idx[k], idx[cur], len);
                paths.push(path);
                interior.push(inner);
            }
        }
        Ok(Kernel::Graph(KernelGraph { graph, vertices, paths, interior }))
    }

    /// Core degrees (0 off the core) and core membership per edge.
    pub fn core_flags(&self, adj: &[Vec<(usize, usize)>]) -> (Vec<usize>, Vec<bool>) {
        let mut deg = self.degrees();
        let mut alive = vec![true; self.edges.len()];
        let mut stack: Vec<usize> = (0..self.n).filter(|&v| deg[v] == 1).collect();
        while let Some(v) = stack.pop() {
            if deg[v] != 1 {
                continue;
            }
            for &(w, e) in &adj[v] {
                if alive[e] {
                    alive[e] = false;
                    deg[v] -= 1;
                    deg[w] -= 1;
                    if deg[w] == 1 {
                        stack.push(w);
                    }
                }
            }
        }
        (deg, alive)
    }

    /// Length-weighted distances from `src`; `None` marks unreachable vertices.
    pub fn distances(&self, src: usize) -> Vec<Option<f64>> {
        self.dijkstra(&self.adjacency(), src)
            .into_iter()
            .map(|d| if d.is_finite() { Some(d) } else { None })
            .collect()
    }

    fn dijkstra(&self, adj: &[Vec<(usize, usize)>], src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(HeapItem(0.0, src));
        while let Some(HeapItem(d, x)) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            for &(y, e) in &adj[x] {
                let nd = d + self.edges[e].len;
                if nd < dist[y] {
                    dist[y] = nd;
                    heap.push(HeapItem(nd, y));
                }
            }
        }
        dist
    }

    pub fn diameter(&self) -> Result<f64> {
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        if self.n <= 1 {
            return Ok(0.0);
        }
        let adj = self.adjacency();
        if self.edges.len() + 1 == self.n {
            // trees: two sweeps are exact
            let d0 = self.dijkstra(&adj, 0);
            let far = argmax(&d0);
            let d1 = self.dijkstra(&adj, far);
            return Ok(d1[argmax(&d1)]);
        }
        let mut best: f64 = 0.0;
        for s in 0..self.n {
            let d = self.dijkstra(&adj, s);
            best = best.max(d.into_iter().fold(0.0, f64::max));
        }
        Ok(best)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for e in &self.edges {
            if e.len == 1.0 {
                let _ = writeln!(out, "{} {}", e.u, e.v);
            } else {
                let _ = writeln!(out, "{} {} {}", e.u, e.v, e.len);
            }
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Multigraph> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse { line, msg: "header must be `n m`".into() });
        }
        let num = |s: &str, line: usize| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer `{s}`") })
        };
        let n = num(head[0], line)?;
        let m = num(head[1], line)?;
        let mut g = Multigraph::new(n);
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() < 2 || f.len() > 3 {
                return Err(Error::Parse { line, msg: "expected `u v [len]`".into() });
            }
            let (u, v) = (num(f[0], line)?, num(f[1], line)?);
            if u >= n || v >= n {
                return Err(Error::Parse { line, msg: "endpoint out of range".into() });
            }
            let len = match f.get(2) {
                Some(s) => s.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("bad length `{s}`") })?,
                None => 1.0,
            };
            if !(len.is_finite() && len >= 0.0) {
                return Err(Error::Parse { line, msg: "length must be finite and nonnegative".into() });
            }
            g.add_edge_len(u, v, len);
        }
        if g.edges.len() != m {
            return Err(Error::Parse { line: 1, msg: format!("header says {m} edges, found {}", g.edges.len()) });
        }
        Ok(g)
    }
}

fn argmax(d: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in d.iter().enumerate() {
        if x > d[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta() -> Multigraph {
        Multigraph::from_pairs(2, &[(0, 1), (0, 1), (0, 1)])
    }

    fn k4() -> Multigraph {
        Multigraph::from_pairs(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    }

    #[test]
    fn components_tie_break() {
        let g = Multigraph::from_pairs(6, &[(3, 4), (4, 5), (5, 3), (0, 1), (1, 2), (2, 0)]);
        assert_eq!(g.components(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(Multigraph::new(3).components(), vec![vec![0], vec![1], vec![2]]);
        let p = Multigraph::from_pairs(4, &[(0, 1), (1, 2)]);
        assert_eq!(p.components(), vec![vec![0, 1, 2], vec![3]]);
        let q = Multigraph::from_pairs(4, &[(2, 3)]);
        assert_eq!(q.components(), vec![vec![2, 3], vec![0], vec![1]]);
    }

    #[test]
    fn surplus_examples() {
        let tree = Multigraph::from_pairs(5, &[(0, 1), (1, 2), (1, 3), (3, 4)]);
        assert_eq!(tree.surplus(), Ok(0));
        assert_eq!(theta().surplus(), Ok(2));
        assert_eq!(k4().surplus(), Ok(3));
        assert_eq!(Multigraph::new(2).surplus(), Err(Error::Disconnected));
        let g = Multigraph::from_pairs(5, &[(0, 1), (1, 2), (2, 0), (3, 4)]);
        assert_eq!(g.surplus_of(&[0, 1, 2]), Ok(1));
        assert_eq!(g.surplus_of(&[3, 4]), Ok(0));
        assert_eq!(g.surplus_of(&[0, 3]), Err(Error::Disconnected));
    }

    #[test]
    fn conne_examples() {
        let tree = Multigraph::from_pairs(4, &[(0, 1), (1, 2), (1, 3)]);
        assert!(tree.conne().unwrap().is_empty());
        let c5 = Multigraph::from_pairs(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        assert_eq!(c5.conne().unwrap(), vec![0, 1, 2, 3, 4]);
        let g = Multigraph::from_pairs(6, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)]);
        let want: Vec<usize> = (0..7).filter(|&i| {
            let mut h = g.clone();
            h.edges.remove(i);
            h.is_connected()
        }).collect();
        assert_eq!(want, vec![0, 1, 2, 4, 5, 6]);
        assert_eq!(g.conne().unwrap(), want);
        let loops = Multigraph::from_pairs(2, &[(0, 0), (0, 1)]);
        assert_eq!(loops.conne().unwrap(), vec![0]);
        assert_eq!(Multigraph::new(2).conne(), Err(Error::Disconnected));
    }

    #[test]
    fn kernel_examples() {
        match theta().kernel().unwrap() {
            Kernel::Graph(k) => {
                assert_eq!(k.graph.n, 2);
                assert_eq!(k.graph.edges.iter().map(|e| e.len).collect::<Vec<_>>(), vec![1.0, 1.0, 1.0]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(theta().kernel().unwrap().total_length(), 3.0);

        // paths of 2, 3, 4 unit edges between vertices 0 and 1
        let mut g = Multigraph::new(8);
        for p in [vec![0, 2, 1], vec![0, 3, 4, 1], vec![0, 5, 6, 7, 1]] {
            for w in p.windows(2) {
                g.add_edge(w[0], w[1]);
            }
        }
        let k = g.kernel().unwrap();
        let mut lens: Vec<f64> = match &k {
            Kernel::Graph(k) => k.graph.edges.iter().map(|e| e.len).collect(),
            _ => panic!(),
        };
        lens.sort_by(f64::total_cmp);
        assert_eq!(lens, vec![2.0, 3.0, 4.0]);
        assert_eq!(k.total_length(), 9.0);
        assert_eq!(k.surplus(), 2);

        let tree = Multigraph::from_pairs(4, &[(0, 1), (1, 2), (1, 3)]);
        assert_eq!(tree.kernel().unwrap(), Kernel::Empty);
        assert_eq!(Multigraph::new(1).kernel().unwrap(), Kernel::Empty);

        let mut lolli = Multigraph::from_pairs(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]);
        lolli.edges[0].len = 2.5;
        assert_eq!(lolli.kernel().unwrap(), Kernel::Cycle { len: 4.5 });
        assert!(k4().kernel().unwrap().is_three_regular());
    }

    #[test]
    fn kernel_with_loops_and_pendants() {
        // loop at 0, edge 0-1, loop at 1, pendant path at 1
        let g = Multigraph::from_pairs(4, &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 3)]);
        let k = g.kernel().unwrap();
        assert_eq!(k.surplus(), 2);
        assert!(k.is_three_regular());
        assert_eq!(k.total_length(), 3.0);
    }

    #[test]
    fn distance_examples() {
        let p = Multigraph::from_pairs(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(p.diameter(), Ok(3.0));
        let star = Multigraph::from_pairs(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(star.diameter(), Ok(2.0));
        let mut tri = Multigraph::new(3);
        tri.add_edge_len(0, 1, 1.0);
        tri.add_edge_len(1, 2, 2.0);
        tri.add_edge_len(2, 0, 4.0);
        assert_eq!(tri.diameter(), Ok(3.0));
        let g = Multigraph::from_pairs(3, &[(0, 1)]);
        assert_eq!(g.distances(0), vec![Some(0.0), Some(1.0), None]);
        assert_eq!(g.diameter(), Err(Error::Disconnected));
    }

    #[test]
    fn total_length_examples() {
        assert_eq!(Multigraph::new(0).total_length(), 0.0);
        assert_eq!(theta().total_length(), 3.0);
        let mut l = Multigraph::new(1);
        l.add_edge_len(0, 0, 2.5);
        assert_eq!(l.total_length(), 2.5);
    }

    #[test]
    fn edge_list_round_trip() {
        let mut g = Multigraph::from_pairs(3, &[(0, 1), (1, 1)]);
        g.add_edge_len(2, 0, 0.25);
        g.edges[0].red = true;
        let h = Multigraph::parse_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(h.n, 3);
        assert_eq!(h.edge_key(), g.edge_key());
        assert_eq!(h.edges[2].len, 0.25);
        assert!(!h.edges[0].red);
        assert!(Multigraph::parse_edge_list("2 1\n0 5\n").is_err());
        assert!(Multigraph::parse_edge_list("2 2\n0 1\n").is_err());
    }
}
