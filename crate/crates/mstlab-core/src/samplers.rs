use std::collections::{HashSet, VecDeque};

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::multigraph::{Kernel, KernelGraph, Multigraph};
use crate::rng::Stream;
use crate::stats::{double_factorial, factorial};

pub const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeSequence {
    pub d: Vec<usize>,
}

impl DegreeSequence {
    pub fn new(d: Vec<usize>) -> Self {
        DegreeSequence { d }
    }

    pub fn regular(n: usize, k: usize) -> Self {
        DegreeSequence { d: vec![k; n] }
    }

    pub fn total(&self) -> usize {
        self.d.iter().sum()
    }
}

pub fn half_edge_owners(d: &DegreeSequence) -> Vec<usize> {
    d.d.iter().enumerate().flat_map(|(v, &k)| std::iter::repeat_n(v, k)).collect()
}

/// Uniform pairing of half-edges; loops and multi-edges are kept.
pub fn configuration_model<R: Rng + ?Sized>(d: &DegreeSequence, rng: &mut R) -> Result<Multigraph> {
    if d.total() % 2 == 1 {
        return invalid("degree sum is odd");
    }
    let mut half = half_edge_owners(d);
    half.shuffle(rng);
    let mut g = Multigraph::new(d.d.len());
    g.edges.reserve(half.len() / 2);
    for p in half.chunks_exact(2) {
        g.add_edge(p[0], p[1]);
    }
    Ok(g)
}

/// Exact probability that the configuration model on `d` produces `g`.
pub fn cm_pmf(g: &Multigraph, d: &DegreeSequence) -> Result<BigRational> {
    if g.n != d.d.len() || g.degrees() != d.d {
        return invalid("graph does not have the given degree sequence");
    }
    let l = d.total();
    let mut num = BigInt::one();
    for &k in &d.d {
        num *= factorial(k);
    }
    let key = g.edge_key();
    let mut den = if l == 0 { BigInt::one() } else { double_factorial(l - 1) };
    let mut i = 0;
    while i < key.len() {
        let mut j = i;
        while j < key.len() && key[j] == key[i] {
            j += 1;
        }
        let x = j - i;
        den *= factorial(x);
        if key[i].0 == key[i].1 {
            den *= BigInt::from(2u32).pow(x as u32);
        }
        i = j;
    }
    Ok(BigRational::new(num, den))
}

pub const SIMPLE_ATTEMPTS: u64 = 100_000;

/// Configuration model conditioned on being simple.
pub fn uniform_simple_regular<R: Rng + ?Sized>(n: usize, degree: usize, rng: &mut R) -> Result<Multigraph> {
    if (n * degree) % 2 == 1 {
        return invalid("n * degree must be even");
    }
    if n > 0 && degree > n - 1 {
        return invalid("no simple graph with this degree exists");
    }
    let d = DegreeSequence::regular(n, degree);
    let mut half = half_edge_owners(&d);
    for _ in 0..SIMPLE_ATTEMPTS {
        half.shuffle(rng);
        if half.chunks_exact(2).any(|p| p[0] == p[1]) {
            continue;
        }
        let g = Multigraph::from_pairs(n, &half.chunks_exact(2).map(|p| (p[0], p[1])).collect::<Vec<_>>());
        if g.is_simple() {
            return Ok(g);
        }
    }
    Err(Error::RejectionCap(SIMPLE_ATTEMPTS))
}

pub fn er_threshold(n: usize, lambda: f64) -> f64 {
    let n = n as f64;
    (1.0 / n + lambda * n.powf(-4.0 / 3.0)).clamp(0.0, 1.0)
}

/// Lambda at which the threshold equals `p`.
pub fn er_lambda(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    (p - 1.0 / nf) * nf.powf(4.0 / 3.0)
}

fn pair_count(n: usize) -> u64 {
    (n as u64) * (n as u64).saturating_sub(1) / 2
}

fn decode_pair(n: usize, k: u64) -> (usize, usize) {
    let nf = n as f64;
    let b = 2.0 * nf - 1.0;
    let mut i = ((b - (b * b - 8.0 * k as f64).max(0.0).sqrt()) / 2.0).floor() as u64;
    let n = n as u64;
    let off = |i: u64| i * (2 * n - i - 1) / 2;
    while i > 0 && off(i) > k {
        i -= 1;
    }
    while off(i + 1) <= k {
        i += 1;
    }
    let j = i + 1 + (k - off(i));
    (i as usize, j as usize)
}

/// The coupled Erdős–Rényi family: one uniform variable per pair, revealed
/// lazily up to the largest threshold asked for.
pub struct ErProcess {
    pub n: usize,
    explored: f64,
    edges: Vec<(u32, u32, f64)>,
    present: HashSet<u64>,
    rng: Stream,
    sorted: bool,
}

impl ErProcess {
    pub fn new(n: usize, rng: Stream) -> Self {
        ErProcess { n, explored: 0.0, edges: Vec::new(), present: HashSet::new(), rng, sorted: true }
    }

    /// Reveal every pair whose variable is at most `p`.
    pub fn explore(&mut self, p: f64) {
        let p = p.clamp(0.0, 1.0);
        if p <= self.explored {
            return;
        }
        let old = self.explored;
        let q = (p - old) / (1.0 - old);
        let total = pair_count(self.n);
        let fresh = self.present.is_empty();
        let mut k: u64 = 0;
        let lq = (-q).ln_1p();
        while k < total {
            if q < 1.0 {
                let u: f64 = self.rng.random();
                let skip = ((1.0 - u).ln() / lq).floor();
                if !skip.is_finite() || skip >= (total - k) as f64 {
                    break;
                }
                k += skip as u64;
            }
            if fresh || !self.present.contains(&k) {
                let (i, j) = decode_pair(self.n, k);
                let u = old + (p - old) * (1.0 - self.rng.random::<f64>());
                self.edges.push((i as u32, j as u32, u.min(p)));
                self.present.insert(k);
            }
            k += 1;
        }
        self.explored = p;
        self.sorted = false;
    }

    fn sort(&mut self) {
        if !self.sorted {
            self.edges.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
            self.sorted = true;
        }
    }

    /// Revealed pairs with variable at most `p`, in increasing order.
    pub fn edges_upto(&mut self, p: f64) -> &[(u32, u32, f64)] {
        self.explore(p);
        self.sort();
        let k = self.edges.partition_point(|e| e.2 <= p);
        &self.edges[..k]
    }

    /// ER(n, lambda); edge ids follow increasing weight.
    pub fn graph(&mut self, lambda: f64) -> Multigraph {
        self.weighted(lambda).0
    }

    pub fn weighted(&mut self, lambda: f64) -> (Multigraph, Vec<f64>) {
        let p = er_threshold(self.n, lambda);
        let n = self.n;
        let es = self.edges_upto(p);
        let mut g = Multigraph::new(n);
        g.edges.reserve(es.len());
        let mut w = Vec::with_capacity(es.len());
        for &(u, v, x) in es {
            g.add_edge(u as usize, v as usize);
            w.push(x);
        }
        (g, w)
    }
}

/// Rooted labelled tree; children are listed in increasing label order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedTree {
    pub parent: Vec<usize>,
    pub root: usize,
    pub children: Vec<Vec<usize>>,
}

impl RootedTree {
    pub fn from_parent(parent: Vec<usize>) -> Result<RootedTree> {
        let m = parent.len();
        let roots: Vec<usize> = (0..m).filter(|&v| parent[v] == NONE).collect();
        if roots.len() != 1 {
            return invalid("a rooted tree has exactly one root");
        }
        let mut children = vec![Vec::new(); m];
        for v in 0..m {
            if parent[v] != NONE {
                if parent[v] >= m {
                    return invalid("parent out of range");
                }
                children[parent[v]].push(v);
            }
        }
        let t = RootedTree { parent, root: roots[0], children };
        if t.dfs_order().len() != m {
            return invalid("parent array has a cycle");
        }
        Ok(t)
    }

    pub fn single() -> RootedTree {
        RootedTree { parent: vec![NONE], root: 0, children: vec![vec![]] }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Preorder with children visited in list order.
    pub fn dfs_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            if out.len() > self.len() {
                break;
            }
            for &c in self.children[v].iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn depths(&self) -> Vec<usize> {
        let mut d = vec![0; self.len()];
        for v in self.dfs_order() {
            if v != self.root {
                d[v] = d[self.parent[v]] + 1;
            }
        }
        d
    }

    pub fn height_of(&self, mut u: usize) -> usize {
        let mut h = 0;
        while self.parent[u] != NONE {
            u = self.parent[u];
            h += 1;
        }
        h
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// k-th ancestor; the 0-th is `u` itself.
    pub fn ancestor(&self, mut u: usize, k: usize) -> usize {
        for _ in 0..k {
            u = self.parent[u];
        }
        u
    }

    /// Heights along the depth-first order.
    pub fn height_function(&self) -> Vec<usize> {
        let d = self.depths();
        self.dfs_order().into_iter().map(|v| d[v]).collect()
    }

    pub fn to_multigraph(&self) -> Multigraph {
        let mut g = Multigraph::new(self.len());
        for v in 0..self.len() {
            if self.parent[v] != NONE {
                g.add_edge(self.parent[v], v);
            }
        }
        g
    }

    /// Number of siblings of `v` with a larger label.
    fn larger_siblings(&self, v: usize) -> usize {
        let p = self.parent[v];
        if p == NONE {
            return 0;
        }
        let sib = &self.children[p];
        sib.len() - 1 - sib.iter().position(|&c| c == v).expect("child listed under its parent")
    }

    /// |R(v, t)| for every v.
    pub fn r_sizes(&self) -> Vec<u64> {
        let mut s = vec![0u64; self.len()];
        for v in self.dfs_order() {
            if v != self.root {
                s[v] = s[self.parent[v]] + self.larger_siblings(v) as u64;
            }
        }
        s
    }

    /// g(t) = |A_1(t)|.
    pub fn g(&self) -> u64 {
        self.r_sizes().iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RSets {
    /// `(k-th ancestor, its children above the (k-1)-th ancestor)` for k = 1..=ht(v).
    pub per_ancestor: Vec<(usize, Vec<usize>)>,
    pub union: Vec<usize>,
}

pub fn r_sets(t: &RootedTree, v: usize) -> RSets {
    let mut per_ancestor = Vec::new();
    let mut below = v;
    while t.parent[below] != NONE {
        let a = t.parent[below];
        let set: Vec<usize> = t.children[a].iter().copied().filter(|&u| u > below).collect();
        per_ancestor.push((a, set));
        below = a;
    }
    let mut union: Vec<usize> = per_ancestor.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    union.sort_unstable();
    RSets { per_ancestor, union }
}

/// |A_s(t)|: s distinct marks (v, u), u in R(v, t), listed in canonical order.
pub fn a_s_count(t: &RootedTree, s: usize) -> BigInt {
    binomial(BigInt::from(t.g()), BigInt::from(s))
}

/// Uniform element of A_s(t) as `(v, u)` pairs sorted by `v` then `u`.
pub fn a_s_sample<R: Rng + ?Sized>(t: &RootedTree, s: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let sizes = t.r_sizes();
    let g: u64 = sizes.iter().sum();
    if (g as u128) < s as u128 {
        return None;
    }
    let mut picks: Vec<u64> =
        rand::seq::index::sample(rng, g as usize, s).into_iter().map(|i| i as u64).collect();
    picks.sort_unstable();
    let mut out = Vec::with_capacity(s);
    let mut start = 0u64;
    let mut p = 0;
    for v in 0..t.len() {
        let end = start + sizes[v];
        if p < picks.len() && picks[p] < end {
            let r = r_sets(t, v).union;
            while p < picks.len() && picks[p] < end {
                out.push((v, r[(picks[p] - start) as usize]));
                p += 1;
            }
        }
        start = end;
    }
    Some(out)
}

/// Uniform over the m^(m-1) rooted labelled trees on `0..m`.
pub fn uniform_labeled_tree<R: Rng + ?Sized>(m: usize, rng: &mut R) -> RootedTree {
    assert!(m >= 1, "a tree needs at least one vertex");
    if m == 1 {
        return RootedTree::single();
    }
    let mut adj = vec![Vec::new(); m];
    if m == 2 {
        adj[0].push(1);
        adj[1].push(0);
    } else {
        let seq: Vec<usize> = (0..m - 2).map(|_| rng.random_range(0..m)).collect();
        for (u, v) in prufer_decode(m, &seq) {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let root = rng.random_range(0..m);
    let mut parent = vec![NONE; m];
    let mut seen = vec![false; m];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                parent[y] = x;
                queue.push_back(y);
            }
        }
    }
    let mut children = vec![Vec::new(); m];
    for v in 0..m {
        if parent[v] != NONE {
            children[parent[v]].push(v);
        }
    }
    RootedTree { parent, root, children }
}

/// Linear-time Prüfer decoding.
pub fn prufer_decode(m: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; m];
    for &a in seq {
        degree[a] += 1;
    }
    let mut edges = Vec::with_capacity(m - 1);
    let mut ptr = (0..m).find(|&i| degree[i] == 1).unwrap_or(0);
    let mut leaf = ptr;
    for &a in seq {
        edges.push((leaf, a));
        degree[a] -= 1;
        if degree[a] == 1 && a < ptr {
            leaf = a;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    edges.push((leaf, m - 1));
    edges
}

/// Envelope for g(t) over uniform trees on m vertices. Exact (the largest
/// possible g) for small m, a calibrated multiple of m^{3/2} beyond.
pub fn g_envelope(m: usize) -> u64 {
    let hard = if m >= 2 { ((m - 1) * (m - 2) / 2) as u64 } else { 0 };
    let soft = (3.0 * (m as f64).powf(1.5)).ceil() as u64;
    hard.min(soft)
}

fn max_surplus(m: usize) -> usize {
    if m < 3 {
        0
    } else {
        (m - 1) * (m - 2) / 2
    }
}

pub const TILT_ATTEMPTS: u64 = 50_000_000;

/// Tree drawn proportionally to `weight(g(t))` using the running envelope.
fn tilted_tree<R: Rng + ?Sized>(
    m: usize,
    rng: &mut R,
    weight: impl Fn(u64, u64) -> f64,
) -> Result<(RootedTree, u64)> {
    let hard = max_surplus(m) as u64;
    let mut cap = g_envelope(m);
    for _ in 0..TILT_ATTEMPTS {
        let t = uniform_labeled_tree(m, rng);
        let g = t.g();
        if g > cap {
            // the calibrated envelope was too small; widen it
            cap = (2 * cap).min(hard).max(g);
            continue;
        }
        if rng.random::<f64>() < weight(g, cap) {
            return Ok((t, g));
        }
    }
    Err(Error::RejectionCap(TILT_ATTEMPTS))
}

/// Uniform connected simple graph on `0..m` with surplus `s`.
pub fn sample_h_ms<R: Rng + ?Sized>(m: usize, s: usize, rng: &mut R) -> Result<Multigraph> {
    if m == 0 || s > max_surplus(m) {
        return invalid(format!("no connected simple graph on {m} vertices has surplus {s}"));
    }
    let (t, _) = tilted_tree(m, rng, |g, cap| {
        if g < s as u64 {
            return 0.0;
        }
        (0..s as u64).map(|i| (g - i) as f64 / (cap - i) as f64).product()
    })?;
    let marks = a_s_sample(&t, s, rng).expect("tilted tree has enough marks");
    let mut h = t.to_multigraph();
    for (v, u) in marks {
        h.add_edge(v, u);
    }
    Ok(h)
}

/// Erdős–Rényi on `0..m` conditioned to be connected.
pub fn sample_gmp<R: Rng + ?Sized>(m: usize, p: f64, rng: &mut R) -> Result<Multigraph> {
    if !(p > 0.0 && p < 1.0) {
        return invalid("p must lie in (0, 1)");
    }
    if m == 0 {
        return invalid("m must be positive");
    }
    let lq = -(1.0 - p).ln();
    let slack = g_envelope(m) as f64 - 0.63 * (m as f64).powf(1.5);
    if lq * slack.max(0.0) > 40.0 {
        return invalid("tilt envelope too loose for this (m, p)");
    }
    let (t, _) = tilted_tree(m, rng, |g, cap| (-(lq * (cap - g) as f64)).exp())?;
    let mut h = t.to_multigraph();
    for v in 0..m {
        for u in r_sets(&t, v).union {
            if rng.random::<f64>() < p {
                h.add_edge(v, u);
            }
        }
    }
    Ok(h)
}

/// |E(core(H))|, the kernel length with unit edge lengths.
pub fn core_edge_count(h: &Multigraph) -> Result<usize> {
    let adj = h.adjacency();
    let (_, alive) = h.core_flags(&adj);
    if !h.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(alive.iter().filter(|&&a| a).count())
}

/// H_{m,s} biased by its core edge count.
pub fn length_biased_h_ms<R: Rng + ?Sized>(m: usize, s: usize, rng: &mut R) -> Result<Multigraph> {
    if s < 2 {
        return invalid("length biasing needs surplus at least 2");
    }
    // the core never has more edges than the whole graph
    let cap = (m - 1 + s) as f64;
    for _ in 0..TILT_ATTEMPTS {
        let h = sample_h_ms(m, s, rng)?;
        let l = core_edge_count(&h)? as f64;
        if rng.random::<f64>() * cap < l {
            return Ok(h);
        }
    }
    Err(Error::RejectionCap(TILT_ATTEMPTS))
}

/// Uniform plane tree in which `k[i]` vertices have `i` children.
/// Vertices are labelled in depth-first order.
pub fn uniform_plane_tree_child_sequence<R: Rng + ?Sized>(k: &[usize], rng: &mut R) -> Result<RootedTree> {
    let m: usize = k.iter().sum();
    let edges: usize = k.iter().enumerate().map(|(i, &c)| i * c).sum();
    if m == 0 || edges != m - 1 {
        return invalid("child sequence must satisfy sum k_i = m and sum i k_i = m - 1");
    }
    let mut word: Vec<usize> = k.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c)).collect();
    word.shuffle(rng);
    // cycle lemma: start just after the first position where the walk is lowest
    let mut s: i64 = 0;
    let mut best = (0i64, 0usize);
    for (j, &c) in word.iter().enumerate() {
        s += c as i64 - 1;
        if s < best.0 {
            best = (s, j + 1);
        }
    }
    word.rotate_left(best.1 % m);
    Ok(plane_tree_from_preorder(&word))
}

pub fn plane_tree_from_preorder(counts: &[usize]) -> RootedTree {
    let m = counts.len();
    let mut parent = vec![NONE; m];
    let mut children = vec![Vec::new(); m];
    let mut open: Vec<(usize, usize)> = Vec::new();
    for (v, &c) in counts.iter().enumerate() {
        if let Some(top) = open.last_mut() {
            parent[v] = top.0;
            children[top.0].push(v);
            top.1 -= 1;
            if top.1 == 0 {
                open.pop();
            }
        }
        if c > 0 {
            open.push((v, c));
        }
    }
    RootedTree { parent, root: 0, children }
}

/// Vertex count hanging off each kernel edge. A vertex attached to a kernel
/// vertex goes to the incident kernel edge with the smallest id.
pub fn pendant_sizes(h: &Multigraph) -> Result<Option<(KernelGraph, Vec<usize>)>> {
    pendant_sizes_by(h, |ends| ends.iter().copied().min().expect("kernel vertex has edges"))
}

/// As `pendant_sizes`, but a kernel vertex goes to a uniform incident
/// kernel half-edge (a loop counts twice).
pub fn pendant_sizes_random<R: Rng + ?Sized>(h: &Multigraph, rng: &mut R) -> Result<Option<(KernelGraph, Vec<usize>)>> {
    pendant_sizes_by(h, |ends| ends[rng.random_range(0..ends.len())])
}

fn pendant_sizes_by(
    h: &Multigraph,
    mut pick: impl FnMut(&[usize]) -> usize,
) -> Result<Option<(KernelGraph, Vec<usize>)>> {
    let k = match h.kernel()? {
        Kernel::Graph(k) => k,
        _ => return Ok(None),
    };
    let mut owner = vec![NONE; h.n];
    for (i, inner) in k.interior.iter().enumerate() {
        for &v in inner {
            owner[v] = i;
        }
    }
    let mut ends = vec![Vec::new(); k.vertices.len()];
    for (i, e) in k.graph.edges.iter().enumerate() {
        ends[e.u].push(i);
        ends[e.v].push(i);
    }
    for (x, inc) in ends.iter().enumerate() {
        owner[k.vertices[x]] = pick(inc);
    }
    let adj = h.adjacency();
    let mut queue: VecDeque<usize> = (0..h.n).filter(|&v| owner[v] != NONE).collect();
    while let Some(x) = queue.pop_front() {
        for &(y, _) in &adj[x] {
            if owner[y] == NONE {
                owner[y] = owner[x];
                queue.push_back(y);
            }
        }
    }
    let mut sizes = vec![0usize; k.graph.edges.len()];
    for &o in &owner {
        sizes[o] += 1;
    }
    Ok(Some((k, sizes)))
}
