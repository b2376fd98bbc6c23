use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Exp, Exp1};

use crate::cyclebreak::{kept_by_arrival, poisson, shape};
use crate::error::{invalid, Result};
use crate::multigraph::Multigraph;
use crate::samplers::{configuration_model, half_edge_owners, DegreeSequence};
use crate::unionfind::UnionFind;

#[derive(Clone, Debug)]
pub struct PercOutcome {
    /// Surviving edges, in original id order.
    pub graph: Multigraph,
    /// Original id of each surviving edge.
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    /// Lengths of the surviving edges when the source carried them.
    pub lengths: Option<Vec<f64>>,
}

fn split_edges(h: &Multigraph, keep: &[bool], lengths: Option<&[f64]>) -> PercOutcome {
    let kept: Vec<usize> = (0..h.m()).filter(|&i| keep[i]).collect();
    let removed = (0..h.m()).filter(|&i| !keep[i]).collect();
    let mut graph = h.edge_subgraph(&kept);
    if let Some(l) = lengths {
        for (e, &i) in graph.edges.iter_mut().zip(&kept) {
            e.len = l[i];
        }
    }
    let lengths = lengths.map(|l| kept.iter().map(|&i| l[i]).collect());
    PercOutcome { graph, kept, removed, lengths }
}

/// Keeps each edge independently with probability `p`.
pub fn perc<R: Rng + ?Sized>(h: &Multigraph, p: f64, rng: &mut R) -> Result<PercOutcome> {
    if !(0.0..=1.0).contains(&p) {
        return invalid("retention probability must lie in [0, 1]");
    }
    let keep: Vec<bool> = (0..h.m()).map(|_| rng.random::<f64>() < p).collect();
    Ok(split_edges(h, &keep, None))
}

/// Solves 1/(1+t) = 1/2 + lambda n^{-1/3}.
pub fn t_of_lambda(n: usize, lambda: f64) -> Result<f64> {
    let c = (n as f64).cbrt();
    if !(lambda.abs() < c / 2.0) {
        return invalid(format!("|lambda| must be below n^(1/3)/2 = {}", c / 2.0));
    }
    Ok(1.0 / (0.5 + lambda / c) - 1.0)
}

pub fn retention(n: usize, lambda: f64) -> f64 {
    0.5 + lambda / (n as f64).cbrt()
}

#[derive(Clone, Debug)]
pub struct Marking {
    /// Exponential(1) length per original edge.
    pub lengths: Vec<f64>,
    pub marked: Vec<bool>,
    pub steps: u64,
    /// Unmarked edges with their lengths.
    pub rem: PercOutcome,
}

impl Marking {
    pub fn shape_of_rem(&self) -> Multigraph {
        shape(&self.rem.graph)
    }
}

/// Exponential(1) lengths, then Poisson(t * total length) length-biased
/// marking steps; nothing is ever removed.
pub fn poisson_marking<R: Rng + ?Sized>(h: &Multigraph, t: f64, rng: &mut R) -> Result<Marking> {
    if !(t >= 0.0) {
        return invalid("t must be nonnegative");
    }
    let lengths: Vec<f64> = (0..h.m()).map(|_| rng.sample(Exp1)).collect();
    let total: f64 = lengths.iter().sum();
    let steps = poisson(t * total, rng);
    let mut marked = vec![false; h.m()];
    if steps > 0 {
        let pick = WeightedIndex::new(&lengths).expect("positive lengths");
        for _ in 0..steps {
            marked[pick.sample(rng)] = true;
        }
    }
    let keep: Vec<bool> = marked.iter().map(|&m| !m).collect();
    let rem = split_edges(h, &keep, Some(&lengths));
    Ok(Marking { lengths, marked, steps, rem })
}

/// Uniform pairing of a uniform subset of all but 2m half-edges (Q1), then
/// of the remaining 2m half-edges on top (Q2). Q1's edges come first in Q2.
pub fn half_edge_coupling<R: Rng + ?Sized>(
    d: &DegreeSequence,
    m: usize,
    rng: &mut R,
) -> Result<(Multigraph, Multigraph)> {
    let (q1, q2, _) = coupled_pairing(d, m, rng)?;
    Ok((q1, q2))
}

fn coupled_pairing<R: Rng + ?Sized>(
    d: &DegreeSequence,
    m: usize,
    rng: &mut R,
) -> Result<(Multigraph, Multigraph, Vec<usize>)> {
    let l = d.total();
    if l % 2 == 1 {
        return invalid("degree sum is odd");
    }
    if 2 * m > l {
        return invalid("cannot set aside more half-edges than exist");
    }
    let mut half = half_edge_owners(d);
    half.shuffle(rng);
    let first = l - 2 * m;
    let mut q2 = Multigraph::new(d.d.len());
    for p in half.chunks_exact(2) {
        q2.add_edge(p[0], p[1]);
    }
    let q1 = q2.edge_subgraph(&(0..first / 2).collect::<Vec<_>>());
    Ok((q1, q2, half))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeStats {
    /// Fractions of vertices with degree 0..=3.
    pub histogram: [f64; 4],
    /// n^{1/3} (sum d^2 / sum d - 2).
    pub statistic: f64,
}

/// Removes `m` uniform edges from a fresh configuration-model G_{n,3}.
pub fn degree_stats_after_removal<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<DegreeStats> {
    if n % 2 == 1 || n == 0 {
        return invalid("n must be even and positive");
    }
    if 2 * m > 3 * n {
        return invalid("m exceeds the edge count 3n/2");
    }
    let g = configuration_model(&DegreeSequence::regular(n, 3), rng)?;
    let mut deg = vec![3u8; n];
    for i in rand::seq::index::sample(rng, g.m(), m) {
        let e = &g.edges[i];
        deg[e.u] -= 1;
        deg[e.v] -= 1;
    }
    let mut counts = [0usize; 4];
    for &k in &deg {
        counts[k as usize] += 1;
    }
    let s1: f64 = deg.iter().map(|&k| k as f64).sum();
    let s2: f64 = deg.iter().map(|&k| (k as f64).powi(2)).sum();
    let statistic = if s1 > 0.0 { (n as f64).cbrt() * (s2 / s1 - 2.0) } else { f64::NAN };
    Ok(DegreeStats { histogram: counts.map(|c| c as f64 / n as f64), statistic })
}

/// sigma_1 / (sigma_3 - 4 sigma_1)^{2/3} with sigma_k = E[D^k], `pmf[k] = P(D = k)`.
pub fn criticality_prefactor(pmf: &[f64]) -> Result<f64> {
    if pmf.iter().any(|&p| !(p >= 0.0)) || (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return invalid("not a probability vector");
    }
    let moment = |j: i32| pmf.iter().enumerate().map(|(k, &p)| p * (k as f64).powi(j)).sum::<f64>();
    let (s1, s3) = (moment(1), moment(3));
    if !(s3 > 4.0 * s1) {
        return invalid("need sigma_3 > 4 sigma_1");
    }
    Ok(s1 / (s3 - 4.0 * s1).powf(2.0 / 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Variant {
    /// Sampled edges are only marked.
    #[default]
    MarksOnly,
    /// Sampled edges lying on a cycle are removed, as in the full chain.
    Full,
}

/// One run of the Poissonised cycle-breaking chain on G_{n,3} up to time t.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub n: usize,
    pub lambda: f64,
    pub t: f64,
    /// G_{n,3} with Exponential(1) lengths.
    pub graph: Multigraph,
    /// First sampling time of each edge.
    pub arrival: Vec<f64>,
    /// Number of chain steps up to time t.
    pub steps: u64,
    pub removed: Vec<usize>,
    pub marked: Vec<usize>,
    /// Vertices of the largest component of Rem, increasing.
    pub big_vertices: Vec<usize>,
    /// Original ids of its edges.
    pub big_edges: Vec<usize>,
    /// The largest component on `0..k`, with lengths.
    pub big: Multigraph,
    /// Edge ids of `big` kept by CBD_∞.
    pub big_tree: Vec<usize>,
    /// Edges of the final forest of the whole chain.
    pub global_kept: Vec<bool>,
}

pub fn g1_pipeline<R: Rng + ?Sized>(n: usize, lambda: f64, variant: Variant, rng: &mut R) -> Result<Pipeline> {
    if n % 2 == 1 || n == 0 {
        return invalid("n must be even and positive");
    }
    let t = t_of_lambda(n, lambda)?;
    let mut graph = configuration_model(&DegreeSequence::regular(n, 3), rng)?;
    for e in &mut graph.edges {
        e.len = rng.sample(Exp1);
    }
    let arrival: Vec<f64> = graph.edges.iter().map(|e| rng.sample(Exp::new(e.len).expect("positive rate"))).collect();
    let (global_kept, _) = kept_by_arrival(&graph, &arrival);
    let mut steps = 0u64;
    let (mut removed, mut marked) = (Vec::new(), Vec::new());
    for (i, e) in graph.edges.iter().enumerate() {
        if arrival[i] <= t {
            steps += 1 + poisson(e.len * (t - arrival[i]), rng);
            if variant == Variant::Full && !global_kept[i] {
                removed.push(i);
            } else {
                marked.push(i);
            }
        }
    }
    let keep: Vec<bool> = arrival.iter().map(|&a| a > t).collect();
    let rem = split_edges(&graph, &keep, None);
    let mut big_vertices = rem.graph.components().swap_remove(0);
    big_vertices.sort_unstable();
    let (big, _, local) = rem.graph.induced(&big_vertices);
    let big_edges: Vec<usize> = local.iter().map(|&j| rem.kept[j]).collect();
    // memorylessness: the rest of the chain on the big component is a fresh chain
    let big_tree = (0..big.m()).filter(|&j| global_kept[big_edges[j]]).collect();
    Ok(Pipeline {
        n,
        lambda,
        t,
        graph,
        arrival,
        steps,
        removed,
        marked,
        big_vertices,
        big_edges,
        big,
        big_tree,
        global_kept,
    })
}

impl Pipeline {
    /// G_1: the largest component without lengths.
    pub fn shape(&self) -> Multigraph {
        shape(&self.big)
    }

    /// CBD_∞ of the length-carrying largest component, on `0..k`.
    pub fn cbd_big(&self) -> Multigraph {
        self.big.edge_subgraph(&self.big_tree)
    }

    /// CBD_∞ of G_1, coupled so that it is the shape of `cbd_big`.
    pub fn cbd_shape(&self) -> Multigraph {
        shape(&self.cbd_big())
    }

    pub fn surplus(&self) -> i64 {
        self.big.m() as i64 - self.big.n as i64 + 1
    }
}

/// A tree with a probability mass per vertex.
#[derive(Clone, Debug)]
pub struct MeasuredTree {
    pub tree: Multigraph,
    /// Original label of each vertex.
    pub vertices: Vec<usize>,
    pub mass: Vec<f64>,
}

/// The attach and avail measures on CBD_∞(G_1).
pub fn attach_avail_measures(p: &Pipeline) -> (MeasuredTree, MeasuredTree) {
    let k = p.big.n;
    let tree = p.cbd_shape();
    let uniform = vec![1.0 / k as f64; k];
    let attach = if p.graph.is_connected() {
        let mut in_big_tree = vec![false; p.graph.m()];
        for &j in &p.big_tree {
            in_big_tree[p.big_edges[j]] = true;
        }
        let mut uf = UnionFind::new(p.n);
        for (i, e) in p.graph.edges.iter().enumerate() {
            if p.global_kept[i] && !in_big_tree[i] {
                uf.union(e.u, e.v);
            }
        }
        let mut size = vec![0usize; p.n];
        for v in 0..p.n {
            size[uf.find(v)] += 1;
        }
        p.big_vertices.iter().map(|&v| size[uf.find(v)] as f64 / p.n as f64).collect()
    } else {
        uniform.clone()
    };
    let deg = p.big.degrees();
    let avail_deg: Vec<f64> = deg.iter().map(|&d| 3.0 - d as f64).collect();
    let total: f64 = avail_deg.iter().sum();
    let avail = if total > 0.0 { avail_deg.iter().map(|d| d / total).collect() } else { uniform };
    (
        MeasuredTree { tree: tree.clone(), vertices: p.big_vertices.clone(), mass: attach },
        MeasuredTree { tree, vertices: p.big_vertices.clone(), mass: avail },
    )
}

/// Output of the five-step joint construction.
#[derive(Clone, Debug)]
pub struct JointSample {
    pub n: usize,
    pub m: usize,
    /// Largest component of Q1, increasing.
    pub c1: Vec<usize>,
    pub q2_connected: bool,
    /// `(vertex, pendant size)` per available half-edge, ordered by vertex
    /// and then by half-edge position.
    pub slots: Vec<(usize, usize)>,
}

pub fn joint_sampler<R: Rng + ?Sized>(n: usize, lambda: f64, rng: &mut R) -> Result<JointSample> {
    if n % 2 == 1 || n == 0 {
        return invalid("n must be even and positive");
    }
    let q = 1.0 - retention(n, lambda);
    if !(0.0..=1.0).contains(&q) {
        return invalid("lambda outside the window");
    }
    let m = rng.sample(Binomial::new(3 * n as u64 / 2, q).expect("valid binomial")) as usize;
    joint_sampler_with_m(n, m, rng)
}

pub fn joint_sampler_with_m<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<JointSample> {
    let d = DegreeSequence::regular(n, 3);
    let (q1, q2, half) = coupled_pairing(&d, m, rng)?;
    let mut c1 = q1.components().swap_remove(0);
    c1.sort_unstable();
    let mut in_c1 = vec![false; n];
    for &v in &c1 {
        in_c1[v] = true;
    }
    let first = 3 * n - 2 * m;
    // available half-edges: positions among the last 2m owned by C1
    let mut avail: Vec<(usize, usize)> = (first..3 * n).filter(|&j| in_c1[half[j]]).map(|j| (half[j], j)).collect();
    avail.sort_unstable();
    let q2_connected = q2.is_connected();
    if !q2_connected || m == 0 {
        let slots = avail.iter().map(|&(v, _)| (v, 0)).collect();
        return Ok(JointSample { n, m, c1, q2_connected, slots });
    }
    // step (d): scanning the added edges in a uniform order and dropping any
    // that keeps the graph connected leaves the forest Kruskal builds when
    // adding them in the reverse order on top of Q1
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut uf = UnionFind::new(n);
    for e in &q1.edges {
        uf.union(e.u, e.v);
    }
    let added = first / 2;
    let mut kept = vec![false; m];
    for &k in order.iter().rev() {
        let e = &q2.edges[added + k];
        if uf.union(e.u, e.v).is_some() {
            kept[k] = true;
        }
    }
    // contract Q1 components and root the kept forest at C1
    let mut comp_uf = UnionFind::new(n);
    for e in &q1.edges {
        comp_uf.union(e.u, e.v);
    }
    let mut weight = vec![0usize; n];
    for v in 0..n {
        weight[comp_uf.find(v)] += 1;
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for k in 0..m {
        if kept[k] {
            let e = &q2.edges[added + k];
            let (a, b) = (comp_uf.find(e.u), comp_uf.find(e.v));
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
    }
    let root = comp_uf.find(c1[0]);
    let mut parent_edge = vec![usize::MAX; n];
    let mut order_v = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut i = 0;
    while i < order_v.len() {
        let x = order_v[i];
        i += 1;
        for &(y, k) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                parent_edge[y] = k;
                order_v.push(y);
            }
        }
    }
    let mut subtree = weight.clone();
    let mut below = vec![0usize; m];
    for &x in order_v.iter().skip(1).rev() {
        let k = parent_edge[x];
        below[k] = subtree[x];
        let e = &q2.edges[added + k];
        let (a, b) = (comp_uf.find(e.u), comp_uf.find(e.v));
        let p = if a == x { b } else { a };
        subtree[p] += subtree[x];
    }
    let slots = avail
        .iter()
        .map(|&(v, j)| {
            let k = (j - first) / 2;
            (v, if kept[k] { below[k] } else { 0 })
        })
        .collect();
    Ok(JointSample { n, m, c1, q2_connected, slots })
}
