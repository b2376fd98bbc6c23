use std::collections::{BTreeMap, VecDeque};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp, Poisson};

use crate::error::{invalid, Error, Result};
use crate::multigraph::{Edge, Multigraph};
use crate::mst::exact_mst_law;
use crate::rng::{replicas, stream};
use crate::stats::{tv_distance, EmpiricalLaw};
use crate::unionfind::UnionFind;

/// State of the discrete cycle-breaking chain. Edge ids are those of `graph`.
#[derive(Clone, Debug)]
pub struct CbdState {
    pub graph: Multigraph,
    pub alive: Vec<bool>,
    /// Red point offsets in `(0, len)` per edge.
    pub marks: Vec<Vec<f64>>,
    pub removed: Vec<usize>,
    /// Distinct edges in the order they were first sampled.
    pub sampled: Vec<usize>,
    seen: Vec<bool>,
    pub k: u64,
    picker: Option<WeightedIndex<f64>>,
}

impl CbdState {
    pub fn new(h: Multigraph) -> Self {
        let m = h.m();
        let picker = WeightedIndex::new(h.edges.iter().map(|e| e.len)).ok();
        CbdState {
            graph: h,
            alive: vec![true; m],
            marks: vec![Vec::new(); m],
            removed: Vec::new(),
            sampled: Vec::new(),
            seen: vec![false; m],
            k: 0,
            picker,
        }
    }

    /// Every edge has been sampled and no cycle remains.
    pub fn finished(&self) -> bool {
        self.sampled.len() == self.graph.m() && self.is_forest()
    }

    pub fn is_forest(&self) -> bool {
        let mut uf = UnionFind::new(self.graph.n);
        self.graph.edges.iter().zip(&self.alive).filter(|(_, &a)| a).all(|(e, _)| uf.union(e.u, e.v).is_some())
    }

    /// Surviving edges with red flags set on marked ones.
    pub fn current(&self) -> Multigraph {
        let mut g = Multigraph::new(self.graph.n);
        for (i, e) in self.graph.edges.iter().enumerate() {
            if self.alive[i] {
                g.edges.push(Edge { red: !self.marks[i].is_empty(), ..e.clone() });
            }
        }
        g
    }

    fn on_cycle(&self, id: usize) -> bool {
        let e = &self.graph.edges[id];
        if e.u == e.v {
            return true;
        }
        let adj = self.graph.adjacency();
        let mut seen = vec![false; self.graph.n];
        let mut queue = VecDeque::from([e.u]);
        seen[e.u] = true;
        while let Some(x) = queue.pop_front() {
            if x == e.v {
                return true;
            }
            for &(y, j) in &adj[x] {
                if j != id && self.alive[j] && !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        false
    }
}

/// One step: sample an original edge by length; remove it if it lies on a
/// cycle of the current graph, otherwise put a uniform red point on it.
pub fn cbd_step<R: Rng + ?Sized>(state: &mut CbdState, rng: &mut R) -> Result<()> {
    let Some(picker) = &state.picker else {
        return invalid("total edge length is zero");
    };
    let e = picker.sample(rng);
    state.k += 1;
    if !state.seen[e] {
        state.seen[e] = true;
        state.sampled.push(e);
    }
    if !state.alive[e] {
        return Ok(());
    }
    if state.on_cycle(e) {
        state.alive[e] = false;
        state.removed.push(e);
        state.marks[e].clear();
    } else {
        let len = state.graph.edges[e].len;
        state.marks[e].push(len * rng.random::<f64>());
    }
    Ok(())
}

/// Runs the literal chain until the stopping rule holds.
pub fn cbd_run<R: Rng + ?Sized>(h: Multigraph, rng: &mut R) -> Result<CbdState> {
    let mut state = CbdState::new(h);
    if state.graph.m() == 0 {
        return Ok(state);
    }
    while !state.finished() {
        cbd_step(&mut state, rng)?;
    }
    Ok(state)
}

#[derive(Clone, Debug)]
pub struct CbdOutcome {
    /// Surviving edge ids (a spanning forest).
    pub forest: Vec<usize>,
    /// Vertices of the largest tree, increasing.
    pub tree_vertices: Vec<usize>,
    /// Edge ids of the largest tree, increasing.
    pub tree_edges: Vec<usize>,
    pub removal_order: Vec<usize>,
    /// Red point offsets per edge; empty on removed edges.
    pub marks: Vec<Vec<f64>>,
}

impl CbdOutcome {
    fn from_forest(h: &Multigraph, alive: &[bool], removal_order: Vec<usize>, marks: Vec<Vec<f64>>) -> Self {
        let forest: Vec<usize> = (0..h.m()).filter(|&i| alive[i]).collect();
        let f = h.edge_subgraph(&forest);
        let mut tree_vertices = f.components().into_iter().next().unwrap_or_default();
        tree_vertices.sort_unstable();
        let mut inside = vec![false; h.n];
        for &v in &tree_vertices {
            inside[v] = true;
        }
        let tree_edges = forest.iter().copied().filter(|&i| inside[h.edges[i].u]).collect();
        CbdOutcome { forest, tree_vertices, tree_edges, removal_order, marks }
    }

    /// The largest tree as a multigraph on `0..k`, lengths kept.
    pub fn tree(&self, h: &Multigraph) -> Multigraph {
        let mut pos = vec![usize::MAX; h.n];
        for (i, &v) in self.tree_vertices.iter().enumerate() {
            pos[v] = i;
        }
        let mut t = Multigraph::new(self.tree_vertices.len());
        for &i in &self.tree_edges {
            let e = &h.edges[i];
            t.add_edge_len(pos[e.u], pos[e.v], e.len);
        }
        t
    }
}

impl From<&CbdState> for CbdOutcome {
    fn from(s: &CbdState) -> Self {
        CbdOutcome::from_forest(&s.graph, &s.alive, s.removed.clone(), s.marks.clone())
    }
}

/// Edges kept when edges are examined in increasing `arrival` order and
/// dropped whenever they still close a cycle: the maximum spanning forest.
pub fn kept_by_arrival(h: &Multigraph, arrival: &[f64]) -> (Vec<bool>, Vec<usize>) {
    let mut ids: Vec<usize> = (0..h.m()).collect();
    ids.sort_by(|&a, &b| arrival[b].total_cmp(&arrival[a]).then(b.cmp(&a)));
    let mut uf = UnionFind::new(h.n);
    let mut alive = vec![false; h.m()];
    for &i in &ids {
        if uf.union(h.edges[i].u, h.edges[i].v).is_some() {
            alive[i] = true;
        }
    }
    let removal = ids.into_iter().rev().filter(|&i| !alive[i]).collect();
    (alive, removal)
}

/// CBD_∞ in continuous time: edge e is first sampled at an Exp(len e) time,
/// and its fate is fixed then. Same law as running the chain to the end.
pub fn cbd_infty<R: Rng + ?Sized>(h: &Multigraph, rng: &mut R) -> Result<CbdOutcome> {
    if h.m() > 0 && h.total_length() <= 0.0 {
        return invalid("total edge length is zero");
    }
    let arrival: Vec<f64> = h
        .edges
        .iter()
        .map(|e| if e.len > 0.0 { rng.sample(Exp::new(e.len).expect("positive rate")) } else { f64::INFINITY })
        .collect();
    if arrival.iter().any(|a| a.is_infinite()) {
        return invalid("zero-length edges are never sampled");
    }
    let (alive, removal) = kept_by_arrival(h, &arrival);
    let end = arrival.iter().copied().fold(0.0, f64::max);
    let marks = (0..h.m())
        .map(|i| {
            if !alive[i] {
                return Vec::new();
            }
            let len = h.edges[i].len;
            let extra = poisson(len * (end - arrival[i]), rng);
            (0..=extra).map(|_| len * rng.random::<f64>()).collect()
        })
        .collect();
    Ok(CbdOutcome::from_forest(h, &alive, removal, marks))
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    rng.sample(Poisson::new(mean).expect("finite positive mean")) as u64
}

/// Marks dropped, unit lengths.
pub fn shape(h: &Multigraph) -> Multigraph {
    Multigraph {
        n: h.n,
        edges: h.edges.iter().map(|e| Edge { u: e.u, v: e.v, len: 1.0, red: false }).collect(),
    }
}

/// Edges carrying a red point dropped, lengths kept.
pub fn rem(h: &Multigraph) -> Multigraph {
    Multigraph { n: h.n, edges: h.edges.iter().filter(|e| !e.red).cloned().collect() }
}

#[derive(Clone, Debug)]
pub struct CbResult {
    /// Original vertices keep their labels; cut stubs end at new leaves.
    pub tree: Multigraph,
    /// `(edge id, cut position)` for each cut.
    pub cuts: Vec<(usize, f64)>,
}

/// Cuts a length-biased point of the cycle-carrying part until a tree is
/// left. Edge ids in `cuts` refer to the evolving graph.
pub fn cb_infty<R: Rng + ?Sized>(h: &Multigraph, rng: &mut R) -> Result<CbResult> {
    let s = h.surplus()?;
    let mut g = h.clone();
    let mut cuts = Vec::new();
    for _ in 0..s {
        let bridge = g.bridges();
        let candidates: Vec<usize> = (0..g.m()).filter(|&i| !bridge[i]).collect();
        let pick = WeightedIndex::new(candidates.iter().map(|&i| g.edges[i].len))
            .map_err(|_| Error::Invalid("cycle of zero length".into()))?;
        let id = candidates[pick.sample(rng)];
        let x = g.edges[id].len * rng.random::<f64>();
        split(&mut g, id, x);
        cuts.push((id, x));
    }
    Ok(CbResult { tree: g, cuts })
}

/// Replaces edge `id` by two stubs ending at fresh leaves.
fn split(g: &mut Multigraph, id: usize, x: f64) {
    let e = g.edges[id].clone();
    let a = g.n;
    let b = g.n + 1;
    g.n += 2;
    g.edges[id] = Edge { u: e.u, v: a, len: x, red: false };
    g.edges.push(Edge { u: b, v: e.v, len: e.len - x, red: false });
}

#[derive(Clone, Debug)]
pub struct Coupled {
    pub cbd: CbdOutcome,
    pub cb: Multigraph,
    /// Hausdorff distance between the CBD tree and the CB tree containing it.
    pub gap: f64,
}

/// CBD_∞ and CB^∞ driven by the same removed edges: CB cuts each removed
/// edge at a uniform point instead of deleting it.
pub fn coupled_cb_cbd<R: Rng + ?Sized>(h: &Multigraph, rng: &mut R) -> Result<Coupled> {
    if !h.is_connected() {
        return Err(Error::Disconnected);
    }
    let cbd = cbd_infty(h, rng)?;
    let mut cb = h.clone();
    for &e in &cbd.removal_order {
        let x = h.edges[e].len * rng.random::<f64>();
        split(&mut cb, e, x);
    }
    // every point of the CB tree outside the CBD tree lies on a stub
    let mut probe = cb.clone();
    let root = probe.n;
    probe.n += 1;
    for v in 0..h.n {
        probe.add_edge_len(root, v, 0.0);
    }
    let d = probe.distances(root);
    let gap = (h.n..cb.n).filter_map(|v| d[v]).fold(0.0, f64::max);
    Ok(Coupled { cbd, cb, gap })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lengths {
    Unit,
    Exp,
}

pub fn assign_lengths<R: Rng + ?Sized>(h: &Multigraph, lengths: Lengths, rng: &mut R) -> Multigraph {
    let mut g = h.clone();
    for e in &mut g.edges {
        e.len = match lengths {
            Lengths::Unit => 1.0,
            Lengths::Exp => rng.sample(rand_distr::Exp1),
        };
    }
    g
}

/// TV distance between the law of the literal chain's final tree and the
/// exact MST law under uniformly random orderings.
pub fn law_equivalence_test(h: &Multigraph, lengths: Lengths, count: usize, seed: u64) -> Result<f64> {
    let exact = exact_mst_law(h)?;
    let runs = replicas(count, |i| {
        let mut rng = stream(seed, i, "cbd-law");
        let g = assign_lengths(h, lengths, &mut rng);
        cbd_run(g, &mut rng).map(|s| CbdOutcome::from(&s).tree_edges)
    });
    let law: EmpiricalLaw<Vec<usize>> = runs.into_iter().collect::<Result<_>>()?;
    tv_distance(&law, &exact)
}

/// Empirical law of the final tree's edge ids over `count` fast runs.
pub fn cbd_law(h: &Multigraph, lengths: Lengths, count: usize, seed: u64) -> Result<BTreeMap<Vec<usize>, u64>> {
    let runs = replicas(count, |i| {
        let mut rng = stream(seed, i, "cbd-fast");
        cbd_infty(&assign_lengths(h, lengths, &mut rng), &mut rng).map(|o| o.tree_edges)
    });
    let law: EmpiricalLaw<Vec<usize>> = runs.into_iter().collect::<Result<_>>()?;
    Ok(law.counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{chi_square, complete_graph, tv_empirical};
    use proptest::prelude::*;
    use rand::Rng;

    fn theta() -> Multigraph {
        Multigraph::from_pairs(2, &[(0, 1), (0, 1), (0, 1)])
    }

    fn bridged_triangles() -> Multigraph {
        Multigraph::from_pairs(6, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)])
    }

    #[test]
    fn tree_input_only_gets_marks() {
        let mut rng = stream(1, 0, "cbd-tree");
        let t = Multigraph::from_pairs(4, &[(0, 1), (1, 2), (1, 3)]);
        let mut s = CbdState::new(t.clone());
        for _ in 0..50 {
            cbd_step(&mut s, &mut rng).unwrap();
        }
        assert!(s.removed.is_empty());
        assert_eq!(s.marks.iter().map(Vec::len).sum::<usize>(), 50);
        let o = cbd_infty(&t, &mut rng).unwrap();
        assert_eq!(o.tree_edges, vec![0, 1, 2]);
        assert!(o.marks.iter().all(|m| !m.is_empty()));
        let mut z = CbdState::new(Multigraph::from_pairs(2, &[(0, 1)]));
        z.graph.edges[0].len = 0.0;
        z.picker = None;
        assert!(cbd_step(&mut z, &mut rng).is_err());
    }

    #[test]
    fn theta_first_removal_uniform() {
        let mut counts = [0u64; 3];
        for i in 0..100_000 {
            let mut rng = stream(2, i, "theta");
            let g = assign_lengths(&theta(), Lengths::Exp, &mut rng);
            let s = cbd_run(g, &mut rng).unwrap();
            counts[s.removed[0]] += 1;
            assert_eq!(s.removed.len(), 2);
        }
        assert!(chi_square(&counts, &[1.0 / 3.0; 3]).unwrap().p_value > 0.001);
    }

    #[test]
    fn stops_after_surplus_removals() {
        let mut rng = stream(3, 0, "stop");
        let k4 = complete_graph(4);
        let mut s = cbd_run(k4.clone(), &mut rng).unwrap();
        assert_eq!(s.removed.len(), 3);
        let before = s.current().edge_key();
        for _ in 0..200 {
            cbd_step(&mut s, &mut rng).unwrap();
        }
        assert_eq!(s.current().edge_key(), before);
    }

    #[test]
    fn shape_and_rem() {
        let tri = Multigraph::from_pairs(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(rem(&tri), tri);
        assert_eq!(shape(&tri), tri);
        let mut all = tri.clone();
        all.edges.iter_mut().for_each(|e| e.red = true);
        assert_eq!(rem(&all).m(), 0);
        assert_eq!(shape(&all), tri);
        let mut one = tri.clone();
        one.edges[1].red = true;
        assert_eq!(rem(&one).edge_key(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn theta_and_k4_law_equivalence() {
        assert!(law_equivalence_test(&theta(), Lengths::Exp, 100_000, 4).unwrap() < 0.02);
        assert!(law_equivalence_test(&complete_graph(4), Lengths::Unit, 100_000, 4).unwrap() < 0.03);
        let path = Multigraph::from_pairs(3, &[(0, 1), (1, 2)]);
        assert_eq!(law_equivalence_test(&path, Lengths::Exp, 100, 4).unwrap(), 0.0);
    }

    #[test]
    fn fast_and_literal_chains_agree() {
        let h = bridged_triangles();
        let n = 60_000;
        let fast: EmpiricalLaw<Vec<usize>> = cbd_law(&h, Lengths::Exp, n, 5)
            .unwrap()
            .into_iter()
            .flat_map(|(k, c)| std::iter::repeat_n(k, c as usize))
            .collect();
        let slow: EmpiricalLaw<Vec<usize>> = (0..n as u64)
            .map(|i| {
                let mut rng = stream(5, i, "slow");
                let g = assign_lengths(&h, Lengths::Exp, &mut rng);
                CbdOutcome::from(&cbd_run(g, &mut rng).unwrap()).tree_edges
            })
            .collect();
        assert!(tv_empirical(&fast, &slow) < 0.02);
        // mark counts: the final number of red points on a bridge has the same mean
        let mut rng = stream(5, 0, "marks");
        let bridge = 3;
        let (mut a, mut b) = (0usize, 0usize);
        for _ in 0..20_000 {
            let g = Multigraph::from_pairs(6, &h.edge_key());
            a += cbd_infty(&g, &mut rng).unwrap().marks[bridge].len();
            b += cbd_run(g, &mut rng).unwrap().marks[bridge].len();
        }
        let (ma, mb) = (a as f64 / 20_000.0, b as f64 / 20_000.0);
        assert!((ma - mb).abs() < 0.1, "{ma} {mb}");
    }

    #[test]
    fn joined_by_an_edge() {
        // whole graph vs two independent halves bridged by edge 3
        let h = bridged_triangles();
        let left = Multigraph::from_pairs(3, &[(0, 1), (1, 2), (2, 0)]);
        let n = 50_000;
        let whole: EmpiricalLaw<Vec<usize>> = (0..n)
            .map(|i| {
                let mut rng = stream(6, i, "whole");
                cbd_run(assign_lengths(&h, Lengths::Exp, &mut rng), &mut rng)
                    .map(|s| CbdOutcome::from(&s).tree_edges)
                    .unwrap()
            })
            .collect();
        let glued: EmpiricalLaw<Vec<usize>> = (0..n)
            .map(|i| {
                let mut rng = stream(6, i, "halves");
                let a = cbd_run(assign_lengths(&left, Lengths::Exp, &mut rng), &mut rng).unwrap();
                let b = cbd_run(assign_lengths(&left, Lengths::Exp, &mut rng), &mut rng).unwrap();
                let mut t: Vec<usize> = CbdOutcome::from(&a).tree_edges;
                t.push(3);
                t.extend(CbdOutcome::from(&b).tree_edges.into_iter().map(|e| e + 4));
                t
            })
            .collect();
        assert!(tv_empirical(&whole, &glued) < 0.02);
    }

    #[test]
    fn distinct_sampled_edges_are_uniform() {
        // 4-edge graph: square; given first sampled edge 0, the second is uniform on the rest
        let sq = Multigraph::from_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let mut counts = [0u64; 3];
        for i in 0..150_000 {
            let mut rng = stream(7, i, "distinct");
            let s = cbd_run(assign_lengths(&sq, Lengths::Exp, &mut rng), &mut rng).unwrap();
            if s.sampled[0] == 0 {
                counts[s.sampled[1] - 1] += 1;
            }
        }
        assert!(chi_square(&counts, &[1.0 / 3.0; 3]).unwrap().p_value > 0.001);
    }

    #[test]
    fn cb_examples() {
        let mut rng = stream(8, 0, "cb");
        let t = Multigraph::from_pairs(3, &[(0, 1), (1, 2)]);
        assert_eq!(cb_infty(&t, &mut rng).unwrap().tree, t);
        let mut cyc = Multigraph::new(4);
        for (i, l) in [0.5, 1.0, 1.5, 2.0].into_iter().enumerate() {
            cyc.add_edge_len(i, (i + 1) % 4, l);
        }
        let r = cb_infty(&cyc, &mut rng).unwrap();
        assert_eq!(r.tree.n, 6);
        assert_eq!(r.tree.surplus(), Ok(0));
        assert!((r.tree.total_length() - 5.0).abs() < 1e-12);
        assert!((r.tree.diameter().unwrap() - 5.0).abs() < 1e-12);
        assert!(cb_infty(&Multigraph::new(2), &mut rng).is_err());
    }

    #[test]
    fn coupled_gap_bounded_by_longest_edge() {
        for i in 0..300 {
            let mut rng = stream(9, i, "coupled");
            let g = assign_lengths(&complete_graph(5), Lengths::Exp, &mut rng);
            let c = coupled_cb_cbd(&g, &mut rng).unwrap();
            let longest = g.edges.iter().map(|e| e.len).fold(0.0, f64::max);
            assert!(c.gap <= longest);
            assert_eq!(c.cb.surplus(), Ok(0));
            assert!((c.cb.total_length() - g.total_length()).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn removals_equal_surplus(seed in 0u64..5000, n in 1usize..9, extra in 0usize..6) {
            let mut rng = stream(seed, 0, "prop-cbd");
            let mut g = Multigraph::new(n);
            for v in 1..n { g.add_edge(rng.random_range(0..v), v); }
            for _ in 0..extra { g.add_edge(rng.random_range(0..n), rng.random_range(0..n)); }
            let g = assign_lengths(&g, Lengths::Exp, &mut rng);
            let s = g.surplus().unwrap() as usize;
            let slow = cbd_run(g.clone(), &mut rng).unwrap();
            prop_assert_eq!(slow.removed.len(), s);
            prop_assert!(slow.is_forest());
            let fast = cbd_infty(&g, &mut rng).unwrap();
            prop_assert_eq!(fast.removal_order.len(), s);
            prop_assert_eq!(fast.tree_edges.len() + 1, n);
            let cb = cb_infty(&g, &mut rng).unwrap();
            prop_assert!((cb.tree.total_length() - g.total_length()).abs() < 1e-9);
            prop_assert_eq!(cb.tree.surplus(), Ok(0));
        }

        #[test]
        fn removed_edges_were_on_cycles(seed in 0u64..5000) {
            let mut rng = stream(seed, 0, "prop-cycle");
            let g = assign_lengths(&complete_graph(5), Lengths::Exp, &mut rng);
            let out = cbd_infty(&g, &mut rng).unwrap();
            let mut alive = vec![true; g.m()];
            for &e in &out.removal_order {
                let rest: Vec<usize> = (0..g.m()).filter(|&i| alive[i] && i != e).collect();
                prop_assert!(g.edge_subgraph(&rest).is_connected());
                alive[e] = false;
            }
        }
    }
}
