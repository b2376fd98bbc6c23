use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::multigraph::Multigraph;
use crate::samplers::{er_threshold, ErProcess};
use crate::unionfind::UnionFind;

pub const ORDERING_CAP: usize = 10;

/// A multigraph with one weight per edge id. Ties are broken by edge id.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    pub graph: Multigraph,
    pub w: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(graph: Multigraph, w: Vec<f64>) -> Result<Self> {
        if w.len() != graph.m() {
            return invalid(format!("{} weights for {} edges", w.len(), graph.m()));
        }
        if w.iter().any(|x| x.is_nan()) {
            return invalid("NaN weight");
        }
        Ok(WeightedGraph { graph, w })
    }

    /// I.i.d. Uniform(0,1) weights.
    pub fn iid<R: Rng + ?Sized>(graph: Multigraph, rng: &mut R) -> Self {
        let w = (0..graph.m()).map(|_| rng.random::<f64>()).collect();
        WeightedGraph { graph, w }
    }

    /// Edge ids in increasing (weight, id) order.
    pub fn order(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.w.len()).collect();
        ids.sort_by(|&a, &b| self.w[a].total_cmp(&self.w[b]).then(a.cmp(&b)));
        ids
    }

}

/// Minimum spanning forest over every component, sorted edge ids.
pub fn msf(g: &WeightedGraph) -> Vec<usize> {
    let mut uf = UnionFind::new(g.graph.n);
    let mut out: Vec<usize> = g
        .order()
        .into_iter()
        .filter(|&i| uf.union(g.graph.edges[i].u, g.graph.edges[i].v).is_some())
        .collect();
    out.sort_unstable();
    out
}

/// Kruskal on the largest component; sorted edge ids.
pub fn mst(g: &WeightedGraph) -> Vec<usize> {
    let forest = msf(g);
    let comps = g.graph.components();
    let Some(big) = comps.first() else { return vec![] };
    let mut inside = vec![false; g.graph.n];
    for &v in big {
        inside[v] = true;
    }
    forest.into_iter().filter(|&i| inside[g.graph.edges[i].u]).collect()
}

/// Checks the minimax-path property of `tree` against every edge of its
/// component with a single sweep in weight order.
pub fn minimax_check(tree: &[usize], g: &WeightedGraph) -> Result<bool> {
    let n = g.graph.n;
    let (label, _) = g.graph.component_labels();
    let comp = match tree.first() {
        Some(&e) => label[g.graph.edges[e].u],
        None => {
            // an empty tree spans a one-vertex component only
            let sizes = label.iter().fold(vec![0usize; n], |mut c, &l| {
                c[l] += 1;
                c
            });
            return match (0..n).find(|&v| sizes[label[v]] == 1) {
                Some(_) if n >= 1 => Ok(true),
                _ => invalid("empty tree does not span a component"),
            };
        }
    };
    let size = label.iter().filter(|&&l| l == comp).count();
    let mut in_tree = vec![false; g.graph.m()];
    let mut uf = UnionFind::new(n);
    for &e in tree {
        let ed = &g.graph.edges[e];
        if label[ed.u] != comp || in_tree[e] || uf.union(ed.u, ed.v).is_none() {
            return invalid("tree edges are not an acyclic subset of one component");
        }
        in_tree[e] = true;
    }
    if tree.len() + 1 != size {
        return invalid("tree does not span its component");
    }
    let mut sweep = UnionFind::new(n);
    for e in g.order() {
        let ed = &g.graph.edges[e];
        if label[ed.u] != comp {
            continue;
        }
        if in_tree[e] {
            sweep.union(ed.u, ed.v);
        } else if sweep.find(ed.u) != sweep.find(ed.v) {
            // a lighter route than the tree path exists
            return Ok(false);
        }
    }
    Ok(true)
}

fn connected_without(g: &Multigraph, alive: &[bool], skip: usize) -> bool {
    let e = &g.edges[skip];
    if e.u == e.v {
        return true;
    }
    let adj = g.adjacency();
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::from([e.u]);
    seen[e.u] = true;
    while let Some(x) = queue.pop_front() {
        if x == e.v {
            return true;
        }
        for &(y, id) in &adj[x] {
            if id != skip && alive[id] && !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    false
}

/// Deletes the heaviest non-bridge until a tree remains.
pub fn reverse_delete(g: &WeightedGraph) -> Result<Vec<usize>> {
    if !g.graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut alive = vec![true; g.graph.m()];
    for e in g.order().into_iter().rev() {
        // the heaviest edge still present is in conne iff it lies on a cycle
        if connected_without(&g.graph, &alive, e) {
            alive[e] = false;
        }
    }
    Ok((0..alive.len()).filter(|&i| alive[i]).collect())
}

/// For each component of the subgraph of edges with weight at most `u`,
/// compares the restriction of the global tree with the component's own MST.
pub fn percolation_restriction_check(g: &WeightedGraph, u: f64) -> bool {
    let tree = mst(g);
    let light: Vec<usize> = (0..g.graph.m()).filter(|&i| g.w[i] <= u).collect();
    let sub = g.graph.edge_subgraph(&light);
    let (label, _) = sub.component_labels();
    let mut in_tree = vec![false; g.graph.m()];
    for &e in &tree {
        in_tree[e] = true;
    }
    let sub_w = WeightedGraph { graph: sub.clone(), w: light.iter().map(|&i| g.w[i]).collect() };
    let own: Vec<usize> = msf(&sub_w).into_iter().map(|i| light[i]).collect();
    let mut own_flag = vec![false; g.graph.m()];
    for &e in &own {
        own_flag[e] = true;
    }
    // restriction to a light component: tree edges with both ends inside it
    g.graph.edges.iter().enumerate().all(|(i, e)| {
        let same = label[e.u] == label[e.v];
        !same || !in_tree[i] && !own_flag[i] || in_tree[i] && own_flag[i]
    })
}

/// Exact MST law under exchangeable continuous weights: every ordering of
/// the non-bridge edges is equally likely and bridges are always kept.
pub fn exact_mst_law(g: &Multigraph) -> Result<BTreeMap<Vec<usize>, BigRational>> {
    let free = g.conne()?;
    if free.len() > ORDERING_CAP {
        return Err(Error::CapExceeded { what: "non-bridge edges", size: free.len(), cap: ORDERING_CAP });
    }
    let bridges: Vec<usize> = (0..g.m()).filter(|i| free.binary_search(i).is_err()).collect();
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut perm = free.clone();
    let mut total = 0u64;
    fn rec(k: usize, perm: &mut Vec<usize>, g: &Multigraph, bridges: &[usize], counts: &mut BTreeMap<Vec<usize>, u64>, total: &mut u64) {
        if k == perm.len() {
            let mut uf = UnionFind::new(g.n);
            for &b in bridges {
                uf.union(g.edges[b].u, g.edges[b].v);
            }
            let mut tree = bridges.to_vec();
            tree.extend(perm.iter().copied().filter(|&e| uf.union(g.edges[e].u, g.edges[e].v).is_some()));
            tree.sort_unstable();
            *counts.entry(tree).or_insert(0) += 1;
            *total += 1;
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            rec(k + 1, perm, g, bridges, counts, total);
            perm.swap(k, i);
        }
    }
    rec(0, &mut perm, g, &bridges, &mut counts, &mut total);
    Ok(counts.into_iter().map(|(t, c)| (t, BigRational::new(BigInt::from(c), BigInt::from(total)))).collect())
}

/// MST of the uniformly weighted complete graph, generated on top of an
/// already revealed ER(n, lambda) by revealing heavier pairs only as needed.
#[derive(Clone, Debug)]
pub struct ConditionalMst {
    pub n: usize,
    pub threshold: f64,
    /// `(u, v, weight)` in increasing weight.
    pub edges: Vec<(usize, usize, f64)>,
}

pub fn mst_conditional_on_er(process: &mut ErProcess, lambda: f64) -> ConditionalMst {
    let n = process.n;
    let threshold = er_threshold(n, lambda);
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut p = threshold;
    let mut done = 0usize;
    loop {
        let es = process.edges_upto(p);
        for &(u, v, w) in &es[done..] {
            if uf.union(u as usize, v as usize).is_some() {
                edges.push((u as usize, v as usize, w));
            }
        }
        done = es.len();
        if edges.len() + 1 >= n || p >= 1.0 {
            break;
        }
        // reveal the heavier pairs in growing slices
        let next = (p.max(1.0 / n as f64) * 2.0).max(p + (n as f64).ln() / n as f64);
        p = next.min(1.0);
    }
    ConditionalMst { n, threshold, edges }
}

impl ConditionalMst {
    pub fn graph(&self) -> Multigraph {
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|&(u, v, _)| (u, v)).collect();
        Multigraph::from_pairs(self.n, &pairs)
    }

    /// Vertices of the largest component of ER(n, lambda), in increasing order.
    pub fn largest_cluster(&self) -> Vec<usize> {
        let light: Vec<(usize, usize)> =
            self.edges.iter().filter(|e| e.2 <= self.threshold).map(|&(u, v, _)| (u, v)).collect();
        let mut c = Multigraph::from_pairs(self.n, &light).components().swap_remove(0);
        c.sort_unstable();
        c
    }

    /// `(v, |T_v| / n)` for v in the largest cluster, where T_v is the part of
    /// the full tree hanging off v once the cluster's own tree edges are cut.
    pub fn pendant_masses(&self) -> Vec<(usize, f64)> {
        let cluster = self.largest_cluster();
        let mut in_cluster = vec![false; self.n];
        for &v in &cluster {
            in_cluster[v] = true;
        }
        let mut uf = UnionFind::new(self.n);
        for &(u, v, w) in &self.edges {
            let internal = w <= self.threshold && in_cluster[u] && in_cluster[v];
            if !internal {
                uf.union(u, v);
            }
        }
        let mut size = vec![0usize; self.n];
        for v in 0..self.n {
            size[uf.find(v)] += 1;
        }
        cluster.into_iter().map(|v| (v, size[uf.find(v)] as f64 / self.n as f64)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{
        chi_square, complete_graph, enumerate_spanning_trees, pmf_total, rational_to_f64, tv_distance, tv_empirical,
        uniform_pmf, EmpiricalLaw,
    };
    use proptest::prelude::*;
    use rand::Rng;

    fn wg(n: usize, pairs: &[(usize, usize)], w: &[f64]) -> WeightedGraph {
        WeightedGraph::new(Multigraph::from_pairs(n, pairs), w.to_vec()).unwrap()
    }

    fn random_graph(seed: u64, n: usize, m: usize) -> WeightedGraph {
        let mut rng = stream(seed, 0, "mst-random");
        let mut g = Multigraph::new(n);
        for v in 1..n {
            let u = rng.random_range(0..v);
            g.add_edge(u, v);
        }
        for _ in 0..m {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            g.add_edge(a, b);
        }
        let mut ids: Vec<usize> = (0..g.m()).collect();
        use rand::seq::SliceRandom;
        ids.shuffle(&mut rng);
        let g = g.edge_subgraph(&ids);
        WeightedGraph::iid(g, &mut rng)
    }

    #[test]
    fn small_examples() {
        let t = wg(4, &[(0, 1), (1, 2), (1, 3)], &[0.3, 0.1, 0.2]);
        assert_eq!(mst(&t), vec![0, 1, 2]);
        let tri = wg(3, &[(0, 1), (1, 2), (0, 2)], &[0.1, 0.5, 0.9]);
        assert_eq!(mst(&tri), vec![0, 1]);
        let split = wg(5, &[(0, 1), (2, 3), (3, 4), (2, 4)], &[0.5, 0.3, 0.2, 0.1]);
        assert_eq!(mst(&split), vec![2, 3]);
    }

    #[test]
    fn k4_mst_law() {
        let k4 = complete_graph(4);
        let trees = enumerate_spanning_trees(&k4).unwrap();
        assert_eq!(trees.len(), 16);
        let exact = exact_mst_law(&k4).unwrap();
        assert_eq!(exact.len(), 16);
        assert_eq!(pmf_total(&exact), BigRational::from_integer(1.into()));
        // stars are favoured over paths; the law is not uniform
        let star = vec![0, 1, 2];
        let path = vec![0, 1, 4];
        assert_eq!(exact[&star], BigRational::new(1.into(), 15.into()));
        assert_eq!(exact[&path], BigRational::new(11.into(), 180.into()));
        let mut rng = stream(1, 0, "k4");
        let law: EmpiricalLaw<Vec<usize>> =
            (0..100_000).map(|_| mst(&WeightedGraph::iid(k4.clone(), &mut rng))).collect();
        let obs: Vec<u64> = trees.iter().map(|t| law.counts[t]).collect();
        let probs: Vec<f64> = trees.iter().map(|t| rational_to_f64(&exact[t])).collect();
        assert!(chi_square(&obs, &probs).unwrap().p_value > 0.001);
        assert!(tv_distance(&law, &exact).unwrap() < 0.01);
        assert!((tv_distance(&law, &uniform_pmf(&trees)).unwrap() - 1.0 / 60.0).abs() < 0.01);
    }

    #[test]
    fn exact_law_small_cases() {
        let theta = Multigraph::from_pairs(2, &[(0, 1), (0, 1), (0, 1)]);
        let law = exact_mst_law(&theta).unwrap();
        assert_eq!(law.len(), 3);
        assert!(law.values().all(|p| *p == BigRational::new(1.into(), 3.into())));
        let path = Multigraph::from_pairs(3, &[(0, 1), (1, 2)]);
        assert_eq!(exact_mst_law(&path).unwrap().len(), 1);
        assert!(exact_mst_law(&complete_graph(6)).is_err());
    }

    #[test]
    fn minimax_examples() {
        // 4-cycle with weights 1,2,3,4: the MST drops the 4
        let c4 = wg(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mst(&c4), vec![0, 1, 2]);
        assert_eq!(minimax_check(&[0, 1, 2], &c4), Ok(true));
        assert_eq!(minimax_check(&[0, 1, 3], &c4), Ok(false));
        let single = wg(2, &[(0, 1)], &[0.5]);
        assert_eq!(minimax_check(&[0], &single), Ok(true));
        assert!(minimax_check(&[0, 1], &c4).is_err());
        assert!(minimax_check(&[0, 1, 2, 3], &c4).is_err());
    }

    #[test]
    fn reverse_delete_examples() {
        let theta = wg(2, &[(0, 1), (0, 1), (0, 1)], &[0.2, 0.1, 0.3]);
        assert_eq!(reverse_delete(&theta), Ok(vec![1]));
        let t = wg(3, &[(0, 1), (1, 2)], &[0.9, 0.1]);
        assert_eq!(reverse_delete(&t), Ok(vec![0, 1]));
        assert_eq!(reverse_delete(&wg(3, &[(0, 1)], &[0.1])), Err(Error::Disconnected));
        let loops = wg(2, &[(0, 0), (0, 1)], &[0.1, 0.9]);
        assert_eq!(reverse_delete(&loops), Ok(vec![1]));
    }

    #[test]
    fn reverse_delete_matches_kruskal() {
        for seed in 0..1000 {
            let g = random_graph(seed, 2 + seed as usize % 12, seed as usize % 9);
            assert_eq!(reverse_delete(&g).unwrap(), mst(&g), "seed {seed}");
        }
    }

    #[test]
    fn restriction_examples() {
        let mut rng = stream(2, 0, "restrict");
        for _ in 0..200 {
            let g = WeightedGraph::iid(complete_graph(6), &mut rng);
            let mut w = g.w.clone();
            w.sort_by(f64::total_cmp);
            assert!(percolation_restriction_check(&g, w[w.len() / 2]));
            assert!(percolation_restriction_check(&g, 2.0));
            assert!(percolation_restriction_check(&g, -1.0));
        }
    }

    #[test]
    fn conditional_mst_matches_direct_law_on_k4() {
        let k4 = complete_graph(4);
        let key = |g: &Multigraph| g.edge_key();
        let direct: EmpiricalLaw<Vec<(usize, usize)>> = (0..100_000)
            .map(|i| {
                let g = WeightedGraph::iid(k4.clone(), &mut stream(3, i, "direct"));
                key(&k4.edge_subgraph(&mst(&g)))
            })
            .collect();
        let conditional: EmpiricalLaw<Vec<(usize, usize)>> = (0..100_000)
            .map(|i| {
                let mut p = ErProcess::new(4, stream(3, i, "cond"));
                key(&mst_conditional_on_er(&mut p, 0.3).graph())
            })
            .collect();
        assert!(tv_empirical(&direct, &conditional) < 0.02);
    }

    #[test]
    fn connected_er_never_uses_outside_weights() {
        let mut p = ErProcess::new(30, stream(4, 0, "dense"));
        let m = mst_conditional_on_er(&mut p, 300.0);
        assert!(m.threshold > 0.5);
        assert_eq!(m.edges.len(), 29);
        assert!(m.edges.iter().all(|e| e.2 <= m.threshold));
        let masses = m.pendant_masses();
        assert_eq!(masses.len(), 30);
        assert!(masses.iter().all(|&(_, x)| (x - 1.0 / 30.0).abs() < 1e-12));
    }

    #[test]
    fn pendant_masses_sum_to_one() {
        for (i, lambda) in [-2.0, 0.0, 1.5, 4.0].into_iter().enumerate() {
            let mut p = ErProcess::new(500, stream(5, i as u64, "masses"));
            let m = mst_conditional_on_er(&mut p, lambda);
            assert!(m.graph().is_connected());
            let total: f64 = m.pendant_masses().iter().map(|x| x.1).sum();
            assert!((total - 1.0).abs() < 1e-9);
            // the cluster's own tree is the restriction of the full tree
            let c = m.largest_cluster();
            let inner = m.edges.iter().filter(|e| e.2 <= m.threshold && c.binary_search(&e.0).is_ok()).count();
            assert_eq!(inner + 1, c.len());
        }
    }

    proptest! {
        #[test]
        fn rank_invariance(seed in 0u64..5000, n in 2usize..15, extra in 0usize..12) {
            let g = random_graph(seed, n, extra);
            let warped = WeightedGraph { graph: g.graph.clone(), w: g.w.iter().map(|x| (3.0 * x).exp() + x.powi(3)).collect() };
            prop_assert_eq!(mst(&g), mst(&warped));
        }

        #[test]
        fn kruskal_is_minimax(seed in 0u64..5000, n in 1usize..15, extra in 0usize..12) {
            let g = random_graph(seed, n, extra);
            prop_assert_eq!(minimax_check(&mst(&g), &g), Ok(true));
        }

        #[test]
        fn restriction_always_holds(seed in 0u64..5000, n in 2usize..12, extra in 0usize..15, u in 0.0f64..1.0) {
            prop_assert!(percolation_restriction_check(&random_graph(seed, n, extra), u));
        }

        #[test]
        fn mst_grows_along_the_coupling(seed in 0u64..2000, a in -3.0f64..3.0, b in 0.1f64..3.0) {
            let mut p = ErProcess::new(200, stream(seed, 0, "prop-mono"));
            let full = mst_conditional_on_er(&mut p, a + b);
            let lo_t = er_threshold(200, a);
            let small = mst_conditional_on_er(&mut p, a);
            let c_small = small.largest_cluster();
            let c_big = full.largest_cluster();
            // only meaningful when the leader persists
            prop_assume!(c_small.iter().all(|v| c_big.binary_search(v).is_ok()));
            let tree_big: std::collections::BTreeSet<(usize, usize)> =
                full.edges.iter().filter(|e| e.2 <= full.threshold).map(|e| (e.0.min(e.1), e.0.max(e.1))).collect();
            for e in small.edges.iter().filter(|e| e.2 <= lo_t && c_small.binary_search(&e.0).is_ok()) {
                prop_assert!(tree_big.contains(&(e.0.min(e.1), e.0.max(e.1))));
            }
        }
    }
}
