use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Gamma;

use crate::error::{invalid, Error, Result};
use crate::metric::FiniteMetricMeasureSpace;
use crate::multigraph::Multigraph;
use crate::samplers::{configuration_model, DegreeSequence, NONE};

pub const DEFAULT_GRID: usize = 1 << 14;
pub const DEFAULT_POINTS: usize = 512;
const KERNEL_ATTEMPTS: u64 = 100_000;
const TILT_ATTEMPTS: u64 = 1_000_000;

/// A nonnegative path on the grid `i/N`, zero at both ends, linear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcursionPath {
    values: Vec<f64>,
}

impl ExcursionPath {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return invalid("an excursion needs at least one step");
        }
        if values[0] != 0.0 || *values.last().expect("nonempty") != 0.0 {
            return invalid("an excursion starts and ends at zero");
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return invalid("an excursion is nonnegative");
        }
        Ok(ExcursionPath { values })
    }

    /// Number of grid steps N.
    pub fn grid(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: f64) -> f64 {
        let n = self.grid();
        let x = t.clamp(0.0, 1.0) * n as f64;
        let j = (x.floor() as usize).min(n - 1);
        let frac = x - j as f64;
        self.values[j] + (self.values[j + 1] - self.values[j]) * frac
    }

    /// Minimum over the closed interval between `a` and `b`.
    pub fn min_on(&self, a: f64, b: f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let n = self.grid() as f64;
        let mut m = self.at(a).min(self.at(b));
        let first = (a * n).floor() as usize + 1;
        let last = (b * n).ceil() as usize;
        for i in first..last {
            m = m.min(self.values[i]);
        }
        m
    }

    pub fn area(&self) -> f64 {
        let s: f64 = self.values.windows(2).map(|w| w[0] + w[1]).sum();
        s / (2.0 * self.grid() as f64)
    }

    pub fn scaled(&self, c: f64) -> Self {
        ExcursionPath { values: self.values.iter().map(|v| v * c).collect() }
    }
}

/// Uniform Dyck path of length N - 2 lifted by one, scaled by 1/sqrt(N).
/// A rotation of a shuffled +-1 sequence (cycle lemma) makes it exact.
pub fn brownian_excursion<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ExcursionPath> {
    if n < 2 || !n.is_power_of_two() {
        return invalid(format!("grid size {n} is not a power of two >= 2"));
    }
    let mut steps: Vec<i32> = (0..n - 1).map(|i| if i < n / 2 - 1 { 1 } else { -1 }).collect();
    steps.shuffle(rng);
    // first index attaining the minimum partial sum
    let (mut s, mut best, mut at) = (0i32, 0i32, 0usize);
    for (k, &x) in steps.iter().enumerate() {
        s += x;
        if s < best {
            best = s;
            at = k + 1;
        }
    }
    let start = at % (n - 1);
    let scale = 1.0 / (n as f64).sqrt();
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut h = 1i32;
    values.push(h as f64 * scale);
    for j in 0..n - 1 {
        h += steps[(start + j) % (n - 1)];
        values.push(h as f64 * scale);
    }
    debug_assert_eq!(h, 0);
    ExcursionPath::new(values)
}

/// The root (time 0, mass 0) followed by `q` uniform times with mass 1/q.
pub fn tree_from_excursion<R: Rng + ?Sized>(h: &ExcursionPath, q: usize, rng: &mut R) -> Result<FiniteMetricMeasureSpace> {
    if q == 0 {
        return invalid("need at least one sampled point");
    }
    let mut times = vec![0.0];
    times.extend((0..q).map(|_| rng.random::<f64>()));
    let mut mass = vec![1.0 / q as f64; q + 1];
    mass[0] = 0.0;
    FiniteMetricMeasureSpace::from_parts(q + 1, pseudo_distances(h, &times), mass)
}

/// h(s) + h(t) - 2 min h on [s, t], for all pairs of `times`.
pub fn pseudo_distances(h: &ExcursionPath, times: &[f64]) -> Vec<f64> {
    let k = times.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let gaps: Vec<f64> = order.windows(2).map(|w| h.min_on(times[w[0]], times[w[1]])).collect();
    let hv: Vec<f64> = times.iter().map(|&t| h.at(t)).collect();
    let mut d = vec![0.0; k * k];
    for a in 0..k {
        let mut m = f64::INFINITY;
        for b in a + 1..k {
            m = m.min(gaps[b - 1]);
            let (i, j) = (order[a], order[b]);
            let v = (hv[i] + hv[j] - 2.0 * m).max(0.0);
            d[i * k + j] = v;
            d[j * k + i] = v;
        }
    }
    d
}

/// A finite sample of the tree coded by twice an excursion.
pub fn sample_crt<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Result<FiniteMetricMeasureSpace> {
    let e = brownian_excursion(n, rng)?.scaled(2.0);
    tree_from_excursion(&e, q, rng)
}

/// sup { y in [0, x) : f(y) = h }, `None` for the empty set.
pub fn prev(f: &ExcursionPath, x: f64, h: f64) -> Option<f64> {
    let n = f.grid();
    let nf = n as f64;
    let j0 = ((x * nf).floor() as usize).min(n - 1);
    for j in (0..=j0).rev() {
        let (a, b) = (f.values[j], f.values[j + 1]);
        let (s0, s1) = (j as f64 / nf, (j + 1) as f64 / nf);
        if s0 >= x {
            continue;
        }
        if a == b {
            if a == h {
                return Some(s1.min(x));
            }
            continue;
        }
        let u = (h - a) / (b - a);
        if (0.0..=1.0).contains(&u) {
            let y = s0 + u / nf;
            if y < x {
                return Some(y);
            }
        }
    }
    None
}

/// inf { y in (x, 1] : f(y) < h }, `None` for the empty set.
pub fn nxt(f: &ExcursionPath, x: f64, h: f64) -> Option<f64> {
    let n = f.grid();
    let nf = n as f64;
    let j0 = ((x * nf).floor() as usize).min(n - 1);
    for j in j0..n {
        let s1 = (j + 1) as f64 / nf;
        let lo = (j as f64 / nf).max(x);
        if lo >= s1 {
            continue;
        }
        let (va, vb) = (f.at(lo), f.values[j + 1]);
        if va < h {
            return Some(lo);
        }
        if vb < h {
            return Some(lo + (s1 - lo) * (va - h) / (va - vb));
        }
    }
    None
}

/// Tree spanned by the root and the marked `times`, heights multiplied by `scale`.
/// Vertex 0 is the root; `vertex_of[i]` is the vertex of `times[i]`.
struct ReducedTree {
    height: Vec<f64>,
    parent: Vec<usize>,
    vertex_of: Vec<usize>,
}

fn reduced_tree(h: &ExcursionPath, times: &[f64], scale: f64) -> ReducedTree {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut height = vec![0.0];
    let mut parent = vec![NONE];
    let mut vertex_of = vec![0; times.len()];
    let mut stack = vec![0usize];
    let mut last = 0.0;
    for i in order {
        let t = times[i];
        let ht = scale * h.at(t);
        let level = scale * h.min_on(last, t);
        let mut child = NONE;
        while height[*stack.last().expect("root stays")] > level {
            child = stack.pop().expect("nonempty");
        }
        let top = *stack.last().expect("root stays");
        let branch = if height[top] >= level || child == NONE {
            top
        } else {
            let b = height.len();
            height.push(level);
            parent.push(top);
            parent[child] = b;
            stack.push(b);
            b
        };
        vertex_of[i] = if ht > height[branch] {
            let v = height.len();
            height.push(ht);
            parent.push(branch);
            stack.push(v);
            v
        } else {
            branch
        };
        last = t;
    }
    ReducedTree { height, parent, vertex_of }
}

impl ReducedTree {
    /// Adds the tree to `g`; `fixed` pins some tree vertices to existing graph vertices.
    fn embed(&self, g: &mut Multigraph, fixed: &[(usize, usize)]) -> Vec<usize> {
        let mut map = vec![NONE; self.height.len()];
        for &(v, to) in fixed {
            map[v] = to;
        }
        for m in map.iter_mut() {
            if *m == NONE {
                *m = g.n;
                g.n += 1;
            }
        }
        for v in 1..self.height.len() {
            let p = self.parent[v];
            g.add_edge_len(map[p], map[v], self.height[v] - self.height[p]);
        }
        map
    }
}

/// One glued CRT: Dirichlet weight, its Gamma numerator, unscaled root-to-target distance.
#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    pub weight: f64,
    pub gamma: f64,
    pub root_to_target: f64,
}

#[derive(Clone, Debug)]
pub struct GluedSpace {
    /// The sampled points with uniform mass.
    pub space: FiniteMetricMeasureSpace,
    /// Metric graph carrying every sampled point.
    pub graph: Multigraph,
    pub points: Vec<usize>,
    /// Kernel multigraph, lengths are core path lengths.
    pub kernel: Multigraph,
    /// One per kernel edge; empty for the tilted construction.
    pub fragments: Vec<Fragment>,
}

impl GluedSpace {
    pub fn kernel_length(&self) -> f64 {
        self.kernel.total_length()
    }

    fn from_graph(graph: Multigraph, points: Vec<usize>, kernel: Multigraph, fragments: Vec<Fragment>) -> Result<Self> {
        let q = points.len();
        let mut d = vec![0.0; q * q];
        for (i, &p) in points.iter().enumerate() {
            let row = graph.distances(p);
            for j in 0..i {
                let v = row[points[j]].ok_or(Error::Disconnected)?;
                d[i * q + j] = v;
                d[j * q + i] = v;
            }
        }
        let space = FiniteMetricMeasureSpace::from_parts(q, d, vec![1.0 / q as f64; q])?;
        Ok(GluedSpace { space, graph, points, kernel, fragments })
    }
}

fn connected_cubic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Multigraph> {
    let d = DegreeSequence::regular(n, 3);
    for _ in 0..KERNEL_ATTEMPTS {
        let g = configuration_model(&d, rng)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::RejectionCap(KERNEL_ATTEMPTS))
}

/// Rescaled CRTs glued along a connected cubic kernel on 2(s - 1) vertices.
pub fn construct_h_s<R: Rng + ?Sized>(s: usize, n: usize, q: usize, rng: &mut R) -> Result<GluedSpace> {
    if s < 2 {
        return invalid("s must be at least 2");
    }
    if q == 0 {
        return invalid("need at least one sampled point");
    }
    let k = 2 * (s - 1);
    let r = 3 * (s - 1);
    let mut kernel = connected_cubic(k, rng)?;
    let g_half = Gamma::new(0.5, 1.0).expect("valid shape");
    let gammas: Vec<f64> = (0..r).map(|_| g_half.sample(rng)).collect();
    let total: f64 = gammas.iter().sum();
    let weights: Vec<f64> = gammas.iter().map(|g| g / total).collect();
    // allocate the q sampled points to fragments by mass
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); r];
    for p in 0..q {
        owned[pick.sample(rng)].push(p);
    }
    let mut graph = Multigraph::new(k);
    let mut points = vec![NONE; q];
    let mut fragments = Vec::with_capacity(r);
    for i in 0..r {
        let e = brownian_excursion(n, rng)?;
        let target = rng.random::<f64>();
        let mut times = vec![target];
        times.extend(owned[i].iter().map(|_| rng.random::<f64>()));
        let y = 2.0 * e.at(target);
        let tree = reduced_tree(&e, &times, 2.0 * weights[i].sqrt());
        let (u, v) = (kernel.edges[i].u, kernel.edges[i].v);
        let z = tree.vertex_of[0];
        let map = tree.embed(&mut graph, &[(0, u), (z, v)]);
        for (slot, &p) in owned[i].iter().enumerate() {
            points[p] = map[tree.vertex_of[slot + 1]];
        }
        kernel.edges[i].len = weights[i].sqrt() * y;
        fragments.push(Fragment { weight: weights[i], gamma: gammas[i], root_to_target: y });
    }
    GluedSpace::from_graph(graph, points, kernel, fragments)
}

/// Area-biased point of a piecewise-linear path.
fn area_biased_time<R: Rng + ?Sized>(e: &ExcursionPath, rng: &mut R) -> f64 {
    let v = e.values();
    let seg: Vec<f64> = v.windows(2).map(|w| w[0] + w[1]).collect();
    let j = WeightedIndex::new(&seg).expect("positive area").sample(rng);
    let (a, b) = (v[j], v[j + 1]);
    let w: f64 = rng.random();
    let u = if (b - a).abs() < 1e-12 * (a + b) {
        w
    } else {
        (-a + (a * a + (b - a) * w * (a + b)).max(0.0).sqrt()) / (b - a)
    };
    (j as f64 + u.clamp(0.0, 1.0)) / e.grid() as f64
}

/// Excursion tilted by its area to the power s, by rejection.
pub fn tilted_excursion<R: Rng + ?Sized>(s: usize, n: usize, rng: &mut R) -> Result<ExcursionPath> {
    let mut cap: f64 = 1.2;
    for _ in 0..TILT_ATTEMPTS {
        let e = brownian_excursion(n, rng)?;
        let a = e.area();
        if a > cap {
            cap = 1.1 * a;
            continue;
        }
        if rng.random::<f64>() < (a / cap).powi(s as i32) {
            return Ok(e);
        }
    }
    Err(Error::RejectionCap(TILT_ATTEMPTS))
}

/// Twice the tree of a tilted excursion with s ancestor identifications.
pub fn construct_h_s_tilted<R: Rng + ?Sized>(s: usize, n: usize, q: usize, rng: &mut R) -> Result<GluedSpace> {
    if s < 2 {
        return invalid("s must be at least 2");
    }
    if q == 0 {
        return invalid("need at least one sampled point");
    }
    let e = tilted_excursion(s, n, rng)?;
    let mut times: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
    for _ in 0..s {
        let y = area_biased_time(&e, rng);
        let h = rng.random::<f64>() * e.at(y);
        let x = prev(&e, y, h).unwrap_or(0.0);
        times.push(x);
        times.push(y);
    }
    let tree = reduced_tree(&e, &times, 2.0);
    // glue each x to its y by merging vertices
    let mut uf = crate::unionfind::UnionFind::new(tree.height.len());
    for i in 0..s {
        uf.union(tree.vertex_of[q + 2 * i], tree.vertex_of[q + 2 * i + 1]);
    }
    let mut label = vec![NONE; tree.height.len()];
    let mut graph = Multigraph::new(0);
    for v in 0..tree.height.len() {
        let root = uf.find(v);
        if label[root] == NONE {
            label[root] = graph.n;
            graph.n += 1;
        }
        label[v] = label[root];
    }
    for v in 1..tree.height.len() {
        let p = tree.parent[v];
        graph.add_edge_len(label[p], label[v], tree.height[v] - tree.height[p]);
    }
    let points = (0..q).map(|i| label[tree.vertex_of[i]]).collect();
    let kernel = match graph.kernel()? {
        crate::multigraph::Kernel::Graph(k) => k.graph,
        _ => return invalid("identifications collapsed the surplus"),
    };
    GluedSpace::from_graph(graph, points, kernel, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{ks_one, ks_two, mean_se};
    use rand::Rng;

    fn tent(a: f64) -> ExcursionPath {
        ExcursionPath::new(vec![0.0, a, 0.0]).unwrap()
    }

    #[test]
    fn excursion_shape() {
        let mut rng = stream(1, 0, "exc");
        for n in [2, 4, 8, 1024] {
            for _ in 0..20 {
                let e = brownian_excursion(n, &mut rng).unwrap();
                assert_eq!(e.grid(), n);
                assert_eq!(e.values()[0], 0.0);
                assert_eq!(e.values()[n], 0.0);
                assert!(e.values()[1..n].iter().all(|&v| v > 0.0));
            }
        }
        // N = 4 admits one path
        let e = brownian_excursion(4, &mut rng).unwrap();
        assert_eq!(e.values(), &[0.0, 0.5, 1.0, 0.5, 0.0]);
        assert!(brownian_excursion(6, &mut rng).is_err());
        assert!(ExcursionPath::new(vec![0.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn excursion_area_mean() {
        let count = 10_000;
        let areas: Vec<f64> = crate::rng::replicas(count, |i| {
            let mut rng = stream(2, i, "area");
            brownian_excursion(1 << 14, &mut rng).unwrap().area()
        });
        let (m, _) = mean_se(&areas);
        assert!((m - (std::f64::consts::PI / 8.0).sqrt()).abs() < 0.02, "{m}");
    }

    #[test]
    fn tent_distances() {
        let a = 1.5;
        let t = tent(a);
        let d = pseudo_distances(&t, &[0.5, 0.0, 0.3, 0.3]);
        assert!((d[1] - a).abs() < 1e-12);
        assert_eq!(d[2 * 4 + 3], 0.0);
        // two peaks a at 1/4 and 3/4, valley b at 1/2
        let b = 0.5;
        let two = ExcursionPath::new(vec![0.0, a, b, a, 0.0]).unwrap();
        let d = pseudo_distances(&two, &[0.25, 0.75, 0.0]);
        assert!((d[1] - 2.0 * (a - b)).abs() < 1e-12);
        assert!((d[2] - a).abs() < 1e-12);
        assert!((d[5] - a).abs() < 1e-12);
    }

    #[test]
    fn prev_and_nxt_on_tent() {
        let a = 2.0;
        let t = tent(a);
        assert!((prev(&t, 0.75, a / 2.0).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(prev(&t, 0.1, a), None);
        assert!((nxt(&t, 0.25, a / 2.0).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(nxt(&t, 0.5, 0.0), None);
    }

    #[test]
    fn pseudo_metric_everywhere() {
        let mut rng = stream(3, 0, "pm");
        for _ in 0..20 {
            let x = sample_crt(256, 12, &mut rng).unwrap();
            for i in 0..x.k {
                for j in 0..x.k {
                    assert_eq!(x.dist(i, j), x.dist(j, i));
                    for l in 0..x.k {
                        assert!(x.dist(i, l) <= x.dist(i, j) + x.dist(j, l) + 1e-12);
                    }
                }
            }
            // four-point condition
            for a in 1..5 {
                for b in 5..8 {
                    let (c, dd) = (8, 9);
                    let mut s = [
                        x.dist(a, b) + x.dist(c, dd),
                        x.dist(a, c) + x.dist(b, dd),
                        x.dist(a, dd) + x.dist(b, c),
                    ];
                    s.sort_by(f64::total_cmp);
                    assert!(s[2] - s[1] < 1e-9);
                }
            }
        }
    }

    #[test]
    fn reduced_tree_matches_formula() {
        let mut rng = stream(4, 0, "reduced");
        for _ in 0..30 {
            let e = brownian_excursion(512, &mut rng).unwrap();
            let mut times = vec![0.0];
            times.extend((0..15).map(|_| rng.random::<f64>()));
            let direct = pseudo_distances(&e, &times);
            let tree = reduced_tree(&e, &times, 1.0);
            let mut g = Multigraph::new(0);
            let map = tree.embed(&mut g, &[]);
            assert_eq!(g.surplus().unwrap(), 0);
            for (i, &vi) in tree.vertex_of.iter().enumerate() {
                let row = g.distances(map[vi]);
                for (j, &vj) in tree.vertex_of.iter().enumerate() {
                    assert!((row[map[vj]].unwrap() - direct[i * times.len() + j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn crt_root_distance_is_rayleigh() {
        let count = 10_000;
        let ys: Vec<f64> = crate::rng::replicas(count, |i| {
            let mut rng = stream(5, i, "rayleigh");
            sample_crt(1 << 14, 1, &mut rng).unwrap().dist(0, 1)
        });
        let ks = ks_one(&ys, |y| 1.0 - (-y * y / 2.0).exp()).unwrap();
        assert!(ks.stat < 0.03, "{ks:?}");
    }

    #[test]
    fn h_s_small() {
        let mut rng = stream(6, 0, "hs");
        let h = construct_h_s(2, 256, 40, &mut rng).unwrap();
        assert_eq!(h.kernel.n, 2);
        assert_eq!(h.kernel.m(), 3);
        assert!(h.kernel.degrees().iter().all(|&d| d == 3));
        assert_eq!(h.graph.surplus().unwrap(), 2);
        assert!((h.space.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let core = h.graph.kernel().unwrap();
        assert!((core.total_length() - h.kernel_length()).abs() < 1e-9);
        for (f, e) in h.fragments.iter().zip(&h.kernel.edges) {
            assert_eq!(e.len, f.weight.sqrt() * f.root_to_target);
        }
        for s in [3, 5] {
            let h = construct_h_s(s, 128, 30, &mut rng).unwrap();
            assert_eq!(h.graph.surplus().unwrap(), s as i64);
            assert!(h.space.mass.len() == 30);
        }
    }

    #[test]
    fn dirichlet_means() {
        let r = 9;
        let xs: Vec<Vec<f64>> = (0..2000)
            .map(|i| {
                let mut rng = stream(7, i, "dir");
                construct_h_s(4, 64, 4, &mut rng).unwrap().fragments.iter().map(|f| f.weight).collect()
            })
            .collect();
        for j in 0..r {
            let col: Vec<f64> = xs.iter().map(|x| x[j]).collect();
            let (m, se) = mean_se(&col);
            assert!((m - 1.0 / r as f64).abs() < 3.0 * se + 1e-12, "{j}: {m} {se}");
        }
    }

    #[test]
    fn tilted_surplus_and_law() {
        let mut rng = stream(8, 0, "tilt");
        for s in [2, 3, 4] {
            let h = construct_h_s_tilted(s, 256, 20, &mut rng).unwrap();
            assert_eq!(h.graph.surplus().unwrap(), s as i64);
            assert!(h.kernel.degrees().iter().all(|&d| d == 3));
        }
        let count = 3000;
        let plain: Vec<f64> = crate::rng::replicas(count, |i| {
            let mut rng = stream(9, i, "plain");
            construct_h_s(2, 1024, 2, &mut rng).unwrap().space.dist(0, 1)
        });
        let tilted: Vec<f64> = crate::rng::replicas(count, |i| {
            let mut rng = stream(10, i, "tilted");
            construct_h_s_tilted(2, 1024, 2, &mut rng).unwrap().space.dist(0, 1)
        });
        let ks = ks_two(&plain, &tilted).unwrap();
        assert!(ks.p_value > 0.001, "{ks:?}");
    }
}
