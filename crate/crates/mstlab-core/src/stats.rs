use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::multigraph::Multigraph;
use crate::unionfind::UnionFind;

/// Outcome counts over a canonical encoding.
#[derive(Clone, Debug)]
pub struct EmpiricalLaw<K: Ord> {
    pub counts: BTreeMap<K, u64>,
    pub total: u64,
}

impl<K: Ord> Default for EmpiricalLaw<K> {
    fn default() -> Self {
        EmpiricalLaw { counts: BTreeMap::new(), total: 0 }
    }
}

impl<K: Ord + Clone> EmpiricalLaw<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, k: K) {
        *self.counts.entry(k).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn freq(&self, k: &K) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.get(k).unwrap_or(&0) as f64 / self.total as f64
    }

    pub fn merge(&mut self, other: &EmpiricalLaw<K>) {
        for (k, c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
        self.total += other.total;
    }
}

impl<K: Ord + Clone> FromIterator<K> for EmpiricalLaw<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut law = EmpiricalLaw::new();
        for k in iter {
            law.add(k);
        }
        law
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Half the L1 distance between an empirical law and an exact pmf.
/// Outcomes observed outside the exact support are an error.
pub fn tv_distance<K: Ord + Clone + std::fmt::Debug>(
    emp: &EmpiricalLaw<K>,
    exact: &BTreeMap<K, BigRational>,
) -> Result<f64> {
    if let Some(k) = emp.counts.keys().find(|k| !exact.contains_key(*k)) {
        return invalid(format!("outcome {k:?} is outside the exact support"));
    }
    let mut s = 0.0;
    for (k, p) in exact {
        s += (emp.freq(k) - rational_to_f64(p)).abs();
    }
    Ok(s / 2.0)
}

pub fn tv_empirical<K: Ord + Clone>(a: &EmpiricalLaw<K>, b: &EmpiricalLaw<K>) -> f64 {
    let keys: std::collections::BTreeSet<&K> = a.counts.keys().chain(b.counts.keys()).collect();
    keys.into_iter().map(|k| (a.freq(k) - b.freq(k)).abs()).sum::<f64>() / 2.0
}

#[derive(Clone, Copy, Debug)]
pub struct ChiSquare {
    pub stat: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. Cells with zero expected probability must be empty.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return invalid("chi-square needs matching cell vectors of length >= 2");
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return invalid("chi-square on an empty sample");
    }
    let mut stat = 0.0;
    let mut cells = 0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return Ok(ChiSquare { stat: f64::INFINITY, df: 1, p_value: 0.0 });
            }
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let df = cells.max(2) - 1;
    let p_value = ChiSquared::new(df as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN);
    Ok(ChiSquare { stat, df, p_value })
}

#[derive(Clone, Copy, Debug)]
pub struct Ks {
    pub stat: f64,
    pub p_value: f64,
}

impl Ks {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let t = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
        s += t;
        if t.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

pub fn ks_one(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<Ks> {
    if sample.is_empty() {
        return invalid("KS test on an empty sample");
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(Ks { stat: d, p_value: ks_p(d, n) })
}

pub fn ks_two(a: &[f64], b: &[f64]) -> Result<Ks> {
    if a.is_empty() || b.is_empty() {
        return invalid("KS test on an empty sample");
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(Ks { stat: d, p_value: ks_p(d, n_eff) })
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn double_factorial(k: usize) -> BigInt {
    let mut r = BigInt::one();
    let mut i = k;
    while i > 1 {
        r *= i;
        i -= 2;
    }
    r
}

pub fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * i)
}

pub const PAIRING_CAP: usize = 8;

/// Every perfect matching of the half-edges of `d`, as multigraphs.
pub fn enumerate_pairings(d: &[usize]) -> Result<Vec<Multigraph>> {
    let total: usize = d.iter().sum();
    if total % 2 == 1 {
        return invalid("degree sum is odd");
    }
    if total > PAIRING_CAP {
        return Err(Error::CapExceeded { what: "half-edges", size: total, cap: PAIRING_CAP });
    }
    let owner: Vec<usize> = d.iter().enumerate().flat_map(|(v, &k)| std::iter::repeat_n(v, k)).collect();
    let mut out = Vec::new();
    let mut free = vec![true; total];
    let mut pairs = Vec::new();
    fn rec(
        owner: &[usize],
        free: &mut [bool],
        pairs: &mut Vec<(usize, usize)>,
        n: usize,
        out: &mut Vec<Multigraph>,
    ) {
        let Some(a) = free.iter().position(|&f| f) else {
            out.push(Multigraph::from_pairs(n, pairs));
            return;
        };
        free[a] = false;
        for b in a + 1..free.len() {
            if free[b] {
                free[b] = false;
                pairs.push((owner[a], owner[b]));
                rec(owner, free, pairs, n, out);
                pairs.pop();
                free[b] = true;
            }
        }
        free[a] = true;
    }
    rec(&owner, &mut free, &mut pairs, d.len(), &mut out);
    Ok(out)
}

pub const SPANNING_TREE_CAP: usize = 10;

/// All spanning trees as sorted edge-id lists.
pub fn enumerate_spanning_trees(g: &Multigraph) -> Result<Vec<Vec<usize>>> {
    let m = g.edges.len();
    if m > SPANNING_TREE_CAP {
        return Err(Error::CapExceeded { what: "edges", size: m, cap: SPANNING_TREE_CAP });
    }
    if g.n == 0 {
        return Ok(vec![]);
    }
    let need = g.n - 1;
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << m) {
        if mask.count_ones() as usize != need {
            continue;
        }
        let mut uf = UnionFind::new(g.n);
        let ok = (0..m).filter(|&i| mask >> i & 1 == 1).all(|i| uf.union(g.edges[i].u, g.edges[i].v).is_some());
        if ok {
            out.push((0..m).filter(|&i| mask >> i & 1 == 1).collect());
        }
    }
    Ok(out)
}

pub const SUBSET_CAP: usize = 20;

/// Edge-subset masks accepted by `keep`.
pub fn enumerate_edge_subsets(g: &Multigraph, keep: impl Fn(&Multigraph) -> bool) -> Result<Vec<u32>> {
    let m = g.edges.len();
    if m > SUBSET_CAP {
        return Err(Error::CapExceeded { what: "edges", size: m, cap: SUBSET_CAP });
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << m) {
        let ids: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
        if keep(&g.edge_subgraph(&ids)) {
            out.push(mask);
        }
    }
    Ok(out)
}

/// Edge keys of every connected simple graph on `n` labelled vertices with `edges` edges.
pub fn connected_graphs(n: usize, edges: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    let kn = complete_graph(n);
    Ok(enumerate_edge_subsets(&kn, |h| h.edges.len() == edges && h.is_connected())?
        .into_iter()
        .map(|mask| {
            let ids: Vec<usize> = (0..kn.m()).filter(|&i| mask >> i & 1 == 1).collect();
            kn.edge_subgraph(&ids).edge_key()
        })
        .collect())
}

pub fn complete_graph(n: usize) -> Multigraph {
    let mut g = Multigraph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            g.add_edge(i, j);
        }
    }
    g
}

/// Uniform pmf over a list of outcomes.
pub fn uniform_pmf<K: Ord + Clone>(support: &[K]) -> BTreeMap<K, BigRational> {
    let p = BigRational::new(BigInt::one(), BigInt::from(support.len()));
    support.iter().map(|k| (k.clone(), p.clone())).collect()
}

pub fn pmf_total<K>(pmf: &BTreeMap<K, BigRational>) -> BigRational {
    pmf.values().fold(BigRational::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn tv_examples() {
        let exact: BTreeMap<u8, BigRational> = [(0, r(1, 2)), (1, r(1, 2))].into_iter().collect();
        let same: EmpiricalLaw<u8> = [0, 1].into_iter().collect();
        assert_eq!(tv_distance(&same, &exact).unwrap(), 0.0);
        let skew: EmpiricalLaw<u8> = [0, 0, 0, 1].into_iter().collect();
        assert_eq!(tv_distance(&skew, &exact).unwrap(), 0.25);
        let disjoint: BTreeMap<u8, BigRational> = [(5, r(1, 1))].into_iter().collect();
        let five: EmpiricalLaw<u8> = [5].into_iter().collect();
        let other: EmpiricalLaw<u8> = [6].into_iter().collect();
        assert_eq!(tv_empirical(&five, &other), 1.0);
        assert!(tv_distance(&other, &disjoint).is_err());
        let zeros: BTreeMap<u8, BigRational> = [(5, r(1, 1)), (6, r(0, 1))].into_iter().collect();
        assert_eq!(tv_distance(&other, &zeros).unwrap(), 1.0);
    }

    #[test]
    fn pairings_examples() {
        let p33 = enumerate_pairings(&[3, 3]).unwrap();
        assert_eq!(p33.len(), 15);
        let mut law: BTreeMap<Vec<(usize, usize)>, usize> = BTreeMap::new();
        for g in &p33 {
            *law.entry(g.edge_key()).or_insert(0) += 1;
        }
        let mut counts: Vec<usize> = law.values().copied().collect();
        counts.sort();
        assert_eq!(counts, vec![6, 9]);
        assert_eq!(enumerate_pairings(&[1, 1]).unwrap().len(), 1);
        assert_eq!(enumerate_pairings(&[2]).unwrap().len(), 1);
        assert!(enumerate_pairings(&[3, 2]).is_err());
        assert!(enumerate_pairings(&[3, 3, 3, 1]).is_err());
        for d in [vec![2, 2, 2, 2], vec![4, 4], vec![1, 1, 1, 1, 2, 2], vec![8]] {
            let total: usize = d.iter().sum();
            assert_eq!(BigInt::from(enumerate_pairings(&d).unwrap().len()), double_factorial(total - 1));
        }
    }

    #[test]
    fn spanning_tree_counts() {
        assert_eq!(enumerate_spanning_trees(&complete_graph(4)).unwrap().len(), 16);
        let theta = Multigraph::from_pairs(2, &[(0, 1), (0, 1), (0, 1)]);
        assert_eq!(enumerate_spanning_trees(&theta).unwrap().len(), 3);
        let tree = Multigraph::from_pairs(4, &[(0, 1), (1, 2), (1, 3)]);
        assert_eq!(enumerate_spanning_trees(&tree).unwrap(), vec![vec![0, 1, 2]]);
        assert!(enumerate_spanning_trees(&complete_graph(5)).is_ok());
        assert!(enumerate_spanning_trees(&complete_graph(6)).is_err());
        // Cayley on K5
        assert_eq!(enumerate_spanning_trees(&complete_graph(5)).unwrap().len(), 125);
    }

    #[test]
    fn connected_unicyclic_on_four() {
        let k4 = complete_graph(4);
        let masks = enumerate_edge_subsets(&k4, |h| h.edges.len() == 4 && h.is_connected()).unwrap();
        assert_eq!(masks.len(), 15);
    }

    #[test]
    fn ks_behaviour() {
        assert!(ks_one(&[], |x| x).is_err());
        let mut rng = crate::rng::stream(1, 0, "ks-test");
        let mut rejections = 0;
        for _ in 0..100 {
            let s: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
            if ks_one(&s, |x| x.clamp(0.0, 1.0)).unwrap().rejects(0.05) {
                rejections += 1;
            }
        }
        assert!(rejections <= 15, "{rejections}");
        let exp: Vec<f64> = (0..10_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let rayleigh = |y: f64| if y <= 0.0 { 0.0 } else { 1.0 - (-y * y / 2.0).exp() };
        assert!(ks_one(&exp, rayleigh).unwrap().rejects(0.001));
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
        assert!(!ks_two(&a, &b).unwrap().rejects(0.001));
        let c: Vec<f64> = b.iter().map(|x| x * 0.8).collect();
        assert!(ks_two(&a, &c).unwrap().rejects(0.001));
    }

    #[test]
    fn chi_square_calibration() {
        let c = chi_square(&[50, 50], &[0.5, 0.5]).unwrap();
        assert_eq!(c.stat, 0.0);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        let c = chi_square(&[90, 10], &[0.5, 0.5]).unwrap();
        assert!(c.p_value < 1e-10);
        assert_eq!(chi_square(&[1, 1], &[1.0, 0.0]).unwrap().p_value, 0.0);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
    }
}
