use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::multigraph::Multigraph;

/// Finitely many points with a distance matrix and a probability measure.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMetricMeasureSpace {
    pub k: usize,
    /// Row-major k x k.
    pub d: Vec<f64>,
    pub mass: Vec<f64>,
}

const TOL: f64 = 1e-9;

impl FiniteMetricMeasureSpace {
    /// Checks symmetry, zero diagonal, the triangle inequality and the masses.
    pub fn new(d: Vec<Vec<f64>>, mass: Vec<f64>) -> Result<Self> {
        let k = d.len();
        if d.iter().any(|r| r.len() != k) {
            return invalid("distance matrix is not square");
        }
        let s = Self::from_parts(k, d.into_iter().flatten().collect(), mass)?;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    if s.dist(i, l) > s.dist(i, j) + s.dist(j, l) + TOL {
                        return invalid(format!("triangle inequality fails at ({i}, {j}, {l})"));
                    }
                }
            }
        }
        Ok(s)
    }

    /// Same checks without the cubic triangle pass.
    pub fn from_parts(k: usize, d: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if d.len() != k * k || mass.len() != k {
            return invalid("dimension mismatch");
        }
        if k == 0 {
            return invalid("empty space");
        }
        for i in 0..k {
            if d[i * k + i] != 0.0 {
                return invalid("nonzero diagonal");
            }
            for j in 0..i {
                let (a, b) = (d[i * k + j], d[j * k + i]);
                if !(a >= 0.0) || (a - b).abs() > TOL {
                    return invalid("distances must be symmetric and nonnegative");
                }
            }
        }
        if mass.iter().any(|&m| !(m >= 0.0)) || (mass.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return invalid("masses must be a probability vector");
        }
        Ok(FiniteMetricMeasureSpace { k, d, mass })
    }

    pub fn uniform(d: Vec<Vec<f64>>) -> Result<Self> {
        let k = d.len();
        Self::new(d, vec![1.0 / k as f64; k.max(1)])
    }

    pub fn singleton() -> Self {
        FiniteMetricMeasureSpace { k: 1, d: vec![0.0], mass: vec![1.0] }
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.k + j]
    }

    pub fn diam(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        FiniteMetricMeasureSpace { k: self.k, d: self.d.iter().map(|x| x * c).collect(), mass: self.mass.clone() }
    }

    /// Graph distances between all vertices, uniform mass.
    pub fn from_graph(g: &Multigraph) -> Result<Self> {
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        let k = g.n;
        let mut d = Vec::with_capacity(k * k);
        for s in 0..k {
            d.extend(g.distances(s).into_iter().map(|x| x.expect("connected")));
        }
        Self::from_parts(k, d, vec![1.0 / k as f64; k])
    }

    /// `k`, then the masses, then k distance rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.k);
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{}", join(&self.mass));
        for i in 0..self.k {
            let _ = writeln!(out, "{}", join(&self.d[i * self.k..(i + 1) * self.k]));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let row = |line: usize, l: &str| -> Result<Vec<f64>> {
            l.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse { line, msg: e.to_string() }))
                .collect()
        };
        let (i, head) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let k: usize = head.trim().parse().map_err(|_| Error::Parse { line: i + 1, msg: "bad point count".into() })?;
        let (i, m) = lines.next().ok_or(Error::Parse { line: i + 2, msg: "missing masses".into() })?;
        let mass = row(i + 1, m)?;
        let mut d = Vec::with_capacity(k);
        for (i, l) in lines {
            d.push(row(i + 1, l)?);
        }
        if d.len() != k {
            return Err(Error::Parse { line: k + 2, msg: format!("expected {k} distance rows, found {}", d.len()) });
        }
        Self::new(d, mass)
    }
}

pub type Correspondence = Vec<(usize, usize)>;

pub fn distortion(c: &[(usize, usize)], x: &FiniteMetricMeasureSpace, y: &FiniteMetricMeasureSpace) -> Result<f64> {
    let mut cx = vec![false; x.k];
    let mut cy = vec![false; y.k];
    for &(a, b) in c {
        if a >= x.k || b >= y.k {
            return invalid("correspondence index out of range");
        }
        cx[a] = true;
        cy[b] = true;
    }
    if cx.iter().any(|&f| !f) || cy.iter().any(|&f| !f) {
        return invalid("correspondence does not cover both spaces");
    }
    let mut best: f64 = 0.0;
    for &(a, b) in c {
        for &(a2, b2) in c {
            best = best.max((x.dist(a, a2) - y.dist(b, b2)).abs());
        }
    }
    Ok(best)
}

pub const GH_CAP: usize = 7;
pub const GHP_CAP: usize = 5;

/// Every value |d_X(a,b) - d_Y(c,d)|, sorted and deduplicated.
fn gap_values(x: &FiniteMetricMeasureSpace, y: &FiniteMetricMeasureSpace) -> Vec<f64> {
    let mut v: Vec<f64> = x.d.iter().flat_map(|&a| y.d.iter().map(move |&b| (a - b).abs())).collect();
    v.push(0.0);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Is there a covering correspondence of distortion at most `delta`?
fn feasible(x: &FiniteMetricMeasureSpace, y: &FiniteMetricMeasureSpace, delta: f64) -> bool {
    let ok = |a: usize, b: usize, a2: usize, b2: usize| (x.dist(a, a2) - y.dist(b, b2)).abs() <= delta;
    fn search(
        x: &FiniteMetricMeasureSpace,
        y: &FiniteMetricMeasureSpace,
        ok: &dyn Fn(usize, usize, usize, usize) -> bool,
        chosen: &mut Vec<(usize, usize)>,
        covered: &mut Vec<u32>,
        step: usize,
    ) -> bool {
        // first every x gets a partner, then every uncovered y
        let (a_range, target): (Vec<(usize, usize)>, bool) = if step < x.k {
            ((0..y.k).map(|b| (step, b)).collect(), true)
        } else {
            match (0..y.k).find(|&b| covered[b] == 0) {
                None => return true,
                Some(b) => ((0..x.k).map(|a| (a, b)).collect(), false),
            }
        };
        for (a, b) in a_range {
            if !ok(a, b, a, b) || !chosen.iter().all(|&(a2, b2)| ok(a, b, a2, b2)) {
                continue;
            }
            chosen.push((a, b));
            covered[b] += 1;
            if search(x, y, ok, chosen, covered, if target { step + 1 } else { step }) {
                return true;
            }
            covered[b] -= 1;
            chosen.pop();
        }
        false
    }
    search(x, y, &ok, &mut Vec::new(), &mut vec![0; y.k], 0)
}

/// Exact Gromov–Hausdorff distance for spaces of at most seven points.
pub fn gh_exact(x: &FiniteMetricMeasureSpace, y: &FiniteMetricMeasureSpace) -> Result<f64> {
    let big = x.k.max(y.k);
    if big > GH_CAP {
        return Err(Error::CapExceeded { what: "points (use gh_bounds)", size: big, cap: GH_CAP });
    }
    let vals = gap_values(x, y);
    let (mut lo, mut hi) = (0usize, vals.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(x, y, vals[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(vals[lo] / 2.0)
}

type Q = BigRational;

fn q(x: f64) -> Q {
    Q::from_float(x).expect("finite value")
}

/// min c.x subject to A x <= b, x >= 0, solved exactly. `None` when infeasible.
/// The objectives used here are bounded below by zero.
pub fn lp_min(c: &[Q], a: &[Vec<Q>], b: &[Q]) -> Option<Q> {
    let (m, n) = (a.len(), c.len());
    // columns: originals, slacks, artificials
    let arts: Vec<usize> = (0..m).filter(|&i| b[i].is_negative()).collect();
    let width = n + m + arts.len();
    let mut t: Vec<Vec<Q>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![Q::zero(); width + 1];
        let sign = if b[i].is_negative() { -Q::from_integer(1.into()) } else { Q::from_integer(1.into()) };
        for j in 0..n {
            row[j] = &a[i][j] * &sign;
        }
        row[n + i] = sign.clone();
        row[width] = &b[i] * &sign;
        if let Some(p) = arts.iter().position(|&r| r == i) {
            row[n + m + p] = Q::from_integer(1.into());
            basis.push(n + m + p);
        } else {
            basis.push(n + i);
        }
        t.push(row);
    }
    let pivot = |t: &mut Vec<Vec<Q>>, basis: &mut Vec<usize>, r: usize, col: usize| {
        let p = t[r][col].clone();
        for v in t[r].iter_mut() {
            *v = &*v / &p;
        }
        for i in 0..t.len() {
            if i != r && !t[i][col].is_zero() {
                let f = t[i][col].clone();
                for j in 0..t[i].len() {
                    let delta = &f * &t[r][j];
                    t[i][j] -= delta;
                }
            }
        }
        basis[r] = col;
    };
    // Bland's rule simplex on objective `cost` over allowed columns
    let run = |t: &mut Vec<Vec<Q>>, basis: &mut Vec<usize>, cost: &[Q], allowed: usize| -> Q {
        loop {
            let reduced = |j: usize, t: &Vec<Vec<Q>>, basis: &Vec<usize>| {
                let mut z = cost[j].clone();
                for (i, &bv) in basis.iter().enumerate() {
                    if !cost[bv].is_zero() && !t[i][j].is_zero() {
                        z -= &cost[bv] * &t[i][j];
                    }
                }
                z
            };
            let Some(col) = (0..allowed).find(|&j| !basis.contains(&j) && reduced(j, t, basis).is_negative()) else {
                let mut val = Q::zero();
                for (i, &bv) in basis.iter().enumerate() {
                    val += &cost[bv] * &t[i][width];
                }
                return val;
            };
            let mut best: Option<(Q, usize, usize)> = None;
            for i in 0..t.len() {
                if t[i][col].is_positive() {
                    let ratio = &t[i][width] / &t[i][col];
                    let better = match &best {
                        None => true,
                        Some((r, _, bv)) => ratio < *r || (ratio == *r && basis[i] < *bv),
                    };
                    if better {
                        best = Some((ratio, i, basis[i]));
                    }
                }
            }
            let (_, r, _) = best.expect("objective bounded below");
            pivot(t, basis, r, col);
        }
    };
    if !arts.is_empty() {
        let mut cost1 = vec![Q::zero(); width];
        for p in 0..arts.len() {
            cost1[n + m + p] = Q::from_integer(1.into());
        }
        let v = run(&mut t, &mut basis, &cost1, width);
        if v.is_positive() {
            return None;
        }
        // drive degenerate artificials out of the basis
        for r in 0..m {
            if basis[r] >= n + m {
                if let Some(col) = (0..n + m).find(|&j| !t[r][j].is_zero()) {
                    pivot(&mut t, &mut basis, r, col);
                }
            }
        }
    }
    let mut cost2 = vec![Q::zero(); width];
    cost2[..n].clone_from_slice(c);
    Some(run(&mut t, &mut basis, &cost2, n + m))
}

/// min over measures pi of max(D(pi; mu_1, mu_2), pi(C^c)).
fn coupling_lp(x: &FiniteMetricMeasureSpace, y: &FiniteMetricMeasureSpace, inside: u32) -> Q {
    let (k1, k2) = (x.k, y.k);
    let np = k1 * k2;
    // variables: pi (np), a (k1), b (k2), t
    let n = np + k1 + k2 + 1;
    let tv = n - 1;
    let one = Q::from_integer(BigInt::from(1));
    let zero_row = || vec![Q::zero(); n];
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..k1 {
        // pi_1(i) - mu_1(i) <= a_i and mu_1(i) - pi_1(i) <= a_i
        let mut up = zero_row();
        let mut down = zero_row();
        for j in 0..k2 {
            up[i * k2 + j] = one.clone();
            down[i * k2 + j] = -one.clone();
        }
        up[np + i] = -one.clone();
        down[np + i] = -one.clone();
        a.push(up);
        b.push(q(x.mass[i]));
        a.push(down);
        b.push(-q(x.mass[i]));
    }
    for j in 0..k2 {
        let mut up = zero_row();
        let mut down = zero_row();
        for i in 0..k1 {
            up[i * k2 + j] = one.clone();
            down[i * k2 + j] = -one.clone();
        }
        up[np + k1 + j] = -one.clone();
        down[np + k1 + j] = -one.clone();
        a.push(up);
        b.push(q(y.mass[j]));
        a.push(down);
        b.push(-q(y.mass[j]));
    }
    let mut disc = zero_row();
    for v in disc[np..tv].iter_mut() {
        *v = one.clone();
    }
    disc[tv] = -one.clone();
    a.push(disc);
    b.push(Q::zero());
    let mut off = zero_row();
    for p in 0..np {
        if inside >> p & 1 == 0 {
            off[p] = one.clone();
        }
    }
    off[tv] = -one.clone();
    a.push(off);
    b.push(Q::zero());
    let mut c = zero_row();
    c[tv] = one;
    lp_min(&c, &a, &b).expect("the zero measure is always feasible")
}

/// Maximal cliques of a graph on at most 32 vertices given as bit masks.
fn maximal_cliques(adj: &[u32]) -> Vec<u32> {
    fn bk(r: u32, mut p: u32, mut x: u32, adj: &[u32], out: &mut Vec<u32>) {
        if p == 0 && x == 0 {
            out.push(r);
            return;
        }
        let pivot = (p | x).trailing_zeros() as usize;
        let mut cand = p & !adj[pivot];
        while cand != 0 {
            let v = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            bk(r | 1 << v, p & adj[v], x & adj[v], adj, out);
            p &= !(1 << v);
            x |= 1 << v;
        }
    }
    let mut out = Vec::new();
    let all = if adj.len() == 32 { u32::MAX } else { (1u32 << adj.len()) - 1 };
    bk(0, all, 0, adj, &mut out);
    out
}

/// Exact GHP distance for spaces of at most five points.
pub fn ghp_exact(x: &FiniteMetricMeasureSpace, y: &FiniteMetricMeasureSpace) -> Result<f64> {
    let big = x.k.max(y.k);
    if big > GHP_CAP {
        return Err(Error::CapExceeded { what: "points", size: big, cap: GHP_CAP });
    }
    let (k1, k2) = (x.k, y.k);
    let np = k1 * k2;
    let mut memo: HashMap<u32, f64> = HashMap::new();
    let mut best = f64::INFINITY;
    for delta in gap_values(x, y) {
        if delta / 2.0 >= best {
            break;
        }
        let adj: Vec<u32> = (0..np)
            .map(|p| {
                let (a, b) = (p / k2, p % k2);
                (0..np)
                    .filter(|&r| r != p && (x.dist(a, r / k2) - y.dist(b, r % k2)).abs() <= delta)
                    .fold(0u32, |m, r| m | 1 << r)
            })
            .collect();
        for clique in maximal_cliques(&adj) {
            let covers_x = (0..k1).all(|a| (0..k2).any(|b| clique >> (a * k2 + b) & 1 == 1));
            let covers_y = (0..k2).all(|b| (0..k1).any(|a| clique >> (a * k2 + b) & 1 == 1));
            if !covers_x || !covers_y {
                continue;
            }
            let lp = *memo.entry(clique).or_insert_with(|| coupling_lp(x, y, clique).to_f64_lossy());
            best = best.min(lp.max(delta / 2.0));
        }
    }
    Ok(best)
}

trait Lossy {
    fn to_f64_lossy(&self) -> f64;
}

impl Lossy for Q {
    fn to_f64_lossy(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

fn hausdorff_1d(a: &[f64], b: &[f64]) -> f64 {
    let near = |v: f64, s: &[f64]| {
        let i = s.partition_point(|&w| w < v);
        let mut d = f64::INFINITY;
        if i < s.len() {
            d = d.min((s[i] - v).abs());
        }
        if i > 0 {
            d = d.min((v - s[i - 1]).abs());
        }
        d
    };
    let ab = a.iter().map(|&v| near(v, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|&v| near(v, a)).fold(0.0, f64::max);
    ab.max(ba)
}

fn sorted_values(x: &FiniteMetricMeasureSpace) -> Vec<f64> {
    let mut v = x.d.clone();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn eccentricities(x: &FiniteMetricMeasureSpace) -> Vec<f64> {
    (0..x.k).map(|i| (0..x.k).map(|j| x.dist(i, j)).fold(0.0, f64::max)).collect()
}

/// Certified bounds lower <= GH <= upper.
pub fn gh_bounds(x: &FiniteMetricMeasureSpace, y: &FiniteMetricMeasureSpace) -> (f64, f64) {
    let diam_gap = (x.diam() - y.diam()).abs();
    let lower = diam_gap.max(hausdorff_1d(&sorted_values(x), &sorted_values(y))) / 2.0;
    let mut upper = x.diam().max(y.diam());
    if x.k == y.k {
        let id: Vec<(usize, usize)> = (0..x.k).map(|i| (i, i)).collect();
        upper = upper.min(distortion(&id, x, y).expect("covering"));
    }
    upper = upper.min(greedy_distortion(x, y));
    (lower, (upper / 2.0).max(lower))
}

/// Eccentricity matching followed by single-pair improvement moves.
fn greedy_distortion(x: &FiniteMetricMeasureSpace, y: &FiniteMetricMeasureSpace) -> f64 {
    let (ex, ey) = (eccentricities(x), eccentricities(y));
    let closest = |v: f64, e: &[f64]| {
        (0..e.len()).min_by(|&i, &j| (e[i] - v).abs().total_cmp(&(e[j] - v).abs())).expect("nonempty")
    };
    let mut fx: Vec<usize> = ex.iter().map(|&v| closest(v, &ey)).collect();
    let mut gy: Vec<usize> = ey.iter().map(|&v| closest(v, &ex)).collect();
    let build = |fx: &[usize], gy: &[usize]| -> Vec<(usize, usize)> {
        let mut c: Vec<(usize, usize)> = fx.iter().enumerate().map(|(a, &b)| (a, b)).collect();
        c.extend(gy.iter().enumerate().map(|(b, &a)| (a, b)));
        c
    };
    let mut cur = distortion(&build(&fx, &gy), x, y).expect("covering");
    for _ in 0..20 {
        let mut improved = false;
        for a in 0..x.k {
            for b in 0..y.k {
                let old = fx[a];
                fx[a] = b;
                let d = distortion(&build(&fx, &gy), x, y).expect("covering");
                if d < cur {
                    cur = d;
                    improved = true;
                } else {
                    fx[a] = old;
                }
            }
        }
        for b in 0..y.k {
            for a in 0..x.k {
                let old = gy[b];
                gy[b] = a;
                let d = distortion(&build(&fx, &gy), x, y).expect("covering");
                if d < cur {
                    cur = d;
                    improved = true;
                } else {
                    gy[b] = old;
                }
            }
        }
        if !improved || x.k * y.k > 400 {
            break;
        }
    }
    cur
}

/// fm(delta; X): the heaviest closed ball of radius delta.
pub fn max_ball_mass(x: &FiniteMetricMeasureSpace, delta: f64) -> f64 {
    (0..x.k)
        .map(|i| (0..x.k).filter(|&j| x.dist(i, j) <= delta).map(|j| x.mass[j]).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Distances between `samples` independent pairs of mass-distributed points.
pub fn typical_distance_profile<R: Rng + ?Sized>(
    x: &FiniteMetricMeasureSpace,
    samples: usize,
    rng: &mut R,
) -> Vec<f64> {
    let pick = WeightedIndex::new(&x.mass).expect("probability vector");
    (0..samples).map(|_| x.dist(pick.sample(rng), pick.sample(rng))).collect()
}

/// Exact law of d(xi, xi') as `(distance, probability)` sorted by distance.
pub fn distance_profile_exact(x: &FiniteMetricMeasureSpace) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = (0..x.k)
        .flat_map(|i| (0..x.k).map(move |j| (i, j)))
        .map(|(i, j)| (x.dist(i, j), x.mass[i] * x.mass[j]))
        .filter(|p| p.1 > 0.0)
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (d, p) in pairs {
        match out.last_mut() {
            Some(last) if last.0 == d => last.1 += p,
            _ => out.push((d, p)),
        }
    }
    out
}

/// Greedy covering number with closed balls of radius delta.
pub fn covering_number(x: &FiniteMetricMeasureSpace, delta: f64) -> usize {
    let mut covered = vec![false; x.k];
    let mut count = 0;
    for i in 0..x.k {
        if covered[i] {
            continue;
        }
        count += 1;
        for j in 0..x.k {
            if x.dist(i, j) <= delta {
                covered[j] = true;
            }
        }
    }
    count
}

/// Least-squares slope of log N_delta against log(1/delta).
pub fn minkowski_slope(x: &FiniteMetricMeasureSpace, deltas: &[f64]) -> Result<f64> {
    if deltas.len() < 3 || deltas.iter().any(|&d| !(d > 0.0)) {
        return invalid("need at least three positive scales");
    }
    let xs: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let ys: Vec<f64> = deltas.iter().map(|&d| (covering_number(x, d) as f64).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return invalid("scales must not all coincide");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// max_j |sum_{i<=j} p_{pi(i)} - j/m| under a fresh uniform permutation.
pub fn exch_partial_sum_stat<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> f64 {
    let mut v = p.to_vec();
    v.shuffle(rng);
    let m = v.len() as f64;
    let mut s = 0.0;
    let mut best: f64 = 0.0;
    for (j, x) in v.iter().enumerate() {
        s += x;
        best = best.max((s - (j + 1) as f64 / m).abs());
    }
    best
}

pub fn l2_norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}
