use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::multigraph::Multigraph;
use crate::mst::{mst, mst_conditional_on_er, WeightedGraph};
use crate::percolation::{perc, retention};
use crate::rng::{replicas, stream};
use crate::samplers::{configuration_model, er_lambda, er_threshold, pendant_sizes_random, sample_h_ms, DegreeSequence, ErProcess};
use crate::stats::{mean_se, quantile};
use crate::unionfind::UnionFind;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXPERIMENTS: [&str; 7] = [
    "mst_scaling",
    "six_cuberoot_ratio",
    "critical_census",
    "surplus_trajectory",
    "light_path_probe",
    "pendant_mass_census",
    "delta_max_mass",
];

/// Flat `key = value` configuration. Lists are comma separated; keys outside
/// the fixed set are numeric experiment knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub grid: usize,
    pub points: usize,
    pub pairs: usize,
    pub output: Option<PathBuf>,
    pub params: BTreeMap<String, f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "mst_scaling".into(),
            sizes: vec![1000],
            lambdas: vec![0.0],
            replicas: 10,
            seed: 0,
            grid: 1 << 14,
            points: 512,
            pairs: 64,
            output: None,
            params: BTreeMap::new(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(v: &str, line: usize) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>().map_err(|_| Error::Parse { line, msg: format!("bad list entry {s:?}") }))
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let (k, v) = l.split_once('=').ok_or(Error::Parse { line, msg: "expected key = value".into() })?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("{k}: not a number") });
            let int = |v: &str| v.parse::<u64>().map_err(|_| Error::Parse { line, msg: format!("{k}: not an integer") });
            match k {
                "experiment" => c.experiment = v.to_string(),
                "sizes" | "n" => c.sizes = parse_list(v, line)?,
                "lambdas" | "lambda" => c.lambdas = parse_list(v, line)?,
                "replicas" => c.replicas = int(v)? as usize,
                "seed" => c.seed = int(v)?,
                "grid" => c.grid = int(v)? as usize,
                "points" => c.points = int(v)? as usize,
                "pairs" => c.pairs = int(v)? as usize,
                "output" => c.output = Some(PathBuf::from(v)),
                _ => {
                    c.params.insert(k.to_string(), num(v)?);
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&mut self) -> Result<()> {
        if self.replicas == 0 {
            return invalid("replicas must be at least 1");
        }
        if self.sizes.is_empty() {
            return invalid("sizes must not be empty");
        }
        self.sizes.sort_unstable();
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return invalid("lambdas must be finite");
        }
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return invalid(format!("unknown experiment {:?}", self.experiment));
        }
        Ok(())
    }

    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn to_text(&self) -> String {
        let join = |xs: Vec<String>| xs.join(",");
        let mut out = String::new();
        let _ = writeln!(out, "experiment = {}", self.experiment);
        let _ = writeln!(out, "sizes = {}", join(self.sizes.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(out, "lambdas = {}", join(self.lambdas.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(out, "replicas = {}", self.replicas);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "grid = {}", self.grid);
        let _ = writeln!(out, "points = {}", self.points);
        let _ = writeln!(out, "pairs = {}", self.pairs);
        if let Some(p) = &self.output {
            let _ = writeln!(out, "output = {}", p.display());
        }
        for (k, v) in &self.params {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub experiment: String,
    pub replica: u64,
    pub seed: u64,
    pub stats: Vec<(String, f64)>,
    /// Seconds; informational only and never written to the CSV.
    pub wall_clock: f64,
    pub version: &'static str,
}

impl RunRecord {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.stats.iter().find(|(k, _)| k == name).map(|s| s.1)
    }
}

fn record(experiment: &str, seed: u64, replica: u64, start: Instant, stats: Vec<(String, f64)>) -> RunRecord {
    RunRecord {
        experiment: experiment.to_string(),
        replica,
        seed,
        stats,
        wall_clock: start.elapsed().as_secs_f64(),
        version: VERSION,
    }
}

/// One statistic per row, config echoed in the comment header.
pub fn to_csv(header: &str, records: &[RunRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# mstlab {VERSION}");
    for l in header.lines() {
        let _ = writeln!(out, "# {l}");
    }
    out.push_str("experiment,replica,name,value\n");
    for r in records {
        for (k, v) in &r.stats {
            let _ = writeln!(out, "{},{},{},{}", r.experiment, r.replica, k, v);
        }
    }
    out
}

/// Count, mean and quantiles per statistic name.
pub fn summary_json(header: &str, records: &[RunRecord]) -> Value {
    let mut by_name: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        for (k, v) in &r.stats {
            if v.is_finite() {
                by_name.entry(k.as_str()).or_default().push(*v);
            }
        }
    }
    let stats: serde_json::Map<String, Value> = by_name
        .into_iter()
        .map(|(k, xs)| {
            let (mean, se) = mean_se(&xs);
            let q = |p| quantile(&xs, p);
            let v = json!({
                "count": xs.len(), "mean": mean, "se": se,
                "q05": q(0.05), "q25": q(0.25), "median": q(0.5), "q75": q(0.75), "q95": q(0.95),
            });
            (k.to_string(), v)
        })
        .collect();
    json!({
        "version": VERSION,
        "config": header,
        "replicas": records.len(),
        "wall_clock_seconds": records.iter().map(|r| r.wall_clock).sum::<f64>(),
        "statistics": stats,
    })
}

pub fn run_experiment(c: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    match c.experiment.as_str() {
        "mst_scaling" => mst_scaling(c),
        "six_cuberoot_ratio" => six_cuberoot_ratio(c).map(|r| r.1),
        "critical_census" => critical_census(c),
        "surplus_trajectory" => surplus_trajectory(c),
        "light_path_probe" => light_path_experiment(c),
        "pendant_mass_census" => {
            let s = c.param("s", 3.0) as usize;
            pendant_mass_census(c.sizes[0], s, c.replicas, c.seed)
        }
        "delta_max_mass" => delta_max_mass(c),
        other => invalid(format!("unknown experiment {other:?}")),
    }
}

/// Unit-length BFS distances inside a graph.
fn hops(adj: &[Vec<(usize, usize)>], src: usize) -> Vec<u32> {
    let mut d = vec![u32::MAX; adj.len()];
    let mut q = VecDeque::new();
    d[src] = 0;
    q.push_back(src);
    while let Some(x) = q.pop_front() {
        for &(y, _) in &adj[x] {
            if d[y] == u32::MAX {
                d[y] = d[x] + 1;
                q.push_back(y);
            }
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeStats {
    pub vertices: usize,
    pub diameter: u32,
    pub typical: f64,
}

/// Double-sweep diameter and mean distance between `pairs` uniform vertex
/// pairs of the tree containing `verts`.
pub fn tree_stats<R: Rng + ?Sized>(tree: &Multigraph, verts: &[usize], pairs: usize, rng: &mut R) -> TreeStats {
    let adj = tree.adjacency();
    let d0 = hops(&adj, verts[0]);
    let far = *verts.iter().max_by_key(|&&v| (d0[v], std::cmp::Reverse(v))).expect("nonempty");
    let d1 = hops(&adj, far);
    let diameter = verts.iter().map(|&v| d1[v]).max().unwrap_or(0);
    let mut total = 0.0;
    for _ in 0..pairs {
        let a = verts[rng.random_range(0..verts.len())];
        let b = verts[rng.random_range(0..verts.len())];
        total += hops(&adj, a)[b] as f64;
    }
    TreeStats { vertices: verts.len(), diameter, typical: if pairs > 0 { total / pairs as f64 } else { f64::NAN } }
}

/// MST of G_{n,3} with iid uniform weights; `None` when the graph is disconnected.
pub fn gn3_mst_stats<R: Rng + ?Sized>(n: usize, pairs: usize, rng: &mut R) -> Result<(bool, TreeStats)> {
    let g = configuration_model(&DegreeSequence::regular(n, 3), rng)?;
    let wg = WeightedGraph::iid(g, rng);
    let ids = mst(&wg);
    let tree = wg.graph.edge_subgraph(&ids);
    let mut verts: Vec<usize> = ids.iter().flat_map(|&i| [wg.graph.edges[i].u, wg.graph.edges[i].v]).collect();
    verts.sort_unstable();
    verts.dedup();
    if verts.is_empty() {
        verts.push(0);
    }
    let connected = verts.len() == n;
    Ok((connected, tree_stats(&tree, &verts, pairs, rng)))
}

/// MST of K_m with iid uniform weights.
pub fn complete_mst_stats(m: usize, pairs: usize, seed: u64, replica: u64) -> TreeStats {
    let mut process = ErProcess::new(m, stream(seed, replica, "complete-weights"));
    let c = mst_conditional_on_er(&mut process, 0.0);
    let verts: Vec<usize> = (0..m).collect();
    tree_stats(&c.graph(), &verts, pairs, &mut stream(seed, replica, "complete-pairs"))
}

fn grid<T>(c: &ExperimentConfig, f: impl Fn(usize, f64, u64) -> Result<T> + Sync + Send) -> Result<Vec<T>>
where
    T: Send,
{
    let combos: Vec<(usize, f64)> =
        c.sizes.iter().flat_map(|&n| c.lambdas.iter().map(move |&l| (n, l))).collect();
    let per = c.replicas;
    replicas(combos.len() * per, |i| {
        let (n, l) = combos[i as usize / per];
        f(n, l, i)
    })
    .into_iter()
    .collect()
}

pub fn mst_scaling(c: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    if c.sizes.iter().any(|n| n % 2 == 1) {
        return invalid("sizes must be even");
    }
    let per = c.replicas;
    let out: Vec<Result<RunRecord>> = replicas(c.sizes.len() * per, |i| {
        let n = c.sizes[i as usize / per];
        let start = Instant::now();
        let mut rng = stream(c.seed, i, "mst_scaling");
        let (connected, t) = gn3_mst_stats(n, c.pairs, &mut rng)?;
        let scale = (n as f64).cbrt();
        Ok(record(
            "mst_scaling",
            c.seed,
            i,
            start,
            vec![
                ("n".into(), n as f64),
                ("connected".into(), connected as u8 as f64),
                ("tree_vertices".into(), t.vertices as f64),
                ("diam_scaled".into(), t.diameter as f64 / scale),
                ("typical_scaled".into(), t.typical / scale),
            ],
        ))
    });
    out.into_iter().collect()
}

/// Ratio of mean rescaled typical distances, G_{n,3} over K_m, and the records.
/// n is the largest entry of `sizes`; m is the `complete` knob.
pub fn six_cuberoot_ratio(c: &ExperimentConfig) -> Result<(f64, Vec<RunRecord>)> {
    let n = *c.sizes.last().expect("validated");
    let m = c.param("complete", (n / 10).max(2) as f64) as usize;
    if n % 2 == 1 {
        return invalid("n must be even");
    }
    let out: Vec<Result<RunRecord>> = replicas(c.replicas, |i| {
        let start = Instant::now();
        let mut rng = stream(c.seed, i, "six_cuberoot_ratio");
        let (_, a) = gn3_mst_stats(n, c.pairs, &mut rng)?;
        let b = complete_mst_stats(m, c.pairs, c.seed, i);
        Ok(record(
            "six_cuberoot_ratio",
            c.seed,
            i,
            start,
            vec![
                ("n".into(), n as f64),
                ("m".into(), m as f64),
                ("gn3_typical_scaled".into(), a.typical / (n as f64).cbrt()),
                ("complete_typical_scaled".into(), b.typical / (m as f64).cbrt()),
            ],
        ))
    });
    let records: Vec<RunRecord> = out.into_iter().collect::<Result<_>>()?;
    let mean = |k: &str| records.iter().filter_map(|r| r.get(k)).sum::<f64>() / records.len() as f64;
    Ok((mean("gn3_typical_scaled") / mean("complete_typical_scaled"), records))
}

fn component_summary(g: &Multigraph, top: usize) -> Result<Vec<(usize, i64, Option<bool>)>> {
    g.components()
        .into_iter()
        .take(top)
        .map(|comp| {
            let (sub, _, _) = g.induced(&comp);
            let sp = sub.surplus()?;
            let cubic = if sp >= 2 { Some(sub.kernel()?.is_three_regular()) } else { None };
            Ok((comp.len(), sp, cubic))
        })
        .collect()
}

/// Rescaled sizes and surpluses of the largest components of ER(n, lambda)
/// and of percolated G_{n,3} at the matching retention.
pub fn critical_census(c: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let top = c.param("components", 3.0) as usize;
    let with_er = c.param("er", 1.0) != 0.0;
    let with_perc = c.param("perc", 1.0) != 0.0;
    grid(c, |n, lambda, i| {
        let start = Instant::now();
        let scale = (n as f64).powf(2.0 / 3.0);
        let mut stats = vec![("n".to_string(), n as f64), ("lambda".to_string(), lambda)];
        if with_er {
            let g = ErProcess::new(n, stream(c.seed, i, "census-er")).graph(lambda);
            for (k, (size, sp, _)) in component_summary(&g, top)?.into_iter().enumerate() {
                stats.push((format!("er_c{}_scaled", k + 1), size as f64 / scale));
                stats.push((format!("er_sp{}", k + 1), sp as f64));
            }
        }
        if with_perc {
            if n % 2 == 1 {
                return invalid("percolated G_{n,3} needs even n");
            }
            let mut rng = stream(c.seed, i, "census-perc");
            let g = configuration_model(&DegreeSequence::regular(n, 3), &mut rng)?;
            let p = perc(&g, retention(n, lambda).clamp(0.0, 1.0), &mut rng)?;
            let (size, sp, cubic) = component_summary(&p.graph, 1)?[0];
            stats.push(("perc_c1_scaled".into(), size as f64 / scale));
            stats.push(("perc_sp1".into(), sp as f64));
            stats.push(("perc_kernel_cubic".into(), cubic.map_or(f64::NAN, |b| b as u8 as f64)));
        }
        Ok(record("critical_census", c.seed, i, start, stats))
    })
}

/// k(k+1) / ((k + 1/6)(k + 5/6)) as an exact fraction.
pub fn beta(k: u64) -> BigRational {
    let k = BigInt::from(k);
    BigRational::new(36 * &k * (&k + 1), (6 * &k + 1) * (6 * &k + 5))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Some stretch with every other surplus at most one sees sp(C_1) take
    /// every value in [s1, s].
    pub hits_all: bool,
    /// First lambda with one component of surplus s and every other at most one.
    pub tau_s: Option<f64>,
    pub leader_changes: u64,
    /// Total surplus never decreased.
    pub monotone: bool,
    pub final_sp1: i64,
}

/// Walks the ER filtration one edge at a time in increasing U order.
pub fn trajectory(n: usize, s1: i64, s: i64, lambda_max: f64, seed: u64, replica: u64) -> Trajectory {
    let mut process = ErProcess::new(n, stream(seed, replica, "trajectory"));
    let edges = process.edges_upto(er_threshold(n, lambda_max)).to_vec();
    let mut uf = UnionFind::new(n);
    let mut size = vec![1usize; n];
    let mut sp = vec![0i64; n];
    // surplus value -> number of components carrying it, for surplus >= 1
    let mut census: BTreeMap<i64, usize> = BTreeMap::new();
    let bump = |census: &mut BTreeMap<i64, usize>, v: i64, up: bool| {
        if v < 1 {
            return;
        }
        if up {
            *census.entry(v).or_insert(0) += 1;
        } else if let Some(c) = census.get_mut(&v) {
            *c -= 1;
            if *c == 0 {
                census.remove(&v);
            }
        }
    };
    let mut leader = 0usize;
    let mut out = Trajectory { hits_all: false, tau_s: None, leader_changes: 0, monotone: true, final_sp1: 0 };
    let mut total = 0i64;
    let width = (s - s1 + 1).max(0) as usize;
    let mut seen = vec![false; width];
    for (u, v, w) in edges {
        let (a, b) = (uf.find(u as usize), uf.find(v as usize));
        if a == b {
            bump(&mut census, sp[a], false);
            sp[a] += 1;
            bump(&mut census, sp[a], true);
        } else {
            bump(&mut census, sp[a], false);
            bump(&mut census, sp[b], false);
            let r = uf.union(a, b).expect("distinct classes");
            let merged = sp[a] + sp[b];
            size[r] = size[a] + size[b];
            sp[r] = merged;
            bump(&mut census, merged, true);
        }
        let cur = uf.find(leader);
        let r = uf.find(u as usize);
        leader = if r != cur && size[r] > size[cur] {
            out.leader_changes += 1;
            r
        } else {
            cur
        };
        let new_total: i64 = census.iter().map(|(k, c)| k * *c as i64).sum();
        out.monotone &= new_total >= total;
        total = new_total;
        let lead_sp = sp[leader];
        // largest surplus among the other components
        let mut other = 0;
        let mut skipped = false;
        for (&k, &cnt) in census.iter().rev() {
            let left = if !skipped && k == lead_sp { cnt - 1 } else { cnt };
            if !skipped && k == lead_sp {
                skipped = true;
            }
            if left > 0 {
                other = k;
                break;
            }
        }
        if other <= 1 {
            if (s1..=s).contains(&lead_sp) {
                seen[(lead_sp - s1) as usize] = true;
                if seen.iter().all(|&b| b) {
                    out.hits_all = true;
                }
            }
        } else {
            seen.iter_mut().for_each(|b| *b = false);
        }
        let top = census.keys().next_back().copied().unwrap_or(0);
        let unique_top = census.get(&top) == Some(&1);
        if out.tau_s.is_none() && top == s && unique_top && census.range(2..s).next().is_none() {
            out.tau_s = Some(er_lambda(n, w));
        }
        out.final_sp1 = lead_sp;
        if lead_sp > s && out.tau_s.is_some() {
            break;
        }
    }
    out
}

pub fn surplus_trajectory(c: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let s1 = c.param("s1", 6.0) as i64;
    let s = c.param("s", 10.0) as i64;
    let lambda_max = c.param("lambda_max", 6.0);
    if s < s1 {
        return invalid("need s >= s1");
    }
    let n = *c.sizes.last().expect("validated");
    Ok(replicas(c.replicas, |i| {
        let start = Instant::now();
        let t = trajectory(n, s1, s, lambda_max, c.seed, i);
        record(
            "surplus_trajectory",
            c.seed,
            i,
            start,
            vec![
                ("n".into(), n as f64),
                ("hits_all".into(), t.hits_all as u8 as f64),
                ("tau_s".into(), t.tau_s.unwrap_or(f64::NAN)),
                ("leader_changes".into(), t.leader_changes as f64),
                ("monotone".into(), t.monotone as u8 as f64),
                ("final_sp1".into(), t.final_sp1 as f64),
            ],
        )
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Probe {
    Found,
    Absent,
    /// The node budget ran out first.
    Inconclusive,
}

/// Is there a self-avoiding path P with |P| >= m edges and total length at
/// most c|P|? A long light path always contains a light stretch of between
/// m and 2m - 1 edges, so only those lengths are searched.
pub fn light_path_probe(g: &Multigraph, c: f64, m: usize, budget: u64) -> Probe {
    if m == 0 {
        return Probe::Found;
    }
    let adj = g.adjacency();
    let max_depth = 2 * m - 1;
    let cap = c * max_depth as f64;
    let mut on_path = vec![false; g.n];
    let mut left = budget;
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        g: &Multigraph,
        adj: &[Vec<(usize, usize)>],
        x: usize,
        depth: usize,
        sum: f64,
        c: f64,
        m: usize,
        max_depth: usize,
        cap: f64,
        on_path: &mut [bool],
        left: &mut u64,
    ) -> Option<Probe> {
        if depth >= m && sum <= c * depth as f64 {
            return Some(Probe::Found);
        }
        if depth == max_depth {
            return None;
        }
        for &(y, e) in &adj[x] {
            if on_path[y] {
                continue;
            }
            let next = sum + g.edges[e].len;
            if next > cap {
                continue;
            }
            if *left == 0 {
                return Some(Probe::Inconclusive);
            }
            *left -= 1;
            on_path[y] = true;
            let r = dfs(g, adj, y, depth + 1, next, c, m, max_depth, cap, on_path, left);
            on_path[y] = false;
            if r.is_some() {
                return r;
            }
        }
        None
    }
    for v in 0..g.n {
        on_path[v] = true;
        let r = dfs(g, &adj, v, 0, 0.0, c, m, max_depth, cap, &mut on_path, &mut left);
        on_path[v] = false;
        if let Some(p) = r {
            return p;
        }
    }
    Probe::Absent
}

pub fn light_path_experiment(c: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let n = c.sizes[0];
    let light = c.param("c", 0.05);
    let m = c.param("m", 12.0) as usize;
    let budget = c.param("budget", 1e8) as u64;
    let out: Vec<Result<RunRecord>> = replicas(c.replicas, |i| {
        let start = Instant::now();
        let mut rng = stream(c.seed, i, "light_path");
        let mut g = configuration_model(&DegreeSequence::regular(n, 3), &mut rng)?;
        for e in &mut g.edges {
            e.len = rng.sample(Exp1);
        }
        let p = light_path_probe(&g, light, m, budget);
        Ok(record(
            "light_path_probe",
            c.seed,
            i,
            start,
            vec![
                ("found".into(), (p == Probe::Found) as u8 as f64),
                ("inconclusive".into(), (p == Probe::Inconclusive) as u8 as f64),
            ],
        ))
    });
    out.into_iter().collect()
}

/// |V_i| / m for every kernel edge of H_{m,s}.
pub fn pendant_mass_census(m: usize, s: usize, count: usize, seed: u64) -> Result<Vec<RunRecord>> {
    if s < 2 {
        return invalid("s must be at least 2");
    }
    let out: Vec<Result<RunRecord>> = replicas(count, |i| {
        let start = Instant::now();
        let mut rng = stream(seed, i, "pendant_mass");
        let h = relabel(&sample_h_ms(m, s, &mut rng)?, &mut rng);
        let (_, sizes) = pendant_sizes_random(&h, &mut rng)?.ok_or_else(|| Error::Invalid("kernel is not a graph".into()))?;
        let stats = sizes.iter().enumerate().map(|(k, &v)| (format!("frac_{k}"), v as f64 / m as f64)).collect();
        Ok(record("pendant_mass_census", seed, i, start, stats))
    });
    out.into_iter().collect()
}

/// Uniform relabelling of vertices and edge ids, so kernel edge order
/// carries no trace of how the sampler built the graph.
fn relabel<R: Rng + ?Sized>(h: &Multigraph, rng: &mut R) -> Multigraph {
    let mut pi: Vec<usize> = (0..h.n).collect();
    pi.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = h.edges.iter().map(|e| (pi[e.u], pi[e.v])).collect();
    pairs.shuffle(rng);
    Multigraph::from_pairs(h.n, &pairs)
}

/// Largest pendant mass fraction around the giant cluster, per lambda, on one
/// coupled weight family per replica.
pub fn delta_max_mass(c: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let n = c.sizes[0];
    let mut lambdas = c.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    Ok(replicas(c.replicas, |i| {
        let start = Instant::now();
        let mut process = ErProcess::new(n, stream(c.seed, i, "delta_max_mass"));
        let mut stats = vec![("n".to_string(), n as f64)];
        for &l in &lambdas {
            let cm = mst_conditional_on_er(&mut process, l);
            let delta = cm.pendant_masses().iter().map(|p| p.1).fold(0.0, f64::max);
            stats.push((format!("delta[lambda={l}]"), delta));
        }
        record("delta_max_mass", c.seed, i, start, stats)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::median;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn config_round_trip() {
        let c = cfg("experiment = critical_census\nsizes = 300, 100\nlambda = -1, 0.5\nreplicas = 4\nseed = 9\ns1 = 2 # knob\n");
        assert_eq!(c.sizes, vec![100, 300]);
        assert_eq!(c.lambdas, vec![-1.0, 0.5]);
        assert_eq!(c.param("s1", 0.0), 2.0);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        assert!(ExperimentConfig::parse("replicas = 0").is_err());
        assert!(ExperimentConfig::parse("experiment = nope").is_err());
        assert!(matches!(ExperimentConfig::parse("sizes = 1,x"), Err(Error::Parse { line: 1, .. })));
        assert!(ExperimentConfig::parse("seed").is_err());
    }

    #[test]
    fn beta_values() {
        assert_eq!(beta(3), BigRational::new(432.into(), 437.into()));
        assert_eq!(beta(1), BigRational::new(72.into(), 77.into()));
        // the infinite product stays positive: partial products level off
        let p: f64 = (1..2000).map(|k| crate::stats::rational_to_f64(&beta(k))).product();
        let q: f64 = (1..4000).map(|k| crate::stats::rational_to_f64(&beta(k))).product();
        assert!(p > 0.5 && (p - q).abs() < 1e-3);
    }

    #[test]
    fn mst_smoke_and_reproducible() {
        let c = cfg("experiment = mst_scaling\nsizes = 10, 200\nreplicas = 3\nseed = 1\n");
        let a = mst_scaling(&c).unwrap();
        assert_eq!(a, mst_scaling(&c).unwrap().into_iter().map(|mut r| {
            r.wall_clock = a[r.replica as usize].wall_clock;
            r
        }).collect::<Vec<_>>());
        for r in &a {
            assert!(r.get("diam_scaled").unwrap() > 0.0);
            if r.get("connected") == Some(1.0) {
                assert_eq!(r.get("tree_vertices"), r.get("n"));
            }
        }
        let csv = to_csv(&c.to_text(), &a);
        assert!(csv.contains("# experiment = mst_scaling"));
        assert!(csv.lines().any(|l| l.starts_with("mst_scaling,5,diam_scaled,")));
        let js = summary_json(&c.to_text(), &a);
        assert_eq!(js["statistics"]["n"]["count"], 6);
    }

    #[test]
    fn same_model_ratio_is_one() {
        // K_m against itself through the same pipeline
        let a: Vec<f64> = (0..40).map(|i| complete_mst_stats(400, 32, 3, i).typical).collect();
        let b: Vec<f64> = (40..80).map(|i| complete_mst_stats(400, 32, 3, i).typical).collect();
        let ratio = a.iter().sum::<f64>() / b.iter().sum::<f64>();
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
        let t = complete_mst_stats(50, 0, 1, 0);
        assert_eq!(t.vertices, 50);
    }

    #[test]
    fn trajectory_invariants() {
        for i in 0..5 {
            let t = trajectory(3000, 2, 4, 5.0, 4, i);
            assert!(t.monotone);
            if t.hits_all {
                assert!(t.final_sp1 >= 4);
            }
        }
    }

    #[test]
    fn light_path_trivial_cases() {
        let mut rng = stream(5, 0, "light");
        let path = Multigraph::from_pairs(8, &(0..7).map(|i| (i, i + 1)).collect::<Vec<_>>());
        assert_eq!(light_path_probe(&path, 10.0, 7, 1000), Probe::Found);
        assert_eq!(light_path_probe(&path, 10.0, 8, 1000), Probe::Absent);
        assert_eq!(light_path_probe(&path, 0.99, 3, 1000), Probe::Absent);
        assert_eq!(light_path_probe(&path, 1.0, 3, 1000), Probe::Found);
        let mut g = configuration_model(&DegreeSequence::regular(60, 3), &mut rng).unwrap();
        for e in &mut g.edges {
            e.len = rng.sample(Exp1);
        }
        assert_eq!(light_path_probe(&g, 0.3, 12, 1), Probe::Inconclusive);
        // lengths 0 on a long path make it light; a brute check on the reduction
        let mut z = path.clone();
        z.edges.iter_mut().for_each(|e| e.len = 0.0);
        assert_eq!(light_path_probe(&z, 0.0, 3, 1000), Probe::Found);
    }

    #[test]
    fn light_path_matches_brute_force() {
        // every simple path, every length >= m
        fn brute(g: &Multigraph, c: f64, m: usize) -> bool {
            let adj = g.adjacency();
            fn go(g: &Multigraph, adj: &[Vec<(usize, usize)>], x: usize, d: usize, s: f64, c: f64, m: usize, on: &mut [bool]) -> bool {
                if d >= m && s <= c * d as f64 {
                    return true;
                }
                for &(y, e) in &adj[x] {
                    if !on[y] {
                        on[y] = true;
                        let r = go(g, adj, y, d + 1, s + g.edges[e].len, c, m, on);
                        on[y] = false;
                        if r {
                            return true;
                        }
                    }
                }
                false
            }
            (0..g.n).any(|v| {
                let mut on = vec![false; g.n];
                on[v] = true;
                go(g, &adj, v, 0, 0.0, c, m, &mut on)
            })
        }
        let mut rng = stream(6, 0, "light-brute");
        for _ in 0..200 {
            let mut g = configuration_model(&DegreeSequence::regular(12, 3), &mut rng).unwrap();
            for e in &mut g.edges {
                e.len = rng.sample(Exp1);
            }
            let c = rng.random_range(0.2..1.2);
            let m = rng.random_range(2..5);
            let fast = light_path_probe(&g, c, m, u64::MAX) == Probe::Found;
            assert_eq!(fast, brute(&g, c, m));
        }
    }

    #[test]
    fn pendant_fractions_sum_to_one() {
        for r in pendant_mass_census(60, 3, 10, 7).unwrap() {
            assert!((4..=6).contains(&r.stats.len()));
            let s: f64 = r.stats.iter().map(|x| x.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_examples() {
        let c = cfg("experiment = delta_max_mass\nsizes = 300\nlambdas = 1000, 2, 8\nreplicas = 12\nseed = 2\n");
        let rs = delta_max_mass(&c).unwrap();
        for r in &rs {
            for (k, v) in &r.stats[1..] {
                assert!(*v > 0.0 && *v <= 1.0, "{k} {v}");
            }
            assert_eq!(r.get("delta[lambda=1000]"), Some(1.0 / 300.0));
        }
        let med = |k: &str| median(&rs.iter().map(|r| r.get(k).unwrap()).collect::<Vec<_>>());
        assert!(med("delta[lambda=2]") >= med("delta[lambda=8]"));
    }

    #[test]
    fn census_runs() {
        let c = cfg("experiment = critical_census\nsizes = 2000\nlambdas = 0\nreplicas = 3\n");
        let rs = critical_census(&c).unwrap();
        assert_eq!(rs.len(), 3);
        for r in rs {
            assert!(r.get("er_c1_scaled").unwrap() > 0.0);
            if r.get("perc_sp1").unwrap() >= 2.0 {
                assert_eq!(r.get("perc_kernel_cubic"), Some(1.0));
            }
        }
    }
}
