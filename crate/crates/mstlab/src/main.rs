use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mstlab_core::continuum::{construct_h_s, construct_h_s_tilted, sample_crt, DEFAULT_GRID, DEFAULT_POINTS};
use mstlab_core::cyclebreak::{cbd_infty, cbd_run, CbdOutcome};
use mstlab_core::experiments::{run_experiment, summary_json, to_csv, ExperimentConfig};
use mstlab_core::mst::{mst, msf, WeightedGraph};
use mstlab_core::percolation::{perc, poisson_marking};
use mstlab_core::rng::{init_threads, stream};
use mstlab_core::samplers::{
    configuration_model, sample_gmp, sample_h_ms, uniform_simple_regular, DegreeSequence, ErProcess,
};
use mstlab_core::verify::{records, run, Scale, CRITERIA};
use mstlab_core::Multigraph;

#[derive(Parser)]
#[command(name = "mstlab", version, about = "Random multigraphs, minimal spanning trees and cycle breaking")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    /// Configuration model with every degree equal to --degree.
    Cm,
    /// Uniform simple --degree-regular graph.
    Regular,
    /// Erdős–Rényi at p = (1 + lambda n^{-1/3}) / n.
    Er,
    /// Uniform connected graph on --n vertices with --n - 1 + --s edges.
    Hms,
    /// Erdős–Rényi on --n vertices conditioned on being connected.
    Gmp,
}

#[derive(Clone, Copy, ValueEnum)]
enum CbdMode {
    /// Discrete chain with uniform edge lengths taken from the input.
    Chain,
    /// Poissonised limit object.
    Infty,
}

#[derive(Clone, Copy, ValueEnum)]
enum Object {
    Crt,
    Hs,
    HsTilted,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a graph and write it as an edge list.
    Generate {
        #[arg(long, value_enum, default_value = "cm")]
        model: Model,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimal spanning forest of an edge list. Unit lengths are replaced by iid uniforms.
    Mst {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cycle breaking on an edge list.
    Cbd {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "chain")]
        mode: CbdMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bond percolation, or Poisson marking when --t is given.
    Percolate {
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a continuum object and write its point distances as CSV.
    Continuum {
        #[arg(long, value_enum, default_value = "crt")]
        object: Object,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_POINTS)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment described by a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a JSON summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run the acceptance checks and write their records as CSV.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reduced sample sizes.
        #[arg(long)]
        quick: bool,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_graph(p: &Path) -> Result<Multigraph> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(Multigraph::parse_edge_list(&text)?)
}

fn generate(model: Model, n: usize, degree: usize, lambda: f64, s: usize, p: f64, seed: u64) -> Result<Multigraph> {
    let mut rng = stream(seed, 0, "generate");
    Ok(match model {
        Model::Cm => configuration_model(&DegreeSequence::regular(n, degree), &mut rng)?,
        Model::Regular => uniform_simple_regular(n, degree, &mut rng)?,
        Model::Er => ErProcess::new(n, rng).graph(lambda),
        Model::Hms => sample_h_ms(n, s, &mut rng)?,
        Model::Gmp => sample_gmp(n, p, &mut rng)?,
    })
}

fn weights(g: &Multigraph, seed: u64) -> Result<WeightedGraph> {
    if g.edges.iter().all(|e| e.len == 1.0) {
        Ok(WeightedGraph::iid(g.clone(), &mut stream(seed, 0, "weights")))
    } else {
        Ok(WeightedGraph::new(g.clone(), g.edges.iter().map(|e| e.len).collect())?)
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    init_threads();
    match Cli::parse().cmd {
        Cmd::Generate { model, n, degree, lambda, s, p, seed, out } => {
            let g = generate(model, n, degree, lambda, s, p, seed)?;
            emit(out.as_deref(), &g.to_edge_list())?;
        }
        Cmd::Mst { input, seed, out } => {
            let g = read_graph(&input)?;
            let w = weights(&g, seed)?;
            let ids = if g.is_connected() { mst(&w) } else { msf(&w) };
            let mut t = g.edge_subgraph(&ids);
            for (e, &i) in t.edges.iter_mut().zip(&ids) {
                e.len = w.w[i];
            }
            emit(out.as_deref(), &t.to_edge_list())?;
        }
        Cmd::Cbd { input, mode, seed, out } => {
            let g = read_graph(&input)?;
            let mut rng = stream(seed, 0, "cbd");
            let o = match mode {
                CbdMode::Chain => CbdOutcome::from(&cbd_run(g.clone(), &mut rng)?),
                CbdMode::Infty => cbd_infty(&g, &mut rng)?,
            };
            emit(out.as_deref(), &g.edge_subgraph(&o.forest).to_edge_list())?;
        }
        Cmd::Percolate { input, p, t, seed, out } => {
            let g = read_graph(&input)?;
            let mut rng = stream(seed, 0, "percolate");
            let kept = match t {
                Some(t) => poisson_marking(&g, t, &mut rng)?.rem.graph,
                None => perc(&g, p, &mut rng)?.graph,
            };
            emit(out.as_deref(), &kept.to_edge_list())?;
        }
        Cmd::Continuum { object, s, grid, points, seed, out } => {
            let mut rng = stream(seed, 0, "continuum");
            let space = match object {
                Object::Crt => sample_crt(grid, points, &mut rng)?,
                Object::Hs => construct_h_s(s, grid, points, &mut rng)?.space,
                Object::HsTilted => construct_h_s_tilted(s, grid, points, &mut rng)?.space,
            };
            emit(out.as_deref(), &space.to_csv())?;
        }
        Cmd::Experiment { config, out, summary } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let c = ExperimentConfig::parse(&text)?;
            let recs = run_experiment(&c)?;
            let header = c.to_text();
            emit(out.as_deref().or(c.output.as_deref()), &to_csv(&header, &recs))?;
            if let Some(p) = summary {
                let json = serde_json::to_string_pretty(&summary_json(&header, &recs))?;
                fs::write(&p, json + "\n").with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Cmd::Verify { seed, out, quick, only } => {
            let scale = if quick { Scale::Quick } else { Scale::Full };
            let ids: Vec<u32> = if only.is_empty() { (1..=CRITERIA).collect() } else { only };
            if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > CRITERIA) {
                bail!("no criterion {bad}");
            }
            let mut checks = Vec::new();
            for id in ids {
                let c = run(id, scale, seed);
                eprintln!("{} ({:.1}s)", c.line(), c.seconds);
                checks.push(c);
            }
            let header = format!("verify seed = {seed}\nscale = {}", if quick { "quick" } else { "full" });
            emit(out.as_deref(), &to_csv(&header, &records(&checks, seed)))?;
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
