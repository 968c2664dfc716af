//! `somnet` — experiment driver for SOMs on complex neighbourhood networks.
//!
//! Subcommands:
//! - `gen-topology`: build a Moore lattice, optionally rewired, and write it
//!   in the edge-list format.
//! - `stats`: structural statistics of a topology file.
//! - `direct-sweep`: classification performance vs rewiring probability.
//! - `size-sweep`: regular vs random topology across map sizes, with an
//!   unpaired t-test per size.
//! - `evolve`: batches of steady-state evolution runs.
//!
//! Every experiment is a deterministic function of (configuration, --seed);
//! rerunning a command with the same arguments reproduces its output files
//! byte for byte. `--config FILE` loads a JSON object whose fields mirror
//! the flags; explicit flags win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use somnet::data::{load_idx, synthetic_clusters};
use somnet::evolution::EvoConfig;
use somnet::harness::{
    self, evolution_csv, evolution_sidecar, run_direct_sweep, run_evolution, run_size_sweep,
    size_cells_csv, size_summary_csv, sweep_csv, DirectSweepConfig, EvolutionRunsConfig,
    SizeSweepConfig,
};
use somnet::seeds;
use somnet::{all_pairs_distances, graph_stats, grid_moore, Dataset, Topology};

// Seed streams reserved for dataset preparation; experiment cells use
// small stream ids, so the high range cannot collide.
const STREAM_DATA_TRAIN: u64 = u64::MAX - 16;
const STREAM_DATA_TEST: u64 = u64::MAX - 14;

#[derive(Parser)]
#[command(
    name = "somnet",
    about = "SOMs on complex neighbourhood graphs: sweeps, significance tests, topology evolution",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a (rewired) Moore-lattice topology file.
    GenTopology(GenTopologyArgs),
    /// Print structural statistics of a topology file.
    Stats(StatsArgs),
    /// Train maps across rewiring probabilities and record fitness traces.
    #[command(after_help = "Output: <out-dir>/sweep.csv with columns \
        p,nu,replicate,t,fitness,radius (one row per evaluation hook).")]
    DirectSweep(DirectSweepArgs),
    /// Compare regular (p=0) and random (p=1) maps across sizes.
    #[command(after_help = "Outputs: <out-dir>/size_cells.csv with columns \
        n,p,replicate,final_fitness and <out-dir>/size_summary.csv with columns \
        n,mean_regular,std_regular,mean_random,std_random,t,p_value,significant \
        (unpaired Student t-test, starred at p < 0.010).")]
    SizeSweep(SizeSweepArgs),
    /// Evolve neighbourhood topologies with the steady-state GA.
    #[command(after_help = "Outputs: <out-dir>/runs.csv with columns \
        run_id,generation,fitness,msp,clustering,degree_std (one row per \
        best-so-far event), <out-dir>/config.json with the full configuration \
        and derived per-run seeds, and <out-dir>/best_run<r>.edges rewritten \
        whenever run r improves.")]
    Evolve(EvolveArgs),
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::GenTopology(args) => gen_topology(args),
        Command::Stats(args) => stats(args),
        Command::DirectSweep(args) => direct_sweep(args),
        Command::SizeSweep(args) => size_sweep(args),
        Command::Evolve(args) => evolve(args),
    }
}

// ---------------------------------------------------------------------------
// gen-topology
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GenTopologyArgs {
    #[arg(long, default_value_t = 10)]
    rows: usize,
    #[arg(long, default_value_t = 10)]
    cols: usize,
    /// Rewiring probability applied to the lattice.
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Seed for the rewiring draws.
    #[arg(long)]
    seed: u64,
    /// Destination edge-list file.
    #[arg(long)]
    output: PathBuf,
}

fn gen_topology(args: GenTopologyArgs) -> Result<()> {
    let topo = grid_moore(args.rows, args.cols)?
        .rewire(args.p, &mut seeds::stream(args.seed, 0))?;
    topo.save(&args.output)?;
    println!(
        "wrote {} ({} nodes, {} edges)",
        args.output.display(),
        topo.n_nodes(),
        topo.edge_count()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

#[derive(Args)]
struct StatsArgs {
    /// Topology edge-list file.
    #[arg(long)]
    input: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn stats(args: StatsArgs) -> Result<()> {
    let topo = Topology::load(&args.input)?;
    let stats = graph_stats(&topo, &all_pairs_distances(&topo));
    let report = serde_json::json!({
        "nodes": topo.n_nodes(),
        "edges": topo.edge_count(),
        "grid_dims": topo.grid_dims(),
        "stats": stats,
    });
    let text = serde_json::to_string_pretty(&report)?;
    match args.output {
        Some(path) => fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// shared dataset options
// ---------------------------------------------------------------------------

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset source: "mnist" or "synthetic".
    #[arg(long, default_value = "mnist")]
    data: String,
    /// Directory holding the four MNIST IDX files (optionally .gz).
    #[arg(long, default_value = "data/mnist")]
    mnist_dir: PathBuf,
    /// Training subset size.
    #[arg(long, default_value_t = 2000)]
    train_n: usize,
    /// Test subset size.
    #[arg(long, default_value_t = 2000)]
    test_n: usize,
    /// Block-average pooling factor applied to the images.
    #[arg(long, default_value_t = 1)]
    downsample: usize,
    /// Synthetic data: number of classes.
    #[arg(long, default_value_t = 4)]
    classes: usize,
    /// Synthetic data: sample dimension.
    #[arg(long, default_value_t = 4)]
    dim: usize,
    /// Synthetic data: Gaussian spread around each class centroid.
    #[arg(long, default_value_t = 0.1)]
    spread: f64,
}

/// Build (train, test) deterministically from the master seed.
fn prepare_data(args: &DataArgs, seed: u64) -> Result<(Dataset, Dataset)> {
    match args.data.as_str() {
        "mnist" => {
            let dir = &args.mnist_dir;
            let find = |stem: &str| -> Result<PathBuf> {
                for name in [stem.to_string(), format!("{stem}.gz")] {
                    let p = dir.join(&name);
                    if p.exists() {
                        return Ok(p);
                    }
                }
                bail!(
                    "missing {stem}[.gz] under {} (see README for download instructions)",
                    dir.display()
                );
            };
            let train_full = load_idx(
                find("train-images-idx3-ubyte")?,
                find("train-labels-idx1-ubyte")?,
            )?;
            let test_full = load_idx(
                find("t10k-images-idx3-ubyte")?,
                find("t10k-labels-idx1-ubyte")?,
            )?;
            let train = train_full
                .subset(args.train_n, &mut seeds::stream(seed, STREAM_DATA_TRAIN))?
                .downsample(args.downsample)?;
            let test = test_full
                .subset(args.test_n, &mut seeds::stream(seed, STREAM_DATA_TEST))?
                .downsample(args.downsample)?;
            Ok((train, test))
        }
        "synthetic" => {
            let gen = |n: usize, stream: u64| -> Result<Dataset> {
                let per_class = n.div_ceil(args.classes);
                let pool = synthetic_clusters(
                    args.classes,
                    args.dim,
                    per_class,
                    args.spread,
                    &mut seeds::stream(seed, stream),
                )?;
                Ok(pool.subset(n, &mut seeds::stream(seed, stream + 1))?)
            };
            Ok((
                gen(args.train_n, STREAM_DATA_TRAIN)?,
                gen(args.test_n, STREAM_DATA_TEST)?,
            ))
        }
        other => bail!("unknown data source {other:?} (expected mnist or synthetic)"),
    }
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|tok| tok.trim())
        .filter(|tok| !tok.is_empty())
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| anyhow::anyhow!("bad {what} entry {tok:?}"))
        })
        .collect()
}

fn load_config_overrides<T: for<'de> Deserialize<'de>>(
    path: &Option<PathBuf>,
) -> Result<Option<T>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let parsed = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))?;
            Ok(Some(parsed))
        }
    }
}

macro_rules! merge_overrides {
    ($resolved:expr, $overrides:expr, [$($field:ident),+ $(,)?]) => {
        if let Some(ov) = &$overrides {
            $(if let Some(v) = ov.$field.clone() { $resolved.$field = v; })+
        }
    };
}

macro_rules! apply_flags {
    ($resolved:expr, $args:expr, [$($field:ident),+ $(,)?]) => {
        $(if let Some(v) = $args.$field.clone() { $resolved.$field = v; })+
    };
}

// ---------------------------------------------------------------------------
// direct-sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
struct DirectSweepArgs {
    /// Master seed; reruns with the same seed reproduce the CSV bytes.
    #[arg(long)]
    seed: u64,
    /// Directory receiving sweep.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// JSON file with defaults for any of the sweep fields (flags win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated rewiring probabilities.
    #[arg(long)]
    p_values: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Node-failure noise level.
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    eta_final: Option<f64>,
    /// Initial radius; defaults to half the grid diagonal.
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma_final: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Comma-separated evaluation hook steps; default 50 log-spaced hooks.
    #[arg(long)]
    hooks: Option<String>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DirectSweepOverrides {
    p_values: Option<Vec<f64>>,
    replicates: Option<usize>,
    nu: Option<f64>,
    rows: Option<usize>,
    cols: Option<usize>,
    eta0: Option<f64>,
    eta_final: Option<f64>,
    sigma0: Option<f64>,
    sigma_final: Option<f64>,
    total_steps: Option<u64>,
    hooks: Option<Vec<u64>>,
}

fn direct_sweep(args: DirectSweepArgs) -> Result<()> {
    // Stock setup: 32x32 map, eta(0)=0.080, nine rewiring probabilities
    // spanning regular to fully random, large initial radius.
    let mut cfg = DirectSweepConfig {
        p_values: vec![0.0, 0.002, 0.004, 0.008, 0.016, 0.032, 0.064, 0.256, 1.0],
        replicates: 1,
        nu: 0.0,
        rows: 32,
        cols: 32,
        eta0: 0.08,
        eta_final: 0.01,
        sigma0: f64::NAN, // resolved after overrides
        sigma_final: 0.0,
        total_steps: 100_000,
        hooks: Vec::new(),
        seed: args.seed,
    };
    let overrides: Option<DirectSweepOverrides> = load_config_overrides(&args.config)?;
    merge_overrides!(cfg, overrides, [
        p_values, replicates, nu, rows, cols, eta0, eta_final, sigma0, sigma_final,
        total_steps, hooks,
    ]);
    if let Some(s) = &args.p_values {
        cfg.p_values = parse_list(s, "p value")?;
    }
    if let Some(s) = &args.hooks {
        cfg.hooks = parse_list(s, "hook")?;
    }
    apply_flags!(cfg, args, [replicates, nu, rows, cols, eta0, eta_final, sigma0, sigma_final]);
    if let Some(v) = args.steps {
        cfg.total_steps = v;
    }
    if cfg.sigma0.is_nan() {
        cfg.sigma0 = harness::large_radius(cfg.rows, cfg.cols);
    }

    let (train, test) = prepare_data(&args.data, args.seed)?;
    let rows = run_direct_sweep(&cfg, &train, &test)?;
    let path = write_output(&args.out_dir, "sweep.csv", &sweep_csv(&rows))?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// size-sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SizeSweepArgs {
    /// Master seed; reruns with the same seed reproduce the CSV bytes.
    #[arg(long)]
    seed: u64,
    /// Directory receiving size_cells.csv and size_summary.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// JSON file with defaults for any of the sweep fields (flags win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated map sizes (each a perfect square).
    #[arg(long)]
    n_values: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    eta_final: Option<f64>,
    /// Initial radius; defaults to half each map's diagonal.
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma_final: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SizeSweepOverrides {
    n_values: Option<Vec<usize>>,
    replicates: Option<usize>,
    eta0: Option<f64>,
    eta_final: Option<f64>,
    sigma0: Option<f64>,
    sigma_final: Option<f64>,
    total_steps: Option<u64>,
}

fn size_sweep(args: SizeSweepArgs) -> Result<()> {
    let mut cfg = SizeSweepConfig {
        n_values: vec![16, 64, 100, 256],
        replicates: 11,
        eta0: 0.08,
        eta_final: 0.01,
        sigma0: None,
        sigma_final: 0.0,
        total_steps: 100_000,
        seed: args.seed,
    };
    let overrides: Option<SizeSweepOverrides> = load_config_overrides(&args.config)?;
    merge_overrides!(cfg, overrides, [
        n_values, replicates, eta0, eta_final, sigma_final, total_steps,
    ]);
    if let Some(ov) = &overrides {
        if ov.sigma0.is_some() {
            cfg.sigma0 = ov.sigma0;
        }
    }
    if let Some(s) = &args.n_values {
        cfg.n_values = parse_list(s, "map size")?;
    }
    apply_flags!(cfg, args, [replicates, eta0, eta_final, sigma_final]);
    if args.sigma0.is_some() {
        cfg.sigma0 = args.sigma0;
    }
    if let Some(v) = args.steps {
        cfg.total_steps = v;
    }

    let (train, test) = prepare_data(&args.data, args.seed)?;
    let (cells, summary) = run_size_sweep(&cfg, &train, &test)?;
    let cells_path = write_output(&args.out_dir, "size_cells.csv", &size_cells_csv(&cells))?;
    let summary_path =
        write_output(&args.out_dir, "size_summary.csv", &size_summary_csv(&summary))?;
    println!("wrote {}", cells_path.display());
    println!("wrote {}", summary_path.display());
    for s in &summary {
        println!(
            "N={}: regular {:.4} vs random {:.4}, p={:.4}{}",
            s.n,
            s.mean_regular,
            s.mean_random,
            s.p_value,
            if s.significant { " *" } else { "" }
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EvolveArgs {
    /// Master seed; per-run seeds derive from it deterministically.
    #[arg(long)]
    seed: u64,
    /// Directory receiving runs.csv, config.json and best_run<r>.edges.
    #[arg(long)]
    out_dir: PathBuf,
    /// JSON file with defaults for any of the evolution fields (flags win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of independent evolution runs.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    pop_size: Option<usize>,
    #[arg(long)]
    g_max: Option<u64>,
    /// Rewiring probability of the initial small-world population.
    #[arg(long)]
    init_p: Option<f64>,
    #[arg(long)]
    select_k: Option<usize>,
    #[arg(long)]
    replace_k: Option<usize>,
    /// Learning phases averaged into each fitness value.
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long)]
    steps_per_phase: Option<u64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    eta_final: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma_final: Option<f64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EvolveOverrides {
    runs: Option<usize>,
    pop_size: Option<usize>,
    g_max: Option<u64>,
    init_p: Option<f64>,
    select_k: Option<usize>,
    replace_k: Option<usize>,
    phases: Option<usize>,
    steps_per_phase: Option<u64>,
    eta0: Option<f64>,
    eta_final: Option<f64>,
    sigma0: Option<f64>,
    sigma_final: Option<f64>,
    rows: Option<usize>,
    cols: Option<usize>,
}

fn evolve(args: EvolveArgs) -> Result<()> {
    // Stock setup: 100 genomes over a 10x10 map, 2-tournament selection,
    // 6-tournament replacement, five phases of 10,000 iterations at
    // eta(0)=0.35.
    let mut runs = 9usize;
    let mut evo = EvoConfig {
        pop_size: 100,
        g_max: 200_000,
        init_p: 0.05,
        select_k: 2,
        replace_k: 6,
        phases: 5,
        steps_per_phase: 10_000,
        train_n: args.data.train_n,
        test_n: args.data.test_n,
        eta0: 0.35,
        eta_final: 0.01,
        sigma0: f64::NAN, // resolved after overrides
        sigma_final: 0.0,
        rows: 10,
        cols: 10,
        seed: args.seed,
    };
    let overrides: Option<EvolveOverrides> = load_config_overrides(&args.config)?;
    if let Some(ov) = &overrides {
        if let Some(v) = ov.runs {
            runs = v;
        }
    }
    merge_overrides!(evo, overrides, [
        pop_size, g_max, init_p, select_k, replace_k, phases, steps_per_phase,
        eta0, eta_final, sigma0, sigma_final, rows, cols,
    ]);
    if let Some(v) = args.runs {
        runs = v;
    }
    apply_flags!(evo, args, [
        pop_size, g_max, init_p, select_k, replace_k, phases, steps_per_phase,
        eta0, eta_final, sigma0, sigma_final, rows, cols,
    ]);
    if evo.sigma0.is_nan() {
        evo.sigma0 = harness::evolution_radius(evo.rows, evo.cols);
    }

    let (train, test) = prepare_data(&args.data, args.seed)?;
    let cfg = EvolutionRunsConfig { runs, evo };
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let rows = run_evolution(&cfg, &train, &test, Some(&args.out_dir))?;
    let csv_path = write_output(&args.out_dir, "runs.csv", &evolution_csv(&rows))?;
    write_output(&args.out_dir, "config.json", &evolution_sidecar(&cfg))?;
    println!(
        "wrote {} ({} best-so-far events)",
        csv_path.display(),
        rows.len()
    );
    Ok(())
}
