//! Experiment drivers: topology sweeps, size sweeps with significance
//! tests, and batches of evolution runs. Every driver is a deterministic
//! function of (config, master seed) and emits CSV-ready rows; replicates
//! run in parallel but rows are assembled in a fixed order so output bytes
//! never depend on scheduling.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distance::all_pairs_distances;
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvoConfig, RunLogEntry};
use crate::seeds::{self, ROLE_TOPOLOGY, ROLE_TRAINING, ROLE_WEIGHTS};
use crate::som::{train, NoiseModel, Schedule, SomState, TrainOptions};
use crate::topology::grid_moore;
use crate::ttest::unpaired_t_test;

/// Default "large" initial radius for a lattice: half the grid diagonal in
/// hops (16 for a 32x32 map).
pub fn large_radius(rows: usize, cols: usize) -> f64 {
    ((rows.max(cols) - 1) as f64 / 2.0).ceil()
}

/// Default "small" initial radius: a fifth of the large one.
pub fn small_radius(rows: usize, cols: usize) -> f64 {
    large_radius(rows, cols) / 5.0
}

/// Default initial radius for evolution fitness evaluations. Moderate
/// rather than large: with a large radius and few learning steps the map
/// spends most of its schedule in the everyone-updates regime, which
/// drowns the topology signal the search needs.
pub fn evolution_radius(rows: usize, cols: usize) -> f64 {
    (large_radius(rows, cols) / 2.5).max(1.0)
}

/// `count` log-spaced evaluation hooks over `1..=total`, deduplicated,
/// always ending exactly at `total`.
pub fn log_spaced_hooks(count: usize, total: u64) -> Vec<u64> {
    if total == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![total];
    }
    let mut hooks: Vec<u64> = (0..count)
        .map(|i| {
            let x = i as f64 / (count - 1) as f64;
            ((total as f64).powf(x)).round() as u64
        })
        .collect();
    hooks.push(total);
    hooks.sort_unstable();
    hooks.dedup();
    hooks
}

// ---------------------------------------------------------------------------
// Direct sweep (performance vs rewiring probability)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectSweepConfig {
    pub p_values: Vec<f64>,
    pub replicates: usize,
    /// Node-failure noise level applied during training.
    pub nu: f64,
    pub rows: usize,
    pub cols: usize,
    pub eta0: f64,
    pub eta_final: f64,
    pub sigma0: f64,
    pub sigma_final: f64,
    pub total_steps: u64,
    /// Evaluation hook steps; empty means 50 log-spaced hooks.
    pub hooks: Vec<u64>,
    pub seed: u64,
}

/// One evaluation reading of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub nu: f64,
    pub replicate: usize,
    pub step: u64,
    pub fitness: f64,
    pub radius: u32,
}

/// Train one map per (p, replicate) cell and record the fitness trace.
pub fn run_direct_sweep(
    cfg: &DirectSweepConfig,
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<Vec<SweepRow>> {
    if cfg.replicates == 0 {
        return Err(Error::invalid("at least one replicate required"));
    }
    let schedule = Schedule::new(
        cfg.eta0,
        cfg.eta_final,
        cfg.sigma0,
        cfg.sigma_final,
        cfg.total_steps,
    )?;
    let noise = NoiseModel::new(cfg.nu)?;
    let hooks = if cfg.hooks.is_empty() {
        log_spaced_hooks(50, cfg.total_steps)
    } else {
        cfg.hooks.clone()
    };
    let base = grid_moore(cfg.rows, cfg.cols)?;

    let cells: Vec<(usize, usize)> = (0..cfg.p_values.len())
        .flat_map(|pi| (0..cfg.replicates).map(move |rep| (pi, rep)))
        .collect();

    let mut results: Vec<(usize, Vec<SweepRow>)> = cells
        .par_iter()
        .map(|&(pi, rep)| -> Result<(usize, Vec<SweepRow>)> {
            let p = cfg.p_values[pi];
            let cell = (pi * cfg.replicates + rep) as u64;
            let topo = base.rewire(p, &mut seeds::cell_stream(cfg.seed, cell, ROLE_TOPOLOGY))?;
            let df = all_pairs_distances(&topo);
            let mut som = SomState::init(
                topo.n_nodes(),
                train_set.dim(),
                &mut seeds::cell_stream(cfg.seed, cell, ROLE_WEIGHTS),
            )?;
            let opts = TrainOptions::new(schedule).with_noise(noise);
            let trace = train(
                &mut som,
                &df,
                train_set,
                Some(test_set),
                &opts,
                &hooks,
                &mut seeds::cell_stream(cfg.seed, cell, ROLE_TRAINING),
            )?;
            let rows = trace
                .iter()
                .map(|s| SweepRow {
                    p,
                    nu: cfg.nu,
                    replicate: rep,
                    step: s.step,
                    fitness: s.fitness,
                    radius: radius_at(&schedule, s.step),
                })
                .collect();
            Ok((cell as usize, rows))
        })
        .collect::<Result<_>>()?;

    results.sort_by_key(|(cell, _)| *cell);
    Ok(results.into_iter().flat_map(|(_, rows)| rows).collect())
}

/// Radius in effect around hook step `t` (clamped to the schedule domain).
fn radius_at(schedule: &Schedule, t: u64) -> u32 {
    let t = t.min(schedule.total_steps() - 1);
    schedule.at(t).expect("clamped to domain").1
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("p,nu,replicate,t,fitness,radius\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.p, r.nu, r.replicate, r.step, r.fitness, r.radius
        )
        .unwrap();
    }
    out
}

// ---------------------------------------------------------------------------
// Size sweep (regular vs random topology across map sizes)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSweepConfig {
    /// Map sizes; each must be a perfect square (the maps are square grids).
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub eta0: f64,
    pub eta_final: f64,
    /// Initial radius override; by default the per-size large radius.
    pub sigma0: Option<f64>,
    pub sigma_final: f64,
    pub total_steps: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeCell {
    pub n: usize,
    pub p: f64,
    pub replicate: usize,
    pub final_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub n: usize,
    pub mean_regular: f64,
    pub std_regular: f64,
    pub mean_random: f64,
    pub std_random: f64,
    pub t: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Significance threshold used to star size-sweep differences.
pub const SIGNIFICANCE_LEVEL: f64 = 0.010;

/// For each size, train `replicates` maps on a regular (p=0) and a fully
/// random (p=1) topology, then compare the two groups with an unpaired
/// Student t-test.
pub fn run_size_sweep(
    cfg: &SizeSweepConfig,
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<(Vec<SizeCell>, Vec<SizeSummary>)> {
    if cfg.n_values.len() < 2 {
        return Err(Error::invalid("size sweep needs at least two map sizes"));
    }
    if cfg.replicates < 2 {
        return Err(Error::invalid(
            "size sweep needs at least two replicates per group",
        ));
    }
    let mut sides = Vec::with_capacity(cfg.n_values.len());
    for &n in &cfg.n_values {
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n || side < 2 {
            return Err(Error::invalid(format!(
                "map size {n} is not a square of a side >= 2"
            )));
        }
        sides.push(side);
    }

    const P_GROUPS: [f64; 2] = [0.0, 1.0];
    let cells: Vec<(usize, usize, usize)> = (0..sides.len())
        .flat_map(|ni| {
            (0..P_GROUPS.len()).flat_map(move |gi| (0..cfg.replicates).map(move |rep| (ni, gi, rep)))
        })
        .collect();

    let mut results: Vec<(usize, SizeCell)> = cells
        .par_iter()
        .map(|&(ni, gi, rep)| -> Result<(usize, SizeCell)> {
            let side = sides[ni];
            let p = P_GROUPS[gi];
            let cell = ((ni * P_GROUPS.len() + gi) * cfg.replicates + rep) as u64;
            let schedule = Schedule::new(
                cfg.eta0,
                cfg.eta_final,
                cfg.sigma0.unwrap_or_else(|| large_radius(side, side)),
                cfg.sigma_final,
                cfg.total_steps,
            )?;
            let topo = grid_moore(side, side)?
                .rewire(p, &mut seeds::cell_stream(cfg.seed, cell, ROLE_TOPOLOGY))?;
            let df = all_pairs_distances(&topo);
            let mut som = SomState::init(
                topo.n_nodes(),
                train_set.dim(),
                &mut seeds::cell_stream(cfg.seed, cell, ROLE_WEIGHTS),
            )?;
            let trace = train(
                &mut som,
                &df,
                train_set,
                Some(test_set),
                &TrainOptions::new(schedule),
                &[cfg.total_steps],
                &mut seeds::cell_stream(cfg.seed, cell, ROLE_TRAINING),
            )?;
            Ok((
                cell as usize,
                SizeCell {
                    n: side * side,
                    p,
                    replicate: rep,
                    final_fitness: trace[0].fitness,
                },
            ))
        })
        .collect::<Result<_>>()?;
    results.sort_by_key(|(cell, _)| *cell);
    let cells: Vec<SizeCell> = results.into_iter().map(|(_, c)| c).collect();

    let mut summaries = Vec::with_capacity(sides.len());
    for &side in &sides {
        let n = side * side;
        let group = |p: f64| -> Vec<f64> {
            cells
                .iter()
                .filter(|c| c.n == n && c.p == p)
                .map(|c| c.final_fitness)
                .collect()
        };
        let regular = group(0.0);
        let random = group(1.0);
        let test = unpaired_t_test(&regular, &random)?;
        summaries.push(SizeSummary {
            n,
            mean_regular: mean(&regular),
            std_regular: sample_std(&regular),
            mean_random: mean(&random),
            std_random: sample_std(&random),
            t: test.t,
            p_value: test.p,
            significant: test.p < SIGNIFICANCE_LEVEL,
        });
    }
    Ok((cells, summaries))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn size_cells_csv(cells: &[SizeCell]) -> String {
    let mut out = String::from("n,p,replicate,final_fitness\n");
    for c in cells {
        writeln!(out, "{},{},{},{}", c.n, c.p, c.replicate, c.final_fitness).unwrap();
    }
    out
}

pub fn size_summary_csv(rows: &[SizeSummary]) -> String {
    let mut out = String::from(
        "n,mean_regular,std_regular,mean_random,std_random,t,p_value,significant\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.mean_regular,
            r.std_regular,
            r.mean_random,
            r.std_random,
            r.t,
            r.p_value,
            r.significant
        )
        .unwrap();
    }
    out
}

// ---------------------------------------------------------------------------
// Evolution runs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionRunsConfig {
    pub runs: usize,
    /// Template configuration; each run gets a seed derived from
    /// `evo.seed` and its run id.
    pub evo: EvoConfig,
}

/// Derived per-run seed.
pub fn run_seed(master: u64, run_id: usize) -> u64 {
    use rand::Rng as _;
    seeds::stream(master, 0x5eed_0000 + run_id as u64).gen()
}

/// Execute `runs` independent evolution runs. When `out_dir` is given, the
/// current best topology of run `r` is rewritten to `best_run{r}.edges`
/// every time that run's log grows.
pub fn run_evolution(
    cfg: &EvolutionRunsConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    out_dir: Option<&Path>,
) -> Result<Vec<(usize, RunLogEntry)>> {
    if cfg.runs == 0 {
        return Err(Error::invalid("at least one evolution run required"));
    }
    cfg.evo.validate()?;
    let mut logs: Vec<(usize, Vec<RunLogEntry>)> = (0..cfg.runs)
        .into_par_iter()
        .map(|run_id| -> Result<(usize, Vec<RunLogEntry>)> {
            let mut run_cfg = cfg.evo.clone();
            run_cfg.seed = run_seed(cfg.evo.seed, run_id);
            let best_path = out_dir.map(|d| d.join(format!("best_run{run_id}.edges")));
            let mut save_error = None;
            let result = evolve(&run_cfg, train_set, test_set, |_, topo| {
                if let Some(path) = &best_path {
                    if let Err(e) = topo.save(path) {
                        save_error.get_or_insert(e);
                    }
                }
            })?;
            match save_error {
                Some(e) => Err(e),
                None => Ok((run_id, result.log)),
            }
        })
        .collect::<Result<_>>()?;
    logs.sort_by_key(|(run_id, _)| *run_id);
    Ok(logs
        .into_iter()
        .flat_map(|(run_id, log)| log.into_iter().map(move |e| (run_id, e)))
        .collect())
}

pub fn evolution_csv(rows: &[(usize, RunLogEntry)]) -> String {
    let mut out = String::from("run_id,generation,fitness,msp,clustering,degree_std\n");
    for (run_id, e) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            run_id,
            e.generation,
            e.fitness,
            e.mean_shortest_path,
            e.clustering_index,
            e.degree_std
        )
        .unwrap();
    }
    out
}

/// JSON sidecar describing an evolution batch: the full configuration plus
/// every derived per-run seed.
pub fn evolution_sidecar(cfg: &EvolutionRunsConfig) -> String {
    #[derive(Serialize)]
    struct Sidecar<'a> {
        config: &'a EvolutionRunsConfig,
        run_seeds: Vec<u64>,
    }
    let sidecar = Sidecar {
        config: cfg,
        run_seeds: (0..cfg.runs).map(|r| run_seed(cfg.evo.seed, r)).collect(),
    };
    serde_json::to_string_pretty(&sidecar).expect("sidecar serializes")
}
