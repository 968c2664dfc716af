//! Steady-state evolutionary search over neighbourhood topologies.
//!
//! Mutation-only steady-state GA: each iteration draws two genomes and
//! mutates the fitter one; the child replaces the worst of six drawn
//! genomes. Mutation rewires a percentage of links that decays
//! exponentially over the run, from roughly 30% of the edges down to a
//! single link. Fitness is the mean SOM misclassification rate over
//! several independent learning phases that share their initial-weight
//! and sample-order seeds across all genomes (common random numbers).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distance::all_pairs_distances;
use crate::error::{Error, Result};
use crate::metrics::{graph_stats, GraphStats};
use crate::seeds::{self, Rng};
use crate::som::{train, Schedule, SomState, TrainOptions};
use crate::topology::{grid_moore, Topology};

/// A candidate topology with its cached evaluation.
#[derive(Debug, Clone)]
pub struct Genome {
    pub topo: Topology,
    pub fitness: Option<f64>,
    pub stats: GraphStats,
}

impl Genome {
    pub fn unevaluated(topo: Topology) -> Genome {
        let stats = graph_stats(&topo, &all_pairs_distances(&topo));
        Genome {
            topo,
            fitness: None,
            stats,
        }
    }
}

/// Full configuration of one evolution run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvoConfig {
    pub pop_size: usize,
    pub g_max: u64,
    /// Rewiring probability used to build the initial small-world population.
    pub init_p: f64,
    /// Tournament size for selection (typically 2).
    pub select_k: usize,
    /// Tournament size for replacement (typically 6).
    pub replace_k: usize,
    /// Independent learning phases averaged into one fitness value.
    pub phases: usize,
    pub steps_per_phase: u64,
    pub train_n: usize,
    pub test_n: usize,
    pub eta0: f64,
    pub eta_final: f64,
    pub sigma0: f64,
    pub sigma_final: f64,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < self.replace_k {
            return Err(Error::invalid(format!(
                "population {} smaller than replacement tournament {}",
                self.pop_size, self.replace_k
            )));
        }
        if self.select_k < 2 || self.select_k > self.pop_size {
            return Err(Error::invalid(format!(
                "selection tournament {} must be in 2..=pop_size",
                self.select_k
            )));
        }
        // The elitism guard diverts replacement to the tournament's
        // second-worst, so the pool needs at least two entries.
        if self.replace_k < 2 {
            return Err(Error::invalid(format!(
                "replacement tournament {} must be at least 2",
                self.replace_k
            )));
        }
        if self.phases == 0 {
            return Err(Error::invalid("at least one learning phase required"));
        }
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::invalid("evolution grid needs rows, cols >= 2"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(
            self.eta0,
            self.eta_final,
            self.sigma0,
            self.sigma_final,
            self.steps_per_phase,
        )
    }
}

/// Per-phase seeds shared by every fitness evaluation in a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhaseSeeds {
    pub weights: u64,
    pub training: u64,
}

/// Derive the shared phase seeds of a run from its master seed.
pub fn phase_seeds(cfg: &EvoConfig) -> Vec<PhaseSeeds> {
    use rand::Rng as _;
    let mut rng = seeds::stream(cfg.seed, 1);
    (0..cfg.phases)
        .map(|_| PhaseSeeds {
            weights: rng.gen(),
            training: rng.gen(),
        })
        .collect()
}

/// One best-so-far event in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub generation: u64,
    pub fitness: f64,
    pub mean_shortest_path: f64,
    pub clustering_index: f64,
    pub degree_std: f64,
}

impl RunLogEntry {
    fn new(generation: u64, fitness: f64, stats: &GraphStats) -> Self {
        RunLogEntry {
            generation,
            fitness,
            mean_shortest_path: stats.mean_shortest_path,
            clustering_index: stats.clustering_index,
            degree_std: stats.degree_std,
        }
    }
}

/// Outcome of an evolution run.
#[derive(Debug, Clone)]
pub struct EvolveResult {
    /// Best-so-far events, strictly decreasing in fitness.
    pub log: Vec<RunLogEntry>,
    pub population: Vec<Genome>,
    pub best: Genome,
}

/// Mutation strength `C` (percent of links) at generation `g`:
/// `C = 30 * 102.6^(-g/g_max)`, decaying from 30 down to about 0.292.
pub fn mutation_percent(g: u64, g_max: u64) -> f64 {
    assert!(g_max >= 1, "g_max must be at least 1");
    assert!(g <= g_max, "generation beyond g_max");
    30.0 * 102.6f64.powf(-(g as f64) / (g_max as f64))
}

/// Number of links rewired for mutation strength `c` (percent):
/// `floor(c/100 * edge_count)`, at least 1 while `c > 0`.
pub fn links_to_rewire(c: f64, edge_count: usize) -> usize {
    if c <= 0.0 {
        return 0;
    }
    let m = (c / 100.0 * edge_count as f64).floor() as usize;
    m.max(1).min(edge_count)
}

/// Rewire the schedule's worth of links for generation `g`; the parent is
/// untouched and the child's fitness is unevaluated.
pub fn mutate(parent: &Genome, g: u64, g_max: u64, rng: &mut Rng) -> Result<Genome> {
    let m = links_to_rewire(mutation_percent(g, g_max), parent.topo.edge_count());
    let child = parent.topo.rewire_edges(m, rng)?;
    Ok(Genome::unevaluated(child))
}

/// Mean misclassification over `cfg.phases` train/label/evaluate cycles on
/// `topo`, one cycle per entry of `shared`. Deterministic given the seeds.
pub fn evaluate_fitness(
    topo: &Topology,
    cfg: &EvoConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    shared: &[PhaseSeeds],
) -> Result<f64> {
    if shared.is_empty() {
        return Err(Error::Precondition("no phase seeds supplied".into()));
    }
    let df = all_pairs_distances(topo);
    let schedule = cfg.schedule()?;
    let opts = TrainOptions::new(schedule);
    let mut total = 0.0;
    for seeds_i in shared {
        let mut som = SomState::init(
            topo.n_nodes(),
            train_set.dim(),
            &mut seeds::stream(seeds_i.weights, 0),
        )?;
        train(
            &mut som,
            &df,
            train_set,
            None,
            &opts,
            &[],
            &mut seeds::stream(seeds_i.training, 0),
        )?;
        som.label_neurons(train_set)?;
        total += som.evaluate(test_set)?;
    }
    Ok(total / shared.len() as f64)
}

/// Run the steady-state GA with an arbitrary fitness function.
///
/// `on_improvement` fires for the initial best and for every child that
/// strictly beats the population best (the events that form the run log).
pub fn evolve_with<F>(
    cfg: &EvoConfig,
    mut fitness: F,
    mut on_improvement: impl FnMut(&RunLogEntry, &Topology),
) -> Result<EvolveResult>
where
    F: FnMut(&Topology) -> Result<f64>,
{
    cfg.validate()?;
    let mut rng = seeds::stream(cfg.seed, 0);
    let base = grid_moore(cfg.rows, cfg.cols)?;

    let mut population = Vec::with_capacity(cfg.pop_size);
    for _ in 0..cfg.pop_size {
        let topo = base.rewire(cfg.init_p, &mut rng)?;
        let mut genome = Genome::unevaluated(topo);
        genome.fitness = Some(fitness(&genome.topo)?);
        population.push(genome);
    }

    let fit = |g: &Genome| g.fitness.expect("population is always evaluated");
    let mut best_slot = 0;
    for slot in 1..cfg.pop_size {
        if fit(&population[slot]) < fit(&population[best_slot]) {
            best_slot = slot;
        }
    }
    let mut best_fitness = fit(&population[best_slot]);

    let mut log = Vec::new();
    let first = RunLogEntry::new(0, best_fitness, &population[best_slot].stats);
    on_improvement(&first, &population[best_slot].topo);
    log.push(first);

    for g in 1..=cfg.g_max {
        // Selection: the fitter of `select_k` distinct genomes.
        let contenders = rand::seq::index::sample(&mut rng, cfg.pop_size, cfg.select_k);
        let parent_slot = contenders
            .iter()
            .min_by(|&a, &b| {
                fit(&population[a])
                    .partial_cmp(&fit(&population[b]))
                    .expect("fitness is never NaN")
                    .then(a.cmp(&b))
            })
            .expect("tournament is non-empty");

        let mut child = mutate(&population[parent_slot], g, cfg.g_max, &mut rng)?;
        let child_fitness = fitness(&child.topo)?;
        child.fitness = Some(child_fitness);

        // Replacement: the worst of `replace_k` distinct genomes, but never
        // the unique population best.
        let pool = rand::seq::index::sample(&mut rng, cfg.pop_size, cfg.replace_k);
        let mut ranked: Vec<usize> = pool.iter().collect();
        ranked.sort_by(|&a, &b| {
            fit(&population[b])
                .partial_cmp(&fit(&population[a]))
                .expect("fitness is never NaN")
                .then(a.cmp(&b))
        });
        let unique_best = |slot: usize| {
            fit(&population[slot]) == best_fitness
                && population
                    .iter()
                    .filter(|g| fit(g) == best_fitness)
                    .count()
                    == 1
        };
        let mut target = ranked[0];
        if unique_best(target) {
            target = ranked[1];
        }

        population[target] = child;

        if child_fitness < best_fitness {
            best_fitness = child_fitness;
            best_slot = target;
            let entry = RunLogEntry::new(g, child_fitness, &population[target].stats);
            on_improvement(&entry, &population[target].topo);
            log.push(entry);
        } else if target == best_slot {
            // A tied-best copy was replaced; the surviving copy is the best.
            best_slot = (0..cfg.pop_size)
                .find(|&s| fit(&population[s]) == best_fitness)
                .expect("elitism guard keeps one best copy");
        }
    }

    let best = population[best_slot].clone();
    Ok(EvolveResult {
        log,
        population,
        best,
    })
}

/// Run the steady-state GA with the SOM fitness of [`evaluate_fitness`].
pub fn evolve(
    cfg: &EvoConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    on_improvement: impl FnMut(&RunLogEntry, &Topology),
) -> Result<EvolveResult> {
    let shared = phase_seeds(cfg);
    evolve_with(
        cfg,
        |topo| evaluate_fitness(topo, cfg, train_set, test_set, &shared),
        on_improvement,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_clusters;

    fn small_cfg(seed: u64) -> EvoConfig {
        EvoConfig {
            pop_size: 8,
            g_max: 40,
            init_p: 0.05,
            select_k: 2,
            replace_k: 6,
            phases: 2,
            steps_per_phase: 50,
            train_n: 40,
            test_n: 40,
            eta0: 0.35,
            eta_final: 0.01,
            sigma0: 2.0,
            sigma_final: 0.0,
            rows: 4,
            cols: 4,
            seed,
        }
    }

    #[test]
    fn mutation_percent_anchors() {
        assert_eq!(mutation_percent(0, 200_000), 30.0);
        // Endpoint values evaluated independently: 30/102.6 and 30/sqrt(102.6).
        let end = mutation_percent(200_000, 200_000);
        assert!((end - 0.2923976608187135).abs() < 1e-12, "end = {end}");
        let mid = mutation_percent(100_000, 200_000);
        assert!((mid - 2.9617443887954615).abs() < 1e-12, "mid = {mid}");
    }

    #[test]
    fn mutation_percent_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for g in (0..=1000).step_by(10) {
            let c = mutation_percent(g, 1000);
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn links_to_rewire_anchors() {
        assert_eq!(links_to_rewire(30.0, 342), 102);
        assert_eq!(links_to_rewire(mutation_percent(0, 1000), 342), 102);
        assert_eq!(links_to_rewire(0.29240, 342), 1);
        assert_eq!(links_to_rewire(2.9618, 342), 10);
        assert_eq!(links_to_rewire(0.0, 342), 0);
    }

    #[test]
    fn links_schedule_non_increasing_102_to_1() {
        let g_max = 2000;
        let mut prev = usize::MAX;
        for g in 0..=g_max {
            let m = links_to_rewire(mutation_percent(g, g_max), 342);
            assert!(m <= prev, "links increased at g={g}");
            prev = m;
        }
        assert_eq!(links_to_rewire(mutation_percent(0, g_max), 342), 102);
        assert_eq!(links_to_rewire(mutation_percent(g_max, g_max), 342), 1);
    }

    #[test]
    fn mutate_leaves_parent_untouched_and_is_deterministic() {
        let parent = Genome::unevaluated(grid_moore(10, 10).unwrap());
        let before = parent.topo.clone();
        let a = mutate(&parent, 1000, 1000, &mut seeds::stream(3, 0)).unwrap();
        assert_eq!(parent.topo, before);
        assert!(a.fitness.is_none());
        assert_eq!(a.topo.edge_count(), 342);
        // g = g_max rewires exactly one link.
        let differing = a
            .topo
            .sorted_edges()
            .iter()
            .filter(|e| !before.has_edge(e.0, e.1))
            .count();
        assert!(differing <= 1);

        let b = mutate(&parent, 1000, 1000, &mut seeds::stream(3, 0)).unwrap();
        assert_eq!(a.topo, b.topo);
    }

    #[test]
    fn config_validation_rejects_degenerate_tournaments() {
        let mut cfg = small_cfg(1);
        cfg.replace_k = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(1);
        cfg.select_k = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(1);
        cfg.pop_size = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn constant_fitness_logs_only_initial_best() {
        let cfg = small_cfg(11);
        let result = evolve_with(&cfg, |_| Ok(0.5), |_, _| {}).unwrap();
        assert_eq!(result.log.len(), 1);
        assert_eq!(result.log[0].generation, 0);
        assert_eq!(result.population.len(), cfg.pop_size);
    }

    #[test]
    fn zero_generations_logs_initial_best_only() {
        let mut cfg = small_cfg(5);
        cfg.g_max = 0;
        let mut events = 0;
        let result = evolve_with(&cfg, pseudo_fitness(), |_, _| events += 1).unwrap();
        assert_eq!(result.log.len(), 1);
        assert_eq!(events, 1);
    }

    #[test]
    fn log_is_strictly_decreasing_and_matches_population_best() {
        let cfg = small_cfg(17);
        let result = evolve_with(&cfg, pseudo_fitness(), |_, _| {}).unwrap();
        for pair in result.log.windows(2) {
            assert!(pair[1].fitness < pair[0].fitness);
        }
        let pop_best = result
            .population
            .iter()
            .map(|g| g.fitness.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.log.last().unwrap().fitness, pop_best);
        assert_eq!(result.best.fitness.unwrap(), pop_best);
        assert_eq!(result.population.len(), cfg.pop_size);
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let cfg = small_cfg(23);
        let a = evolve_with(&cfg, pseudo_fitness(), |_, _| {}).unwrap();
        let b = evolve_with(&cfg, pseudo_fitness(), |_, _| {}).unwrap();
        assert_eq!(a.log, b.log);
        let edges_a: Vec<_> = a.population.iter().map(|g| g.topo.sorted_edges()).collect();
        let edges_b: Vec<_> = b.population.iter().map(|g| g.topo.sorted_edges()).collect();
        assert_eq!(edges_a, edges_b);
    }

    #[test]
    fn single_phase_fitness_equals_one_training_cycle() {
        use crate::seeds;
        use crate::som::{train, SomState, TrainOptions};

        let cfg = small_cfg(31);
        let data = synthetic_clusters(4, 4, 25, 0.1, &mut seeds::stream(2, 0)).unwrap();
        let topo = grid_moore(cfg.rows, cfg.cols).unwrap();
        let shared = [PhaseSeeds {
            weights: 777,
            training: 888,
        }];
        let fitness = evaluate_fitness(&topo, &cfg, &data, &data, &shared).unwrap();

        let df = all_pairs_distances(&topo);
        let mut som = SomState::init(
            topo.n_nodes(),
            data.dim(),
            &mut seeds::stream(777, 0),
        )
        .unwrap();
        train(
            &mut som,
            &df,
            &data,
            None,
            &TrainOptions::new(cfg.schedule().unwrap()),
            &[],
            &mut seeds::stream(888, 0),
        )
        .unwrap();
        som.label_neurons(&data).unwrap();
        assert_eq!(fitness, som.evaluate(&data).unwrap());
    }

    #[test]
    fn som_fitness_path_runs_end_to_end() {
        let mut cfg = small_cfg(29);
        cfg.g_max = 3;
        cfg.pop_size = 6;
        let data = synthetic_clusters(4, 4, 20, 0.08, &mut seeds::stream(1, 0)).unwrap();
        let mut improvements = Vec::new();
        let result = evolve(&cfg, &data, &data, |e, _| improvements.push(e.generation)).unwrap();
        assert!(!result.log.is_empty());
        assert_eq!(improvements.len(), result.log.len());
        for g in &result.population {
            let f = g.fitness.unwrap();
            assert!((0.0..=1.0).contains(&f));
        }
    }

    /// Deterministic, varied stand-in fitness: hash of the edge set.
    fn pseudo_fitness() -> impl FnMut(&Topology) -> crate::error::Result<f64> {
        |topo: &Topology| {
            let mut h = 0xcbf2_9ce4_8422_2325u64;
            for (a, b) in topo.sorted_edges() {
                h ^= (a as u64) << 32 | b as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
            Ok((h % 10_000) as f64 / 10_000.0)
        }
    }
}
