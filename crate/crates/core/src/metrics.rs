//! Structural graph statistics: mean shortest path, clustering index,
//! degree spread. These are the quantities tracked while topologies evolve.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distance::{DistanceField, UNREACHABLE};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    /// Mean hop count over unordered *reachable* pairs.
    pub mean_shortest_path: f64,
    /// Fraction of unordered pairs with no connecting path.
    pub unreachable_pair_fraction: f64,
    /// Average local clustering coefficient; nodes of degree < 2 count as 0.
    pub clustering_index: f64,
    pub degree_mean: f64,
    /// Population standard deviation of the degree sequence.
    pub degree_std: f64,
    /// Unnormalized degree distribution P(k): degree -> node count.
    pub degree_histogram: BTreeMap<usize, usize>,
}

/// Compute all statistics. `df` must have been built from `topo`.
pub fn graph_stats(topo: &Topology, df: &DistanceField) -> GraphStats {
    assert_eq!(
        topo.n_nodes(),
        df.n_nodes(),
        "distance field does not match topology"
    );
    let n = topo.n_nodes();

    let mut sum = 0u64;
    let mut reachable = 0u64;
    let mut unreachable = 0u64;
    for i in 0..n {
        let row = df.row(i);
        for &d in &row[i + 1..] {
            if d == UNREACHABLE {
                unreachable += 1;
            } else {
                sum += d as u64;
                reachable += 1;
            }
        }
    }
    let mean_shortest_path = if reachable > 0 {
        sum as f64 / reachable as f64
    } else {
        0.0
    };
    let total_pairs = reachable + unreachable;
    let unreachable_pair_fraction = if total_pairs > 0 {
        unreachable as f64 / total_pairs as f64
    } else {
        0.0
    };

    let adj = topo.adjacency();
    let mut clustering_sum = 0.0;
    for neigh in &adj {
        let k = neigh.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (a, &u) in neigh.iter().enumerate() {
            for &v in &neigh[a + 1..] {
                if topo.has_edge(u, v) {
                    links += 1;
                }
            }
        }
        clustering_sum += links as f64 / (k * (k - 1) / 2) as f64;
    }
    let clustering_index = clustering_sum / n as f64;

    let degrees = topo.degrees();
    let degree_mean = degrees.iter().sum::<usize>() as f64 / n as f64;
    let degree_var = degrees
        .iter()
        .map(|&d| {
            let diff = d as f64 - degree_mean;
            diff * diff
        })
        .sum::<f64>()
        / n as f64;
    let mut degree_histogram = BTreeMap::new();
    for &d in &degrees {
        *degree_histogram.entry(d).or_insert(0) += 1;
    }

    GraphStats {
        mean_shortest_path,
        unreachable_pair_fraction,
        clustering_index,
        degree_mean,
        degree_std: degree_var.sqrt(),
        degree_histogram,
    }
}
