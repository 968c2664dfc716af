//! Brute-force oracles for graph distances and statistics.
//!
//! The oracles are deliberately naive (Floyd-Warshall over a dense matrix,
//! triple loops over the adjacency matrix) and share no code with the BFS
//! and adjacency-list paths they check.

use rand::Rng as _;
use somnet::seeds;
use somnet::{all_pairs_distances, graph_stats, grid_moore, Topology, UNREACHABLE};

const INF: u64 = u64::MAX / 4;

struct Oracle {
    n: usize,
    dist: Vec<u64>,
    adj: Vec<bool>,
}

fn oracle(topo: &Topology) -> Oracle {
    let n = topo.n_nodes();
    let mut adj = vec![false; n * n];
    let mut dist = vec![INF; n * n];
    for i in 0..n {
        dist[i * n + i] = 0;
    }
    for &(a, b) in topo.edges() {
        let (a, b) = (a as usize, b as usize);
        adj[a * n + b] = true;
        adj[b * n + a] = true;
        dist[a * n + b] = 1;
        dist[b * n + a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let alt = dist[i * n + k] + dist[k * n + j];
                if alt < dist[i * n + j] {
                    dist[i * n + j] = alt;
                }
            }
        }
    }
    Oracle { n, dist, adj }
}

impl Oracle {
    fn mean_shortest_path(&self) -> f64 {
        let mut sum = 0u64;
        let mut pairs = 0u64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let d = self.dist[i * self.n + j];
                if d < INF {
                    sum += d;
                    pairs += 1;
                }
            }
        }
        if pairs == 0 {
            0.0
        } else {
            sum as f64 / pairs as f64
        }
    }

    fn unreachable_fraction(&self) -> f64 {
        let mut unreachable = 0u64;
        let mut total = 0u64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                total += 1;
                if self.dist[i * self.n + j] >= INF {
                    unreachable += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            unreachable as f64 / total as f64
        }
    }

    fn clustering_index(&self) -> f64 {
        let mut total = 0.0;
        for v in 0..self.n {
            let neigh: Vec<usize> = (0..self.n).filter(|&u| self.adj[v * self.n + u]).collect();
            let k = neigh.len();
            if k < 2 {
                continue;
            }
            let mut links = 0usize;
            for (x, &a) in neigh.iter().enumerate() {
                for &b in &neigh[x + 1..] {
                    if self.adj[a * self.n + b] {
                        links += 1;
                    }
                }
            }
            total += 2.0 * links as f64 / (k * (k - 1)) as f64;
        }
        total / self.n as f64
    }

    fn degree_std(&self) -> f64 {
        let degrees: Vec<f64> = (0..self.n)
            .map(|v| (0..self.n).filter(|&u| self.adj[v * self.n + u]).count() as f64)
            .collect();
        let mean = degrees.iter().sum::<f64>() / self.n as f64;
        (degrees.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / self.n as f64).sqrt()
    }
}

fn random_topology(rng: &mut seeds::Rng) -> Topology {
    let n = rng.gen_range(2..=30usize);
    let p = rng.gen_range(0.0..0.6f64);
    let mut edges = Vec::new();
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            if rng.gen::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    Topology::from_edges(n, edges, None).unwrap()
}

fn rel_close(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= 1e-12 * scale
}

fn check_against_oracle(topo: &Topology) {
    let df = all_pairs_distances(topo);
    let oracle = oracle(topo);
    let n = topo.n_nodes();

    for i in 0..n {
        for j in 0..n {
            let got = df.get(i, j);
            let want = oracle.dist[i * n + j];
            if want >= INF {
                assert_eq!(got, UNREACHABLE, "({i}, {j}) should be unreachable");
            } else {
                assert_eq!(got as u64, want, "distance ({i}, {j}) mismatch");
            }
        }
    }

    let stats = graph_stats(topo, &df);
    assert!(
        rel_close(stats.mean_shortest_path, oracle.mean_shortest_path()),
        "msp {} vs oracle {}",
        stats.mean_shortest_path,
        oracle.mean_shortest_path()
    );
    assert!(rel_close(
        stats.unreachable_pair_fraction,
        oracle.unreachable_fraction()
    ));
    assert!(
        rel_close(stats.clustering_index, oracle.clustering_index()),
        "clustering {} vs oracle {}",
        stats.clustering_index,
        oracle.clustering_index()
    );
    assert!(rel_close(stats.degree_std, oracle.degree_std()));
    assert_eq!(stats.degree_histogram.values().sum::<usize>(), n);

    // DistanceField internal invariants.
    for i in 0..n {
        assert_eq!(df.get(i, i), 0);
        for j in 0..n {
            assert_eq!(df.get(i, j), df.get(j, i));
        }
    }
}

#[test]
fn random_graphs_match_brute_force() {
    let mut rng = seeds::stream(0xacce97, 0);
    for _ in 0..200 {
        check_against_oracle(&random_topology(&mut rng));
    }
}

#[test]
fn rewired_lattices_match_brute_force() {
    let mut rng = seeds::stream(0xacce97, 1);
    for &p in &[0.0, 0.05, 0.3, 1.0] {
        let topo = grid_moore(5, 5).unwrap().rewire(p, &mut rng).unwrap();
        check_against_oracle(&topo);
    }
}

#[test]
fn triangle_inequality_on_random_graphs() {
    let mut rng = seeds::stream(0xacce97, 2);
    for _ in 0..20 {
        let topo = random_topology(&mut rng);
        let df = all_pairs_distances(&topo);
        let n = topo.n_nodes();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (dij, dik, dkj) = (df.get(i, j), df.get(i, k), df.get(k, j));
                    if dik != UNREACHABLE && dkj != UNREACHABLE {
                        assert!(dij != UNREACHABLE && dij <= dik + dkj);
                    }
                }
            }
        }
    }
}

#[test]
fn random_graph_clustering_approaches_erdos_renyi() {
    // A fully rewired 10x10 Moore lattice should cluster like a random
    // graph with the same edge density. Monte-Carlo average over 1000
    // rewirings against the closed-form expectation 2|E|/(n(n-1)).
    let base = grid_moore(10, 10).unwrap();
    let n = base.n_nodes() as f64;
    let expected = 2.0 * base.edge_count() as f64 / (n * (n - 1.0));

    let mut rng = seeds::stream(0xacce97, 3);
    let samples = 1000;
    let mut acc = 0.0;
    for _ in 0..samples {
        let t = base.rewire(1.0, &mut rng).unwrap();
        let stats = graph_stats(&t, &all_pairs_distances(&t));
        acc += stats.clustering_index;
    }
    let mean = acc / samples as f64;
    // p=1 rewiring keeps one endpoint per edge, so the result is not
    // exactly G(n, m); clustering must still land at the random-graph
    // level, far below the lattice's ~0.43.
    assert!(
        (mean - expected).abs() < 0.01,
        "mean clustering {mean} vs random-graph expectation {expected}"
    );
}

#[test]
fn full_edge_rewiring_spreads_degrees() {
    // Rewiring every link once must break the lattice's degree regularity
    // in (essentially) every realization.
    let base = grid_moore(10, 10).unwrap();
    let mut rng = seeds::stream(0xacce97, 4);
    for _ in 0..50 {
        let t = base.rewire_edges(342, &mut rng).unwrap();
        let stats = graph_stats(&t, &all_pairs_distances(&t));
        assert!(stats.degree_std > 0.0);
        assert_eq!(t.edge_count(), 342);
    }
}
