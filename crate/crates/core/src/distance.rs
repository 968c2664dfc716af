//! All-pairs graph distances (hop counts).

use rayon::prelude::*;

use crate::topology::Topology;

/// Hop count marking an unreachable pair.
pub const UNREACHABLE: u32 = u32::MAX;

/// Dense all-pairs hop-count table. Immutable once built; rows for
/// unreachable pairs hold [`UNREACHABLE`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    n: usize,
    dist: Vec<u32>,
}

impl DistanceField {
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> u32 {
        self.dist[from * self.n + to]
    }

    #[inline]
    pub fn is_reachable(&self, from: usize, to: usize) -> bool {
        self.get(from, to) != UNREACHABLE
    }

    /// Row of distances from `from` to every node.
    #[inline]
    pub fn row(&self, from: usize) -> &[u32] {
        &self.dist[from * self.n..(from + 1) * self.n]
    }
}

/// Breadth-first hop counts from every node. Sources are processed
/// independently (in parallel), so the result does not depend on execution
/// order.
pub fn all_pairs_distances(topo: &Topology) -> DistanceField {
    let n = topo.n_nodes();
    let adj = topo.adjacency();
    let mut dist = vec![UNREACHABLE; n * n];
    dist.par_chunks_mut(n).enumerate().for_each(|(src, row)| {
        bfs_into(&adj, src, row);
    });
    DistanceField { n, dist }
}

fn bfs_into(adj: &[Vec<u32>], src: usize, row: &mut [u32]) {
    let mut queue = std::collections::VecDeque::new();
    row[src] = 0;
    queue.push_back(src as u32);
    while let Some(u) = queue.pop_front() {
        let du = row[u as usize];
        for &v in &adj[u as usize] {
            if row[v as usize] == UNREACHABLE {
                row[v as usize] = du + 1;
                queue.push_back(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{grid_moore, Topology};

    #[test]
    fn path_graph_distances() {
        let t = Topology::from_edges(3, [(0, 1), (1, 2)], None).unwrap();
        let df = all_pairs_distances(&t);
        assert_eq!(df.get(0, 2), 2);
        assert_eq!(df.get(2, 0), 2);
        assert_eq!(df.get(1, 1), 0);
    }

    #[test]
    fn disjoint_components_are_unreachable() {
        let t = Topology::from_edges(4, [(0, 1), (2, 3)], None).unwrap();
        let df = all_pairs_distances(&t);
        assert_eq!(df.get(0, 1), 1);
        assert_eq!(df.get(0, 2), UNREACHABLE);
        assert!(!df.is_reachable(1, 3));
    }

    #[test]
    fn moore_3x3_diameter_two() {
        let df = all_pairs_distances(&grid_moore(3, 3).unwrap());
        for i in 0..9 {
            for j in 0..9 {
                assert!(df.get(i, j) <= 2);
            }
        }
        assert_eq!(df.get(0, 8), 2); // corner to opposite corner
    }
}
