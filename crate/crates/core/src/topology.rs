//! Neighbourhood graphs for SOM neurons.
//!
//! A [`Topology`] is an undirected simple graph over the neurons. The
//! canonical starting point is a non-periodic Moore lattice
//! ([`grid_moore`]): every neuron linked to its 8 nearest grid neighbours,
//! without wrap-around. From there, [`Topology::rewire`] interpolates
//! regular -> small-world -> random by independently redirecting each link
//! with probability `p`, and [`Topology::rewire_edges`] redirects an exact
//! number of uniformly chosen links (the mutation operator of the
//! evolutionary search).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seeds::Rng;

/// Undirected simple graph over `n_nodes` neurons.
///
/// Edges are stored normalized as `(lo, hi)` with `lo < hi`; there are no
/// self-loops and no duplicates. `grid_dims` records the generating lattice
/// shape when there is one, so images of the map can be laid out later.
#[derive(Debug, Clone)]
pub struct Topology {
    n_nodes: usize,
    edges: Vec<(u32, u32)>,
    edge_set: HashSet<(u32, u32)>,
    grid_dims: Option<(usize, usize)>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.n_nodes == other.n_nodes
            && self.grid_dims == other.grid_dims
            && self.sorted_edges() == other.sorted_edges()
    }
}
impl Eq for Topology {}

impl Topology {
    /// Build a topology from an explicit edge list. Edges may come in any
    /// order and orientation; they are normalized. Rejects self-loops,
    /// duplicates and out-of-range node indices.
    pub fn from_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
        grid_dims: Option<(usize, usize)>,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::invalid("topology must have at least one node"));
        }
        let mut list = Vec::new();
        let mut set = HashSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop at node {a}")));
            }
            if a as usize >= n_nodes || b as usize >= n_nodes {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::invalid(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            list.push(e);
        }
        Ok(Topology {
            n_nodes,
            edges: list,
            edge_set: set,
            grid_dims,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        self.grid_dims
    }

    /// Edges in construction order, normalized `(lo, hi)`.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Edges sorted lexicographically; the canonical form used for
    /// equality, hashing and serialization.
    pub fn sorted_edges(&self) -> Vec<(u32, u32)> {
        let mut v = self.edges.clone();
        v.sort_unstable();
        v
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.edge_set.contains(&(a.min(b), a.max(b)))
    }

    /// Adjacency lists with sorted neighbour sets.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_nodes];
        for &(a, b) in &self.edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        deg
    }

    /// Independently select each edge with probability `p` and redirect it.
    ///
    /// A selected edge keeps its lexicographically smaller endpoint; the
    /// other endpoint is redrawn uniformly over all nodes, resampling on
    /// self-loops and duplicates. Redrawing the original destination is
    /// allowed (a no-op rewiring). Edge count is always preserved; the graph
    /// may disconnect.
    pub fn rewire(&self, p: f64, rng: &mut Rng) -> Result<Topology> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("rewiring probability {p} not in [0, 1]")));
        }
        let mut out = self.clone();
        for i in 0..out.edges.len() {
            if rng.gen::<f64>() < p {
                out.redirect_edge(i, rng);
            }
        }
        Ok(out)
    }

    /// Redirect exactly `m` distinct edges, chosen uniformly without
    /// replacement. Same keep/redraw convention as [`Topology::rewire`].
    pub fn rewire_edges(&self, m: usize, rng: &mut Rng) -> Result<Topology> {
        if m > self.edges.len() {
            return Err(Error::invalid(format!(
                "cannot rewire {m} of {} edges",
                self.edges.len()
            )));
        }
        let mut out = self.clone();
        let chosen = rand::seq::index::sample(rng, out.edges.len(), m);
        for i in chosen {
            out.redirect_edge(i, rng);
        }
        Ok(out)
    }

    /// Redraw the destination (larger original endpoint) of edge `i`.
    /// The edge is removed first, so resampling the original destination
    /// terminates and re-inserting it is legal.
    fn redirect_edge(&mut self, i: usize, rng: &mut Rng) {
        let (keep, old_dst) = self.edges[i];
        self.edge_set.remove(&(keep, old_dst));
        let n = self.n_nodes as u32;
        let new_edge = loop {
            let cand = rng.gen_range(0..n);
            if cand == keep {
                continue;
            }
            let e = (keep.min(cand), keep.max(cand));
            if !self.edge_set.contains(&e) {
                break e;
            }
        };
        self.edge_set.insert(new_edge);
        self.edges[i] = new_edge;
    }

    /// Serialize as the edge-list text format:
    /// a header `nodes N rows R cols C` (the `rows R cols C` part present
    /// only for lattice-born graphs), then one `i j` line per edge with
    /// `i < j`, sorted.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        match self.grid_dims {
            Some((r, c)) => writeln!(s, "nodes {} rows {} cols {}", self.n_nodes, r, c).unwrap(),
            None => writeln!(s, "nodes {}", self.n_nodes).unwrap(),
        }
        for (a, b) in self.sorted_edges() {
            writeln!(s, "{a} {b}").unwrap();
        }
        s
    }

    /// Parse the edge-list text format produced by [`Topology::to_edge_list`].
    pub fn from_edge_list(text: &str) -> Result<Topology> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::TopologyParse("empty input".into()))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let (n_nodes, grid_dims) = match tokens.as_slice() {
            ["nodes", n] => (parse_count(n)?, None),
            ["nodes", n, "rows", r, "cols", c] => {
                (parse_count(n)?, Some((parse_count(r)?, parse_count(c)?)))
            }
            _ => {
                return Err(Error::TopologyParse(format!("bad header line: {header:?}")));
            }
        };
        let mut edges = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (a, b) = match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(Error::TopologyParse(format!("bad edge line: {line:?}"))),
            };
            let a: u32 = a
                .parse()
                .map_err(|_| Error::TopologyParse(format!("bad node id {a:?}")))?;
            let b: u32 = b
                .parse()
                .map_err(|_| Error::TopologyParse(format!("bad node id {b:?}")))?;
            edges.push((a, b));
        }
        Topology::from_edges(n_nodes, edges, grid_dims)
            .map_err(|e| Error::TopologyParse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Topology> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Topology::from_edge_list(&text)
    }
}

fn parse_count(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::TopologyParse(format!("bad count {s:?}")))
}

/// Non-periodic Moore lattice: `rows x cols` nodes in row-major order, each
/// linked to every node at Chebyshev distance 1 (up to 8 neighbours; fewer
/// on the border). Edge count is
/// `rows*(cols-1) + cols*(rows-1) + 2*(rows-1)*(cols-1)`.
pub fn grid_moore(rows: usize, cols: usize) -> Result<Topology> {
    if rows < 2 || cols < 2 {
        return Err(Error::invalid(format!(
            "Moore lattice needs rows, cols >= 2 (got {rows} x {cols})"
        )));
    }
    let idx = |r: usize, c: usize| (r * cols + c) as u32;
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1) + 2 * (rows - 1) * (cols - 1));
    for r in 0..rows {
        for c in 0..cols {
            // Link each node to its E, S, SW and SE neighbours; the other
            // four directions are covered by the symmetric cells.
            if c + 1 < cols {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((idx(r, c), idx(r + 1, c)));
                if c > 0 {
                    edges.push((idx(r, c), idx(r + 1, c - 1)));
                }
                if c + 1 < cols {
                    edges.push((idx(r, c), idx(r + 1, c + 1)));
                }
            }
        }
    }
    Topology::from_edges(rows * cols, edges, Some((rows, cols)))
}
