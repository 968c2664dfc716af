//! # somnet
//!
//! Self-organizing maps whose neuron neighbourhood is a complex graph.
//!
//! A classical SOM arranges its neurons on a regular lattice; here the
//! lattice is only the starting point. Links can be rewired into
//! small-world and fully random graphs, neuron proximity is measured in
//! hops on that graph, and a steady-state evolutionary algorithm can
//! optimize the wiring itself against handwritten-digit misclassification.
//!
//! The crate is organized around five pieces:
//!
//! - [`topology`]: Moore lattices, probabilistic and exact-count rewiring,
//!   graph distances and structural statistics.
//! - [`som`]: training with graph-distance Gaussian neighbourhoods,
//!   node-failure noise, supervised labelling and evaluation.
//! - [`data`]: IDX (MNIST) loading, subsetting, pooling, synthetic
//!   clusters.
//! - [`evolution`]: mutation-only steady-state GA over topologies.
//! - [`harness`]: reproducible experiment drivers emitting CSV.
//!
//! All randomness flows through explicitly seeded [`seeds::Rng`] streams;
//! every run is bitwise reproducible from its configuration and seed.

pub mod data;
pub mod distance;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod metrics;
pub mod seeds;
pub mod som;
pub mod topology;
pub mod ttest;

pub use data::Dataset;
pub use distance::{all_pairs_distances, DistanceField, UNREACHABLE};
pub use error::{Error, Result};
pub use metrics::{graph_stats, GraphStats};
pub use som::{train, NoiseModel, Schedule, SomState, TrainOptions};
pub use topology::{grid_moore, Topology};
pub use ttest::{unpaired_t_test, TTest};
