//! Solvers for the clustered shortest-path tree problem.
//!
//! Given a weighted graph whose vertices are partitioned into clusters and a
//! root vertex, the task is to find a spanning tree in which every cluster
//! induces a connected subtree, minimising the sum of tree distances from the
//! root to all vertices.
//!
//! Three solvers are provided:
//!
//! * [`gacspt`]: a genetic algorithm over spanning trees of the cluster
//!   multigraph, encoded as edge sets.
//! * [`lsea::run_nlsea`]: a bi-level search with hill climbing over local
//!   root combinations and a genetic algorithm over cluster arborescences.
//! * [`mfea::run_mlsea`]: the same bi-level search with neighbouring
//!   lower-level tasks solved in pairs by a multifactorial EA.
//!
//! [`bench`], [`metrics`] and [`stats`] hold the experiment runner and the
//! analysis used to compare them.

pub mod bench;
pub mod decode;
pub mod error;
pub mod gacspt;
pub mod graph;
pub mod instance;
pub mod io;
pub mod lsea;
pub mod metrics;
pub mod mfea;
pub mod stats;

pub use decode::{
    arborescence_cost, brute_force_optimum, decode_arborescence, decode_genome, genome_cost, neighbors, CluSolution,
    ClusterArborescence, ClusterMultiGraph, DirectedClusterGraph, InterClusterGenome, RootCombination,
};
pub use error::{Error, Result};
pub use graph::{dfs_orient, dijkstra_spt, tree_cost, RootedTree, WeightedGraph};
pub use instance::ClusteredInstance;
