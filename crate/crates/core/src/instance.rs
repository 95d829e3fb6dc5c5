//! Clustered problem instances.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::graph::{shortest_paths_within, WeightedGraph};

/// Shortest-path tree of one cluster rooted at one of its vertices, indexed
/// by position inside the cluster.
#[derive(Debug, Clone)]
pub(crate) struct LocalSpt {
    pub parent: Vec<Option<usize>>,
    pub parent_weight: Vec<f64>,
    pub dist: Vec<f64>,
    /// Sum of `dist`, i.e. the cost of the cluster when its root sits at
    /// distance zero.
    pub total: f64,
}

/// A weighted graph whose vertices are partitioned into clusters, plus the
/// global root. Cluster 0 always contains the root.
#[derive(Debug)]
pub struct ClusteredInstance {
    name: String,
    graph: WeightedGraph,
    clusters: Vec<Vec<usize>>,
    cluster_of: Vec<usize>,
    position: Vec<usize>,
    root: usize,
    spt_cache: Vec<OnceLock<LocalSpt>>,
}

impl Clone for ClusteredInstance {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            graph: self.graph.clone(),
            clusters: self.clusters.clone(),
            cluster_of: self.cluster_of.clone(),
            position: self.position.clone(),
            root: self.root,
            spt_cache: self.spt_cache.clone(),
        }
    }
}

impl PartialEq for ClusteredInstance {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.graph == other.graph
            && self.clusters == other.clusters
            && self.root == other.root
    }
}

impl ClusteredInstance {
    /// Validates and builds an instance. Each cluster's members are sorted;
    /// the cluster holding `root` is moved to index 0 and the remaining
    /// clusters keep their relative order.
    ///
    /// Fails with `Validation` when the clusters do not partition the vertex
    /// set, and with `DisconnectedCluster` when some cluster does not induce a
    /// connected subgraph. Connectivity of the cluster multigraph is checked
    /// by [`crate::decode::ClusterMultiGraph::build`], which runs here too.
    pub fn new(name: impl Into<String>, graph: WeightedGraph, clusters: Vec<Vec<usize>>, root: usize) -> Result<Self> {
        let n = graph.n();
        if n == 0 {
            return Err(Error::Validation("the graph has no vertices".into()));
        }
        if root >= n {
            return Err(Error::Validation(format!("root {root} is not a vertex")));
        }
        let mut clusters = clusters;
        let mut cluster_of = vec![usize::MAX; n];
        for (c, members) in clusters.iter_mut().enumerate() {
            if members.is_empty() {
                return Err(Error::Validation(format!("cluster {c} is empty")));
            }
            members.sort_unstable();
            for &v in members.iter() {
                if v >= n {
                    return Err(Error::Validation(format!("cluster {c} lists unknown vertex {v}")));
                }
                if cluster_of[v] != usize::MAX {
                    return Err(Error::Validation(format!("vertex {v} appears in more than one cluster")));
                }
                cluster_of[v] = c;
            }
        }
        if let Some(v) = cluster_of.iter().position(|&c| c == usize::MAX) {
            return Err(Error::Validation(format!("vertex {v} belongs to no cluster")));
        }
        let root_cluster = cluster_of[root];
        if root_cluster != 0 {
            let moved = clusters.remove(root_cluster);
            clusters.insert(0, moved);
        }
        let mut position = vec![0; n];
        for (c, members) in clusters.iter().enumerate() {
            for (i, &v) in members.iter().enumerate() {
                cluster_of[v] = c;
                position[v] = i;
            }
        }
        let inst = Self {
            name: name.into(),
            graph,
            spt_cache: (0..n).map(|_| OnceLock::new()).collect(),
            clusters,
            cluster_of,
            position,
            root,
        };
        for c in 0..inst.k() {
            let members = &inst.clusters[c];
            shortest_paths_within(&inst.graph, members, |v| inst.local_index(c, v), members[0])
                .map_err(|_| Error::DisconnectedCluster { cluster: c })?;
        }
        crate::decode::ClusterMultiGraph::check_connected(&inst)?;
        Ok(inst)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, c: usize) -> &[usize] {
        &self.clusters[c]
    }

    pub fn cluster_of(&self, v: usize) -> usize {
        self.cluster_of[v]
    }

    /// Position of `v` inside its cluster's sorted member list.
    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    fn local_index(&self, c: usize, v: usize) -> Option<usize> {
        (self.cluster_of[v] == c).then_some(self.position[v])
    }

    /// Shortest-path tree of the cluster containing `local_root`, computed
    /// once and cached.
    pub(crate) fn local_spt(&self, local_root: usize) -> &LocalSpt {
        self.spt_cache[local_root].get_or_init(|| {
            let c = self.cluster_of[local_root];
            let paths = shortest_paths_within(&self.graph, &self.clusters[c], |v| self.local_index(c, v), local_root)
                .expect("cluster connectivity is checked at construction");
            LocalSpt {
                total: paths.dist.iter().sum(),
                parent: paths.parent,
                parent_weight: paths.parent_weight,
                dist: paths.dist,
            }
        })
    }

    /// Shortest distance from `local_root` to `v` inside their shared cluster.
    pub(crate) fn local_dist(&self, local_root: usize, v: usize) -> f64 {
        self.local_spt(local_root).dist[self.position[v]]
    }
}
