//! Weighted undirected graphs, rooted trees and shortest-path trees.
//!
//! Graphs come in two storage flavours: an explicit edge list with a sorted
//! adjacency index, and complete Euclidean graphs that keep only coordinates
//! and compute weights on demand. Both expose the same neighbourhood queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Explicit {
        /// Canonical edges with `u < v`, sorted by `(u, v)`.
        edges: Vec<Edge>,
        /// Per-vertex `(neighbour, weight)` sorted by neighbour id.
        adjacency: Vec<Vec<(usize, f64)>>,
    },
    Euclidean {
        coords: Vec<[f64; 2]>,
    },
}

/// An undirected graph with non-negative real edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    storage: Storage,
}

impl WeightedGraph {
    /// Builds a graph from an explicit edge list. Edges are stored in
    /// canonical `u < v` form; self-loops, duplicates, out-of-range ids and
    /// negative or non-finite weights are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut canonical = Vec::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!("edge ({u}, {v}) references a vertex outside [0, {n})")));
            }
            if u == v {
                return Err(Error::Validation(format!("self-loop on vertex {u}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!("edge ({u}, {v}) has invalid weight {w}")));
            }
            let (u, v) = if u < v { (u, v) } else { (v, u) };
            canonical.push(Edge { u, v, w });
        }
        canonical.sort_by(|a, b| (a.u, a.v).cmp(&(b.u, b.v)));
        if let Some(pair) = canonical.windows(2).find(|p| (p[0].u, p[0].v) == (p[1].u, p[1].v)) {
            return Err(Error::Validation(format!("duplicate edge ({}, {})", pair[0].u, pair[0].v)));
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &canonical {
            adjacency[e.u].push((e.v, e.w));
            adjacency[e.v].push((e.u, e.w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
        }
        Ok(Self {
            n,
            storage: Storage::Explicit { edges: canonical, adjacency },
        })
    }

    /// Complete graph over points in the plane with exact Euclidean weights.
    pub fn euclidean(coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite coordinate".into()));
        }
        Ok(Self {
            n: coords.len(),
            storage: Storage::Euclidean { coords },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// True for implicitly stored complete graphs.
    pub fn is_complete(&self) -> bool {
        matches!(self.storage, Storage::Euclidean { .. })
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        match &self.storage {
            Storage::Euclidean { coords } => Some(coords),
            Storage::Explicit { .. } => None,
        }
    }

    pub fn explicit_edges(&self) -> Option<&[Edge]> {
        match &self.storage {
            Storage::Explicit { edges, .. } => Some(edges),
            Storage::Euclidean { .. } => None,
        }
    }

    /// Number of edges (implicit for complete graphs).
    pub fn edge_count(&self) -> usize {
        match &self.storage {
            Storage::Explicit { edges, .. } => edges.len(),
            Storage::Euclidean { .. } => self.n * self.n.saturating_sub(1) / 2,
        }
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        if u == v || u >= self.n || v >= self.n {
            return None;
        }
        match &self.storage {
            Storage::Explicit { adjacency, .. } => adjacency[u]
                .binary_search_by_key(&v, |&(x, _)| x)
                .ok()
                .map(|i| adjacency[u][i].1),
            Storage::Euclidean { coords } => Some(euclid(coords[u], coords[v])),
        }
    }

    /// Calls `f(v, w)` for every neighbour of `u`, in ascending id order.
    pub fn for_each_neighbor(&self, u: usize, mut f: impl FnMut(usize, f64)) {
        match &self.storage {
            Storage::Explicit { adjacency, .. } => {
                for &(v, w) in &adjacency[u] {
                    f(v, w);
                }
            }
            Storage::Euclidean { coords } => {
                for v in (0..self.n).filter(|&v| v != u) {
                    f(v, euclid(coords[u], coords[v]));
                }
            }
        }
    }

    /// Calls `f(u, v, w)` once per edge with `u < v`, sorted by `(u, v)`.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.storage {
            Storage::Explicit { edges, .. } => {
                for e in edges {
                    f(e.u, e.v, e.w);
                }
            }
            Storage::Euclidean { coords } => {
                for u in 0..self.n {
                    for v in u + 1..self.n {
                        f(u, v, euclid(coords[u], coords[v]));
                    }
                }
            }
        }
    }

    /// Neighbours of `u` restricted to `members`; for complete graphs this
    /// walks `members` directly instead of all `n` vertices.
    pub(crate) fn for_each_neighbor_within(
        &self,
        u: usize,
        members: &[usize],
        is_member: impl Fn(usize) -> bool,
        mut f: impl FnMut(usize, f64),
    ) {
        match &self.storage {
            Storage::Explicit { adjacency, .. } => {
                for &(v, w) in &adjacency[u] {
                    if is_member(v) {
                        f(v, w);
                    }
                }
            }
            Storage::Euclidean { coords } => {
                for &v in members {
                    if v != u {
                        f(v, euclid(coords[u], coords[v]));
                    }
                }
            }
        }
    }
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// A tree over a subset of vertex ids, oriented away from its root.
///
/// Arrays are indexed by global vertex id; vertices outside the tree have
/// no parent and a `NaN` distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    root: usize,
    /// Preorder with children visited in ascending id order.
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    parent_weight: Vec<f64>,
    dist: Vec<f64>,
}

impl RootedTree {
    /// Assembles a tree from parent pointers and recomputes every distance
    /// by a root-to-leaf traversal, so `dist[v] == dist[parent] + w` holds
    /// exactly. Fails if the pointers do not form a tree spanning `members`.
    pub fn from_parents(
        n: usize,
        root: usize,
        members: &[usize],
        parent: Vec<Option<usize>>,
        parent_weight: Vec<f64>,
    ) -> Result<Self> {
        if parent.len() != n || parent_weight.len() != n || root >= n {
            return Err(Error::NotATree("parent arrays do not match the vertex count".into()));
        }
        let mut is_member = vec![false; n];
        for &v in members {
            if v >= n || std::mem::replace(&mut is_member[v], true) {
                return Err(Error::NotATree(format!("invalid or repeated member {v}")));
            }
        }
        if !is_member[root] || parent[root].is_some() {
            return Err(Error::NotATree("root must be a member without a parent".into()));
        }
        let mut children = vec![Vec::new(); n];
        for &v in members {
            if v == root {
                continue;
            }
            match parent[v] {
                Some(p) if p < n && is_member[p] => children[p].push(v),
                _ => return Err(Error::NotATree(format!("vertex {v} has no parent inside the tree"))),
            }
        }
        let mut dist = vec![f64::NAN; n];
        let mut order = Vec::with_capacity(members.len());
        let mut stack = vec![root];
        dist[root] = 0.0;
        while let Some(u) = stack.pop() {
            order.push(u);
            let kids = &mut children[u];
            kids.sort_unstable();
            for &c in kids.iter().rev() {
                dist[c] = dist[u] + parent_weight[c];
                stack.push(c);
            }
        }
        if order.len() != members.len() {
            return Err(Error::NotATree("parent pointers contain a cycle".into()));
        }
        let mut parent = parent;
        let mut parent_weight = parent_weight;
        for v in 0..n {
            if !is_member[v] {
                parent[v] = None;
                parent_weight[v] = 0.0;
            }
        }
        parent_weight[root] = 0.0;
        Ok(Self {
            root,
            order,
            parent,
            parent_weight,
            dist,
        })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Size of the id space the tree is indexed by.
    pub fn n(&self) -> usize {
        self.parent.len()
    }

    /// Number of vertices in the tree.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Vertices in preorder, root first.
    pub fn vertices(&self) -> &[usize] {
        &self.order
    }

    pub fn contains(&self, v: usize) -> bool {
        v < self.n() && !self.dist[v].is_nan()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn parent_weight(&self, v: usize) -> f64 {
        self.parent_weight[v]
    }

    pub fn dist(&self, v: usize) -> f64 {
        self.dist[v]
    }

    /// Tree edges `(parent, child, weight)` in preorder of the child.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.order
            .iter()
            .filter_map(|&v| self.parent[v].map(|p| (p, v, self.parent_weight[v])))
    }
}

/// Sum of root distances over all tree vertices, in ascending id order.
pub fn tree_cost(tree: &RootedTree) -> f64 {
    tree.dist.iter().filter(|d| !d.is_nan()).sum()
}

/// Orients an undirected tree away from `root` with a depth-first search
/// that visits children in ascending id order.
pub fn dfs_orient(edges: &[(usize, usize, f64)], root: usize) -> Result<RootedTree> {
    let mut vertices: Vec<usize> = edges.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    vertices.push(root);
    vertices.sort_unstable();
    vertices.dedup();
    if edges.len() + 1 != vertices.len() {
        return Err(Error::NotATree(format!(
            "{} edges over {} vertices",
            edges.len(),
            vertices.len()
        )));
    }
    let n = vertices.last().map_or(0, |&m| m + 1);
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        if u == v {
            return Err(Error::NotATree(format!("self-loop on {u}")));
        }
        adjacency[u].push((v, w));
        adjacency[v].push((u, w));
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(v, _)| v);
    }
    let mut parent = vec![None; n];
    let mut parent_weight = vec![0.0; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        for &(v, w) in adjacency[u].iter().rev() {
            if seen[v] {
                if parent[u] != Some(v) {
                    return Err(Error::NotATree(format!("cycle through edge ({u}, {v})")));
                }
                continue;
            }
            seen[v] = true;
            parent[v] = Some(u);
            parent_weight[v] = w;
            stack.push(v);
        }
    }
    if let Some(&v) = vertices.iter().find(|&&v| !seen[v]) {
        return Err(Error::NotATree(format!("vertex {v} is disconnected from the root")));
    }
    RootedTree::from_parents(n, root, &vertices, parent, parent_weight)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tentative {
    dist: f64,
    vertex: usize,
}

impl Eq for Tentative {}

impl Ord for Tentative {
    // Reversed so that `BinaryHeap` pops the smallest (dist, vertex) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Tentative {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path tree of `G[members]` in local index space.
#[derive(Debug, Clone)]
pub(crate) struct LocalPaths {
    /// Parent as a global vertex id.
    pub parent: Vec<Option<usize>>,
    pub parent_weight: Vec<f64>,
    pub dist: Vec<f64>,
}

/// Dijkstra inside the subgraph induced by `members`. `local_of` maps a
/// global id to its position in `members`. Equal tentative distances are
/// resolved in favour of the lower vertex id, both when popping and when
/// choosing a parent. On failure returns the first unreachable member.
pub(crate) fn shortest_paths_within(
    graph: &WeightedGraph,
    members: &[usize],
    local_of: impl Fn(usize) -> Option<usize>,
    source: usize,
) -> std::result::Result<LocalPaths, usize> {
    let m = members.len();
    let mut dist = vec![f64::INFINITY; m];
    let mut parent: Vec<Option<usize>> = vec![None; m];
    let mut parent_weight = vec![0.0; m];
    let mut settled = vec![false; m];
    let src = local_of(source).expect("source must be a member");
    dist[src] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Tentative { dist: 0.0, vertex: source });
    while let Some(Tentative { dist: d, vertex: u }) = heap.pop() {
        let lu = local_of(u).expect("heap holds members only");
        if settled[lu] || d > dist[lu] {
            continue;
        }
        settled[lu] = true;
        graph.for_each_neighbor_within(u, members, |v| local_of(v).is_some(), |v, w| {
            let lv = local_of(v).expect("filtered to members");
            if settled[lv] {
                return;
            }
            let nd = d + w;
            if nd < dist[lv] {
                dist[lv] = nd;
                parent[lv] = Some(u);
                parent_weight[lv] = w;
                heap.push(Tentative { dist: nd, vertex: v });
            } else if nd == dist[lv] && parent[lv].is_some_and(|p| u < p) {
                parent[lv] = Some(u);
                parent_weight[lv] = w;
            }
        });
    }
    if let Some(i) = settled.iter().position(|&s| !s) {
        return Err(members[i]);
    }
    Ok(LocalPaths {
        parent,
        parent_weight,
        dist,
    })
}

/// Shortest-path tree of the subgraph induced by `restrict_to`, rooted at
/// `source`.
pub fn dijkstra_spt(graph: &WeightedGraph, restrict_to: &[usize], source: usize) -> Result<RootedTree> {
    let n = graph.n();
    let mut local = vec![usize::MAX; n];
    for (i, &v) in restrict_to.iter().enumerate() {
        if v >= n {
            return Err(Error::Validation(format!("vertex {v} is out of range")));
        }
        local[v] = i;
    }
    if source >= n || local[source] == usize::MAX {
        return Err(Error::Validation(format!("source {source} is not in the restricted set")));
    }
    let lookup = |v: usize| (local[v] != usize::MAX).then_some(local[v]);
    let paths = shortest_paths_within(graph, restrict_to, lookup, source).map_err(|v| Error::DisconnectedSubgraph {
        source_vertex: source,
        unreachable: v,
    })?;
    let mut parent = vec![None; n];
    let mut parent_weight = vec![0.0; n];
    for (i, &v) in restrict_to.iter().enumerate() {
        parent[v] = paths.parent[i];
        parent_weight[v] = paths.parent_weight[i];
    }
    RootedTree::from_parents(n, source, restrict_to, parent, parent_weight)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> WeightedGraph {
        WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn single_vertex_tree() {
        let g = path3();
        let t = dijkstra_spt(&g, &[1], 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.dist(1), 0.0);
        assert_eq!(tree_cost(&t), 0.0);
    }

    #[test]
    fn path_distances() {
        let t = dijkstra_spt(&path3(), &[0, 1, 2], 0).unwrap();
        assert_eq!([t.dist(0), t.dist(1), t.dist(2)], [0.0, 1.0, 2.0]);
        assert_eq!(t.parent(2), Some(1));
    }

    #[test]
    fn star_cost() {
        let g = WeightedGraph::from_edges(4, [(0, 1, 2.0), (0, 2, 2.0), (0, 3, 2.0)]).unwrap();
        let t = dijkstra_spt(&g, &[0, 1, 2, 3], 0).unwrap();
        assert_eq!(tree_cost(&t), 6.0);
    }

    #[test]
    fn disconnected_restriction() {
        let g = path3();
        let err = dijkstra_spt(&g, &[0, 2], 0).unwrap_err();
        assert!(matches!(err, Error::DisconnectedSubgraph { unreachable: 2, .. }));
    }

    #[test]
    fn ties_prefer_lower_parent() {
        // 0-1 (1), 0-2 (1), 1-3 (1), 2-3 (1): vertex 3 reachable via 1 or 2.
        let g = WeightedGraph::from_edges(4, [(0, 2, 1.0), (2, 3, 1.0), (0, 1, 1.0), (1, 3, 1.0)]).unwrap();
        let t = dijkstra_spt(&g, &[0, 1, 2, 3], 0).unwrap();
        assert_eq!(t.parent(3), Some(1));
    }

    #[test]
    fn euclidean_restricted() {
        let g = WeightedGraph::euclidean(vec![[0.0, 0.0], [3.0, 4.0], [100.0, 0.0], [6.0, 8.0]]).unwrap();
        let t = dijkstra_spt(&g, &[0, 1, 3], 0).unwrap();
        assert_eq!(t.dist(3), 10.0);
        assert!(!t.contains(2));
        assert_eq!(g.weight(0, 1), Some(5.0));
    }

    #[test]
    fn orient_single_edge_and_reversal() {
        let t = dfs_orient(&[(0, 1, 1.0)], 0).unwrap();
        assert_eq!(t.parent(1), Some(0));
        let t = dfs_orient(&[(0, 1, 1.0), (1, 2, 1.0)], 2).unwrap();
        assert_eq!(t.parent(1), Some(2));
        assert_eq!(t.parent(0), Some(1));
        assert_eq!(t.vertices(), &[2, 1, 0]);
    }

    #[test]
    fn orient_rejects_non_trees() {
        assert!(matches!(
            dfs_orient(&[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], 0),
            Err(Error::NotATree(_))
        ));
        assert!(matches!(dfs_orient(&[(0, 1, 1.0), (0, 1, 2.0)], 0), Err(Error::NotATree(_))));
        assert!(matches!(dfs_orient(&[(0, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)], 0), Err(Error::NotATree(_))));
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(WeightedGraph::from_edges(2, [(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 2, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)]).is_err());
    }
}
