//! Reduced search spaces and decoding.
//!
//! Two encodings map onto clustered spanning trees:
//!
//! * an [`InterClusterGenome`] picks `k - 1` edges of the cluster multigraph
//!   that form a spanning tree over clusters; local roots follow from a DFS
//!   starting at the root cluster.
//! * a [`RootCombination`] fixes every local root up front, and a
//!   [`ClusterArborescence`] of the induced [`DirectedClusterGraph`] says
//!   which cluster each local root is entered from.
//!
//! Either way each cluster is spanned by the shortest-path tree of its
//! induced subgraph rooted at the local root, so the whole solution is
//! determined by the local roots and the inter-cluster edges.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{tree_cost, Edge, RootedTree};
use crate::instance::ClusteredInstance;

/// An inter-cluster edge of the original graph seen as an edge between two
/// clusters. `u` lies in cluster `ci`, `v` in cluster `cj`, and `ci < cj`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiEdge {
    pub ci: usize,
    pub cj: usize,
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl MultiEdge {
    /// Endpoint lying in cluster `c`.
    pub fn endpoint_in(&self, c: usize) -> usize {
        if c == self.ci {
            self.u
        } else {
            self.v
        }
    }

    /// The cluster on the other side of `c`.
    pub fn other_cluster(&self, c: usize) -> usize {
        if c == self.ci {
            self.cj
        } else {
            self.ci
        }
    }
}

/// Clusters contracted to single vertices; every inter-cluster edge of the
/// original graph survives as a (possibly parallel) edge.
#[derive(Debug, Clone)]
pub struct ClusterMultiGraph {
    k: usize,
    edges: Vec<MultiEdge>,
    incident: Vec<Vec<usize>>,
    parallel: HashMap<(usize, usize), Vec<usize>>,
}

impl ClusterMultiGraph {
    pub fn build(inst: &ClusteredInstance) -> Result<Self> {
        let k = inst.k();
        let mut edges = Vec::new();
        inst.graph().for_each_edge(|a, b, w| {
            let (ca, cb) = (inst.cluster_of(a), inst.cluster_of(b));
            if ca == cb {
                return;
            }
            let e = if ca < cb {
                MultiEdge { ci: ca, cj: cb, u: a, v: b, w }
            } else {
                MultiEdge { ci: cb, cj: ca, u: b, v: a, w }
            };
            edges.push(e);
        });
        let mut incident = vec![Vec::new(); k];
        let mut parallel: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (id, e) in edges.iter().enumerate() {
            incident[e.ci].push(id);
            incident[e.cj].push(id);
            parallel.entry((e.ci, e.cj)).or_default().push(id);
        }
        let mg = Self {
            k,
            edges,
            incident,
            parallel,
        };
        let mut sets = DisjointSets::new(k);
        for e in &mg.edges {
            sets.union(e.ci, e.cj);
        }
        if sets.components != 1 {
            return Err(Error::DisconnectedClusterGraph);
        }
        Ok(mg)
    }

    /// Connectivity check that avoids materialising the multigraph.
    pub(crate) fn check_connected(inst: &ClusteredInstance) -> Result<()> {
        if inst.graph().is_complete() {
            return Ok(());
        }
        let mut sets = DisjointSets::new(inst.k());
        inst.graph()
            .for_each_edge(|a, b, _| {
                sets.union(inst.cluster_of(a), inst.cluster_of(b));
            });
        if sets.components == 1 {
            Ok(())
        } else {
            Err(Error::DisconnectedClusterGraph)
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[MultiEdge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &MultiEdge {
        &self.edges[id]
    }

    /// Edge ids incident to cluster `c`, ascending.
    pub fn incident(&self, c: usize) -> &[usize] {
        &self.incident[c]
    }

    /// All parallel edges joining clusters `a` and `b`, ascending.
    pub fn parallel(&self, a: usize, b: usize) -> &[usize] {
        let key = if a < b { (a, b) } else { (b, a) };
        self.parallel.get(&key).map_or(&[], Vec::as_slice)
    }
}

/// Edge-set chromosome: ids of `k - 1` multigraph edges, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InterClusterGenome {
    genes: Vec<usize>,
}

impl InterClusterGenome {
    pub fn new(mut genes: Vec<usize>) -> Self {
        genes.sort_unstable();
        Self { genes }
    }

    pub fn genes(&self) -> &[usize] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    /// Whether the genes form a spanning tree of `mg`.
    pub fn is_valid(&self, mg: &ClusterMultiGraph) -> bool {
        if self.genes.len() + 1 != mg.k() || self.genes.windows(2).any(|p| p[0] == p[1]) {
            return false;
        }
        let mut sets = DisjointSets::new(mg.k());
        self.genes
            .iter()
            .all(|&id| id < mg.edges.len() && sets.union(mg.edges[id].ci, mg.edges[id].cj))
    }
}

/// Local root of every cluster; entry 0 is always the instance root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RootCombination {
    roots: Vec<usize>,
}

impl RootCombination {
    pub fn new(inst: &ClusteredInstance, roots: Vec<usize>) -> Result<Self> {
        if roots.len() != inst.k() {
            return Err(Error::InvalidParameters(format!(
                "{} roots given for {} clusters",
                roots.len(),
                inst.k()
            )));
        }
        if roots[0] != inst.root() {
            return Err(Error::InvalidParameters("the root cluster must keep the instance root".into()));
        }
        if let Some(c) = (0..roots.len()).find(|&c| roots[c] >= inst.n() || inst.cluster_of(roots[c]) != c) {
            return Err(Error::InvalidParameters(format!("root of cluster {c} lies outside it")));
        }
        Ok(Self { roots })
    }

    /// Uniformly random local root for every cluster but the first.
    pub fn random(inst: &ClusteredInstance, rng: &mut impl Rng) -> Self {
        let roots = (0..inst.k())
            .map(|c| {
                if c == 0 {
                    inst.root()
                } else {
                    let members = inst.cluster(c);
                    members[rng.random_range(0..members.len())]
                }
            })
            .collect();
        Self { roots }
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn root_of(&self, c: usize) -> usize {
        self.roots[c]
    }

    /// Positions where the two combinations differ.
    pub fn differing_positions(&self, other: &Self) -> Vec<usize> {
        (0..self.roots.len()).filter(|&i| self.roots[i] != other.roots[i]).collect()
    }
}

/// All combinations differing from `u` in exactly one non-root position,
/// grouped by position and ordered by vertex id within a group.
pub fn neighbors(u: &RootCombination, inst: &ClusteredInstance) -> Vec<RootCombination> {
    let mut out = Vec::new();
    for c in 1..inst.k() {
        for &v in inst.cluster(c) {
            if v != u.roots[c] {
                let mut roots = u.roots.clone();
                roots[c] = v;
                out.push(RootCombination { roots });
            }
        }
    }
    out
}

/// Directed graph over clusters induced by a root combination: arc `j -> i`
/// exists when some vertex of cluster `j` is adjacent to the root of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedClusterGraph {
    roots: Vec<usize>,
    in_arcs: Vec<Vec<usize>>,
    out_arcs: Vec<Vec<usize>>,
}

impl DirectedClusterGraph {
    pub fn build(inst: &ClusteredInstance, u: &RootCombination) -> Result<Self> {
        let k = inst.k();
        let mut in_arcs = vec![Vec::new(); k];
        for (head, tails) in in_arcs.iter_mut().enumerate() {
            if inst.graph().is_complete() {
                tails.extend((0..k).filter(|&c| c != head));
            } else {
                inst.graph().for_each_neighbor(u.roots[head], |v, _| {
                    let c = inst.cluster_of(v);
                    if c != head {
                        tails.push(c);
                    }
                });
                tails.sort_unstable();
                tails.dedup();
            }
        }
        let mut out_arcs = vec![Vec::new(); k];
        for (head, tails) in in_arcs.iter().enumerate() {
            for &t in tails {
                out_arcs[t].push(head);
            }
        }
        let h = Self {
            roots: u.roots.clone(),
            in_arcs,
            out_arcs,
        };
        let mut seen = vec![false; k];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(c) = stack.pop() {
            for &d in &h.out_arcs[c] {
                if !std::mem::replace(&mut seen[d], true) {
                    stack.push(d);
                }
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(cluster) => Err(Error::InfeasibleRoots { cluster }),
            None => Ok(h),
        }
    }

    pub fn k(&self) -> usize {
        self.in_arcs.len()
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Tails of arcs entering `head`, ascending.
    pub fn in_arcs(&self, head: usize) -> &[usize] {
        &self.in_arcs[head]
    }

    /// Heads of arcs leaving `tail`, ascending.
    pub fn out_arcs(&self, tail: usize) -> &[usize] {
        &self.out_arcs[tail]
    }

    pub fn has_arc(&self, tail: usize, head: usize) -> bool {
        self.in_arcs[head].binary_search(&tail).is_ok()
    }

    /// All arcs `(tail, head)` sorted by head then tail.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.in_arcs
            .iter()
            .enumerate()
            .flat_map(|(head, tails)| tails.iter().map(move |&t| (t, head)))
    }

    pub fn arc_count(&self) -> usize {
        self.in_arcs.iter().map(Vec::len).sum()
    }

    /// Original edges `(port, weight)` that realise arc `tail -> head`, with
    /// ports in ascending order.
    pub fn entry_candidates(&self, inst: &ClusteredInstance, tail: usize, head: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        inst.graph().for_each_neighbor_within(
            self.roots[head],
            inst.cluster(tail),
            |v| inst.cluster_of(v) == tail,
            |v, w| out.push((v, w)),
        );
        out
    }

    /// Whether the arborescence needs no choice at all: every non-root
    /// cluster has a single way in.
    pub fn has_single_arborescence(&self) -> bool {
        self.in_arcs.iter().skip(1).all(|tails| tails.len() == 1)
    }
}

/// Directed spanning tree over clusters rooted at cluster 0, stored as the
/// tail of each cluster's single incoming arc.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterArborescence {
    parent: Vec<Option<usize>>,
}

impl ClusterArborescence {
    /// Wraps parent pointers; fails unless they form an arborescence rooted
    /// at cluster 0.
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self> {
        let a = Self { parent };
        if a.is_structurally_valid() {
            Ok(a)
        } else {
            Err(Error::InvalidParameters("parent pointers do not form an arborescence".into()))
        }
    }

    pub(crate) fn from_parents_unchecked(parent: Vec<Option<usize>>) -> Self {
        Self { parent }
    }

    pub fn k(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, c: usize) -> Option<usize> {
        self.parent[c]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// Arcs `(tail, head)` ordered by head.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (p, c)))
    }

    /// Root has no parent; every other cluster has one; following parents
    /// always reaches the root.
    pub fn is_structurally_valid(&self) -> bool {
        let k = self.parent.len();
        if k == 0 || self.parent[0].is_some() {
            return false;
        }
        // 0 = unknown, 1 = on current path, 2 = reaches root
        let mut state = vec![0u8; k];
        state[0] = 2;
        for start in 1..k {
            let mut path = Vec::new();
            let mut c = start;
            loop {
                match state[c] {
                    2 => break,
                    1 => return false,
                    _ => {}
                }
                state[c] = 1;
                path.push(c);
                match self.parent[c] {
                    Some(p) if p < k && p != c => c = p,
                    _ => return false,
                }
            }
            for v in path {
                state[v] = 2;
            }
        }
        true
    }

    /// Structurally valid and every arc exists in `h`.
    pub fn is_valid_for(&self, h: &DirectedClusterGraph) -> bool {
        self.parent.len() == h.k() && self.is_structurally_valid() && self.is_feasible_for(h)
    }

    /// Every arc exists in `h`; structure is assumed valid.
    pub fn is_feasible_for(&self, h: &DirectedClusterGraph) -> bool {
        self.arcs().all(|(t, c)| h.has_arc(t, c))
    }

    /// True if `ancestor` lies on the path from `c` up to the root
    /// (a cluster counts as its own ancestor).
    pub fn is_ancestor(&self, ancestor: usize, mut c: usize) -> bool {
        loop {
            if c == ancestor {
                return true;
            }
            match self.parent[c] {
                Some(p) => c = p,
                None => return false,
            }
        }
    }

    /// Clusters in breadth-first order from the root, children ascending.
    pub fn topological_order(&self) -> Vec<usize> {
        let k = self.parent.len();
        let mut children = vec![Vec::new(); k];
        for (p, c) in self.arcs() {
            children[p].push(c);
        }
        let mut order = Vec::with_capacity(k);
        order.push(0);
        let mut i = 0;
        while i < order.len() {
            order.extend(children[order[i]].iter().copied());
            i += 1;
        }
        order
    }
}

/// A decoded clustered spanning tree.
#[derive(Debug, Clone, PartialEq)]
pub struct CluSolution {
    pub tree: RootedTree,
    /// The `k - 1` inter-cluster edges as `(port, local root, weight)`.
    pub inter_edges: Vec<Edge>,
    /// Local root of every cluster.
    pub roots: Vec<usize>,
    pub cost: f64,
}

impl CluSolution {
    /// Checks the clustered-spanning-tree invariants against `inst`.
    pub fn validate(&self, inst: &ClusteredInstance) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        let n = inst.n();
        if self.tree.len() != n || self.tree.root() != inst.root() {
            return fail("tree does not span the instance from its root".into());
        }
        let mut intra = vec![0usize; inst.k()];
        let mut inter = 0usize;
        for (p, c, w) in self.tree.edges() {
            if inst.graph().weight(p, c) != Some(w) {
                return fail(format!("tree edge ({p}, {c}) is not a graph edge of weight {w}"));
            }
            if inst.cluster_of(p) == inst.cluster_of(c) {
                intra[inst.cluster_of(c)] += 1;
            } else {
                inter += 1;
            }
        }
        // An acyclic edge set with |C| - 1 edges inside C connects C.
        if let Some(c) = (0..inst.k()).find(|&c| intra[c] + 1 != inst.cluster(c).len()) {
            return fail(format!("cluster {c} is not spanned by a subtree"));
        }
        if inter + 1 != inst.k() || self.inter_edges.len() + 1 != inst.k() {
            return fail(format!("expected {} inter-cluster edges, found {inter}", inst.k() - 1));
        }
        if self.cost != tree_cost(&self.tree) {
            return fail("stored cost differs from the tree cost".into());
        }
        Ok(())
    }
}

/// Local roots and the edge entering each cluster, in a parent-before-child
/// cluster order. Shared by both decoders.
#[derive(Debug, Clone)]
pub(crate) struct ClusterLinks {
    roots: Vec<usize>,
    /// `(port, weight)` of the edge entering each cluster; `None` for the
    /// root cluster.
    entry: Vec<Option<(usize, f64)>>,
    /// Root-to-local-root distance of each cluster.
    depth: Vec<f64>,
}

impl ClusterLinks {
    /// Objective value without materialising the tree.
    pub(crate) fn cost(&self, inst: &ClusteredInstance) -> f64 {
        (0..inst.k())
            .map(|c| inst.cluster(c).len() as f64 * self.depth[c] + inst.local_spt(self.roots[c]).total)
            .sum()
    }

    pub(crate) fn materialize(&self, inst: &ClusteredInstance) -> Result<CluSolution> {
        let n = inst.n();
        let mut parent = vec![None; n];
        let mut parent_weight = vec![0.0; n];
        let mut inter_edges = Vec::with_capacity(inst.k().saturating_sub(1));
        for c in 0..inst.k() {
            let r = self.roots[c];
            let spt = inst.local_spt(r);
            for (i, &v) in inst.cluster(c).iter().enumerate() {
                parent[v] = spt.parent[i];
                parent_weight[v] = spt.parent_weight[i];
            }
            if let Some((port, w)) = self.entry[c] {
                parent[r] = Some(port);
                parent_weight[r] = w;
                inter_edges.push(Edge { u: port, v: r, w });
            }
        }
        let members: Vec<usize> = (0..n).collect();
        let tree = RootedTree::from_parents(n, inst.root(), &members, parent, parent_weight)?;
        Ok(CluSolution {
            cost: tree_cost(&tree),
            tree,
            inter_edges,
            roots: self.roots.clone(),
        })
    }
}

pub(crate) fn genome_links(inst: &ClusteredInstance, mg: &ClusterMultiGraph, g: &InterClusterGenome) -> Result<ClusterLinks> {
    let k = inst.k();
    let mut adjacent: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
    for &id in &g.genes {
        let e = mg.edges.get(id).ok_or_else(|| Error::InvalidParameters(format!("unknown gene {id}")))?;
        adjacent[e.ci].push((e.cj, id));
        adjacent[e.cj].push((e.ci, id));
    }
    for list in &mut adjacent {
        list.sort_unstable();
    }
    let mut roots = vec![usize::MAX; k];
    let mut entry = vec![None; k];
    let mut depth = vec![0.0; k];
    roots[0] = inst.root();
    let mut stack = vec![0];
    let mut visited = 1;
    while let Some(c) = stack.pop() {
        for &(d, id) in adjacent[c].iter().rev() {
            if roots[d] != usize::MAX {
                continue;
            }
            let e = &mg.edges[id];
            let port = e.endpoint_in(c);
            let local_root = e.endpoint_in(d);
            roots[d] = local_root;
            entry[d] = Some((port, e.w));
            depth[d] = depth[c] + inst.local_dist(roots[c], port) + e.w;
            visited += 1;
            stack.push(d);
        }
    }
    if visited != k || g.genes.len() + 1 != k {
        return Err(Error::InvalidParameters("genome is not a spanning tree of the cluster multigraph".into()));
    }
    Ok(ClusterLinks { roots, entry, depth })
}

/// Decodes an edge-set genome: its genes become the inter-cluster edges,
/// the endpoint of the entering gene inside each cluster becomes the local
/// root, and every cluster is spanned by its shortest-path tree.
pub fn decode_genome(inst: &ClusteredInstance, mg: &ClusterMultiGraph, g: &InterClusterGenome) -> Result<CluSolution> {
    genome_links(inst, mg, g)?.materialize(inst)
}

/// Objective value of a genome without building the tree.
pub fn genome_cost(inst: &ClusteredInstance, mg: &ClusterMultiGraph, g: &InterClusterGenome) -> Result<f64> {
    Ok(genome_links(inst, mg, g)?.cost(inst))
}

pub(crate) fn arborescence_links(
    inst: &ClusteredInstance,
    u: &RootCombination,
    a: &ClusterArborescence,
) -> Result<ClusterLinks> {
    let k = inst.k();
    if a.k() != k || u.roots.len() != k {
        return Err(Error::InvalidParameters("arborescence size does not match the instance".into()));
    }
    let mut entry = vec![None; k];
    let mut depth = vec![0.0; k];
    let order = a.topological_order();
    if order.len() != k {
        return Err(Error::InvalidParameters("arborescence does not reach every cluster".into()));
    }
    for &c in &order[1..] {
        let p = a.parent[c].expect("non-root clusters have a parent");
        let root_p = u.roots[p];
        let mut best: Option<(f64, usize, f64)> = None;
        inst.graph().for_each_neighbor_within(
            u.roots[c],
            inst.cluster(p),
            |v| inst.cluster_of(v) == p,
            |port, w| {
                let reach = depth[p] + inst.local_dist(root_p, port) + w;
                if best.is_none_or(|(b, bp, _)| reach < b || (reach == b && port < bp)) {
                    best = Some((reach, port, w));
                }
            },
        );
        let (reach, port, w) = best.ok_or(Error::InfeasibleRoots { cluster: c })?;
        entry[c] = Some((port, w));
        depth[c] = reach;
    }
    Ok(ClusterLinks {
        roots: u.roots.clone(),
        entry,
        depth,
    })
}

/// Builds the solution for fixed local roots and cluster arborescence. Each
/// arc `p -> c` is realised by the port of `p` minimising the distance from
/// the global root to the local root of `c`; ties go to the lower port id.
pub fn decode_arborescence(inst: &ClusteredInstance, u: &RootCombination, a: &ClusterArborescence) -> Result<CluSolution> {
    arborescence_links(inst, u, a)?.materialize(inst)
}

/// Objective value of `(u, a)` without building the tree.
pub fn arborescence_cost(inst: &ClusteredInstance, u: &RootCombination, a: &ClusterArborescence) -> Result<f64> {
    Ok(arborescence_links(inst, u, a)?.cost(inst))
}

/// Default cap on the number of spanning trees [`brute_force_optimum`]
/// will enumerate.
pub const ENUMERATION_BUDGET: usize = 200_000;

/// Global optimum by exhaustive enumeration of the cluster multigraph's
/// spanning trees (parallel edges count as distinct trees).
pub fn brute_force_optimum(inst: &ClusteredInstance) -> Result<CluSolution> {
    brute_force_optimum_with_budget(inst, ENUMERATION_BUDGET)
}

pub fn brute_force_optimum_with_budget(inst: &ClusteredInstance, budget: usize) -> Result<CluSolution> {
    let mg = ClusterMultiGraph::build(inst)?;
    let mut best: Option<(f64, InterClusterGenome)> = None;
    let mut failure = None;
    for_each_spanning_tree(&mg, budget, |genes| {
        let g = InterClusterGenome::new(genes.to_vec());
        match genome_cost(inst, &mg, &g) {
            Ok(cost) => {
                if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    best = Some((cost, g));
                }
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let (_, g) = best.expect("a connected multigraph has a spanning tree");
    decode_genome(inst, &mg, &g)
}

/// Calls `visit` with the edge ids of every spanning tree of `mg`. Fails
/// with `TooLarge` once more than `budget` trees have been found.
pub fn for_each_spanning_tree(mg: &ClusterMultiGraph, budget: usize, mut visit: impl FnMut(&[usize])) -> Result<usize> {
    struct Search<'a, F> {
        mg: &'a ClusterMultiGraph,
        sets: RollbackSets,
        chosen: Vec<usize>,
        found: usize,
        budget: usize,
        visit: F,
    }

    impl<F: FnMut(&[usize])> Search<'_, F> {
        fn spannable_from(&self, next: usize) -> bool {
            let mut sets = DisjointSets::new(self.mg.k);
            for id in self.chosen.iter().copied().chain(next..self.mg.edges.len()) {
                sets.union(self.mg.edges[id].ci, self.mg.edges[id].cj);
            }
            sets.components == 1
        }

        fn run(&mut self, next: usize) -> bool {
            let needed = self.mg.k - 1 - self.chosen.len();
            if needed == 0 {
                self.found += 1;
                if self.found > self.budget {
                    return false;
                }
                (self.visit)(&self.chosen);
                return true;
            }
            if self.mg.edges.len() - next < needed {
                return true;
            }
            let e = self.mg.edges[next];
            if let Some(undo) = self.sets.union(e.ci, e.cj) {
                self.chosen.push(next);
                let ok = self.run(next + 1);
                self.chosen.pop();
                self.sets.rollback(undo);
                if !ok {
                    return false;
                }
            }
            if self.spannable_from(next + 1) {
                return self.run(next + 1);
            }
            true
        }
    }

    if mg.k <= 1 {
        visit(&[]);
        return Ok(1);
    }
    let mut search = Search {
        mg,
        sets: RollbackSets::new(mg.k),
        chosen: Vec::new(),
        found: 0,
        budget,
        visit: &mut visit,
    };
    if search.run(0) {
        Ok(search.found)
    } else {
        Err(Error::TooLarge { budget })
    }
}

/// Union-find with path compression, tracking the component count.
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    pub components: usize,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            components: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        self.components -= 1;
        true
    }
}

/// Union by size without compression, so unions can be undone in LIFO order.
struct RollbackSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl RollbackSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> Option<(usize, usize)> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] > self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[ra] = rb;
        self.size[rb] += self.size[ra];
        Some((ra, rb))
    }

    fn rollback(&mut self, (child, root): (usize, usize)) {
        self.parent[child] = child;
        self.size[root] -= self.size[child];
    }
}
