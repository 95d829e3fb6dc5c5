#![allow(dead_code)]

use cluspt::{ClusteredInstance, WeightedGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random instance: up to `max_n` vertices in up to `max_k` clusters.
/// Even seeds give complete Euclidean graphs, odd seeds sparse explicit
/// graphs with integer weights (so ties occur).
pub fn random_instance(seed: u64, max_n: usize, max_k: usize) -> ClusteredInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let k = rng.random_range(1..=max_k.min(n));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut clusters: Vec<Vec<usize>> = (0..k).map(|c| vec![order[c]]).collect();
    for &v in &order[k..] {
        clusters[rng.random_range(0..k)].push(v);
    }
    let root = rng.random_range(0..n);
    let graph = if seed % 2 == 0 {
        let coords = (0..n)
            .map(|_| [rng.random_range(0.0..100.0_f64), rng.random_range(0.0..100.0_f64)])
            .collect();
        WeightedGraph::euclidean(coords).unwrap()
    } else {
        let mut adj = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        let mut add = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
            if a != b && !adj[a][b] {
                adj[a][b] = true;
                adj[b][a] = true;
                edges.push((a, b, rng.random_range(1..=20) as f64));
            }
        };
        for members in &clusters {
            for i in 1..members.len() {
                let j = rng.random_range(0..i);
                add(members[i], members[j], &mut rng);
            }
        }
        for c in 1..k {
            let d = rng.random_range(0..c);
            let a = clusters[c][rng.random_range(0..clusters[c].len())];
            let b = clusters[d][rng.random_range(0..clusters[d].len())];
            add(a, b, &mut rng);
        }
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < 0.4 {
                    add(a, b, &mut rng);
                }
            }
        }
        WeightedGraph::from_edges(n, edges).unwrap()
    };
    ClusteredInstance::new(format!("r{seed}"), graph, clusters, root).unwrap()
}

/// All-pairs shortest distances restricted to `members` (Floyd–Warshall).
pub fn floyd_within(g: &WeightedGraph, members: &[usize]) -> Vec<Vec<f64>> {
    let m = members.len();
    let mut d = vec![vec![f64::INFINITY; m]; m];
    for i in 0..m {
        d[i][i] = 0.0;
        for j in 0..m {
            if i != j {
                if let Some(w) = g.weight(members[i], members[j]) {
                    d[i][j] = w;
                }
            }
        }
    }
    for via in 0..m {
        for i in 0..m {
            for j in 0..m {
                let alt = d[i][via] + d[via][j];
                if alt < d[i][j] {
                    d[i][j] = alt;
                }
            }
        }
    }
    d
}

/// Every cluster arborescence rooted at cluster 0 using only arcs
/// `(tail, head)` from `arcs`, found by trying every parent assignment.
pub fn all_arborescences(k: usize, arcs: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut choices: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(t, h) in arcs {
        if h != 0 {
            choices[h].push(t);
        }
    }
    let mut out = Vec::new();
    let mut parent = vec![None; k];
    fn rec(c: usize, k: usize, choices: &[Vec<usize>], parent: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if c == k {
            let reaches_root = (1..k).all(|mut v| {
                for _ in 0..k {
                    match parent[v] {
                        Some(p) => v = p,
                        None => return v == 0,
                    }
                }
                false
            });
            if reaches_root {
                out.push(parent.clone());
            }
            return;
        }
        for &t in &choices[c] {
            parent[c] = Some(t);
            rec(c + 1, k, choices, parent, out);
        }
        parent[c] = None;
    }
    rec(1, k, &choices, &mut parent, &mut out);
    out
}

/// Whether `edges` (pairs of cluster ids) form a spanning tree on `k`
/// clusters, by repeated relabelling.
pub fn spans_as_tree(k: usize, edges: &[(usize, usize)]) -> bool {
    if edges.len() + 1 != k {
        return false;
    }
    let mut label: Vec<usize> = (0..k).collect();
    for &(a, b) in edges {
        let (la, lb) = (label[a], label[b]);
        if la == lb {
            return false;
        }
        for l in label.iter_mut() {
            if *l == lb {
                *l = la;
            }
        }
    }
    true
}
