mod common;

use std::collections::BTreeSet;

use cluspt::decode::{brute_force_optimum, ClusterArborescence};
use cluspt::gacspt::{crossover, mutate, prim_rst};
use cluspt::io::{parse_instance, serialize_instance};
use cluspt::lsea::{gafll_crossover, gafll_mutate, gafll_prim_rst, run_gafll, run_nlsea, LowerConfig, LseaConfig};
use cluspt::metrics::{normalize_trace, pi_gap, rpd};
use cluspt::mfea::{run_mlsea, select_survivors, MfIndividual};
use cluspt::stats::{friedman, hochberg, holland, holm};
use cluspt::{
    arborescence_cost, decode_arborescence, decode_genome, dijkstra_spt, genome_cost, ClusterMultiGraph,
    DirectedClusterGraph, RootCombination,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cluster_pairs(mg: &ClusterMultiGraph, genes: &[usize]) -> Vec<(usize, usize)> {
    genes.iter().map(|&g| (mg.edge(g).ci, mg.edge(g).cj)).collect()
}

fn small_lower() -> LowerConfig {
    LowerConfig { pop_size: 10, eval_budget: 200, ..LowerConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dijkstra_matches_floyd(seed in any::<u64>()) {
        let inst = common::random_instance(seed, 9, 3);
        for c in 0..inst.k() {
            let members = inst.cluster(c);
            let d = common::floyd_within(inst.graph(), members);
            for (i, &s) in members.iter().enumerate() {
                let t = dijkstra_spt(inst.graph(), members, s).unwrap();
                for (j, &v) in members.iter().enumerate() {
                    prop_assert!((t.dist(v) - d[i][j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn decoded_genomes_are_clustered_spt(seed in any::<u64>(), draw in any::<u64>()) {
        let inst = common::random_instance(seed, 10, 4);
        let mg = ClusterMultiGraph::build(&inst).unwrap();
        let g = prim_rst(&mg, &mut rng(draw));
        prop_assert!(g.is_valid(&mg));
        prop_assert!(common::spans_as_tree(inst.k(), &cluster_pairs(&mg, g.genes())));
        let sol = decode_genome(&inst, &mg, &g).unwrap();
        sol.validate(&inst).unwrap();
        prop_assert!((genome_cost(&inst, &mg, &g).unwrap() - sol.cost).abs() <= 1e-9 * sol.cost.max(1.0));
        // Each local tree is a shortest-path tree of its cluster from the local root.
        for c in 0..inst.k() {
            let members = inst.cluster(c);
            let d = common::floyd_within(inst.graph(), members);
            let r = sol.roots[c];
            let ri = inst.position(r);
            for (j, &v) in members.iter().enumerate() {
                let local = sol.tree.dist(v) - sol.tree.dist(r);
                prop_assert!((local - d[ri][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn genome_operators_keep_spanning_trees(seed in any::<u64>(), draw in any::<u64>()) {
        let inst = common::random_instance(seed, 10, 4);
        let mg = ClusterMultiGraph::build(&inst).unwrap();
        let mut r = rng(draw);
        let a = prim_rst(&mg, &mut r);
        let b = prim_rst(&mg, &mut r);
        let c = crossover(&a, &b, &mg, &mut r);
        prop_assert!(c.is_valid(&mg));
        let union: BTreeSet<usize> = a.genes().iter().chain(b.genes()).copied().collect();
        prop_assert!(c.genes().iter().all(|g| union.contains(g)));
        let m = mutate(&c, &mg, &mut r);
        prop_assert!(m.is_valid(&mg));
        prop_assert!(common::spans_as_tree(inst.k(), &cluster_pairs(&mg, m.genes())));
        let before: BTreeSet<usize> = c.genes().iter().copied().collect();
        prop_assert!(m.genes().iter().filter(|g| !before.contains(g)).count() <= 1);
    }

    #[test]
    fn arborescence_operators_stay_in_h(seed in any::<u64>(), draw in any::<u64>()) {
        let inst = common::random_instance(seed, 10, 4);
        let mut r = rng(draw);
        let u = RootCombination::random(&inst, &mut r);
        let Ok(h) = DirectedClusterGraph::build(&inst, &u) else { return Ok(()); };
        let a = gafll_prim_rst(&h, &mut r).unwrap();
        let b = gafll_prim_rst(&h, &mut r).unwrap();
        prop_assert!(a.is_valid_for(&h) && b.is_valid_for(&h));
        let c = gafll_crossover(&a, &b, &mut r);
        prop_assert!(c.is_valid_for(&h));
        let union: BTreeSet<(usize, usize)> = a.arcs().chain(b.arcs()).collect();
        prop_assert!(c.arcs().all(|arc| union.contains(&arc)));
        let m = gafll_mutate(&c, &h, &mut r);
        prop_assert!(m.is_valid_for(&h));
        let sol = decode_arborescence(&inst, &u, &m).unwrap();
        sol.validate(&inst).unwrap();
        prop_assert_eq!(&sol.roots, u.roots());
        prop_assert!((arborescence_cost(&inst, &u, &m).unwrap() - sol.cost).abs() <= 1e-9 * sol.cost.max(1.0));
    }

    #[test]
    fn bilevel_decomposition_reaches_optimum(seed in any::<u64>()) {
        let inst = common::random_instance(seed, 7, 3);
        let opt = brute_force_optimum(&inst).unwrap().cost;
        // Minimum over every root combination and every arborescence of its H.
        let mut best = f64::INFINITY;
        let mut roots = vec![0usize; inst.k()];
        roots[0] = inst.root();
        fn walk(c: usize, roots: &mut Vec<usize>, inst: &cluspt::ClusteredInstance, best: &mut f64) {
            if c == inst.k() {
                let u = RootCombination::new(inst, roots.clone()).unwrap();
                if let Ok(h) = DirectedClusterGraph::build(inst, &u) {
                    let arcs: Vec<(usize, usize)> = h.arcs().collect();
                    for p in common::all_arborescences(inst.k(), &arcs) {
                        let a = ClusterArborescence::from_parents(p).unwrap();
                        *best = best.min(arborescence_cost(inst, &u, &a).unwrap());
                    }
                }
                return;
            }
            for &v in inst.cluster(c) {
                roots[c] = v;
                walk(c + 1, roots, inst, best);
            }
        }
        walk(1, &mut roots, &inst, &mut best);
        prop_assert!((best - opt).abs() <= 1e-9 * opt.max(1.0), "{best} vs {opt}");
    }

    #[test]
    fn gafll_never_beats_enumeration(seed in any::<u64>(), draw in any::<u64>()) {
        let inst = common::random_instance(seed, 9, 4);
        let u = RootCombination::random(&inst, &mut rng(draw));
        let Ok(h) = DirectedClusterGraph::build(&inst, &u) else { return Ok(()); };
        let arcs: Vec<(usize, usize)> = h.arcs().collect();
        let all = common::all_arborescences(inst.k(), &arcs);
        prop_assume!(all.len() <= 50);
        let min = all
            .into_iter()
            .map(|p| arborescence_cost(&inst, &u, &ClusterArborescence::from_parents(p).unwrap()).unwrap())
            .fold(f64::INFINITY, f64::min);
        let sol = run_gafll(&inst, &u, &small_lower(), &mut rng(draw)).unwrap();
        prop_assert!(sol.cost >= min - 1e-9);
    }

    #[test]
    fn upper_level_moves_strictly_improve(seed in any::<u64>(), draw in any::<u64>()) {
        let inst = common::random_instance(seed, 10, 4);
        let cfg = LseaConfig { lower: small_lower(), ..LseaConfig::default() };
        for (sol, trace) in [
            run_nlsea(&inst, &cfg, &mut rng(draw)).unwrap(),
            run_mlsea(&inst, &cfg, &mut rng(draw)).unwrap(),
        ] {
            sol.validate(&inst).unwrap();
            let t = &trace.best;
            // every sweep but the last adopted a strictly better neighbour
            prop_assert!(t.windows(2).take(t.len().saturating_sub(2)).all(|w| w[1] < w[0]));
            prop_assert!(t.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(*t.last().unwrap(), sol.cost);
        }
        let again = run_nlsea(&inst, &cfg, &mut rng(draw)).unwrap();
        prop_assert_eq!(again.0.cost, run_nlsea(&inst, &cfg, &mut rng(draw)).unwrap().0.cost);
    }

    #[test]
    fn instance_text_round_trips(seed in any::<u64>()) {
        let inst = common::random_instance(seed, 10, 4);
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(serialize_instance(&back), text);
    }

    #[test]
    fn metric_identities(x in 1e-6f64..1e9, y in 1e-6f64..1e9) {
        prop_assert_eq!(rpd(x, x).unwrap(), 0.0);
        prop_assert_eq!(pi_gap(x, x).unwrap(), 0.0);
        prop_assert_eq!(pi_gap(x, y).unwrap() > 0.0, x < y);
    }

    #[test]
    fn normalised_endpoints(trace in prop::collection::vec(0.0f64..1e6, 2..50)) {
        let mut t = trace;
        t.sort_by(|a, b| b.total_cmp(a));
        let n = normalize_trace(&t);
        if t[0] != t[t.len() - 1] {
            prop_assert_eq!(n[0], 1.0);
            prop_assert_eq!(n[n.len() - 1], 0.0);
        } else {
            prop_assert!(n.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn friedman_is_permutation_equivariant(
        m in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 5), 3..5),
        rot in 0usize..4,
    ) {
        let a = friedman(&m).unwrap();
        let mut p = m.clone();
        let r = rot % p.len();
        p.rotate_left(r);
        let b = friedman(&p).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
        let mut ranks = a.average_ranks.clone();
        ranks.rotate_left(r);
        prop_assert_eq!(ranks, b.average_ranks);
    }

    #[test]
    fn adjusted_p_values_are_monotone(mut p in prop::collection::vec(0.0f64..1.0, 1..8)) {
        p.sort_by(f64::total_cmp);
        for adj in [holm(&p), holland(&p)] {
            prop_assert!(adj.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(adj.iter().zip(&p).all(|(a, q)| a >= q && *a <= 1.0));
        }
        let hb = hochberg(&p);
        prop_assert!(hb.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(hb.iter().zip(holm(&p)).all(|(a, b)| *a <= b + 1e-15));
    }

    #[test]
    fn survivors_respect_invariants(costs in prop::collection::vec((0usize..2, 0.0f64..100.0), 2..30), keep in 1usize..20) {
        let a = ClusterArborescence::from_parents(vec![None, Some(0)]).unwrap();
        let pool: Vec<MfIndividual> = costs
            .iter()
            .map(|&(s, c)| {
                let mut factorial_cost = [f64::INFINITY; 2];
                factorial_cost[s] = c;
                MfIndividual { arborescence: a.clone(), skill_factor: s, factorial_cost }
            })
            .collect();
        let best_per_task: Vec<Option<f64>> = (0..2)
            .map(|t| pool.iter().filter(|i| i.skill_factor == t).map(|i| i.cost()).reduce(f64::min))
            .collect();
        let kept = select_survivors(pool.clone(), keep);
        prop_assert_eq!(kept.len(), keep.min(pool.len()));
        for ind in &kept {
            prop_assert!(ind.factorial_cost[1 - ind.skill_factor].is_infinite());
        }
        if keep >= 2 {
            for (t, best) in best_per_task.iter().enumerate() {
                if let Some(b) = best {
                    prop_assert!(kept.iter().any(|i| i.skill_factor == t && i.cost() == *b));
                }
            }
        }
    }
}
