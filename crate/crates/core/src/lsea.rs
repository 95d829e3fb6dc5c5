//! Bi-level local search.
//!
//! The upper level hill-climbs over root combinations: a neighbour changes
//! the local root of one cluster. Each combination fixes a directed cluster
//! graph, and the lower level searches its arborescences with a small GA
//! (GAFLL). [`run_nlsea`] solves every neighbour's lower task on its own;
//! [`crate::mfea::run_mlsea`] reuses the same upper loop with paired tasks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{
    arborescence_links, decode_genome, neighbors, CluSolution, ClusterArborescence, ClusterMultiGraph,
    DirectedClusterGraph, RootCombination,
};
use crate::error::{Error, Result};
use crate::gacspt::{check_probability, prim_rst, tournament, EvalTrace};
use crate::instance::ClusteredInstance;

/// Parameters of one lower-level solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerConfig {
    pub pop_size: usize,
    /// Objective evaluations allowed per lower-level solve (shared by both
    /// tasks when two are solved together).
    pub eval_budget: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub seed: u64,
}

impl Default for LowerConfig {
    fn default() -> Self {
        Self {
            pop_size: 20,
            eval_budget: 1200,
            mutation_rate: 0.1,
            crossover_rate: 0.9,
            seed: 0,
        }
    }
}

impl LowerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(Error::InvalidParameters("pop_size must be at least 2".into()));
        }
        if self.eval_budget < self.pop_size {
            return Err(Error::InvalidParameters("eval_budget must be at least pop_size".into()));
        }
        check_probability("mutation_rate", self.mutation_rate)?;
        check_probability("crossover_rate", self.crossover_rate)
    }

    /// Generator seeded from `seed`.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Parameters of a whole bi-level run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LseaConfig {
    pub lower: LowerConfig,
    /// Random mating probability for cross-task crossover (paired solver only).
    pub rmp: f64,
    /// The upper loop stops after the sweep in which total lower-level
    /// evaluations reach this cap.
    pub max_evaluations: u64,
}

impl Default for LseaConfig {
    fn default() -> Self {
        Self {
            lower: LowerConfig::default(),
            rmp: 0.9,
            max_evaluations: 1_000_000,
        }
    }
}

impl LseaConfig {
    pub fn validate(&self) -> Result<()> {
        self.lower.validate()?;
        check_probability("rmp", self.rmp)
    }
}

/// Resamples allowed when a mutation would close a cycle.
pub const MUTATION_RETRIES: usize = 10;

/// Random arborescence grown from the root cluster: a uniformly random arc
/// leaving the covered set is drawn at each step and kept if its head is
/// new. `None` if some cluster cannot be reached.
pub(crate) fn random_arborescence<'a>(
    k: usize,
    out_arcs: impl Fn(usize) -> &'a [usize],
    rng: &mut impl Rng,
) -> Option<ClusterArborescence> {
    let mut parent = vec![None; k];
    let mut covered = vec![false; k];
    covered[0] = true;
    let mut frontier: Vec<(usize, usize)> = out_arcs(0).iter().map(|&h| (0, h)).collect();
    let mut count = 1;
    while count < k {
        if frontier.is_empty() {
            return None;
        }
        let (tail, head) = frontier.swap_remove(rng.random_range(0..frontier.len()));
        if covered[head] {
            continue;
        }
        covered[head] = true;
        parent[head] = Some(tail);
        count += 1;
        frontier.extend(out_arcs(head).iter().filter(|&&h| !covered[h]).map(|&h| (head, h)));
    }
    Some(ClusterArborescence::from_parents_unchecked(parent))
}

pub fn gafll_prim_rst(h: &DirectedClusterGraph, rng: &mut impl Rng) -> Result<ClusterArborescence> {
    random_arborescence(h.k(), |c| h.out_arcs(c), rng).ok_or_else(|| {
        let cluster = (1..h.k()).find(|&c| h.in_arcs(c).is_empty()).unwrap_or(1);
        Error::InfeasibleRoots { cluster }
    })
}

/// Random arborescence over the union of both parents' arcs.
pub fn gafll_crossover(p1: &ClusterArborescence, p2: &ClusterArborescence, rng: &mut impl Rng) -> ClusterArborescence {
    let k = p1.k();
    let mut out = vec![Vec::new(); k];
    for (t, h) in p1.arcs().chain(p2.arcs()) {
        out[t].push(h);
    }
    for list in &mut out {
        list.sort_unstable();
        list.dedup();
    }
    random_arborescence(k, |c| out[c].as_slice(), rng).expect("each parent spans every cluster")
}

/// Inserts a random arc of `h` that `a` does not use, replacing the
/// current in-arc of its head. Draws that would close a cycle are retried
/// up to [`MUTATION_RETRIES`] times; `a` is returned unchanged if none
/// succeeds or if `h` offers no other arc.
pub fn gafll_mutate(a: &ClusterArborescence, h: &DirectedClusterGraph, rng: &mut impl Rng) -> ClusterArborescence {
    let k = a.k();
    // prefix[i] = number of arcs entering clusters 1..=i
    let mut prefix = Vec::with_capacity(k);
    prefix.push(0);
    for c in 1..k {
        prefix.push(prefix[c - 1] + h.in_arcs(c).len());
    }
    let total = prefix[k - 1];
    if total <= k - 1 {
        return a.clone();
    }
    for _ in 0..=MUTATION_RETRIES {
        let (tail, head) = loop {
            let idx = rng.random_range(0..total);
            let head = prefix.partition_point(|&p| p <= idx);
            let tail = h.in_arcs(head)[idx - prefix[head - 1]];
            if a.parent(head) != Some(tail) {
                break (tail, head);
            }
        };
        if a.is_ancestor(head, tail) {
            continue;
        }
        let mut parent = a.parents().to_vec();
        parent[head] = Some(tail);
        return ClusterArborescence::from_parents_unchecked(parent);
    }
    a.clone()
}

#[derive(Clone)]
struct Scored {
    arb: ClusterArborescence,
    cost: f64,
}

/// Lower-level GA result: best decoded solution and evaluations spent.
pub(crate) fn gafll_counted(
    inst: &ClusteredInstance,
    u: &RootCombination,
    h: &DirectedClusterGraph,
    cfg: &LowerConfig,
    rng: &mut impl Rng,
) -> Result<(CluSolution, u64)> {
    let mut evals = 0u64;
    let mut evaluate = |arb: ClusterArborescence| -> Result<Scored> {
        debug_assert!(arb.is_valid_for(h));
        evals += 1;
        Ok(Scored {
            cost: arborescence_links(inst, u, &arb)?.cost(inst),
            arb,
        })
    };
    if h.has_single_arborescence() {
        let only = evaluate(gafll_prim_rst(h, rng)?)?;
        return Ok((arborescence_links(inst, u, &only.arb)?.materialize(inst)?, evals));
    }
    let mut pop = Vec::with_capacity(cfg.pop_size);
    for _ in 0..cfg.pop_size {
        pop.push(evaluate(gafll_prim_rst(h, rng)?)?);
    }
    let mut spent = cfg.pop_size;
    let mut best = best_of(&pop).clone();
    while spent < cfg.eval_budget {
        let mut next = vec![best_of(&pop).clone()];
        while next.len() < cfg.pop_size && spent < cfg.eval_budget {
            let p1 = tournament(&pop, |s| s.cost, rng);
            let p2 = tournament(&pop, |s| s.cost, rng);
            let mut child = if rng.random::<f64>() < cfg.crossover_rate {
                gafll_crossover(&p1.arb, &p2.arb, rng)
            } else {
                p1.arb.clone()
            };
            if rng.random::<f64>() < cfg.mutation_rate {
                child = gafll_mutate(&child, h, rng);
            }
            next.push(evaluate(child)?);
            spent += 1;
        }
        pop = next;
        let gen_best = best_of(&pop);
        if gen_best.cost < best.cost {
            best = gen_best.clone();
        }
    }
    Ok((arborescence_links(inst, u, &best.arb)?.materialize(inst)?, evals))
}

fn best_of(pop: &[Scored]) -> &Scored {
    pop.iter()
        .reduce(|a, b| if b.cost < a.cost { b } else { a })
        .expect("population is never empty")
}

/// Best solution for the fixed root combination `u` found by the
/// lower-level GA within `cfg.eval_budget` evaluations.
pub fn run_gafll(inst: &ClusteredInstance, u: &RootCombination, cfg: &LowerConfig, rng: &mut impl Rng) -> Result<CluSolution> {
    cfg.validate()?;
    let h = DirectedClusterGraph::build(inst, u)?;
    Ok(gafll_counted(inst, u, &h, cfg, rng)?.0)
}

/// Starting combination: uniform roots, redrawn while the induced cluster
/// graph leaves some cluster unreachable, with the roots of a random
/// spanning tree of the cluster multigraph as a last resort.
fn initial_combination(inst: &ClusteredInstance, rng: &mut impl Rng) -> Result<(RootCombination, DirectedClusterGraph)> {
    const ATTEMPTS: usize = 100;
    for _ in 0..ATTEMPTS {
        let u = RootCombination::random(inst, rng);
        if let Ok(h) = DirectedClusterGraph::build(inst, &u) {
            return Ok((u, h));
        }
    }
    let mg = ClusterMultiGraph::build(inst)?;
    let sol = decode_genome(inst, &mg, &prim_rst(&mg, rng))?;
    let u = RootCombination::new(inst, sol.roots)?;
    let h = DirectedClusterGraph::build(inst, &u)?;
    Ok((u, h))
}

/// Lower-level results for one sweep, aligned with the neighbour list
/// (`None` for neighbours whose cluster graph is infeasible), plus the
/// evaluations spent.
pub(crate) type SweepResult = (Vec<Option<CluSolution>>, u64);

/// Upper-level hill climbing shared by both bi-level solvers. Every
/// neighbour of the current combination is solved, the cheapest strictly
/// improving one (lowest index on ties) is adopted, and the search stops
/// after a sweep without improvement or once the evaluation cap is reached.
pub(crate) fn hill_climb<R: Rng>(
    inst: &ClusteredInstance,
    cfg: &LseaConfig,
    rng: &mut R,
    mut solve_sweep: impl FnMut(&[RootCombination], &mut R) -> Result<SweepResult>,
) -> Result<(CluSolution, EvalTrace)> {
    cfg.validate()?;
    let (mut current, h) = initial_combination(inst, rng)?;
    let (mut solution, evals) = gafll_counted(inst, &current, &h, &cfg.lower, rng)?;
    let mut trace = EvalTrace {
        best: vec![solution.cost],
        evaluations: evals,
    };
    while trace.evaluations < cfg.max_evaluations {
        let nbrs = neighbors(&current, inst);
        if nbrs.is_empty() {
            break;
        }
        let (results, evals) = solve_sweep(&nbrs, rng)?;
        trace.evaluations += evals;
        let mut adopted = None;
        for (i, sol) in results.into_iter().enumerate() {
            if let Some(sol) = sol {
                if sol.cost < solution.cost {
                    solution = sol;
                    adopted = Some(i);
                }
            }
        }
        trace.best.push(solution.cost);
        match adopted {
            Some(i) => current = nbrs[i].clone(),
            None => break,
        }
    }
    Ok((solution, trace))
}

/// Nested local search: each neighbour's lower task gets its own GAFLL run.
/// Neighbours are solved in parallel from seeds drawn up front, so the
/// result depends only on the generator's state.
pub fn run_nlsea(inst: &ClusteredInstance, cfg: &LseaConfig, rng: &mut impl Rng) -> Result<(CluSolution, EvalTrace)> {
    hill_climb(inst, cfg, rng, |nbrs, rng| {
        let seeds: Vec<u64> = nbrs.iter().map(|_| rng.random()).collect();
        let solved = nbrs
            .par_iter()
            .zip(seeds)
            .map(|(u, seed)| match DirectedClusterGraph::build(inst, u) {
                Ok(h) => gafll_counted(inst, u, &h, &cfg.lower, &mut ChaCha8Rng::seed_from_u64(seed)).map(Some),
                Err(Error::InfeasibleRoots { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        let evals = solved.iter().flatten().map(|(_, e)| e).sum();
        Ok((solved.into_iter().map(|r| r.map(|(s, _)| s)).collect(), evals))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;

    fn t1() -> ClusteredInstance {
        let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 2.0), (0, 3, 5.0)]).unwrap();
        ClusteredInstance::new("t1", g, vec![vec![0, 1], vec![2, 3]], 0).unwrap()
    }

    /// Three singleton clusters with arcs 0->1, 0->2, 1->2 (plus the
    /// reverse arcs into cluster 0, which no arborescence can use).
    fn triangle() -> (ClusteredInstance, DirectedClusterGraph) {
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0), (0, 2, 4.0), (1, 2, 1.0)]).unwrap();
        let inst = ClusteredInstance::new("tri", g, vec![vec![0], vec![1], vec![2]], 0).unwrap();
        let u = RootCombination::new(&inst, vec![0, 1, 2]).unwrap();
        let h = DirectedClusterGraph::build(&inst, &u).unwrap();
        (inst, h)
    }

    fn arb(parent: &[Option<usize>]) -> ClusterArborescence {
        ClusterArborescence::from_parents(parent.to_vec()).unwrap()
    }

    #[test]
    fn prim_rst_on_t1_is_forced() {
        let inst = t1();
        let u = RootCombination::new(&inst, vec![0, 2]).unwrap();
        let h = DirectedClusterGraph::build(&inst, &u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(gafll_prim_rst(&h, &mut rng).unwrap(), arb(&[None, Some(0)]));
        }
    }

    #[test]
    fn prim_rst_reaches_both_arborescences() {
        let (_, h) = triangle();
        let mut chain = 0;
        for seed in 0..1000 {
            let a = gafll_prim_rst(&h, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(a.is_valid_for(&h));
            chain += usize::from(a.parent(2) == Some(1));
        }
        assert!((100..900).contains(&chain), "{chain}");
    }

    #[test]
    fn crossover_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let star = arb(&[None, Some(0), Some(0)]);
        let chain = arb(&[None, Some(0), Some(1)]);
        assert_eq!(gafll_crossover(&star, &star, &mut rng), star);
        for _ in 0..20 {
            let c = gafll_crossover(&star, &chain, &mut rng);
            assert!(c == star || c == chain);
        }
    }

    #[test]
    fn mutation_swaps_in_arc() {
        let (_, h) = triangle();
        let chain = arb(&[None, Some(0), Some(1)]);
        // Candidates are 0->2 and 2->1; the latter closes a cycle, so every
        // successful mutation lands on the star.
        for seed in 0..50 {
            let m = gafll_mutate(&chain, &h, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(m == arb(&[None, Some(0), Some(0)]) || m == chain);
        }
        let hits = (0..200)
            .filter(|&s| gafll_mutate(&chain, &h, &mut ChaCha8Rng::seed_from_u64(s)) != chain)
            .count();
        assert!(hits > 150, "{hits}");
    }

    #[test]
    fn mutation_without_spare_arc_is_noop() {
        let inst = t1();
        let u = RootCombination::new(&inst, vec![0, 2]).unwrap();
        let h = DirectedClusterGraph::build(&inst, &u).unwrap();
        let a = arb(&[None, Some(0)]);
        assert_eq!(gafll_mutate(&a, &h, &mut ChaCha8Rng::seed_from_u64(0)), a);
    }

    #[test]
    fn gafll_on_t1() {
        let inst = t1();
        let u = RootCombination::new(&inst, vec![0, 2]).unwrap();
        let sol = run_gafll(&inst, &u, &LowerConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(sol.cost, 8.0);
    }

    #[test]
    fn gafll_picks_cheapest_arborescence() {
        let (inst, _) = triangle();
        let u = RootCombination::new(&inst, vec![0, 1, 2]).unwrap();
        let sol = run_gafll(&inst, &u, &LowerConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        // chain 0-1-2 gives 0 + 1 + 2
        assert_eq!(sol.cost, 3.0);
    }

    #[test]
    fn nlsea_on_t1() {
        let inst = t1();
        for seed in 0..10 {
            let (sol, trace) = run_nlsea(&inst, &LseaConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(sol.cost, 8.0);
            assert!(trace.best.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn config_validation() {
        assert!(LseaConfig::default().validate().is_ok());
        let small_budget = LowerConfig { eval_budget: 5, ..LowerConfig::default() };
        assert!(small_budget.validate().is_err());
        assert!(LseaConfig { rmp: -0.1, ..LseaConfig::default() }.validate().is_err());
    }
}
