//! Genetic algorithm over spanning trees of the cluster multigraph.
//!
//! Individuals are edge sets of `k - 1` multigraph edges. The population is
//! seeded with random Prim trees, recombined by drawing a random tree from
//! the union of both parents, and mutated by swapping a gene for a parallel
//! edge between the same two clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode::{decode_genome, genome_cost, CluSolution, ClusterMultiGraph, InterClusterGenome};
use crate::error::{Error, Result};
use crate::instance::ClusteredInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub pop_size: usize,
    pub max_generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub seed: u64,
    /// Number of best individuals copied unchanged into the next generation.
    pub elitism: usize,
    /// Stop once the best cost has not improved for this many generations.
    pub convergence_patience: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 200,
            max_generations: 6000,
            mutation_rate: 0.1,
            crossover_rate: 0.9,
            seed: 0,
            elitism: 1,
            convergence_patience: 500,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(Error::InvalidParameters("pop_size must be at least 2".into()));
        }
        if self.elitism >= self.pop_size {
            return Err(Error::InvalidParameters("elitism must be smaller than pop_size".into()));
        }
        check_probability("mutation_rate", self.mutation_rate)?;
        check_probability("crossover_rate", self.crossover_rate)
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Best cost after each generation (entry 0 is the initial population)
/// and the number of objective evaluations spent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalTrace {
    pub best: Vec<f64>,
    pub evaluations: u64,
}

/// Random spanning tree of the multigraph grown Prim-style from a random
/// cluster: a uniformly random frontier edge is removed at each step and
/// kept if it reaches a new cluster.
pub fn prim_rst(mg: &ClusterMultiGraph, rng: &mut impl Rng) -> InterClusterGenome {
    let k = mg.k();
    if k <= 1 {
        return InterClusterGenome::new(Vec::new());
    }
    let start = rng.random_range(0..k);
    random_tree(mg, |c| mg.incident(c), start, rng)
}

fn random_tree<'a>(
    mg: &ClusterMultiGraph,
    incident: impl Fn(usize) -> &'a [usize],
    start: usize,
    rng: &mut impl Rng,
) -> InterClusterGenome {
    let k = mg.k();
    let mut in_tree = vec![false; k];
    in_tree[start] = true;
    let mut frontier: Vec<(usize, usize)> = incident(start).iter().map(|&id| (id, start)).collect();
    let mut genes = Vec::with_capacity(k - 1);
    while genes.len() + 1 < k {
        assert!(!frontier.is_empty(), "edge pool does not span the clusters");
        let (id, from) = frontier.swap_remove(rng.random_range(0..frontier.len()));
        let to = mg.edge(id).other_cluster(from);
        if in_tree[to] {
            continue;
        }
        in_tree[to] = true;
        genes.push(id);
        frontier.extend(
            incident(to)
                .iter()
                .filter(|&&e| !in_tree[mg.edge(e).other_cluster(to)])
                .map(|&e| (e, to)),
        );
    }
    InterClusterGenome::new(genes)
}

/// Random spanning tree of the graph formed by both parents' edges.
pub fn crossover(
    p1: &InterClusterGenome,
    p2: &InterClusterGenome,
    mg: &ClusterMultiGraph,
    rng: &mut impl Rng,
) -> InterClusterGenome {
    let k = mg.k();
    if k <= 1 {
        return p1.clone();
    }
    let mut pool: Vec<usize> = p1.genes().iter().chain(p2.genes()).copied().collect();
    pool.sort_unstable();
    pool.dedup();
    let mut incident = vec![Vec::new(); k];
    for &id in &pool {
        let e = mg.edge(id);
        incident[e.ci].push(id);
        incident[e.cj].push(id);
    }
    let start = rng.random_range(0..k);
    random_tree(mg, |c| incident[c].as_slice(), start, rng)
}

/// Replaces a random gene that has parallel alternatives with a different
/// edge between the same two clusters. Genomes without such a gene are
/// returned unchanged.
pub fn mutate(g: &InterClusterGenome, mg: &ClusterMultiGraph, rng: &mut impl Rng) -> InterClusterGenome {
    let eligible: Vec<usize> = (0..g.len())
        .filter(|&i| {
            let e = mg.edge(g.genes()[i]);
            mg.parallel(e.ci, e.cj).len() >= 2
        })
        .collect();
    if eligible.is_empty() {
        return g.clone();
    }
    let slot = eligible[rng.random_range(0..eligible.len())];
    let current = g.genes()[slot];
    let e = mg.edge(current);
    let alternatives: Vec<usize> = mg.parallel(e.ci, e.cj).iter().copied().filter(|&id| id != current).collect();
    let mut genes = g.genes().to_vec();
    genes[slot] = alternatives[rng.random_range(0..alternatives.len())];
    InterClusterGenome::new(genes)
}

#[derive(Clone)]
struct Individual {
    genome: InterClusterGenome,
    cost: f64,
}

pub(crate) fn tournament<'a, T>(pop: &'a [T], cost: impl Fn(&T) -> f64, rng: &mut impl Rng) -> &'a T {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if cost(b) < cost(a) {
        b
    } else {
        a
    }
}

/// Runs the generational GA with binary tournament selection and elitist
/// replacement. Returns the best decoded solution ever seen together with
/// the per-generation best costs.
pub fn run_gacspt(inst: &ClusteredInstance, cfg: &GaConfig) -> Result<(CluSolution, EvalTrace)> {
    cfg.validate()?;
    let mg = ClusterMultiGraph::build(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = EvalTrace::default();
    let evaluate = |g: InterClusterGenome, trace: &mut EvalTrace| -> Result<Individual> {
        trace.evaluations += 1;
        Ok(Individual {
            cost: genome_cost(inst, &mg, &g)?,
            genome: g,
        })
    };

    // A multigraph that is itself a tree admits exactly one genome.
    if mg.edges().len() + 1 == mg.k() || mg.k() <= 1 {
        let only = evaluate(prim_rst(&mg, &mut rng), &mut trace)?;
        trace.best.push(only.cost);
        return Ok((decode_genome(inst, &mg, &only.genome)?, trace));
    }

    let mut pop = (0..cfg.pop_size)
        .map(|_| evaluate(prim_rst(&mg, &mut rng), &mut trace))
        .collect::<Result<Vec<_>>>()?;
    let mut best = best_of(&pop).clone();
    trace.best.push(best.cost);
    let mut stale = 0;

    for _ in 0..cfg.max_generations {
        let mut next = elites(&pop, cfg.elitism);
        while next.len() < cfg.pop_size {
            let p1 = tournament(&pop, |i| i.cost, &mut rng);
            let p2 = tournament(&pop, |i| i.cost, &mut rng);
            let mut child = if rng.random::<f64>() < cfg.crossover_rate {
                crossover(&p1.genome, &p2.genome, &mg, &mut rng)
            } else {
                p1.genome.clone()
            };
            if rng.random::<f64>() < cfg.mutation_rate {
                child = mutate(&child, &mg, &mut rng);
            }
            debug_assert!(child.is_valid(&mg));
            next.push(evaluate(child, &mut trace)?);
        }
        pop = next;
        let gen_best = best_of(&pop);
        if gen_best.cost < best.cost {
            best = gen_best.clone();
            stale = 0;
        } else {
            stale += 1;
        }
        trace.best.push(best.cost);
        if stale >= cfg.convergence_patience {
            break;
        }
    }
    Ok((decode_genome(inst, &mg, &best.genome)?, trace))
}

fn best_of(pop: &[Individual]) -> &Individual {
    pop.iter()
        .reduce(|a, b| if b.cost < a.cost { b } else { a })
        .expect("population is never empty")
}

fn elites(pop: &[Individual], count: usize) -> Vec<Individual> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop[a].cost.total_cmp(&pop[b].cost).then(a.cmp(&b)));
    order.into_iter().take(count).map(|i| pop[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;

    fn t1() -> ClusteredInstance {
        let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 2.0), (0, 3, 5.0)]).unwrap();
        ClusteredInstance::new("t1", g, vec![vec![0, 1], vec![2, 3]], 0).unwrap()
    }

    #[test]
    fn prim_rst_forced_and_empty() {
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let inst = ClusteredInstance::new("p", g, vec![vec![0, 1], vec![2]], 0).unwrap();
        let mg = ClusterMultiGraph::build(&inst).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert_eq!(prim_rst(&mg, &mut rng).genes(), &[0]);
        }
        let single = WeightedGraph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let inst = ClusteredInstance::new("s", single, vec![vec![0, 1]], 0).unwrap();
        let mg = ClusterMultiGraph::build(&inst).unwrap();
        assert!(prim_rst(&mg, &mut rng).is_empty());
    }

    #[test]
    fn prim_rst_visits_both_parallel_edges() {
        let inst = t1();
        let mg = ClusterMultiGraph::build(&inst).unwrap();
        let mut counts = [0usize; 2];
        for seed in 0..1000 {
            let g = prim_rst(&mg, &mut ChaCha8Rng::seed_from_u64(seed));
            counts[g.genes()[0]] += 1;
        }
        assert!(counts.iter().all(|&c| c >= 100), "{counts:?}");
    }

    #[test]
    fn crossover_of_identical_parents() {
        let inst = t1();
        let mg = ClusterMultiGraph::build(&inst).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = prim_rst(&mg, &mut rng);
        assert_eq!(crossover(&p, &p, &mg, &mut rng), p);
        let (a, b) = (InterClusterGenome::new(vec![0]), InterClusterGenome::new(vec![1]));
        for _ in 0..10 {
            let c = crossover(&a, &b, &mg, &mut rng);
            assert!(c == a || c == b);
        }
    }

    #[test]
    fn mutation_swaps_parallel_edge() {
        let inst = t1();
        let mg = ClusterMultiGraph::build(&inst).unwrap();
        // Multigraph edge ids follow the canonical (u, v) order: (0,3) then (1,2).
        let via_12 = InterClusterGenome::new(vec![mg.edges().iter().position(|e| e.u == 1).unwrap()]);
        let m = mutate(&via_12, &mg, &mut ChaCha8Rng::seed_from_u64(3));
        let e = mg.edge(m.genes()[0]);
        assert_eq!((e.u, e.v, e.w), (0, 3, 5.0));
    }

    #[test]
    fn mutation_without_parallel_edges_is_noop() {
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let inst = ClusteredInstance::new("p", g, vec![vec![0], vec![1], vec![2]], 0).unwrap();
        let mg = ClusterMultiGraph::build(&inst).unwrap();
        let g = InterClusterGenome::new(vec![0, 1]);
        assert_eq!(mutate(&g, &mg, &mut ChaCha8Rng::seed_from_u64(0)), g);
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        assert!(GaConfig { pop_size: 1, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { mutation_rate: 1.5, ..GaConfig::default() }.validate().is_err());
    }

    #[test]
    fn solves_t1() {
        let inst = t1();
        for seed in 0..5 {
            let cfg = GaConfig { pop_size: 10, max_generations: 20, seed, ..GaConfig::default() };
            let (sol, trace) = run_gacspt(&inst, &cfg).unwrap();
            assert_eq!(sol.cost, 8.0);
            assert!(trace.best.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
