//! Multitasking variant of the bi-level search.
//!
//! Neighbouring root combinations that differ only in one cluster's root
//! induce nearly identical lower-level tasks. They are solved two at a time
//! by a multifactorial EA: one population, each individual evaluated on its
//! skill task only, with crossover allowed across tasks at rate `rmp`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decode::{arborescence_links, CluSolution, ClusterArborescence, DirectedClusterGraph, RootCombination};
use crate::error::{Error, Result};
use crate::gacspt::EvalTrace;
use crate::instance::ClusteredInstance;
use crate::lsea::{gafll_counted, gafll_crossover, gafll_mutate, gafll_prim_rst, hill_climb, LowerConfig, LseaConfig, SweepResult};

/// One lower-level task: a root combination and its cluster graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub roots: RootCombination,
    pub graph: DirectedClusterGraph,
}

impl Task {
    pub fn new(inst: &ClusteredInstance, roots: RootCombination) -> Result<Self> {
        let graph = DirectedClusterGraph::build(inst, &roots)?;
        Ok(Self { roots, graph })
    }
}

/// A group of one or two neighbour indices solved together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskPair {
    pub members: Vec<usize>,
}

impl TaskPair {
    pub fn is_pair(&self) -> bool {
        self.members.len() == 2
    }
}

/// Groups neighbours of a common combination: consecutive candidates that
/// differ in exactly one position form a pair, anything left over stays
/// alone. With [`crate::decode::neighbors`] ordering this pairs candidates
/// inside each cluster's block.
pub fn pair_neighbors(nbrs: &[RootCombination]) -> Vec<TaskPair> {
    let mut groups = Vec::with_capacity(nbrs.len().div_ceil(2));
    let mut i = 0;
    while i < nbrs.len() {
        if i + 1 < nbrs.len() && nbrs[i].differing_positions(&nbrs[i + 1]).len() == 1 {
            groups.push(TaskPair { members: vec![i, i + 1] });
            i += 2;
        } else {
            groups.push(TaskPair { members: vec![i] });
            i += 1;
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfIndividual {
    pub arborescence: ClusterArborescence,
    /// Index of the task the individual is evaluated on.
    pub skill_factor: usize,
    /// Cost per task; infinite on every task but the skill factor.
    pub factorial_cost: [f64; 2],
}

impl MfIndividual {
    pub fn cost(&self) -> f64 {
        self.factorial_cost[self.skill_factor]
    }
}

/// Which branch of assortative mating applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatingBranch {
    Crossover,
    Mutation,
}

/// Parents with the same skill always cross over; otherwise they do so
/// when the uniform draw falls below `rmp`.
pub fn mating_branch(skill_a: usize, skill_b: usize, rmp: f64, draw: f64) -> MatingBranch {
    if skill_a == skill_b || draw < rmp {
        MatingBranch::Crossover
    } else {
        MatingBranch::Mutation
    }
}

/// Skill factors of the parents a child came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parentage {
    Single(usize),
    Both(usize, usize),
}

/// Offspring of two parents: one crossover child over the union of their
/// arcs, or each parent mutated within its own task's graph.
pub fn assortative_mating(
    p1: &MfIndividual,
    p2: &MfIndividual,
    tasks: &[Task],
    rmp: f64,
    rng: &mut impl Rng,
) -> Vec<(ClusterArborescence, Parentage)> {
    let draw = rng.random::<f64>();
    match mating_branch(p1.skill_factor, p2.skill_factor, rmp, draw) {
        MatingBranch::Crossover => {
            let child = gafll_crossover(&p1.arborescence, &p2.arborescence, rng);
            vec![(child, Parentage::Both(p1.skill_factor, p2.skill_factor))]
        }
        MatingBranch::Mutation => [p1, p2]
            .into_iter()
            .map(|p| {
                let child = gafll_mutate(&p.arborescence, &tasks[p.skill_factor].graph, rng);
                (child, Parentage::Single(p.skill_factor))
            })
            .collect(),
    }
}

/// Assigns the child a skill factor and evaluates it on that task only.
/// A single-parent child inherits its parent's skill. A two-parent child
/// feasible for both parents' tasks imitates either parent with equal
/// probability; one feasible for a single task takes that task. `None`
/// when the child fits neither task.
pub fn cultural_transmission(
    inst: &ClusteredInstance,
    child: ClusterArborescence,
    parents: Parentage,
    tasks: &[Task],
    rng: &mut impl Rng,
) -> Result<Option<MfIndividual>> {
    let skill = match parents {
        Parentage::Single(s) => Some(s),
        Parentage::Both(a, b) => {
            let fits_a = child.is_feasible_for(&tasks[a].graph);
            let fits_b = child.is_feasible_for(&tasks[b].graph);
            match (fits_a, fits_b) {
                (true, true) => Some(if rng.random::<f64>() < 0.5 { a } else { b }),
                (true, false) => Some(a),
                (false, true) => Some(b),
                (false, false) => None,
            }
        }
    };
    let Some(skill) = skill else {
        return Ok(None);
    };
    let mut factorial_cost = [f64::INFINITY; 2];
    factorial_cost[skill] = arborescence_links(inst, &tasks[skill].roots, &child)?.cost(inst);
    Ok(Some(MfIndividual {
        arborescence: child,
        skill_factor: skill,
        factorial_cost,
    }))
}

/// Keeps the `n` individuals with the highest scalar fitness, the inverse
/// of their rank by cost among individuals sharing their skill factor.
/// Ties keep the pool order.
pub fn select_survivors(pool: Vec<MfIndividual>, n: usize) -> Vec<MfIndividual> {
    let mut rank = vec![0usize; pool.len()];
    for task in 0..2 {
        let mut group: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].skill_factor == task).collect();
        group.sort_by(|&a, &b| pool[a].cost().total_cmp(&pool[b].cost()).then(a.cmp(&b)));
        for (r, i) in group.into_iter().enumerate() {
            rank[i] = r + 1;
        }
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by_key(|&i| (rank[i], i));
    order.truncate(n);
    order.sort_unstable();
    let mut keep = vec![false; pool.len()];
    for i in order {
        keep[i] = true;
    }
    pool.into_iter().zip(keep).filter_map(|(ind, k)| k.then_some(ind)).collect()
}

/// Solves one or two tasks together. Two tasks share `cfg.eval_budget`;
/// a single task falls back to the plain lower-level GA with the same
/// generator. Returns the best solution per task and the evaluations spent.
pub fn run_mfea_pair(
    inst: &ClusteredInstance,
    tasks: &[Task],
    cfg: &LowerConfig,
    rmp: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<CluSolution>, u64)> {
    cfg.validate()?;
    match tasks {
        [only] => {
            let (sol, evals) = gafll_counted(inst, &only.roots, &only.graph, cfg, rng)?;
            return Ok((vec![sol], evals));
        }
        [_, _] => {}
        _ => return Err(Error::InvalidParameters("a task group holds one or two tasks".into())),
    }
    let n = cfg.pop_size;
    let mut pop = Vec::with_capacity(n);
    for i in 0..n {
        let skill = usize::from(i >= n.div_ceil(2));
        let arb = gafll_prim_rst(&tasks[skill].graph, rng)?;
        let ind = cultural_transmission(inst, arb, Parentage::Single(skill), tasks, rng)?
            .expect("single-parent children keep their parent's task");
        pop.push(ind);
    }
    let mut spent = n;
    let mut best: [Option<MfIndividual>; 2] = [None, None];
    let mut record = |ind: &MfIndividual| {
        let slot = &mut best[ind.skill_factor];
        if slot.as_ref().is_none_or(|b| ind.cost() < b.cost()) {
            *slot = Some(ind.clone());
        }
    };
    pop.iter().for_each(&mut record);

    while spent < cfg.eval_budget {
        let mut children = Vec::with_capacity(n);
        'generation: while children.len() < n {
            let p1 = &pop[rng.random_range(0..pop.len())];
            let p2 = &pop[rng.random_range(0..pop.len())];
            for (child, parents) in assortative_mating(p1, p2, tasks, rmp, rng) {
                if spent >= cfg.eval_budget {
                    break 'generation;
                }
                if let Some(ind) = cultural_transmission(inst, child, parents, tasks, rng)? {
                    spent += 1;
                    debug_assert!(ind.arborescence.is_valid_for(&tasks[ind.skill_factor].graph));
                    record(&ind);
                    children.push(ind);
                }
            }
        }
        pop.extend(children);
        pop = select_survivors(pop, n);
    }

    let mut out = Vec::with_capacity(2);
    for (t, b) in best.into_iter().enumerate() {
        let sol = match b {
            Some(ind) => arborescence_links(inst, &tasks[t].roots, &ind.arborescence)?.materialize(inst)?,
            None => unreachable!("each task seeds half of the initial population"),
        };
        out.push(sol);
    }
    Ok((out, spent as u64))
}

/// Bi-level search whose neighbour tasks are solved in pairs by the
/// multifactorial EA. Upper-level moves and stopping follow
/// [`crate::lsea::run_nlsea`].
pub fn run_mlsea(inst: &ClusteredInstance, cfg: &LseaConfig, rng: &mut impl Rng) -> Result<(CluSolution, EvalTrace)> {
    hill_climb(inst, cfg, rng, |nbrs, rng| solve_paired(inst, cfg, nbrs, rng))
}

fn solve_paired(inst: &ClusteredInstance, cfg: &LseaConfig, nbrs: &[RootCombination], rng: &mut impl Rng) -> Result<SweepResult> {
    let mut feasible = Vec::with_capacity(nbrs.len());
    let mut tasks = Vec::with_capacity(nbrs.len());
    for (i, u) in nbrs.iter().enumerate() {
        match Task::new(inst, u.clone()) {
            Ok(t) => {
                feasible.push(i);
                tasks.push(t);
            }
            Err(Error::InfeasibleRoots { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let kept: Vec<RootCombination> = tasks.iter().map(|t| t.roots.clone()).collect();
    let groups = pair_neighbors(&kept);
    let seeds: Vec<u64> = groups.iter().map(|_| rng.random()).collect();
    let solved = groups
        .par_iter()
        .zip(seeds)
        .map(|(g, seed)| {
            let group: Vec<Task> = g.members.iter().map(|&i| tasks[i].clone()).collect();
            run_mfea_pair(inst, &group, &cfg.lower, cfg.rmp, &mut ChaCha8Rng::seed_from_u64(seed))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut results = vec![None; nbrs.len()];
    let mut evals = 0;
    for (g, (sols, e)) in groups.iter().zip(solved) {
        evals += e;
        for (&i, sol) in g.members.iter().zip(sols) {
            results[feasible[i]] = Some(sol);
        }
    }
    Ok((results, evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::neighbors;
    use crate::graph::WeightedGraph;
    use crate::lsea::{run_gafll, run_nlsea};

    fn t1() -> ClusteredInstance {
        let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 2.0), (0, 3, 5.0)]).unwrap();
        ClusteredInstance::new("t1", g, vec![vec![0, 1], vec![2, 3]], 0).unwrap()
    }

    /// Complete graph on 7 vertices in three clusters, so that every root
    /// combination induces every arc.
    fn complete() -> ClusteredInstance {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0], [7.0, 6.0], [0.0, 9.0], [1.0, 8.0]];
        let g = WeightedGraph::euclidean(coords).unwrap();
        ClusteredInstance::new("c", g, vec![vec![0, 1], vec![2, 3, 4], vec![5, 6]], 0).unwrap()
    }

    #[test]
    fn pairing() {
        let inst = complete();
        let u = RootCombination::new(&inst, vec![0, 2, 5]).unwrap();
        let nbrs = neighbors(&u, &inst);
        // block of cluster 1: {3, 4}; block of cluster 2: {6}
        let groups = pair_neighbors(&nbrs);
        assert_eq!(groups, vec![TaskPair { members: vec![0, 1] }, TaskPair { members: vec![2] }]);
        let t1 = t1();
        let u = RootCombination::new(&t1, vec![0, 2]).unwrap();
        assert_eq!(pair_neighbors(&neighbors(&u, &t1)).len(), 1);
    }

    #[test]
    fn branch_rule() {
        assert_eq!(mating_branch(0, 0, 0.9, 0.99), MatingBranch::Crossover);
        assert_eq!(mating_branch(0, 1, 0.9, 0.95), MatingBranch::Mutation);
        assert_eq!(mating_branch(0, 1, 0.9, 0.1), MatingBranch::Crossover);
    }

    #[test]
    fn survivors_interleave_tasks() {
        let a = ClusterArborescence::from_parents(vec![None, Some(0)]).unwrap();
        let ind = |skill: usize, cost: f64| {
            let mut factorial_cost = [f64::INFINITY; 2];
            factorial_cost[skill] = cost;
            MfIndividual { arborescence: a.clone(), skill_factor: skill, factorial_cost }
        };
        let pool = vec![ind(0, 5.0), ind(0, 1.0), ind(0, 3.0), ind(1, 100.0), ind(1, 50.0)];
        let kept = select_survivors(pool, 2);
        assert_eq!(kept.iter().map(|i| i.cost()).collect::<Vec<_>>(), vec![1.0, 50.0]);
    }

    #[test]
    fn identical_tasks_give_equal_costs() {
        let inst = complete();
        let u = RootCombination::new(&inst, vec![0, 3, 6]).unwrap();
        let task = Task::new(&inst, u).unwrap();
        let tasks = vec![task.clone(), task];
        let (sols, evals) =
            run_mfea_pair(&inst, &tasks, &LowerConfig::default(), 0.9, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(sols[0].cost, sols[1].cost);
        assert_eq!(evals, 1200);
    }

    #[test]
    fn singleton_group_matches_gafll() {
        let inst = complete();
        let u = RootCombination::new(&inst, vec![0, 4, 5]).unwrap();
        let cfg = LowerConfig::default();
        let task = Task::new(&inst, u.clone()).unwrap();
        let (sols, _) = run_mfea_pair(&inst, &[task], &cfg, 0.9, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let direct = run_gafll(&inst, &u, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(sols[0], direct);
    }

    #[test]
    fn mlsea_on_t1() {
        let inst = t1();
        for seed in 0..10 {
            let (sol, _) = run_mlsea(&inst, &LseaConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(sol.cost, 8.0);
        }
    }

    #[test]
    fn mlsea_matches_nlsea_on_singletons() {
        let g = WeightedGraph::from_edges(4, [(0, 1, 2.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.5), (0, 2, 4.0)]).unwrap();
        let inst = ClusteredInstance::new("s", g, (0..4).map(|v| vec![v]).collect(), 0).unwrap();
        let cfg = LseaConfig::default();
        let (m, _) = run_mlsea(&inst, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let (n, _) = run_nlsea(&inst, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(m.cost, n.cost);
    }
}
