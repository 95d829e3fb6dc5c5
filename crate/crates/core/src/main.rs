use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cluspt::bench::{
    convergence, load_baseline, load_instances, read_results, rpd_table, run_campaign, solve, summarize,
    write_convergence, write_results, write_summary, Algorithm, CampaignSummary, SolverConfig,
};
use cluspt::io::{generate_instance, read_instance, write_instance, Layout};
use cluspt::stats::{friedman_suite, wilcoxon, RankTest};
use cluspt::{CluSolution, Error, Result};

#[derive(Parser)]
#[command(name = "cluspt", version, about = "Solvers and benchmarks for the clustered shortest-path tree problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write the tree as an edge list.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "mlsea")]
        algo: Algorithm,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Solution file
        #[arg(long, default_value = "solution.txt")]
        out: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Run every algorithm several times on every instance in a directory.
    Bench {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "gacspt,nlsea,mlsea")]
        algos: Vec<Algorithm>,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Record wall time per run (makes result files differ between runs)
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        params: Params,
    },
    /// Summarise a results file and run the rank-based tests.
    Stats {
        results: PathBuf,
        /// CSV with columns `instance,best`
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Average normalised convergence curves per algorithm.
    Convergence {
        results: PathBuf,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
    /// Generate a random Euclidean instance.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "uniform-square")]
        layout: Layout,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Params {
    /// Population size (GA and lower level)
    #[arg(long)]
    pop: Option<usize>,
    /// GA generations
    #[arg(long)]
    gens: Option<usize>,
    /// GA generations without improvement before stopping
    #[arg(long)]
    patience: Option<usize>,
    /// Lower-level evaluations per solve
    #[arg(long)]
    budget: Option<usize>,
    /// Cap on total lower-level evaluations of a bi-level run
    #[arg(long)]
    max_evals: Option<u64>,
    /// Random mating probability
    #[arg(long)]
    rmp: Option<f64>,
    /// Mutation rate (all solvers)
    #[arg(long = "mut")]
    mutation: Option<f64>,
}

impl Params {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(p) = self.pop {
            cfg.ga.pop_size = p;
            cfg.lsea.lower.pop_size = p;
        }
        if let Some(g) = self.gens {
            cfg.ga.max_generations = g;
        }
        if let Some(p) = self.patience {
            cfg.ga.convergence_patience = p;
        }
        if let Some(b) = self.budget {
            cfg.lsea.lower.eval_budget = b;
        }
        if let Some(m) = self.max_evals {
            cfg.lsea.max_evaluations = m;
        }
        if let Some(r) = self.rmp {
            cfg.lsea.rmp = r;
        }
        if let Some(m) = self.mutation {
            cfg.ga.mutation_rate = m;
            cfg.lsea.lower.mutation_rate = m;
        }
        cfg
    }
}

fn solution_text(sol: &CluSolution) -> String {
    let mut s = format!("# cost = {}\n", sol.cost);
    for (p, c, w) in sol.tree.edges() {
        writeln!(s, "{} {} {}", p + 1, c + 1, w).expect("writing to a string");
    }
    s
}

fn print_rank_test(name: &str, t: &RankTest, algos: &[Algorithm]) {
    println!("{name}: statistic {:.4}, p {:.4e}", t.statistic, t.p_value);
    for (a, r) in algos.iter().zip(&t.average_ranks) {
        println!("  {a:<7} average rank {r:.3}");
    }
    println!("  control {}", algos[t.control]);
    for c in &t.comparisons {
        println!(
            "  vs {:<7} z {:.3} p {:.4e} holm {:.4e} holland {:.4e} hochberg {:.4e} hommel {:.4e}",
            algos[c.algorithm], c.z, c.p, c.holm, c.holland, c.hochberg, c.hommel
        );
    }
}

fn print_summary(summary: &CampaignSummary) {
    println!("{:<20} {:<7} {:>14} {:>14} {:>10} {:>8}", "instance", "algo", "BF", "Avg", "CV", "Rm");
    for r in &summary.rows {
        println!(
            "{:<20} {:<7} {:>14.2} {:>14.2} {:>10.5} {:>8.3}",
            r.instance, r.algo.to_string(), r.bf, r.avg, r.cv, r.rm
        );
    }
    for p in &summary.pairs {
        let max_pi = p.pi.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        println!("{} vs {}: NIB {} NAB {} max PI {:.3}%", p.a, p.b, p.nib, p.nab, max_pi);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            instance,
            algo,
            seed,
            out,
            params,
        } => {
            let inst = read_instance(&instance)?;
            let (sol, trace) = solve(&inst, algo, &params.config(), seed)?;
            std::fs::write(&out, solution_text(&sol))?;
            println!("{} {} cost {} evaluations {}", inst.name(), algo, sol.cost, trace.evaluations);
        }
        Command::Bench {
            dir,
            algos,
            runs,
            seed,
            out,
            timing,
            params,
        } => {
            let instances = load_instances(&dir)?;
            if instances.is_empty() {
                return Err(Error::InvalidParameters(format!("no .cluspt files in {}", dir.display())));
            }
            let records = run_campaign(&instances, &algos, runs, seed, &params.config(), timing);
            std::fs::create_dir_all(&out)?;
            write_results(out.join("results.jsonl"), &records)?;
            let summary = summarize(&records)?;
            write_summary(out.join("summary.csv"), &summary)?;
            for r in records.iter().filter(|r| !r.is_ok()) {
                eprintln!("{} {} seed {}: {}", r.instance, r.algo, r.seed, r.error.as_deref().unwrap_or(""));
            }
            print_summary(&summary);
        }
        Command::Stats { results, baseline } => {
            let records = read_results(&results)?;
            let summary = summarize(&records)?;
            print_summary(&summary);
            if let Some(path) = baseline {
                let base = load_baseline(path)?;
                for (instance, algo, v) in rpd_table(&summary, &base)? {
                    println!("RPD {instance} {algo}: {v:.4}%");
                }
            }
            let (algos, names, matrix) = summary.avg_matrix();
            if algos.len() >= 2 && names.len() >= 2 {
                let report = friedman_suite(&matrix)?;
                println!(
                    "Iman-Davenport: statistic {:.4}, p {:.4e}",
                    report.iman_davenport, report.iman_davenport_p
                );
                print_rank_test("Friedman", &report.friedman, &algos);
                print_rank_test("Friedman aligned", &report.aligned, &algos);
                print_rank_test("Quade", &report.quade, &algos);
                for i in 0..algos.len() {
                    for j in i + 1..algos.len() {
                        match wilcoxon(&matrix[i], &matrix[j]) {
                            Ok(w) => println!(
                                "Wilcoxon {} vs {}: N {} R+ {} R- {} ties {} p {:.4e}",
                                algos[i], algos[j], w.n, w.r_plus, w.r_minus, w.ties, w.p_value
                            ),
                            Err(e) => println!("Wilcoxon {} vs {}: {e}", algos[i], algos[j]),
                        }
                    }
                }
            } else {
                println!("rank tests need at least two algorithms and two instances");
            }
        }
        Command::Convergence { results, out } => {
            let records = read_results(&results)?;
            write_convergence(&out, &convergence(&records))?;
        }
        Command::Generate {
            n,
            k,
            layout,
            seed,
            out,
        } => {
            let inst = generate_instance(n, k, layout, seed)?;
            write_instance(&out, &inst)?;
            println!("wrote {} ({} vertices, {} clusters)", out.display(), inst.n(), inst.k());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_infeasible() { 3 } else { 2 })
        }
    }
}
