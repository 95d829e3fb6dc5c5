//! Experiment campaigns: repeated seeded runs, result files and summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::CluSolution;
use crate::error::{Error, Result};
use crate::gacspt::{run_gacspt, EvalTrace, GaConfig};
use crate::instance::ClusteredInstance;
use crate::io::read_instance;
use crate::lsea::{run_nlsea, LseaConfig};
use crate::metrics::{average_convergence, pi_gap, rpd};
use crate::mfea::run_mlsea;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "GACSPT")]
    Gacspt,
    #[serde(rename = "N-LSEA")]
    Nlsea,
    #[serde(rename = "M-LSEA")]
    Mlsea,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Gacspt, Algorithm::Nlsea, Algorithm::Mlsea];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Gacspt => "GACSPT",
            Algorithm::Nlsea => "N-LSEA",
            Algorithm::Mlsea => "M-LSEA",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "gacspt" => Ok(Algorithm::Gacspt),
            "nlsea" => Ok(Algorithm::Nlsea),
            "mlsea" => Ok(Algorithm::Mlsea),
            _ => Err(Error::InvalidParameters(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Parameters for every solver; each run overrides the seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub ga: GaConfig,
    pub lsea: LseaConfig,
}

/// Runs one solver with the given seed.
pub fn solve(inst: &ClusteredInstance, algo: Algorithm, cfg: &SolverConfig, seed: u64) -> Result<(CluSolution, EvalTrace)> {
    match algo {
        Algorithm::Gacspt => run_gacspt(inst, &GaConfig { seed, ..cfg.ga.clone() }),
        Algorithm::Nlsea | Algorithm::Mlsea => {
            let lsea = LseaConfig {
                lower: crate::lsea::LowerConfig { seed, ..cfg.lsea.lower.clone() },
                ..cfg.lsea.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if algo == Algorithm::Nlsea {
                run_nlsea(inst, &lsea, &mut rng)
            } else {
                run_mlsea(inst, &lsea, &mut rng)
            }
        }
    }
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub instance: String,
    pub algo: Algorithm,
    pub seed: u64,
    pub best_cost: f64,
    pub minutes: f64,
    pub evals: u64,
    pub trace: Vec<f64>,
    /// Set when the run failed; cost and trace are then meaningless.
    pub error: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    instance: String,
    algo: Algorithm,
    seed: u64,
    best_cost: f64,
    minutes: f64,
    evals: u64,
    trace: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl RunRecord {
    pub fn to_json_line(&self) -> Result<String> {
        let line = RecordLine {
            instance: self.instance.clone(),
            algo: self.algo,
            seed: self.seed,
            best_cost: self.best_cost,
            minutes: self.minutes,
            evals: self.evals,
            trace: self.trace.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            error: self.error.clone(),
        };
        Ok(serde_json::to_string(&line)?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let r: RecordLine = serde_json::from_str(line)?;
        let trace = if r.trace.is_empty() {
            Vec::new()
        } else {
            r.trace
                .split(';')
                .map(|t| t.parse::<f64>().map_err(|e| Error::InvalidParameters(format!("bad trace value `{t}`: {e}"))))
                .collect::<Result<_>>()?
        };
        Ok(Self {
            instance: r.instance,
            algo: r.algo,
            seed: r.seed,
            best_cost: r.best_cost,
            minutes: r.minutes,
            evals: r.evals,
            trace,
            error: r.error,
        })
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Runs `runs` seeded runs (seeds `base_seed + i`) of every algorithm on
/// every instance. Failed runs are kept as records with `error` set.
/// Records are sorted by instance, algorithm and seed. Wall time is only
/// measured when `timing` is set, so that repeated campaigns produce
/// identical records.
pub fn run_campaign(
    instances: &[ClusteredInstance],
    algorithms: &[Algorithm],
    runs: usize,
    base_seed: u64,
    cfg: &SolverConfig,
    timing: bool,
) -> Vec<RunRecord> {
    let cells: Vec<(usize, Algorithm, u64)> = instances
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            algorithms
                .iter()
                .flat_map(move |&a| (0..runs as u64).map(move |r| (i, a, base_seed + r)))
        })
        .collect();
    let mut records: Vec<RunRecord> = cells
        .into_par_iter()
        .map(|(i, algo, seed)| {
            let inst = &instances[i];
            let start = Instant::now();
            let outcome = solve(inst, algo, cfg, seed);
            let minutes = if timing { start.elapsed().as_secs_f64() / 60.0 } else { 0.0 };
            match outcome {
                Ok((sol, trace)) => RunRecord {
                    instance: inst.name().to_string(),
                    algo,
                    seed,
                    best_cost: sol.cost,
                    minutes,
                    evals: trace.evaluations,
                    trace: trace.best,
                    error: None,
                },
                Err(e) => RunRecord {
                    instance: inst.name().to_string(),
                    algo,
                    seed,
                    best_cost: 0.0,
                    minutes,
                    evals: 0,
                    trace: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    records.sort_by(|a, b| (&a.instance, a.algo, a.seed).cmp(&(&b.instance, b.algo, b.seed)));
    records
}

pub fn write_results(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(out, "{}", r.to_json_line()?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(RunRecord::from_json_line(&line)?);
        }
    }
    Ok(out)
}

/// BF, Avg, CV and Rm of one algorithm on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub instance: String,
    pub algo: Algorithm,
    #[serde(rename = "BF")]
    pub bf: f64,
    #[serde(rename = "Avg")]
    pub avg: f64,
    /// Sample standard deviation over Avg.
    #[serde(rename = "CV")]
    pub cv: f64,
    /// Mean wall time in minutes.
    #[serde(rename = "Rm")]
    pub rm: f64,
}

/// Counts of instances where `a` has a strictly lower BF than `b` (`nib`)
/// and the reverse (`nab`), and the per-instance improvement of `a` over `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseComparison {
    pub a: Algorithm,
    pub b: Algorithm,
    pub nib: usize,
    pub nab: usize,
    pub pi: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub rows: Vec<SummaryRow>,
    pub pairs: Vec<PairwiseComparison>,
}

impl CampaignSummary {
    pub fn row(&self, instance: &str, algo: Algorithm) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.instance == instance && r.algo == algo)
    }

    pub fn algorithms(&self) -> Vec<Algorithm> {
        let mut a: Vec<Algorithm> = self.rows.iter().map(|r| r.algo).collect();
        a.sort_unstable();
        a.dedup();
        a
    }

    /// Instances on which every algorithm has a row, in name order.
    pub fn complete_instances(&self) -> Vec<String> {
        let algos = self.algorithms();
        let mut names: Vec<String> = self.rows.iter().map(|r| r.instance.clone()).collect();
        names.dedup();
        names
            .into_iter()
            .filter(|n| algos.iter().all(|&a| self.row(n, a).is_some()))
            .collect()
    }

    /// Avg matrix indexed `[algorithm][instance]` over complete instances.
    pub fn avg_matrix(&self) -> (Vec<Algorithm>, Vec<String>, Vec<Vec<f64>>) {
        let algos = self.algorithms();
        let names = self.complete_instances();
        let m = algos
            .iter()
            .map(|&a| names.iter().map(|n| self.row(n, a).expect("complete").avg).collect())
            .collect();
        (algos, names, m)
    }
}

/// Summarises successful records; failed runs are ignored.
pub fn summarize(records: &[RunRecord]) -> Result<CampaignSummary> {
    let mut groups: BTreeMap<(String, Algorithm), Vec<&RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        groups.entry((r.instance.clone(), r.algo)).or_default().push(r);
    }
    let rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((instance, algo), runs)| {
            let costs: Vec<f64> = runs.iter().map(|r| r.best_cost).collect();
            let count = costs.len() as f64;
            let bf = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let avg = costs.iter().sum::<f64>() / count;
            let var = if costs.len() > 1 {
                costs.iter().map(|c| (c - avg).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            let cv = if avg != 0.0 { var.sqrt() / avg } else { 0.0 };
            let rm = runs.iter().map(|r| r.minutes).sum::<f64>() / count;
            SummaryRow { instance, algo, bf, avg, cv, rm }
        })
        .collect();
    let mut summary = CampaignSummary { rows, pairs: Vec::new() };
    let algos = summary.algorithms();
    let names = summary.complete_instances();
    for &a in &algos {
        for &b in &algos {
            if a == b {
                continue;
            }
            let mut cmp = PairwiseComparison { a, b, nib: 0, nab: 0, pi: Vec::new() };
            for n in &names {
                let (ra, rb) = (summary.row(n, a).expect("complete"), summary.row(n, b).expect("complete"));
                cmp.nib += usize::from(ra.bf < rb.bf);
                cmp.nab += usize::from(rb.bf < ra.bf);
                cmp.pi.push((n.clone(), pi_gap(ra.bf, rb.bf)?));
            }
            summary.pairs.push(cmp);
        }
    }
    Ok(summary)
}

pub fn write_summary(path: impl AsRef<Path>, summary: &CampaignSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &summary.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Deserialize)]
struct BaselineRow {
    instance: String,
    best: f64,
}

/// Best-known costs from a CSV file with columns `instance,best`.
pub fn load_baseline(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for row in r.deserialize::<BaselineRow>() {
        let row = row?;
        if !(row.best > 0.0) {
            return Err(Error::InvalidBaseline(row.best));
        }
        out.insert(row.instance, row.best);
    }
    Ok(out)
}

/// RPD of each row's BF against the baseline, for instances it covers.
pub fn rpd_table(summary: &CampaignSummary, baseline: &BTreeMap<String, f64>) -> Result<Vec<(String, Algorithm, f64)>> {
    summary
        .rows
        .iter()
        .filter_map(|r| baseline.get(&r.instance).map(|&b| (r, b)))
        .map(|(r, b)| Ok((r.instance.clone(), r.algo, rpd(r.bf, b)?)))
        .collect()
}

/// Averaged normalised convergence curve per algorithm.
pub fn convergence(records: &[RunRecord]) -> BTreeMap<Algorithm, Vec<f64>> {
    let mut traces: BTreeMap<Algorithm, Vec<Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        traces.entry(r.algo).or_default().push(r.trace.clone());
    }
    traces.into_iter().map(|(a, t)| (a, average_convergence(&t))).collect()
}

pub fn write_convergence(path: impl AsRef<Path>, curves: &BTreeMap<Algorithm, Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["algo", "generation", "value"])?;
    for (algo, curve) in curves {
        for (i, v) in curve.iter().enumerate() {
            w.write_record([algo.to_string(), i.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Instance files (`*.cluspt`) in `dir`, sorted by file name.
pub fn instance_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "cluspt"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_instances(dir: impl AsRef<Path>) -> Result<Vec<ClusteredInstance>> {
    instance_files(dir)?.iter().map(read_instance).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;

    fn t1() -> ClusteredInstance {
        let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 2.0), (0, 3, 5.0)]).unwrap();
        ClusteredInstance::new("t1", g, vec![vec![0, 1], vec![2, 3]], 0).unwrap()
    }

    fn record(instance: &str, algo: Algorithm, seed: u64, cost: f64) -> RunRecord {
        RunRecord {
            instance: instance.into(),
            algo,
            seed,
            best_cost: cost,
            minutes: 0.0,
            evals: 1,
            trace: vec![cost],
            error: None,
        }
    }

    #[test]
    fn algorithm_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("mlsea".parse::<Algorithm>().unwrap(), Algorithm::Mlsea);
        assert!("foo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn record_round_trip() {
        let mut r = record("x", Algorithm::Nlsea, 7, 12.5);
        r.trace = vec![20.0, 15.25, 12.5];
        let line = r.to_json_line().unwrap();
        assert!(line.contains("\"trace\":\"20;15.25;12.5\""));
        assert!(line.contains("\"algo\":\"N-LSEA\""));
        assert_eq!(RunRecord::from_json_line(&line).unwrap(), r);
    }

    #[test]
    fn summary_statistics() {
        let recs = vec![
            record("a", Algorithm::Gacspt, 0, 10.0),
            record("a", Algorithm::Gacspt, 1, 12.0),
            record("a", Algorithm::Gacspt, 2, 14.0),
        ];
        let s = summarize(&recs).unwrap();
        let row = &s.rows[0];
        assert_eq!((row.bf, row.avg), (10.0, 12.0));
        assert!((row.cv - 2.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn pairwise_counts() {
        let recs = vec![
            record("a", Algorithm::Nlsea, 0, 10.0),
            record("a", Algorithm::Mlsea, 0, 9.0),
            record("b", Algorithm::Nlsea, 0, 5.0),
            record("b", Algorithm::Mlsea, 0, 5.0),
        ];
        let s = summarize(&recs).unwrap();
        let p = s.pairs.iter().find(|p| p.a == Algorithm::Mlsea).unwrap();
        assert_eq!((p.nib, p.nab), (1, 0));
        assert!((p.pi[0].1 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn campaign_on_t1() {
        let inst = vec![t1()];
        let recs = run_campaign(&inst, &Algorithm::ALL, 30, 0, &SolverConfig::default(), false);
        assert_eq!(recs.len(), 90);
        let s = summarize(&recs).unwrap();
        for row in &s.rows {
            assert_eq!((row.bf, row.avg), (8.0, 8.0));
        }
        let again = run_campaign(&inst, &Algorithm::ALL, 30, 0, &SolverConfig::default(), false);
        assert_eq!(recs, again);
    }
}
