//! Nonparametric comparison of several algorithms over several datasets.
//!
//! Inputs are cost matrices indexed `[algorithm][dataset]`; lower is better,
//! so rank 1 goes to the cheapest algorithm on a dataset. Tied values share
//! the mean of the ranks they span.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal};

use crate::error::{Error, Result};

/// Mid-ranks (1-based) of `values` in ascending order.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn chi2_sf(x: f64, df: f64) -> f64 {
    ChiSquared::new(df).expect("positive degrees of freedom").sf(x)
}

fn f_sf(x: f64, d1: f64, d2: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FisherSnedecor::new(d1, d2).expect("positive degrees of freedom").sf(x)
}

/// Two-sided p-value of a standard normal score.
pub fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::standard();
    (2.0 * n.cdf(-z.abs())).min(1.0)
}

/// Friedman statistic from the average rank of each of `k` algorithms
/// over `n` datasets.
pub fn friedman_statistic(avg_ranks: &[f64], n: usize) -> f64 {
    let k = avg_ranks.len() as f64;
    let centre = (k + 1.0) / 2.0;
    12.0 * n as f64 / (k * (k + 1.0)) * avg_ranks.iter().map(|r| (r - centre).powi(2)).sum::<f64>()
}

/// Iman–Davenport correction of a Friedman statistic.
pub fn iman_davenport(chi2: f64, n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    let denom = n * (k - 1.0) - chi2;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (n - 1.0) * chi2 / denom
}

/// Standard error of a difference of average ranks in post-hoc tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankKind {
    Friedman,
    Aligned,
    Quade,
}

impl RankKind {
    pub fn standard_error(self, k: usize, n: usize) -> f64 {
        let (k, n) = (k as f64, n as f64);
        match self {
            RankKind::Friedman => (k * (k + 1.0) / (6.0 * n)).sqrt(),
            RankKind::Aligned => (k * (k * n + 1.0) / 6.0).sqrt(),
            RankKind::Quade => (k * (k + 1.0) * (2.0 * n + 1.0) * (k - 1.0) / (18.0 * n * (n + 1.0))).sqrt(),
        }
    }
}

/// One algorithm compared with the control.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub algorithm: usize,
    pub z: f64,
    pub p: f64,
    pub holm: f64,
    pub holland: f64,
    pub hochberg: f64,
    pub hommel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTest {
    pub kind: RankKind,
    pub average_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    /// Algorithm with the lowest average rank.
    pub control: usize,
    /// Every other algorithm, ordered by ascending unadjusted p-value.
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub algorithms: usize,
    pub datasets: usize,
    pub friedman: RankTest,
    pub iman_davenport: f64,
    pub iman_davenport_p: f64,
    pub aligned: RankTest,
    pub quade: RankTest,
}

fn check_matrix(results: &[Vec<f64>]) -> Result<(usize, usize)> {
    let k = results.len();
    if k < 2 {
        return Err(Error::DegenerateInput("at least two algorithms are needed".into()));
    }
    let n = results[0].len();
    if n < 2 {
        return Err(Error::DegenerateInput("at least two datasets are needed".into()));
    }
    if results.iter().any(|r| r.len() != n) {
        return Err(Error::DegenerateInput("every algorithm needs a value for every dataset".into()));
    }
    if results.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite result".into()));
    }
    Ok((k, n))
}

fn column(results: &[Vec<f64>], d: usize) -> Vec<f64> {
    results.iter().map(|r| r[d]).collect()
}

/// Average within-dataset ranks per algorithm.
pub fn friedman_ranks(results: &[Vec<f64>]) -> Result<Vec<f64>> {
    let (k, n) = check_matrix(results)?;
    let mut sum = vec![0.0; k];
    for d in 0..n {
        for (s, r) in sum.iter_mut().zip(mid_ranks(&column(results, d))) {
            *s += r;
        }
    }
    Ok(sum.into_iter().map(|s| s / n as f64).collect())
}

fn post_hoc(kind: RankKind, avg: &[f64], n: usize) -> (usize, Vec<Comparison>) {
    let k = avg.len();
    let control = (0..k).min_by(|&a, &b| avg[a].total_cmp(&avg[b])).expect("k >= 2");
    let se = kind.standard_error(k, n);
    let mut raw: Vec<(usize, f64, f64)> = (0..k)
        .filter(|&j| j != control)
        .map(|j| {
            let z = (avg[j] - avg[control]) / se;
            (j, z, normal_two_sided(z))
        })
        .collect();
    raw.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let p: Vec<f64> = raw.iter().map(|r| r.2).collect();
    let (holm, holland, hochberg, hommel) = (holm(&p), holland(&p), hochberg(&p), hommel(&p));
    let comparisons = raw
        .into_iter()
        .enumerate()
        .map(|(i, (algorithm, z, p))| Comparison {
            algorithm,
            z,
            p,
            holm: holm[i],
            holland: holland[i],
            hochberg: hochberg[i],
            hommel: hommel[i],
        })
        .collect();
    (control, comparisons)
}

/// Friedman test with post-hoc comparisons against the best-ranked algorithm.
pub fn friedman(results: &[Vec<f64>]) -> Result<RankTest> {
    let avg = friedman_ranks(results)?;
    let n = results[0].len();
    let statistic = friedman_statistic(&avg, n);
    let p_value = chi2_sf(statistic, (avg.len() - 1) as f64);
    let (control, comparisons) = post_hoc(RankKind::Friedman, &avg, n);
    Ok(RankTest {
        kind: RankKind::Friedman,
        average_ranks: avg,
        statistic,
        p_value,
        control,
        comparisons,
    })
}

/// Friedman aligned-ranks test: each value is centred on its dataset's
/// mean and all `k * n` aligned values are ranked together.
pub fn friedman_aligned(results: &[Vec<f64>]) -> Result<RankTest> {
    let (k, n) = check_matrix(results)?;
    let mut aligned = Vec::with_capacity(k * n);
    for d in 0..n {
        let col = column(results, d);
        let mean = col.iter().sum::<f64>() / k as f64;
        aligned.extend(col.iter().map(|v| v - mean));
    }
    // aligned[d * k + j]
    let ranks = mid_ranks(&aligned);
    let mut alg_total = vec![0.0; k];
    let mut data_total = vec![0.0; n];
    for d in 0..n {
        for j in 0..k {
            let r = ranks[d * k + j];
            alg_total[j] += r;
            data_total[d] += r;
        }
    }
    let (kf, nf) = (k as f64, n as f64);
    let kn = kf * nf;
    let numer = (kf - 1.0)
        * (alg_total.iter().map(|r| r * r).sum::<f64>() - kf * nf * nf / 4.0 * (kn + 1.0).powi(2));
    let denom = kn * (kn + 1.0) * (2.0 * kn + 1.0) / 6.0 - data_total.iter().map(|r| r * r).sum::<f64>() / kf;
    let statistic = if denom > 0.0 { numer / denom } else { 0.0 };
    let avg: Vec<f64> = alg_total.iter().map(|t| t / nf).collect();
    let (control, comparisons) = post_hoc(RankKind::Aligned, &avg, n);
    Ok(RankTest {
        kind: RankKind::Aligned,
        p_value: chi2_sf(statistic.max(0.0), kf - 1.0),
        average_ranks: avg,
        statistic,
        control,
        comparisons,
    })
}

/// Quade test: within-dataset ranks weighted by the rank of each dataset's
/// range. The statistic follows an F distribution.
pub fn quade(results: &[Vec<f64>]) -> Result<RankTest> {
    let (k, n) = check_matrix(results)?;
    let (kf, nf) = (k as f64, n as f64);
    let ranges: Vec<f64> = (0..n)
        .map(|d| {
            let col = column(results, d);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect();
    let q = mid_ranks(&ranges);
    let mut s = vec![0.0; k];
    let mut w = vec![0.0; k];
    let mut a = 0.0;
    for d in 0..n {
        for (j, r) in mid_ranks(&column(results, d)).into_iter().enumerate() {
            let sij = q[d] * (r - (kf + 1.0) / 2.0);
            s[j] += sij;
            w[j] += q[d] * r;
            a += sij * sij;
        }
    }
    let b = s.iter().map(|x| x * x).sum::<f64>() / nf;
    let statistic = if a == b {
        if b == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (nf - 1.0) * b / (a - b)
    };
    let avg: Vec<f64> = w.iter().map(|x| x / (nf * (nf + 1.0) / 2.0)).collect();
    let (control, comparisons) = post_hoc(RankKind::Quade, &avg, n);
    Ok(RankTest {
        kind: RankKind::Quade,
        p_value: f_sf(statistic, kf - 1.0, (nf - 1.0) * (kf - 1.0)),
        average_ranks: avg,
        statistic,
        control,
        comparisons,
    })
}

/// Friedman, Iman–Davenport, aligned Friedman and Quade tests on one matrix.
pub fn friedman_suite(results: &[Vec<f64>]) -> Result<StatsReport> {
    let (k, n) = check_matrix(results)?;
    let friedman = friedman(results)?;
    let id = iman_davenport(friedman.statistic, n, k);
    Ok(StatsReport {
        algorithms: k,
        datasets: n,
        iman_davenport: id,
        iman_davenport_p: f_sf(id, k as f64 - 1.0, (k as f64 - 1.0) * (n as f64 - 1.0)),
        friedman,
        aligned: friedman_aligned(results)?,
        quade: quade(results)?,
    })
}

fn clamp(p: f64) -> f64 {
    p.min(1.0)
}

/// Holm step-down adjustment of p-values sorted ascending.
pub fn holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut running: f64 = 0.0;
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            running = running.max(clamp((m - i) as f64 * pi));
            running
        })
        .collect()
}

/// Holland step-down adjustment of p-values sorted ascending.
pub fn holland(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut running: f64 = 0.0;
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            // never below p itself, which rounding in 1 - (1 - p) could break
            running = running.max(clamp((1.0 - (1.0 - pi).powi((m - i) as i32)).max(pi)));
            running
        })
        .collect()
}

/// Hochberg step-up adjustment of p-values sorted ascending.
pub fn hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut out = vec![0.0; m];
    let mut running = f64::INFINITY;
    for i in (0..m).rev() {
        running = running.min(clamp((m - i) as f64 * p[i]));
        out[i] = running;
    }
    out
}

/// Hommel adjustment of p-values sorted ascending.
pub fn hommel(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    if n == 0 {
        return Vec::new();
    }
    let initial = (0..n).map(|i| n as f64 * p[i] / (i + 1) as f64).fold(f64::INFINITY, f64::min);
    let mut q = vec![initial; n];
    let mut pa = vec![initial; n];
    for m in (2..n).rev() {
        // first n - m + 1 positions get individually capped; the rest share
        let split = n - m + 1;
        let q1 = (split..n)
            .enumerate()
            .map(|(j, i)| m as f64 * p[i] / (j + 2) as f64)
            .fold(f64::INFINITY, f64::min);
        for i in 0..split {
            q[i] = (m as f64 * p[i]).min(q1);
        }
        for i in split..n {
            q[i] = q[split - 1];
        }
        for i in 0..n {
            pa[i] = pa[i].max(q[i]);
        }
    }
    pa.iter().zip(p).map(|(&a, &pi)| clamp(a.max(pi))).collect()
}

/// Wilcoxon signed-rank comparison of paired samples `a` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Wilcoxon {
    /// Pairs with a non-zero difference.
    pub n: usize,
    pub ties: usize,
    /// Rank sum of pairs where `a` exceeds `b`.
    pub r_plus: f64,
    pub r_minus: f64,
    pub z: f64,
    /// Two-sided p-value from the normal approximation.
    pub p_value: f64,
}

/// Zero differences are dropped and counted as ties; tied magnitudes share
/// mid-ranks and reduce the variance accordingly.
pub fn wilcoxon(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    if a.len() != b.len() {
        return Err(Error::DegenerateInput("samples differ in length".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Err(Error::DegenerateInput("all paired differences are zero".into()));
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&magnitudes);
    let r_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).fold(0.0, |acc, (_, r)| acc + r);
    let r_minus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).fold(0.0, |acc, (_, r)| acc + r);
    let mut sorted = magnitudes.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let j = sorted[i..].iter().take_while(|&&x| x == sorted[i]).count();
        tie_term += (j * j * j - j) as f64;
        i += j;
    }
    let (z, p_value) = wilcoxon_normal(n, r_plus.min(r_minus), tie_term);
    Ok(Wilcoxon {
        n,
        ties: a.len() - n,
        r_plus,
        r_minus,
        z,
        p_value,
    })
}

/// Normal approximation for a signed-rank sum `t` over `n` non-zero pairs.
/// `tie_term` is the sum of `t^3 - t` over groups of tied magnitudes.
pub fn wilcoxon_normal(n: usize, t: f64, tie_term: f64) -> (f64, f64) {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return (0.0, 1.0);
    }
    let z = (t - mean) / var.sqrt();
    (z, normal_two_sided(z))
}
