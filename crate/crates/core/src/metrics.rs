//! Solution-quality metrics and convergence traces.

use crate::error::{Error, Result};

/// Relative percentage difference of `solution` from `best`, in percent.
pub fn rpd(solution: f64, best: f64) -> Result<f64> {
    if !(best > 0.0) {
        return Err(Error::InvalidBaseline(best));
    }
    Ok((solution - best) / best * 100.0)
}

/// Percentage by which `cost_a` improves on `cost_b`; positive when `a`
/// is cheaper.
pub fn pi_gap(cost_a: f64, cost_b: f64) -> Result<f64> {
    if !(cost_b > 0.0) {
        return Err(Error::InvalidBaseline(cost_b));
    }
    Ok((cost_b - cost_a) / cost_b * 100.0)
}

/// Rescales a best-so-far trace so that its first value maps to 1 and its
/// last to 0. Constant traces, and traces shorter than two, map to zeros.
pub fn normalize_trace(trace: &[f64]) -> Vec<f64> {
    let (Some(&first), Some(&last)) = (trace.first(), trace.last()) else {
        return Vec::new();
    };
    let span = first - last;
    if span == 0.0 {
        return vec![0.0; trace.len()];
    }
    trace.iter().map(|&f| (f - last) / span).collect()
}

/// Pointwise mean of normalised traces. Shorter traces are extended to the
/// longest length by repeating their last value.
pub fn average_convergence(traces: &[Vec<f64>]) -> Vec<f64> {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let mut sum = vec![0.0; len];
    let mut count = 0;
    for t in traces.iter().filter(|t| !t.is_empty()) {
        let norm = normalize_trace(t);
        let tail = *norm.last().expect("non-empty");
        for (i, s) in sum.iter_mut().enumerate() {
            *s += norm.get(i).copied().unwrap_or(tail);
        }
        count += 1;
    }
    if count > 0 {
        sum.iter_mut().for_each(|s| *s /= count as f64);
    }
    sum
}
