//! Cross-sectional error dependence h(m) and the extremal index.

use crate::error::{Error, Result};
use crate::prelude::*;
use crate::special::ln_binomial;

/// Largest number of subsets the exact h(m) search will enumerate.
pub const MAX_EXACT_SUBSETS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMethod {
    Exact,
    /// Forward selection from the most correlated pair; a lower bound on the
    /// exact maximum.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HValue {
    pub value: f64,
    /// The maximizing (or greedily found) unit subset, ascending.
    pub subset: Vec<usize>,
    /// True when produced by the greedy heuristic.
    pub heuristic: bool,
}

/// h(m) = max over m-subsets S of sqrt(Σ_{k≠l ∈ S} r_kl²) for the error
/// correlations r among `n` units.
pub fn h_of_m(corr: &dyn Fn(usize, usize) -> f64, n: usize, m: usize, method: HMethod) -> Result<HValue> {
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("{m} is not in 1..={n}")));
    }
    let sq = |i: usize, j: usize| {
        let r = corr(i, j);
        r * r
    };
    if m == 1 {
        return Ok(HValue {
            value: 0.0,
            subset: vec![0],
            heuristic: method == HMethod::Greedy,
        });
    }
    match method {
        HMethod::Exact => {
            let subsets = ln_binomial(n as u64, m as u64).exp();
            if subsets > MAX_EXACT_SUBSETS * (1.0 + 1e-9) {
                return Err(Error::EnumerationTooLarge { subsets });
            }
            let mut best = (f64::NEG_INFINITY, Vec::new());
            let mut current = Vec::with_capacity(m);
            enumerate(&sq, n, m, 0, 0.0, &mut current, &mut best);
            Ok(HValue {
                value: best.0.max(0.0).sqrt(),
                subset: best.1,
                heuristic: false,
            })
        }
        HMethod::Greedy => {
            let mut pair = (0, 1, f64::NEG_INFINITY);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = sq(i, j);
                    if v > pair.2 {
                        pair = (i, j, v);
                    }
                }
            }
            let mut subset = vec![pair.0, pair.1];
            let mut total = 2.0 * pair.2;
            while subset.len() < m {
                let mut pick = (usize::MAX, f64::NEG_INFINITY);
                for cand in (0..n).filter(|c| !subset.contains(c)) {
                    let gain: f64 = subset.iter().map(|&s| 2.0 * sq(cand, s)).sum();
                    if gain > pick.1 {
                        pick = (cand, gain);
                    }
                }
                subset.push(pick.0);
                total += pick.1;
            }
            subset.sort_unstable();
            Ok(HValue {
                value: total.max(0.0).sqrt(),
                subset,
                heuristic: true,
            })
        }
    }
}

fn enumerate(
    sq: &dyn Fn(usize, usize) -> f64,
    n: usize,
    m: usize,
    start: usize,
    sum: f64,
    current: &mut Vec<usize>,
    best: &mut (f64, Vec<usize>),
) {
    if current.len() == m {
        if sum > best.0 {
            *best = (sum, current.clone());
        }
        return;
    }
    let remaining = m - current.len();
    for i in start..=(n - remaining) {
        let added: f64 = current.iter().map(|&j| 2.0 * sq(i, j)).sum();
        current.push(i);
        enumerate(sq, n, m, i + 1, sum + added, current, best);
        current.pop();
    }
}

/// Correlation base^{|i−j|}.
pub fn toeplitz_correlation(base: f64) -> impl Fn(usize, usize) -> f64 {
    move |i, j| base.powi(i.abs_diff(j) as i32)
}

/// h(m) as a function of m.
#[derive(Debug, Clone, PartialEq)]
pub enum HProfile {
    /// Uncorrelated errors: h(m) = 0.
    Independent,
    /// Perfectly correlated errors: h(m) = sqrt(m(m − 1)).
    PerfectlyDependent,
    /// Explicit values for m = 1, 2, ….
    Table(Vec<f64>),
}

impl HProfile {
    pub fn at(&self, m: usize) -> Result<f64> {
        match self {
            HProfile::Independent => Ok(0.0),
            HProfile::PerfectlyDependent => Ok(((m * m.saturating_sub(1)) as f64).sqrt()),
            HProfile::Table(values) => values
                .get(m.wrapping_sub(1))
                .copied()
                .ok_or_else(|| Error::invalid("h(m) table", format!("no entry for m = {m}"))),
        }
    }
}

/// Blocks estimator of the extremal index: the number of blocks holding an
/// exceedance of `threshold` divided by the number of exceedances.
pub fn extremal_index_blocks(series: &[f64], threshold: f64, block_length: usize) -> Result<f64> {
    if block_length == 0 {
        return Err(Error::invalid("block_length", "must be at least 1"));
    }
    let exceedances = series.iter().filter(|x| **x > threshold).count();
    if exceedances == 0 {
        return Err(Error::NoExceedances);
    }
    let blocks = series
        .chunks(block_length)
        .filter(|b| b.iter().any(|x| *x > threshold))
        .count();
    Ok((blocks as f64 / exceedances as f64).min(1.0))
}
