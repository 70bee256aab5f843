//! Limit laws G_{1,m}(τ) of the m-th largest normalized loading magnitude.

use crate::error::{Error, Result};
use crate::prelude::*;

/// e^{−τ} Σ_{l<m} τ^l/l!: the probability that a Poisson(τ) count of
/// exceedances is below m.
pub fn g1m_independent(tau: f64, m: usize) -> f64 {
    assert!(m >= 1, "m must be at least 1");
    if tau == 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for l in 1..m {
        term *= tau / l as f64;
        sum += term;
    }
    ((-tau).exp() * sum).min(1.0)
}

/// Cluster-size probabilities π(1), π(2), … of exceedance clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSizeDist {
    pi: Vec<f64>,
}

impl ClusterSizeDist {
    /// `pi[i]` is the probability of a cluster of size i + 1.
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("cluster sizes", "probabilities must be nonnegative"));
        }
        if pi.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::invalid("cluster sizes", "probabilities sum above 1"));
        }
        Ok(ClusterSizeDist { pi })
    }

    /// Unit clusters only, i.e. no clustering.
    pub fn singletons(len: usize) -> Self {
        let mut pi = vec![0.0; len.max(1)];
        pi[0] = 1.0;
        ClusterSizeDist { pi }
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// π^{*l}(i) for l, i in 1..=max, as `table[l][i]` (index 0 unused).
    pub fn convolution_powers(&self, max: usize) -> Vec<Vec<f64>> {
        let pi = |i: usize| {
            if i >= 1 && i <= self.pi.len() {
                self.pi[i - 1]
            } else {
                0.0
            }
        };
        let mut table = vec![vec![0.0; max + 1]; max + 1];
        if max == 0 {
            return table;
        }
        for i in 1..=max {
            table[1][i] = pi(i);
        }
        for l in 2..=max {
            // A sum of l cluster sizes is at least l.
            for i in l..=max {
                let mut acc = 0.0;
                for j in (l - 1)..i {
                    acc += table[l - 1][j] * pi(i - j);
                }
                table[l][i] = acc;
            }
        }
        table
    }
}

/// G_{1,m}(τ) = e^{−τ}[1 + Σ_{l=1}^{m−1} (τ^l/l!) Σ_{i=l}^{m−1} π^{*l}(i)] for
/// clustered exceedances; needs π(1..m−1).
pub fn g1m_dependent(tau: f64, m: usize, cluster: &ClusterSizeDist) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    if cluster.pi.len() < m - 1 {
        return Err(Error::invalid(
            "cluster sizes",
            format!("need π(1..{}) for m = {m}, got {} values", m - 1, cluster.pi.len()),
        ));
    }
    let powers = cluster.convolution_powers(m - 1);
    let mut sum = 1.0;
    let mut coef = 1.0;
    for l in 1..m {
        coef *= tau / l as f64;
        let mass: f64 = powers[l][l..m].iter().sum();
        sum += coef * mass;
    }
    Ok(((-tau).exp() * sum).clamp(0.0, 1.0))
}
