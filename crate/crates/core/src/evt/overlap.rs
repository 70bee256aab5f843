//! Corrections for overlapping factor supports: the σ_min(B) bootstrap and
//! the rotate-and-threshold bound.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::factor::FactorFit;
use crate::linalg::symmetric_eigen;
use crate::prelude::*;
use crate::proximate::{eligible_rows, overlap_cap};
use crate::rng::{substream, Purpose};

/// γ = c(2 + c(K − 2))·sqrt(K(K − 1)), returned with the cap on c for this
/// K. Errors when c is negative or not below the cap.
pub fn gamma_of_c(c: f64, k: usize) -> Result<(f64, f64)> {
    let cap = overlap_cap(k);
    if !(c >= 0.0 && c < cap) {
        return Err(Error::OverlapBoundTooLarge { c, cap });
    }
    let kf = k as f64;
    Ok((c * (2.0 + c * (kf - 2.0)) * (kf * (kf - 1.0)).sqrt(), cap))
}

/// Smallest singular value of a square matrix.
pub fn min_singular_value(b: &DMatrix<f64>) -> Result<f64> {
    let k = b.ncols();
    let eig = symmetric_eigen(&(b.transpose() * b), k)?;
    Ok(eig.values[k - 1].max(0.0).sqrt())
}

/// The cross-signal matrix B of a row selection: β_ll = 1 and
/// β_kl = s_k^{1/2} Σ_i v_{i,k} v_{i,l} / (s_l^{1/2} Σ_i v_{i,l}²) over the rows
/// selected for column l. `None` when a denominator vanishes.
pub fn cross_signal_matrix(v: &DMatrix<f64>, signals: &[f64], selected: &[Vec<usize>]) -> Option<DMatrix<f64>> {
    let k = v.ncols();
    let mut b = DMatrix::identity(k, k);
    for l in 0..k {
        let denom: f64 = selected[l].iter().map(|&i| v[(i, l)] * v[(i, l)]).sum();
        if !(denom > 0.0) {
            return None;
        }
        for kk in (0..k).filter(|&kk| kk != l) {
            let num: f64 = selected[l].iter().map(|&i| v[(i, kk)] * v[(i, l)]).sum();
            b[(kk, l)] = signals[kk].sqrt() * num / (signals[l].sqrt() * denom);
        }
    }
    Some(b)
}

fn top_rows(v: &DMatrix<f64>, col: usize, m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.nrows()).collect();
    idx.sort_by(|&a, &b| {
        v[(b, col)]
            .abs()
            .partial_cmp(&v[(a, col)].abs())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(m);
    idx
}

/// Bootstrap estimate of P(σ_min(B) < γ̲): resample the rows of the
/// estimated loadings, rebuild B from each column's top-m rows and count how
/// often its smallest singular value falls below γ̲.
pub fn sigma_min_b_bootstrap(fit: &FactorFit, m: usize, gamma_underbar: f64, reps: usize, seed: u64) -> Result<f64> {
    let (n, k) = fit.loadings.shape();
    if reps == 0 {
        return Err(Error::invalid("reps", "must be at least 1"));
    }
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("{m} is not in 1..={n}")));
    }
    let max_redraws = 10 * reps;
    let mut redraws = 0;
    let mut below = 0;
    for rep in 0..reps {
        let mut rng = substream(seed, rep as u64, Purpose::Bootstrap);
        loop {
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let v = DMatrix::from_fn(n, k, |i, j| fit.loadings[(rows[i], j)]);
            let selected: Vec<Vec<usize>> = (0..k).map(|l| top_rows(&v, l, m)).collect();
            match cross_signal_matrix(&v, &fit.eigenvalues, &selected) {
                Some(b) => {
                    if min_singular_value(&b)? < gamma_underbar {
                        below += 1;
                    }
                    break;
                }
                None => {
                    redraws += 1;
                    if redraws > max_redraws {
                        return Err(Error::BootstrapDegenerate { draws: redraws });
                    }
                }
            }
        }
    }
    Ok(below as f64 / reps as f64)
}

/// Fraction of Monte Carlo draws of the constrained order statistics
/// (v̄_{(m),1}, …, v̄_{(m),K}) with
/// Σ_j 1/v̄_j² < m(1 − γ)(K − ρ₀)/((1 + h)σ_e²).
pub fn rotate_threshold_bound(
    m: usize,
    k: usize,
    sigma_e: f64,
    h_m: f64,
    c: f64,
    samples: &[Vec<f64>],
    rho0: f64,
) -> Result<f64> {
    let (gamma, _) = gamma_of_c(c, k)?;
    if gamma >= 1.0 {
        return Err(Error::invalid("c", format!("γ = {gamma} >= 1 makes the bound vacuous")));
    }
    if samples.is_empty() {
        return Err(Error::invalid("samples", "need at least one draw"));
    }
    if !(rho0 >= 0.0 && rho0 < k as f64) {
        return Err(Error::invalid("rho0", format!("{rho0} is not in [0, {k})")));
    }
    let threshold = m as f64 * (1.0 - gamma) * (k as f64 - rho0) / ((1.0 + h_m) * sigma_e * sigma_e);
    let mut hits = 0;
    for draw in samples {
        if draw.len() != k || draw.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::invalid("samples", "each draw needs K finite nonzero values"));
        }
        let sum: f64 = draw.iter().map(|v| 1.0 / (v * v)).sum();
        if sum < threshold {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// Monte Carlo draws of the constrained order statistics for standard
/// normal loadings scaled by sqrt(s_j), with no rotation: per column, the
/// m-th largest |v_ij| among the rows eligible at ratio c. Draws in which
/// some column has fewer than m eligible rows are only counted, in the
/// second value.
pub fn sample_constrained_order_stats(
    n: usize,
    m: usize,
    signals: &[f64],
    c: f64,
    draws: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let k = signals.len();
    if k == 0 || signals.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("signals", "need one positive signal per factor"));
    }
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("{m} is not in 1..={n}")));
    }
    if draws == 0 {
        return Err(Error::invalid("draws", "must be at least 1"));
    }
    gamma_of_c(c, k)?;
    let mut samples = Vec::with_capacity(draws);
    let mut short = 0;
    for d in 0..draws {
        let mut rng = substream(seed, d as u64, Purpose::Other);
        let v = DMatrix::from_fn(n, k, |_, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * signals[j].sqrt()
        });
        let eligible = eligible_rows(&v, c);
        let mut draw = Vec::with_capacity(k);
        for (j, rows) in eligible.iter().enumerate() {
            if rows.len() < m {
                break;
            }
            let mut mags: Vec<f64> = rows.iter().map(|&i| v[(i, j)].abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            draw.push(mags[m - 1]);
        }
        if draw.len() == k {
            samples.push(draw);
        } else {
            short += 1;
        }
    }
    Ok((samples, short))
}
