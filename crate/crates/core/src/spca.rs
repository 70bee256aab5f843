//! ℓ₁-penalized sparse loadings given PCA factors, and the factors and
//! second-stage loadings built from them.

use nalgebra::DMatrix;

use crate::error::{check_shape, Error, Result};
use crate::factor::FactorFit;
use crate::linalg::regress;
use crate::prelude::*;
use crate::proximate::proximate_loadings;

const MAX_SWEEPS: usize = 10_000;

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Row-separable lasso min_λ ‖x_i − Fλ‖² + Σ_j α_j|λ_j| for every unit,
/// with XF and FᵀF precomputed.
struct Lasso {
    /// N×K, row i is Fᵀx_i.
    xf: DMatrix<f64>,
    gram: DMatrix<f64>,
    diagonal: bool,
}

impl Lasso {
    fn new(x: &DMatrix<f64>, factors: &DMatrix<f64>) -> Result<Self> {
        check_shape("factors", factors.nrows(), factors.ncols(), x.ncols(), factors.ncols())?;
        let gram = factors.transpose() * factors;
        let k = gram.nrows();
        for j in 0..k {
            if !(gram[(j, j)] > 0.0) {
                return Err(Error::ZeroColumn { column: j });
            }
        }
        let diagonal =
            (0..k).all(|i| (0..k).all(|j| i == j || gram[(i, j)].abs() <= 1e-8 * (gram[(i, i)] * gram[(j, j)]).sqrt()));
        Ok(Lasso {
            xf: x * factors,
            gram,
            diagonal,
        })
    }

    fn solve(&self, alphas: &[f64]) -> DMatrix<f64> {
        let (n, k) = self.xf.shape();
        let mut out = DMatrix::zeros(n, k);
        if self.diagonal {
            // Setting the subgradient of ‖x − Fλ‖² + α|λ_j| to zero with FᵀF
            // diagonal gives 2G_jj(λ_j − λ̂_j) + α·sign(λ_j) = 0, where
            // λ̂_j = (Fᵀx)_j/G_jj is the least-squares loading; its solution
            // is λ̂_j soft-thresholded at α/(2G_jj).
            for j in 0..k {
                let g = self.gram[(j, j)];
                for i in 0..n {
                    out[(i, j)] = soft_threshold(self.xf[(i, j)] / g, alphas[j] / (2.0 * g));
                }
            }
            return out;
        }
        for i in 0..n {
            let mut lambda = vec![0.0; k];
            let mut previous = f64::INFINITY;
            for _ in 0..MAX_SWEEPS {
                for j in 0..k {
                    let partial: f64 = (0..k).filter(|&l| l != j).map(|l| self.gram[(j, l)] * lambda[l]).sum();
                    let z = self.xf[(i, j)] - partial;
                    lambda[j] = soft_threshold(z, alphas[j] / 2.0) / self.gram[(j, j)];
                }
                // Objective up to the constant ‖x_i‖².
                let mut obj = 0.0;
                for j in 0..k {
                    obj += -2.0 * self.xf[(i, j)] * lambda[j] + alphas[j] * lambda[j].abs();
                    for l in 0..k {
                        obj += lambda[j] * self.gram[(j, l)] * lambda[l];
                    }
                }
                if previous - obj <= 1e-10 * (1.0 + obj.abs()) {
                    break;
                }
                previous = obj;
            }
            for j in 0..k {
                out[(i, j)] = lambda[j];
            }
        }
        out
    }
}

/// Sparse loadings minimizing ‖X − ΛFᵀ‖²_F + α‖Λ‖₁ for fixed factors.
///
/// With orthogonal factor columns this is elementwise soft thresholding of
/// the least-squares loadings; otherwise cyclic coordinate descent per unit.
pub fn spca_lasso_loadings(x: &DMatrix<f64>, factors: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    spca_lasso_loadings_per_column(x, factors, &vec![alpha; factors.ncols()])
}

/// As [`spca_lasso_loadings`] with a separate penalty per factor.
pub fn spca_lasso_loadings_per_column(
    x: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    alphas: &[f64],
) -> Result<DMatrix<f64>> {
    if alphas.len() != factors.ncols() || alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::invalid("alpha", "need one nonnegative penalty per factor"));
    }
    Ok(Lasso::new(x, factors)?.solve(alphas))
}

/// F̄ = XᵀΛ̄(Λ̄ᵀΛ̄)⁻¹.
pub fn spca_factors(x: &DMatrix<f64>, sparse_loadings: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shape(
        "sparse loadings",
        sparse_loadings.nrows(),
        sparse_loadings.ncols(),
        x.nrows(),
        sparse_loadings.ncols(),
    )?;
    for (j, col) in sparse_loadings.column_iter().enumerate() {
        if col.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroColumn { column: j });
        }
    }
    Ok(regress(sparse_loadings, x, "sparse PCA factors", "lower the penalty")?.transpose())
}

/// Second-stage dense loadings from the sparse-PCA factors.
pub fn spca_modified_loadings(x: &DMatrix<f64>, spca_factors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    proximate_loadings(x, spca_factors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpcaFit {
    /// N×K.
    pub sparse_loadings: DMatrix<f64>,
    /// T×K.
    pub factors: DMatrix<f64>,
    pub alphas: Vec<f64>,
    pub nnz_per_column: Vec<usize>,
}

impl SpcaFit {
    pub fn total_nnz(&self) -> usize {
        self.nnz_per_column.iter().sum()
    }
}

fn nnz_per_column(l: &DMatrix<f64>) -> Vec<usize> {
    l.column_iter()
        .map(|c| c.iter().filter(|v| **v != 0.0).count())
        .collect()
}

/// Sparse loadings and factors at the given per-factor penalties.
pub fn spca_fit(x: &DMatrix<f64>, fit: &FactorFit, alphas: &[f64]) -> Result<SpcaFit> {
    let sparse_loadings = spca_lasso_loadings_per_column(x, &fit.factors, alphas)?;
    let factors = spca_factors(x, &sparse_loadings).map_err(|e| match e {
        Error::ZeroColumn { column } => Error::SparseColumnEliminated {
            column,
            alpha: alphas[column],
        },
        other => other,
    })?;
    Ok(SpcaFit {
        nnz_per_column: nnz_per_column(&sparse_loadings),
        sparse_loadings,
        factors,
        alphas: alphas.to_vec(),
    })
}

/// Penalty whose sparse loadings have the requested number of nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatch {
    /// One penalty shared by all factors, or one per factor.
    pub alphas: Vec<f64>,
    pub nnz_per_column: Vec<usize>,
    /// False when the count jumps over the target; the returned penalty then
    /// gives the nearest count below it.
    pub exact: bool,
}

/// Largest α with count(α) = target, or the smallest α whose count falls
/// below it when no α hits the target exactly.
fn bisect_count(count: &dyn Fn(f64) -> usize, target: usize, upper: f64) -> (f64, bool) {
    let (mut lo, mut hi) = (0.0, upper);
    if count(lo) < target {
        return (lo, false);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if count(lo) == target {
        (lo, true)
    } else {
        (hi, false)
    }
}

/// Penalty giving m·K nonzero sparse loadings in total (or m per column with
/// `per_column`), found by bisection on the nonincreasing count map.
pub fn match_alpha_to_m(x: &DMatrix<f64>, fit: &FactorFit, m: usize, per_column: bool) -> Result<AlphaMatch> {
    let (n, k) = fit.loadings.shape();
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("{m} is not in 1..={n}")));
    }
    let lasso = Lasso::new(x, &fit.factors)?;
    // Above 2·max_j G_jj·max|λ̂| every loading is zero; with a non-diagonal
    // Gram use the coordinate-descent bound 2·max|Fᵀx|.
    let upper = 2.0 * lasso.xf.amax() * (1.0 + lasso.gram.amax()) + 1.0;
    let mut exact = true;
    let alphas = if per_column {
        let mut alphas = vec![0.0; k];
        for j in 0..k {
            let count = |a: f64| {
                let mut trial = vec![0.0; k];
                trial[j] = a;
                nnz_per_column(&lasso.solve(&trial))[j]
            };
            let (a, hit) = bisect_count(&count, m, upper);
            exact &= hit;
            alphas[j] = a;
        }
        alphas
    } else {
        let count = |a: f64| nnz_per_column(&lasso.solve(&vec![a; k])).iter().sum();
        let (a, hit) = bisect_count(&count, m * k, upper);
        exact = hit;
        vec![a; k]
    };
    if !exact {
        log::warn!("no penalty gives exactly the requested nonzero count; using the nearest count below");
    }
    Ok(AlphaMatch {
        nnz_per_column: nnz_per_column(&lasso.solve(&alphas)),
        alphas,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::pca_fit;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_penalty_gives_least_squares() {
        let x = random(10, 30, 1);
        let fit = pca_fit(&x, 2).unwrap();
        let l = spca_lasso_loadings(&x, &fit.factors, 0.0).unwrap();
        // Normal equations: (FᵀF)⁻¹Fᵀx_i for each unit.
        let ff = fit.factors.transpose() * &fit.factors;
        let ols = (ff.try_inverse().unwrap() * fit.factors.transpose() * x.transpose()).transpose();
        assert_relative_eq!(l, ols, epsilon = 1e-10);
        assert_relative_eq!(l, fit.loadings, epsilon = 1e-8);
    }

    #[test]
    fn single_element_arithmetic() {
        // One unit, one factor with FᵀF = 10 and least-squares loading 2.
        let f = DMatrix::from_column_slice(10, 1, &[1.0; 10]);
        let x = DMatrix::from_row_slice(1, 10, &[2.0; 10]);
        let l = spca_lasso_loadings(&x, &f, 10.0).unwrap();
        assert_relative_eq!(l[(0, 0)], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn large_penalty_zeroes_everything() {
        let x = random(8, 20, 2);
        let fit = pca_fit(&x, 2).unwrap();
        let gmax = (0..2).map(|j| fit.eigenvalues[j] * 20.0).fold(0.0, f64::max);
        let alpha = 2.0 * gmax * fit.loadings.amax() * 1.0001;
        assert!(spca_lasso_loadings(&x, &fit.factors, alpha)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        assert!(matches!(
            spca_fit(&x, &fit, &[alpha, alpha]),
            Err(Error::SparseColumnEliminated { column: 0, .. })
        ));
    }

    #[test]
    fn shrinkage_and_monotone_count() {
        let x = random(15, 25, 3);
        let fit = pca_fit(&x, 3).unwrap();
        let mut last = usize::MAX;
        for i in 0..30 {
            let alpha = 0.2 * i as f64;
            let l = spca_lasso_loadings(&x, &fit.factors, alpha).unwrap();
            for (a, b) in l.iter().zip(fit.loadings.iter()) {
                assert!(a.abs() <= b.abs() + 1e-12);
                if alpha > 0.0 {
                    assert!(a.abs() < b.abs());
                }
            }
            let count = l.iter().filter(|v| **v != 0.0).count();
            assert!(count <= last);
            last = count;
        }
    }

    #[test]
    fn coordinate_descent_agrees_with_subgradient_conditions() {
        let x = random(6, 40, 4);
        let f = random(40, 2, 5);
        let alpha = 1.5;
        let l = spca_lasso_loadings(&x, &f, alpha).unwrap();
        let g = f.transpose() * &f;
        let xf = &x * &f;
        for i in 0..6 {
            for j in 0..2 {
                let grad = 2.0 * ((g.row(j) * l.row(i).transpose())[(0, 0)] - xf[(i, j)]);
                if l[(i, j)] != 0.0 {
                    assert!((grad + alpha * l[(i, j)].signum()).abs() < 1e-6);
                } else {
                    assert!(grad.abs() <= alpha + 1e-6);
                }
            }
        }
    }

    #[test]
    fn pca_loadings_give_pca_factors() {
        let x = random(9, 14, 6);
        let fit = pca_fit(&x, 2).unwrap();
        let f = spca_factors(&x, &fit.loadings).unwrap();
        assert_relative_eq!(f, fit.factors, epsilon = 1e-10);
    }

    #[test]
    fn single_loading_scales_series() {
        let x = random(4, 7, 7);
        let mut l = DMatrix::zeros(4, 1);
        l[(2, 0)] = 0.5;
        let f = spca_factors(&x, &l).unwrap();
        for t in 0..7 {
            assert_relative_eq!(f[(t, 0)], x[(2, t)] / 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn matched_alpha_hits_count() {
        let x = random(30, 40, 8);
        let fit = pca_fit(&x, 2).unwrap();
        for m in [1, 5, 12, 30] {
            let matched = match_alpha_to_m(&x, &fit, m, false).unwrap();
            assert!(matched.exact);
            assert_eq!(matched.nnz_per_column.iter().sum::<usize>(), 2 * m);
            // Exhaustive scan: no larger α on a fine grid keeps the count.
            let lasso_count = |a: f64| {
                spca_lasso_loadings(&x, &fit.factors, a)
                    .unwrap()
                    .iter()
                    .filter(|v| **v != 0.0)
                    .count()
            };
            assert_eq!(lasso_count(matched.alphas[0]), 2 * m);
            assert!(lasso_count(matched.alphas[0] * (1.0 + 1e-9) + 1e-12) < 2 * m);
        }
        let per = match_alpha_to_m(&x, &fit, 7, true).unwrap();
        assert_eq!(per.nnz_per_column, vec![7, 7]);
        assert!(match_alpha_to_m(&x, &fit, 0, false).is_err());
    }
}
