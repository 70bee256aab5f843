//! Closeness and fit measures between factor or loading spaces.

use nalgebra::DMatrix;

use crate::error::{check_shape, Error, Result};
use crate::linalg::{gram_inverse, symmetric_eigen};
use crate::prelude::*;

/// Generalized correlation between two column spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct GenCorr {
    /// Sum of squared canonical correlations, in [0, min(K₁, K₂)].
    pub total: f64,
    /// The min(K₁, K₂) canonical correlations, descending.
    pub individual: Vec<f64>,
    /// Set when an eigenvalue exceeded 1 + 1e-8 and was clipped.
    pub clipped: bool,
}

/// Inverse square root of a symmetric positive definite matrix, with the
/// same conditioning guard as [`gram_inverse`].
fn inv_sqrt(gram: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let k = gram.nrows();
    // gram_inverse performs the conditioning check and error reporting.
    gram_inverse(gram, context, "the columns are collinear")?;
    let eig = symmetric_eigen(gram, k)?;
    let mut out = DMatrix::zeros(k, k);
    for (idx, lambda) in eig.values.iter().enumerate() {
        let col = eig.vectors.column(idx);
        out += (col * col.transpose()) / lambda.sqrt();
    }
    Ok(out)
}

/// tr((AᵀA)⁻¹(AᵀB)(BᵀB)⁻¹(BᵀA)) and the square roots of the eigenvalues of
/// that product.
///
/// The product is evaluated in its symmetrized form
/// (AᵀA)^{-1/2} AᵀB (BᵀB)⁻¹ BᵀA (AᵀA)^{-1/2}, which has the same spectrum.
pub fn generalized_correlation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GenCorr> {
    check_shape("second argument rows", b.nrows(), b.ncols(), a.nrows(), b.ncols())?;
    let (k1, k2) = (a.ncols(), b.ncols());
    if k1 == 0 || k2 == 0 {
        return Err(Error::invalid("matrix", "needs at least one column"));
    }
    let a_half = inv_sqrt(&(a.transpose() * a), "generalized correlation (first argument)")?;
    let b_inv = gram_inverse(
        &(b.transpose() * b),
        "generalized correlation (second argument)",
        "the columns are collinear",
    )?;
    let cross = a.transpose() * b;
    let inner = &a_half * &cross * b_inv * cross.transpose() * &a_half;
    let sym = (&inner + inner.transpose()) * 0.5;
    let r = k1.min(k2);
    let eig = symmetric_eigen(&sym, r)?;
    let mut clipped = false;
    let individual: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| {
            if v > 1.0 + 1e-8 {
                clipped = true;
            }
            v.clamp(0.0, 1.0).sqrt()
        })
        .collect();
    if clipped {
        log::warn!("canonical correlation above 1 clipped; inputs are nearly collinear");
    }
    let total = individual.iter().map(|c| c * c).sum();
    Ok(GenCorr {
        total,
        individual,
        clipped,
    })
}

/// Generalized correlation between two N×K loading matrices.
pub fn loading_generalized_correlation(l1: &DMatrix<f64>, l2: &DMatrix<f64>) -> Result<GenCorr> {
    generalized_correlation(l1, l2)
}

/// R² of regressing each target column on all regressor columns.
///
/// With `intercept` both sides are demeaned first (equivalent to adding a
/// constant) and R² is centered; without it R² is uncentered, which is the
/// right measure for mean-zero factors.
pub fn per_factor_r2(target: &DMatrix<f64>, regressors: &DMatrix<f64>, intercept: bool) -> Result<Vec<f64>> {
    check_shape(
        "regressor rows",
        regressors.nrows(),
        regressors.ncols(),
        target.nrows(),
        regressors.ncols(),
    )?;
    let demean = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        out
    };
    let (y, z) = if intercept {
        (demean(target), demean(regressors))
    } else {
        (target.clone(), regressors.clone())
    };
    let inv = gram_inverse(&(z.transpose() * &z), "R² regressors", "the regressors are collinear")?;
    let fitted = &z * (inv * (z.transpose() * &y));
    let mut out = Vec::with_capacity(y.ncols());
    for j in 0..y.ncols() {
        let total: f64 = y.column(j).norm_squared();
        if !(total > 0.0) {
            return Err(Error::ZeroVariance {
                unit: format!("target column {j}"),
            });
        }
        let resid = (y.column(j) - fitted.column(j)).norm_squared();
        out.push(1.0 - resid / total);
    }
    Ok(out)
}

/// 1 − ‖X − X̂‖²_F / ‖X‖²_F where X̂ projects each unit's series on the
/// factor space.
pub fn variance_explained(x: &DMatrix<f64>, factors: &DMatrix<f64>) -> Result<f64> {
    check_shape(
        "factor rows",
        factors.nrows(),
        factors.ncols(),
        x.ncols(),
        factors.ncols(),
    )?;
    let total = x.norm_squared();
    if !(total > 0.0) {
        return Err(Error::invalid("panel", "is identically zero"));
    }
    let inv = gram_inverse(
        &(factors.transpose() * factors),
        "variance explained",
        "the factors are collinear",
    )?;
    let fitted = x * factors * inv * factors.transpose();
    Ok(1.0 - (x - fitted).norm_squared() / total)
}

/// sqrt(mean((X − X̂)²)).
pub fn rmse_common_component(x: &DMatrix<f64>, predicted: &DMatrix<f64>) -> Result<f64> {
    check_shape(
        "predicted common component",
        predicted.nrows(),
        predicted.ncols(),
        x.nrows(),
        x.ncols(),
    )?;
    let count = (x.nrows() * x.ncols()) as f64;
    Ok(((x - predicted).norm_squared() / count).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Eigenvalues of a 2×2 matrix (real spectrum assumed) by the quadratic
    /// formula.
    fn eig2(m: &DMatrix<f64>) -> (f64, f64) {
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 + disc, tr / 2.0 - disc)
    }

    fn inv2(m: &DMatrix<f64>) -> DMatrix<f64> {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        DMatrix::from_row_slice(
            2,
            2,
            &[m[(1, 1)] / det, -m[(0, 1)] / det, -m[(1, 0)] / det, m[(0, 0)] / det],
        )
    }

    #[test]
    fn self_correlation_is_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random(40, 3, &mut rng);
        let g = generalized_correlation(&f, &f).unwrap();
        assert_relative_eq!(g.total, 3.0, epsilon = 1e-10);
        for c in g.individual {
            assert_relative_eq!(c, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn orthogonal_columns_have_zero_correlation() {
        let a = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, -1.0]);
        assert_relative_eq!(generalized_correlation(&a, &b).unwrap().total, 0.0);
    }

    #[test]
    fn matches_two_by_two_quadratic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random(30, 2, &mut rng);
            let b = random(30, 2, &mut rng);
            let ab = a.transpose() * &b;
            let product = inv2(&(a.transpose() * &a)) * &ab * inv2(&(b.transpose() * &b)) * ab.transpose();
            let (l1, l2) = eig2(&product);
            let got = generalized_correlation(&a, &b).unwrap();
            assert_relative_eq!(got.total, l1 + l2, epsilon = 1e-12);
            assert_relative_eq!(got.individual[0], l1.sqrt(), epsilon = 1e-10);
            assert_relative_eq!(got.individual[1], l2.max(0.0).sqrt(), epsilon = 1e-7);
        }
    }

    #[test]
    fn asymmetric_widths_truncate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(25, 3, &mut rng);
        let b = random(25, 1, &mut rng);
        let ab = generalized_correlation(&a, &b).unwrap();
        let ba = generalized_correlation(&b, &a).unwrap();
        assert_eq!(ab.individual.len(), 1);
        assert_relative_eq!(ab.total, ba.total, epsilon = 1e-12);
    }

    #[test]
    fn singular_gram_errors() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            generalized_correlation(&a, &a),
            Err(Error::SingularGram { .. })
        ));
    }

    #[test]
    fn r2_extremes_and_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = random(50, 2, &mut rng);
        for v in per_factor_r2(&y, &y, false).unwrap() {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
        let a = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, -1.0]);
        assert_relative_eq!(per_factor_r2(&a, &b, false).unwrap()[0], 0.0);

        // Single regressor, no intercept: R² = (xᵀy)² / (xᵀx · yᵀy).
        let x = random(50, 1, &mut rng);
        let r2 = per_factor_r2(&y, &x, false).unwrap();
        for j in 0..2 {
            let yj = y.column(j);
            let xy = x.column(0).dot(&yj);
            let want = xy * xy / (x.column(0).norm_squared() * yj.norm_squared());
            assert_relative_eq!(r2[j], want, epsilon = 1e-12);
        }
        // With intercept: squared sample correlation.
        let r2c = per_factor_r2(&y, &x, true).unwrap();
        let (xs, ys): (Vec<f64>, Vec<f64>) = (
            x.column(0).iter().copied().collect(),
            y.column(0).iter().copied().collect(),
        );
        let mx = xs.iter().sum::<f64>() / 50.0;
        let my = ys.iter().sum::<f64>() / 50.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
        assert_relative_eq!(r2c[0], sxy * sxy / (sxx * syy), epsilon = 1e-12);
    }

    #[test]
    fn r2_rejects_zero_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(10, 1, &mut rng);
        assert!(matches!(
            per_factor_r2(&DMatrix::zeros(10, 1), &x, false),
            Err(Error::ZeroVariance { .. })
        ));
    }

    #[test]
    fn rmse_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random(4, 7, &mut rng);
        assert_eq!(rmse_common_component(&x, &x).unwrap(), 0.0);
        assert_relative_eq!(
            rmse_common_component(&x, &x.add_scalar(1.0)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let y = random(4, 7, &mut rng);
        let mut ss = 0.0;
        for i in 0..4 {
            for t in 0..7 {
                ss += (x[(i, t)] - y[(i, t)]).powi(2);
            }
        }
        assert_relative_eq!(
            rmse_common_component(&x, &y).unwrap(),
            (ss / 28.0).sqrt(),
            epsilon = 1e-14
        );
        assert!(rmse_common_component(&x, &random(4, 6, &mut rng)).is_err());
    }

    #[test]
    fn variance_explained_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(4, 9, &mut rng);
        let full = crate::factor::pca_fit(&x, 4).unwrap();
        assert_relative_eq!(variance_explained(&x, &full.factors).unwrap(), 1.0, epsilon = 1e-8);
        let x = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 0.0, 0.0]);
        let f = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 0.0]);
        assert_relative_eq!(variance_explained(&x, &f).unwrap(), 0.0);
        assert!(variance_explained(&DMatrix::zeros(1, 4), &f).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn invariant_under_column_mixing(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(30, 3, &mut rng);
            let b = random(30, 2, &mut rng);
            let mix = random(3, 3, &mut rng) + DMatrix::identity(3, 3) * 2.0;
            let base = generalized_correlation(&a, &b).unwrap();
            let mixed = generalized_correlation(&(&a * mix), &b).unwrap();
            prop_assert!((base.total - mixed.total).abs() < 1e-8);
            prop_assert!(base.total >= 0.0 && base.total <= 2.0 + 1e-12);
            let sq: f64 = base.individual.iter().map(|c| c * c).sum();
            prop_assert!((sq - base.total).abs() < 1e-10);
        }
    }
}
