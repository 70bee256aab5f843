//! Principal-component estimation of the K-factor model.

use nalgebra::DMatrix;

use crate::error::{check_shape, Error, Result};
use crate::linalg::symmetric_eigen;
use crate::prelude::*;

/// Relative gap below which the K-th and (K+1)-th eigenvalues count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// The K-th and (K+1)-th eigenvalues coincide, so the estimated factor
    /// space is not unique.
    EigenvalueTie { k: usize, gap: f64 },
}

/// PCA estimates with loadings normalized to Λ̂ᵀΛ̂/N = I and factors
/// F̂ = XᵀΛ̂/N, so F̂ᵀF̂/T is the diagonal of eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorFit {
    /// T×K.
    pub factors: DMatrix<f64>,
    /// N×K.
    pub loadings: DMatrix<f64>,
    /// Top-K eigenvalues of XXᵀ/(NT), descending.
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<FitWarning>,
}

impl FactorFit {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn common_component(&self) -> DMatrix<f64> {
        &self.loadings * self.factors.transpose()
    }
}

/// Fit K principal-component factors to the N×T panel `x`.
///
/// The eigenproblem is solved on whichever of XXᵀ/(NT) and XᵀX/(NT) is
/// smaller. Each loading column is signed so its largest-magnitude entry is
/// positive.
pub fn pca_fit(x: &DMatrix<f64>, k: usize) -> Result<FactorFit> {
    let (n, t) = x.shape();
    if k == 0 || k > n.min(t) {
        return Err(Error::invalid(
            "K",
            format!("{k} is not in 1..=min(N, T) = {}", n.min(t)),
        ));
    }
    let nt = (n * t) as f64;
    let extra = usize::from(k < n.min(t));
    let (eig, unit_vectors) = if n <= t {
        let eig = symmetric_eigen(&((x * x.transpose()) / nt), k + extra)?;
        let vecs = eig.vectors.columns(0, k).into_owned();
        (eig, vecs)
    } else {
        let eig = symmetric_eigen(&((x.transpose() * x) / nt), k + extra)?;
        // u eigenvector of XᵀX ⇒ Xu eigenvector of XXᵀ with the same value.
        let mut vecs = x * eig.vectors.columns(0, k);
        for mut col in vecs.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        (eig, vecs)
    };

    let scale = eig.values[0].abs().max(f64::MIN_POSITIVE);
    for (idx, value) in eig.values.iter().take(k).enumerate() {
        if !(*value > 1e-13 * scale) || *value <= 0.0 {
            return Err(Error::NonPositiveEigenvalue {
                index: idx,
                value: *value,
            });
        }
    }
    let mut warnings = Vec::new();
    if extra == 1 {
        let gap = eig.values[k - 1] - eig.values[k];
        if gap.abs() <= TIE_TOLERANCE * scale {
            log::warn!("eigenvalues {k} and {} are tied; factor space is not identified", k + 1);
            warnings.push(FitWarning::EigenvalueTie { k, gap });
        }
    }

    let mut loadings = unit_vectors * (n as f64).sqrt();
    canonicalize_signs(&mut loadings);
    let factors = x.transpose() * &loadings / n as f64;
    Ok(FactorFit {
        factors,
        loadings,
        eigenvalues: eig.values[..k].to_vec(),
        warnings,
    })
}

/// Flip columns so that each column's largest-|entry| (first on ties) is
/// positive.
pub(crate) fn canonicalize_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Λ Fᵀ for any loadings/factors pair.
pub fn common_component(loadings: &DMatrix<f64>, factors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shape(
        "factors",
        factors.nrows(),
        factors.ncols(),
        factors.nrows(),
        loadings.ncols(),
    )?;
    Ok(loadings * factors.transpose())
}
