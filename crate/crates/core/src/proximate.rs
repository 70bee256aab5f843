//! Sparse factor weights by hard thresholding, the factors and loadings they
//! induce, varimax, rotate-and-threshold, and the data-driven choice of m.

use core::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{check_shape, Error, Result};
use crate::factor::FactorFit;
use crate::linalg::regress;
use crate::metrics::generalized_correlation;
use crate::prelude::*;

/// An N×K weight matrix whose column k is supported on `selected[k]`, with
/// unit Euclidean column norms.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    weights: DMatrix<f64>,
    selected: Vec<Vec<usize>>,
    m: usize,
}

impl SparseWeights {
    /// N×K weights.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Rows in the support of column `k`, ascending.
    pub fn selected(&self, k: usize) -> &[usize] {
        &self.selected[k]
    }

    /// Entries kept per column by the threshold.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_units(&self) -> usize {
        self.weights.nrows()
    }

    /// N×K indicator of the support.
    pub fn mask(&self) -> DMatrix<bool> {
        let mut mask = DMatrix::from_element(self.weights.nrows(), self.weights.ncols(), false);
        for (k, rows) in self.selected.iter().enumerate() {
            for &i in rows {
                mask[(i, k)] = true;
            }
        }
        mask
    }

    /// Build from dense weights, taking the support to be the nonzero
    /// entries and normalizing columns.
    fn from_dense(mut weights: DMatrix<f64>, m: usize) -> Result<Self> {
        let mut selected = Vec::with_capacity(weights.ncols());
        for (k, mut col) in weights.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !(norm > 0.0) {
                return Err(Error::ZeroColumn { column: k });
            }
            col /= norm;
            selected.push(
                col.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, _)| i)
                    .collect(),
            );
        }
        Ok(SparseWeights { weights, selected, m })
    }
}

/// Indices of the `m` largest |values|, ties broken toward the lower index,
/// returned ascending.
fn top_m(values: impl Iterator<Item = (usize, f64)>, m: usize) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = values.map(|(i, v)| (i, v.abs())).collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut rows: Vec<usize> = ranked.into_iter().take(m).map(|(i, _)| i).collect();
    rows.sort_unstable();
    rows
}

fn weights_from_selection(source: &DMatrix<f64>, selected: Vec<Vec<usize>>, m: usize) -> Result<SparseWeights> {
    let mut weights = DMatrix::zeros(source.nrows(), source.ncols());
    for (k, rows) in selected.iter().enumerate() {
        let norm = rows
            .iter()
            .map(|&i| source[(i, k)] * source[(i, k)])
            .sum::<f64>()
            .sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroColumn { column: k });
        }
        for &i in rows {
            weights[(i, k)] = source[(i, k)] / norm;
        }
    }
    Ok(SparseWeights { weights, selected, m })
}

/// Keep the `m` largest-magnitude entries of each loading column and scale
/// the result to unit norm. At the m-th place, lower row indices win ties.
pub fn hard_threshold_weights(loadings: &DMatrix<f64>, m: usize) -> Result<SparseWeights> {
    let (n, k) = loadings.shape();
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("{m} is not in 1..={n}")));
    }
    let mut selected = Vec::with_capacity(k);
    for j in 0..k {
        let col = loadings.column(j);
        if col.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroColumn { column: j });
        }
        selected.push(top_m(col.iter().copied().enumerate(), m));
    }
    weights_from_selection(loadings, selected, m)
}

const SPARSE_HINT: &str = "increase m or use the rotate-and-threshold variant";

/// Cross-sectional regression of the panel on the weights:
/// F̃ = XᵀW(WᵀW)⁻¹, T×K.
pub fn proximate_factors(x: &DMatrix<f64>, weights: &SparseWeights) -> Result<DMatrix<f64>> {
    check_shape("weights", weights.n_units(), weights.k(), x.nrows(), weights.k())?;
    Ok(regress(&weights.weights, x, "proximate factors", SPARSE_HINT)?.transpose())
}

/// Time-series regression of each unit on the proximate factors:
/// Λ̃ = XF̃(F̃ᵀF̃)⁻¹, N×K.
pub fn proximate_loadings(x: &DMatrix<f64>, factors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shape("factors", factors.nrows(), factors.ncols(), x.ncols(), factors.ncols())?;
    Ok(regress(
        factors,
        &x.transpose(),
        "proximate loadings",
        "the factors are collinear",
    )?
    .transpose())
}

/// Weights, factors and loadings of one proximate fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximateFit {
    pub weights: SparseWeights,
    /// T×K.
    pub factors: DMatrix<f64>,
    /// N×K.
    pub loadings: DMatrix<f64>,
}

impl ProximateFit {
    pub fn common_component(&self) -> DMatrix<f64> {
        &self.loadings * self.factors.transpose()
    }
}

/// Threshold the PCA loadings at `m` and run both regressions.
pub fn proximate_fit(x: &DMatrix<f64>, fit: &FactorFit, m: usize) -> Result<ProximateFit> {
    let weights = hard_threshold_weights(&fit.loadings, m)?;
    fit_with_weights(x, weights)
}

pub fn fit_with_weights(x: &DMatrix<f64>, weights: SparseWeights) -> Result<ProximateFit> {
    let factors = proximate_factors(x, &weights)?;
    let loadings = proximate_loadings(x, &factors)?;
    Ok(ProximateFit {
        weights,
        factors,
        loadings,
    })
}

/// Outcome of a varimax rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Varimax {
    /// K×K orthonormal rotation; the rotated loadings are `loadings * rotation`.
    pub rotation: DMatrix<f64>,
    pub criterion: f64,
    pub converged: bool,
    pub sweeps: usize,
}

/// Raw varimax criterion: the sum over columns of the variance of the
/// squared entries.
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let n = loadings.nrows() as f64;
    loadings
        .column_iter()
        .map(|col| {
            let sq: Vec<f64> = col.iter().map(|v| v * v).collect();
            let mean = sq.iter().sum::<f64>() / n;
            sq.iter().map(|s| s * s).sum::<f64>() / n - mean * mean
        })
        .sum()
}

const VARIMAX_MAX_SWEEPS: usize = 500;

/// Orthogonal rotation maximizing the varimax criterion, by sweeps of
/// pairwise planar rotations at Kaiser's closed-form optimal angle.
pub fn varimax_rotation(loadings: &DMatrix<f64>) -> Result<Varimax> {
    let (n, k) = loadings.shape();
    if k < 2 {
        return Err(Error::invalid("K", "varimax needs at least two factors"));
    }
    let nf = n as f64;
    let mut rotated = loadings.clone();
    let mut rotation = DMatrix::<f64>::identity(k, k);
    let mut criterion = varimax_criterion(&rotated);
    for sweep in 1..=VARIMAX_MAX_SWEEPS {
        for p in 0..k {
            for q in (p + 1)..k {
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    let (x, y) = (rotated[(i, p)], rotated[(i, q)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    a += u;
                    b += v;
                    c += u * u - v * v;
                    d += 2.0 * u * v;
                }
                let num = d - 2.0 * a * b / nf;
                let den = c - (a * a - b * b) / nf;
                let phi = num.atan2(den) / 4.0;
                if phi.abs() < 1e-15 {
                    continue;
                }
                let (s, co) = phi.sin_cos();
                for i in 0..n {
                    let (x, y) = (rotated[(i, p)], rotated[(i, q)]);
                    rotated[(i, p)] = co * x + s * y;
                    rotated[(i, q)] = -s * x + co * y;
                }
                for i in 0..k {
                    let (x, y) = (rotation[(i, p)], rotation[(i, q)]);
                    rotation[(i, p)] = co * x + s * y;
                    rotation[(i, q)] = -s * x + co * y;
                }
            }
        }
        let updated = varimax_criterion(&rotated);
        let gain = updated - criterion;
        criterion = updated;
        if gain < 1e-10 {
            return Ok(Varimax {
                rotation,
                criterion,
                converged: true,
                sweeps: sweep,
            });
        }
    }
    log::warn!("varimax did not converge in {VARIMAX_MAX_SWEEPS} sweeps; returning last iterate");
    Ok(Varimax {
        rotation,
        criterion,
        converged: false,
        sweeps: VARIMAX_MAX_SWEEPS,
    })
}

/// Largest admissible overlap ratio c for K factors; the rotate-and-threshold
/// guarantee needs c strictly below it.
pub fn overlap_cap(k: usize) -> f64 {
    match k {
        0 | 1 => f64::INFINITY,
        2 => 1.0 / (2.0 * 2.0_f64.sqrt()),
        _ => {
            let kf = k as f64;
            ((1.0 + (kf - 2.0) / (kf * (kf - 1.0)).sqrt()).sqrt() - 1.0) / (kf - 2.0)
        }
    }
}

/// Where the rotation comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum RotationChoice {
    Identity,
    /// Varimax of the matrix being thresholded.
    Varimax,
    Supplied(DMatrix<f64>),
}

/// How the rotated weights are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotateMode {
    /// Select, per column of the rotated loadings, the m largest entries
    /// among rows whose other rotated entries are all below c times this
    /// one.
    #[default]
    Constrained,
    /// Plain hard threshold, then post-multiply by Ŝ^{1/2}P and renormalize.
    ThresholdThenRotate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationSpec {
    pub choice: RotationChoice,
    /// Overlap ratio bound.
    pub c: f64,
    /// Rotate Λ̂Ŝ^{1/2} rather than Λ̂.
    pub signal_weighted: bool,
    pub mode: RotateMode,
}

impl RotationSpec {
    pub fn new(choice: RotationChoice, c: f64) -> Self {
        RotationSpec {
            choice,
            c,
            signal_weighted: true,
            mode: RotateMode::Constrained,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        let cap = overlap_cap(k);
        if !(self.c > 0.0 && self.c < cap) {
            return Err(Error::OverlapBoundTooLarge { c: self.c, cap });
        }
        if let RotationChoice::Supplied(p) = &self.choice {
            check_shape("rotation", p.nrows(), p.ncols(), k, k)?;
            let dev = (p.transpose() * p - DMatrix::<f64>::identity(k, k)).amax();
            if dev > 1e-10 {
                return Err(Error::invalid("rotation", format!("PᵀP deviates from I by {dev:e}")));
            }
        }
        Ok(())
    }
}

/// Rows i with v_ij ≠ 0 and |v_ik| < c·|v_ij| for every k ≠ j, per column j.
pub fn eligible_rows(v: &DMatrix<f64>, c: f64) -> Vec<Vec<usize>> {
    let (n, k) = v.shape();
    (0..k)
        .map(|j| {
            (0..n)
                .filter(|&i| {
                    let own = v[(i, j)].abs();
                    own > 0.0 && (0..k).all(|l| l == j || v[(i, l)].abs() < c * own)
                })
                .collect()
        })
        .collect()
}

/// Rotated weights together with the rotation that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedWeights {
    pub weights: SparseWeights,
    pub rotation: DMatrix<f64>,
}

/// Rotate-and-threshold sparse weights.
///
/// In [`RotateMode::ThresholdThenRotate`] the columns mix the K plain
/// supports, so `selected(k)` may hold up to m·K rows.
pub fn rotate_threshold_weights(fit: &FactorFit, spec: &RotationSpec, m: usize) -> Result<RotatedWeights> {
    let (n, k) = fit.loadings.shape();
    spec.validate(k)?;
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("{m} is not in 1..={n}")));
    }
    let root_s = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        k,
        fit.eigenvalues.iter().map(|s| s.sqrt()),
    ));
    let base = if spec.signal_weighted {
        &fit.loadings * &root_s
    } else {
        fit.loadings.clone()
    };
    let rotation = match &spec.choice {
        RotationChoice::Identity => DMatrix::identity(k, k),
        RotationChoice::Varimax if k >= 2 => varimax_rotation(&base)?.rotation,
        RotationChoice::Varimax => DMatrix::identity(k, k),
        RotationChoice::Supplied(p) => p.clone(),
    };

    let weights = match spec.mode {
        RotateMode::Constrained => {
            let v = &base * &rotation;
            let eligible = eligible_rows(&v, spec.c);
            let shortfall: Vec<(usize, usize)> = eligible
                .iter()
                .enumerate()
                .filter(|(_, rows)| rows.len() < m)
                .map(|(j, rows)| (j, rows.len()))
                .collect();
            if !shortfall.is_empty() {
                return Err(Error::InsufficientEligibleRows { shortfall, m });
            }
            let selected = eligible
                .iter()
                .enumerate()
                .map(|(j, rows)| top_m(rows.iter().map(|&i| (i, v[(i, j)])), m))
                .collect();
            weights_from_selection(&v, selected, m)?
        }
        RotateMode::ThresholdThenRotate => {
            let plain = hard_threshold_weights(&fit.loadings, m)?;
            let mixed = plain.weights * &root_s * &rotation;
            SparseWeights::from_dense(mixed, m)?
        }
    };
    Ok(RotatedWeights { weights, rotation })
}

/// How `choose_m_data_driven` walks the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MSearch {
    /// Every m from 1 upward until the target is met.
    #[default]
    Linear,
    /// Bisection, valid only when the profile is monotone in m.
    Bisection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MChoice {
    pub m: usize,
    /// (m, ρ/K) for every evaluated m; `None` where the weights were
    /// singular.
    pub profile: Vec<(usize, Option<f64>)>,
}

/// Average generalized correlation ρ(F̂, F̃(m))/K for one m, or `None` when the
/// proximate factors are degenerate at this m.
pub fn average_correlation_at(x: &DMatrix<f64>, fit: &FactorFit, m: usize) -> Result<Option<f64>> {
    let weights = hard_threshold_weights(&fit.loadings, m)?;
    let factors = match proximate_factors(x, &weights) {
        Ok(f) => f,
        Err(Error::SingularGram { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    match generalized_correlation(&fit.factors, &factors) {
        Ok(g) => Ok(Some(g.total / fit.k() as f64)),
        Err(Error::SingularGram { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Smallest m whose proximate factors reach average generalized correlation
/// `target` with the PCA factors of the training panel.
pub fn choose_m_data_driven(x: &DMatrix<f64>, fit: &FactorFit, target: f64, search: MSearch) -> Result<MChoice> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::invalid("target", format!("{target} is not in [0, 1]")));
    }
    let n = x.nrows();
    let meets = |value: Option<f64>| value.is_some_and(|v| v >= target - 1e-12);
    let mut profile = Vec::new();
    match search {
        MSearch::Linear => {
            for m in 1..=n {
                let value = average_correlation_at(x, fit, m)?;
                profile.push((m, value));
                if meets(value) {
                    return Ok(MChoice { m, profile });
                }
            }
        }
        MSearch::Bisection => {
            let (mut lo, mut hi) = (1, n);
            let top = average_correlation_at(x, fit, n)?;
            profile.push((n, top));
            if meets(top) {
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    let value = average_correlation_at(x, fit, mid)?;
                    profile.push((mid, value));
                    if meets(value) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                profile.sort_by_key(|(m, _)| *m);
                profile.dedup_by_key(|(m, _)| *m);
                return Ok(MChoice { m: lo, profile });
            }
        }
    }
    let best = profile.iter().filter_map(|(_, v)| *v).fold(0.0, f64::max);
    Err(Error::Unattainable {
        target,
        lo: 0.0,
        hi: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::pca_fit;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn threshold_keeps_largest_entries() {
        let l = DMatrix::from_column_slice(4, 1, &[3.0, -1.0, 0.5, 2.0]);
        let w = hard_threshold_weights(&l, 2).unwrap();
        assert_eq!(w.selected(0), &[0, 3]);
        let s = 13.0_f64.sqrt();
        assert_relative_eq!(w.weights()[(0, 0)], 3.0 / s);
        assert_relative_eq!(w.weights()[(3, 0)], 2.0 / s);
        assert_eq!(w.weights()[(1, 0)], 0.0);
    }

    #[test]
    fn full_support_normalizes() {
        let l = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 2.0]);
        let w = hard_threshold_weights(&l, 3).unwrap();
        assert_relative_eq!(w.weights(), &(l / 3.0));
    }

    #[test]
    fn single_entry_is_signed_indicator() {
        let l = DMatrix::from_column_slice(3, 1, &[0.5, -4.0, 2.0]);
        let w = hard_threshold_weights(&l, 1).unwrap();
        assert_eq!(w.weights().as_slice(), &[0.0, -1.0, 0.0]);
    }

    #[test]
    fn ties_prefer_lower_rows() {
        let l = DMatrix::from_column_slice(4, 1, &[1.0, -2.0, 1.0, 1.0]);
        let w = hard_threshold_weights(&l, 2).unwrap();
        assert_eq!(w.selected(0), &[0, 1]);
    }

    #[test]
    fn zero_column_errors() {
        let l = DMatrix::from_column_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(hard_threshold_weights(&l, 1), Err(Error::ZeroColumn { column: 1 }));
        assert!(hard_threshold_weights(&l, 3).is_err());
    }

    #[test]
    fn one_unit_factor_is_its_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(5, 8, &mut rng);
        let l = DMatrix::from_column_slice(5, 1, &[0.1, 0.2, 9.0, 0.3, 0.4]);
        let w = hard_threshold_weights(&l, 1).unwrap();
        let f = proximate_factors(&x, &w).unwrap();
        for t in 0..8 {
            assert_relative_eq!(f[(t, 0)], x[(2, t)], epsilon = 1e-12);
        }
    }

    #[test]
    fn factors_match_explicit_two_by_two_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(6, 10, &mut rng);
        let fit = pca_fit(&x, 2).unwrap();
        let w = hard_threshold_weights(&fit.loadings, 3).unwrap();
        let f = proximate_factors(&x, &w).unwrap();
        let wm = w.weights();
        let g = wm.transpose() * wm;
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let inv = DMatrix::from_row_slice(
            2,
            2,
            &[g[(1, 1)] / det, -g[(0, 1)] / det, -g[(1, 0)] / det, g[(0, 0)] / det],
        );
        let want = x.transpose() * wm * inv;
        assert_relative_eq!(f, want, epsilon = 1e-10);
    }

    #[test]
    fn pca_factors_recover_pca_loadings() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(12, 20, &mut rng);
        let fit = pca_fit(&x, 3).unwrap();
        let l = proximate_loadings(&x, &fit.factors).unwrap();
        assert_relative_eq!(l, fit.loadings, epsilon = 1e-8);
    }

    #[test]
    fn full_support_spans_pca_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(10, 15, &mut rng);
        let fit = pca_fit(&x, 2).unwrap();
        let prox = proximate_fit(&x, &fit, 10).unwrap();
        let g = generalized_correlation(&prox.factors, &fit.factors).unwrap();
        assert_relative_eq!(g.total, 2.0, epsilon = 1e-8);
    }

    /// Best angle for two columns by a dense grid and golden refinement.
    fn grid_angle(l: &DMatrix<f64>) -> f64 {
        let crit = |phi: f64| {
            let (s, c) = phi.sin_cos();
            let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            varimax_criterion(&(l * r))
        };
        let quarter = core::f64::consts::FRAC_PI_4;
        let mut best = (-quarter, f64::NEG_INFINITY);
        let steps = 20000;
        for i in 0..=steps {
            let phi = -quarter + 2.0 * quarter * i as f64 / steps as f64;
            let v = crit(phi);
            if v > best.1 {
                best = (phi, v);
            }
        }
        let (mut a, mut b) = (best.0 - 1e-4, best.0 + 1e-4);
        let g = 0.618_033_988_749_895;
        for _ in 0..100 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if crit(x1) > crit(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn varimax_two_factor_angle_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let l = random(30, 2, &mut rng);
            let vm = varimax_rotation(&l).unwrap();
            assert!(vm.converged);
            let phi = vm.rotation[(1, 0)].atan2(vm.rotation[(0, 0)]);
            let want = grid_angle(&l);
            // The criterion has period π/2 in the angle.
            let mut diff = (phi - want) % core::f64::consts::FRAC_PI_2;
            if diff > core::f64::consts::FRAC_PI_4 {
                diff -= core::f64::consts::FRAC_PI_2;
            } else if diff < -core::f64::consts::FRAC_PI_4 {
                diff += core::f64::consts::FRAC_PI_2;
            }
            assert!(diff.abs() < 1e-6, "angle {phi} vs {want}");
        }
    }

    #[test]
    fn varimax_leaves_simple_structure_alone() {
        let l = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 2.0, 0.0, 0.0, -1.0, 0.0, 3.0]);
        let vm = varimax_rotation(&l).unwrap();
        for v in vm.rotation.iter() {
            assert!(v.abs() < 1e-12 || (v.abs() - 1.0).abs() < 1e-12);
        }
        assert!(varimax_rotation(&DMatrix::from_element(3, 1, 1.0)).is_err());
    }

    #[test]
    fn cap_values() {
        assert_relative_eq!(overlap_cap(2), 0.353_553_390_593_273_8, epsilon = 1e-15);
        let k = 3.0_f64;
        assert_relative_eq!(overlap_cap(3), ((1.0 + 1.0 / (k * 2.0).sqrt()).sqrt() - 1.0));
        assert!(overlap_cap(1).is_infinite());
    }

    fn fit_from(loadings: DMatrix<f64>, eigenvalues: Vec<f64>) -> FactorFit {
        FactorFit {
            factors: DMatrix::zeros(3, loadings.ncols()),
            loadings,
            eigenvalues,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn unconstrained_rotation_equals_plain_threshold() {
        let l = DMatrix::from_row_slice(5, 2, &[3.0, 0.1, 0.2, 2.0, 1.0, 0.05, 0.01, 1.5, 2.0, 0.3]);
        let fit = fit_from(l.clone(), vec![1.0, 1.0]);
        let mut spec = RotationSpec::new(RotationChoice::Identity, 0.35);
        spec.signal_weighted = false;
        // Largest cross ratio among the top rows is 0.2/2.0 = 0.1 < 0.35.
        let rotated = rotate_threshold_weights(&fit, &spec, 2).unwrap();
        assert_eq!(rotated.weights, hard_threshold_weights(&l, 2).unwrap());
    }

    #[test]
    fn tiny_c_keeps_exclusive_rows() {
        let l = DMatrix::from_row_slice(5, 2, &[3.0, 0.0, 0.0, 2.0, 1.0, 1.0, 2.5, 0.0, 0.0, 1.5]);
        let fit = fit_from(l, vec![2.0, 1.0]);
        let spec = RotationSpec::new(RotationChoice::Identity, 1e-9);
        let rotated = rotate_threshold_weights(&fit, &spec, 2).unwrap();
        assert_eq!(rotated.weights.selected(0), &[0, 3]);
        assert_eq!(rotated.weights.selected(1), &[1, 4]);
        match rotate_threshold_weights(&fit, &spec, 3) {
            Err(Error::InsufficientEligibleRows { shortfall, .. }) => assert_eq!(shortfall, vec![(0, 2), (1, 2)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eligibility_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random(40, 2, &mut rng);
        let c = 0.3;
        let got = eligible_rows(&v, c);
        for j in 0..2 {
            let other = 1 - j;
            let want: Vec<usize> = (0..40).filter(|&i| (v[(i, other)] / v[(i, j)]).abs() < c).collect();
            assert_eq!(got[j], want);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let l = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let fit = fit_from(l, vec![1.0, 1.0]);
        let spec = RotationSpec::new(RotationChoice::Identity, 0.36);
        assert!(matches!(
            rotate_threshold_weights(&fit, &spec, 1),
            Err(Error::OverlapBoundTooLarge { .. })
        ));
    }

    #[test]
    fn threshold_then_rotate_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(20, 30, &mut rng);
        let fit = pca_fit(&x, 2).unwrap();
        let mut spec = RotationSpec::new(RotationChoice::Varimax, 0.3);
        spec.mode = RotateMode::ThresholdThenRotate;
        let rotated = rotate_threshold_weights(&fit, &spec, 4).unwrap();
        for col in rotated.weights.weights().column_iter() {
            assert_relative_eq!(col.norm(), 1.0, epsilon = 1e-12);
        }
        // Same column space as the plain weights, so the same factor space.
        let plain = proximate_factors(&x, &hard_threshold_weights(&fit.loadings, 4).unwrap()).unwrap();
        let mixed = proximate_factors(&x, &rotated.weights).unwrap();
        assert_relative_eq!(
            generalized_correlation(&plain, &mixed).unwrap().total,
            2.0,
            epsilon = 1e-8
        );
    }

    #[test]
    fn zero_target_picks_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random(15, 25, &mut rng);
        let fit = pca_fit(&x, 1).unwrap();
        assert_eq!(choose_m_data_driven(&x, &fit, 0.0, MSearch::Linear).unwrap().m, 1);
        assert!(choose_m_data_driven(&x, &fit, 1.0, MSearch::Linear).unwrap().m <= 15);
    }
}
