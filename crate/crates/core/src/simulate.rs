//! Monte Carlo engine: factor-panel generation, exceedance experiments
//! against the extreme-value bounds, and the method comparisons.
//!
//! Replicates draw from their own substreams and aggregation runs in
//! replicate order, so every table is identical under any [`Executor`].

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::evt::{BoundModel, GevSpec, MultiFactorBound, OneFactorBound};
use crate::factor::{pca_fit, FactorFit};
use crate::metrics::{generalized_correlation, loading_generalized_correlation, rmse_common_component};
use crate::panel::Panel;
use crate::prelude::*;
use crate::proximate::{hard_threshold_weights, proximate_factors, proximate_loadings};
use crate::rng::{substream, Purpose};
use crate::spca::{spca_factors, spca_fit, spca_modified_loadings};

/// Runs `f(0..n)` and returns the results in index order.
pub trait Executor {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

/// Runs replicates one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorModel {
    Iid {
        sigma: f64,
    },
    /// e_it = σ_i v_it with σ_i ~ U(lo, hi) drawn per replicate.
    Heteroskedastic {
        lo: f64,
        hi: f64,
    },
    /// e_t ~ N(0, C) with C_ij = base^|i−j|.
    Toeplitz {
        base: f64,
    },
    /// Toeplitz draws scaled per unit by σ_i ~ U(lo, hi).
    HeteroskedasticToeplitz {
        lo: f64,
        hi: f64,
        base: f64,
    },
}

impl ErrorModel {
    fn validate(&self) -> Result<()> {
        let scales_ok = |lo: f64, hi: f64| lo > 0.0 && hi > lo && hi.is_finite();
        let base_ok = |b: f64| b > -1.0 && b < 1.0;
        let ok = match *self {
            ErrorModel::Iid { sigma } => sigma > 0.0 && sigma.is_finite(),
            ErrorModel::Heteroskedastic { lo, hi } => scales_ok(lo, hi),
            ErrorModel::Toeplitz { base } => base_ok(base),
            ErrorModel::HeteroskedasticToeplitz { lo, hi, base } => scales_ok(lo, hi) && base_ok(base),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "error model",
                "scales must be positive with lo < hi and the Toeplitz base in (-1, 1)",
            ))
        }
    }

    fn toeplitz_base(&self) -> Option<f64> {
        match *self {
            ErrorModel::Toeplitz { base } | ErrorModel::HeteroskedasticToeplitz { base, .. } => Some(base),
            _ => None,
        }
    }

    fn scale_range(&self) -> Option<(f64, f64)> {
        match *self {
            ErrorModel::Heteroskedastic { lo, hi } | ErrorModel::HeteroskedasticToeplitz { lo, hi, .. } => {
                Some((lo, hi))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LoadingDist {
    StandardNormal,
    /// Loadings are `inverse_cdf(u)` for u uniform on (0, 1).
    InverseCdf(fn(f64) -> f64),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub t: usize,
    pub k: usize,
    /// Factor standard deviations; the factor covariance is diagonal.
    pub sigma_f: Vec<f64>,
    pub error_model: ErrorModel,
    pub loading_dist: LoadingDist,
    pub m: usize,
    pub rho0: f64,
    pub reps: usize,
    pub seed: u64,
}

impl SimConfig {
    /// One factor with unit-variance i.i.d. errors and normal loadings.
    pub fn one_factor(n: usize, t: usize, sigma_f: f64) -> Self {
        SimConfig {
            n,
            t,
            k: 1,
            sigma_f: vec![sigma_f],
            error_model: ErrorModel::Iid { sigma: 1.0 },
            loading_dist: LoadingDist::StandardNormal,
            m: 1,
            rho0: 0.95,
            reps: 1000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.t < 2 {
            return Err(Error::PanelTooSmall { n: self.n, t: self.t });
        }
        if self.k == 0 || self.k > self.n.min(self.t) {
            return Err(Error::invalid("K", format!("{} is not in 1..=min(N, T)", self.k)));
        }
        if self.sigma_f.len() != self.k || self.sigma_f.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("sigma_f", "need K positive factor standard deviations"));
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::invalid("m", format!("{} is not in 1..={}", self.m, self.n)));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps", "must be at least 1"));
        }
        if !self.rho0.is_finite() {
            return Err(Error::invalid("rho0", "must be finite"));
        }
        self.error_model.validate()
    }
}

/// One simulated panel together with the population factors and loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDraw {
    pub panel: Panel,
    /// T×K.
    pub factors: DMatrix<f64>,
    /// N×K.
    pub loadings: DMatrix<f64>,
}

/// Draws replicates of one configuration, with the Toeplitz Cholesky factor
/// computed once.
#[derive(Debug, Clone)]
pub struct Generator {
    config: SimConfig,
    chol: Option<DMatrix<f64>>,
}

impl Generator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let chol = match config.error_model.toeplitz_base() {
            Some(base) => {
                let n = config.n;
                let cov = DMatrix::from_fn(n, n, |i, j| base.powi(i.abs_diff(j) as i32));
                let l = nalgebra::linalg::Cholesky::new(cov).ok_or(Error::NotPositiveDefinite)?;
                Some(l.unpack())
            }
            None => None,
        };
        Ok(Generator { config, chol })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// X = ΛFᵀ + e for `replicate`; bit-identical for equal (seed, replicate).
    pub fn draw(&self, replicate: usize) -> Result<SimDraw> {
        let c = &self.config;
        let (n, t, k) = (c.n, c.t, c.k);
        let rep = replicate as u64;

        let mut rng = substream(c.seed, rep, Purpose::Loadings);
        let mut loadings = DMatrix::zeros(n, k);
        for i in 0..n {
            for j in 0..k {
                loadings[(i, j)] = match c.loading_dist {
                    LoadingDist::StandardNormal => StandardNormal.sample(&mut rng),
                    LoadingDist::InverseCdf(q) => q(Open01.sample(&mut rng)),
                };
            }
        }
        if loadings.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("loading distribution", "produced a non-finite loading"));
        }

        let mut rng = substream(c.seed, rep, Purpose::Factors);
        let mut factors = DMatrix::zeros(t, k);
        for s in 0..t {
            for j in 0..k {
                let z: f64 = StandardNormal.sample(&mut rng);
                factors[(s, j)] = c.sigma_f[j] * z;
            }
        }

        let mut rng = substream(c.seed, rep, Purpose::Errors);
        let mut errors = DMatrix::from_fn(n, t, |_, _| StandardNormal.sample(&mut rng));
        if let Some(l) = &self.chol {
            errors = l * errors;
        }
        if let ErrorModel::Iid { sigma } = c.error_model {
            errors *= sigma;
        }
        if let Some((lo, hi)) = c.error_model.scale_range() {
            let mut rng = substream(c.seed, rep, Purpose::ErrorScales);
            for i in 0..n {
                let s: f64 = rng.random_range(lo..hi);
                errors.row_mut(i).scale_mut(s);
            }
        }

        let values = &loadings * factors.transpose() + errors;
        Ok(SimDraw {
            panel: Panel::from_matrix(values)?,
            factors,
            loadings,
        })
    }
}

/// Convenience wrapper around [`Generator::draw`].
pub fn gen_factor_panel(config: &SimConfig, replicate: usize) -> Result<SimDraw> {
    Generator::new(config.clone())?.draw(replicate)
}

/// Generalized correlation between the true factors and the proximate
/// factors at each m, for one replicate.
fn proximate_correlations(draw: &SimDraw, ms: &[usize]) -> Result<Vec<f64>> {
    let x = draw.panel.values();
    let fit = pca_fit(x, draw.factors.ncols())?;
    ms.iter()
        .map(|&m| {
            let w = hard_threshold_weights(&fit.loadings, m)?;
            let f = proximate_factors(x, &w)?;
            Ok(generalized_correlation(&draw.factors, &f)?.total)
        })
        .collect()
}

/// Empirical P(ρ > ρ₀) over the valid replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exceedance {
    pub prob: f64,
    /// Binomial standard error sqrt(p(1 − p)/valid).
    pub se: f64,
    pub exceed: usize,
    pub valid: usize,
    pub failures: usize,
}

impl Exceedance {
    fn from_counts(exceed: usize, valid: usize, failures: usize) -> Self {
        let (prob, se) = if valid == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let p = exceed as f64 / valid as f64;
            (p, (p * (1.0 - p) / valid as f64).sqrt())
        };
        Exceedance {
            prob,
            se,
            exceed,
            valid,
            failures,
        }
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / (self.valid + self.failures).max(1) as f64
    }
}

/// Exceedance frequency at each m, sharing one panel and one PCA fit per
/// replicate across the m values.
pub fn exceedance_over_m<E: Executor>(config: &SimConfig, ms: &[usize], exec: &E) -> Result<Vec<Exceedance>> {
    let generator = Generator::new(config.clone())?;
    for &m in ms {
        if m == 0 || m > config.n {
            return Err(Error::invalid("m", format!("{m} is not in 1..={}", config.n)));
        }
    }
    let outcomes = exec.map(config.reps, |r| {
        generator.draw(r).and_then(|d| proximate_correlations(&d, ms))
    });
    let mut exceed = vec![0usize; ms.len()];
    let (mut valid, mut failures) = (0, 0);
    for outcome in &outcomes {
        match outcome {
            Ok(rhos) => {
                valid += 1;
                for (count, rho) in exceed.iter_mut().zip(rhos) {
                    if *rho > config.rho0 {
                        *count += 1;
                    }
                }
            }
            Err(e) => {
                log::debug!("replicate failed: {e}");
                failures += 1;
            }
        }
    }
    Ok(exceed
        .into_iter()
        .map(|e| Exceedance::from_counts(e, valid, failures))
        .collect())
}

/// Fraction of replicates with ρ(F, F̃) > ρ₀ at the configured m.
pub fn monte_carlo_exceedance(config: &SimConfig) -> Result<Exceedance> {
    Ok(exceedance_over_m(config, &[config.m], &Sequential)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// One factor, sweep over m.
    Fig1,
    /// One factor, sweep over N at m = 4.
    Fig2a,
    /// Two factors, sweep over N at m = 4.
    Fig2b,
    /// Two factors, sweep over m.
    Fig3,
    /// Two factors, sweep over N at m = 4 (same design as `Fig2b`).
    Fig4,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig1, Figure::Fig2a, Figure::Fig2b, Figure::Fig3, Figure::Fig4];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::invalid("experiment", format!("unknown figure '{name}'")))
    }

    pub fn default_grid(&self) -> FigureGrid {
        let ts = vec![50, 100, 200];
        match self {
            Figure::Fig1 => FigureGrid {
                ns: vec![100],
                ts,
                ms: (1..=10).collect(),
                sigma_fs: vec![vec![0.8], vec![1.0], vec![1.2]],
                rho0: 0.95,
                sigma_e: 1.0,
                reps: 1000,
                seed: 1,
            },
            Figure::Fig2a => FigureGrid {
                ns: vec![50, 100, 200, 400],
                ts,
                ms: vec![4],
                sigma_fs: vec![vec![1.0]],
                rho0: 0.95,
                sigma_e: 1.0,
                reps: 1000,
                seed: 1,
            },
            Figure::Fig2b | Figure::Fig4 => FigureGrid {
                ns: vec![50, 100, 200, 400],
                ts,
                ms: vec![4],
                sigma_fs: vec![vec![1.2, 1.0]],
                rho0: 1.9,
                sigma_e: 1.0,
                reps: 1000,
                seed: 1,
            },
            Figure::Fig3 => FigureGrid {
                ns: vec![100],
                ts,
                ms: (2..=10).collect(),
                sigma_fs: vec![vec![1.0, 0.8], vec![1.2, 1.0], vec![1.5, 1.2]],
                rho0: 1.9,
                sigma_e: 1.0,
                reps: 1000,
                seed: 1,
            },
        }
    }
}

/// Sweep of an exceedance experiment; every (N, T, σ_f) combination is run
/// for all m.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureGrid {
    pub ns: Vec<usize>,
    pub ts: Vec<usize>,
    pub ms: Vec<usize>,
    /// Each entry has one standard deviation per factor.
    pub sigma_fs: Vec<Vec<f64>>,
    pub rho0: f64,
    pub sigma_e: f64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub n: usize,
    pub t: usize,
    pub sigma_f: Vec<f64>,
    pub m: usize,
    pub rho0: f64,
    pub empirical: Exceedance,
    /// τ solving ρ₀(τ) = ρ₀ and the probability bound there; `None` when the
    /// threshold is out of the bound's reach.
    pub tau: Option<f64>,
    pub bound: Option<f64>,
}

/// Extreme-value bound for normal loadings and i.i.d. errors at ρ₀.
pub fn normal_loading_bound(
    n: usize,
    m: usize,
    sigma_f: &[f64],
    sigma_e: f64,
    rho0: f64,
) -> Result<Option<(f64, f64)>> {
    let model = if sigma_f.len() == 1 {
        BoundModel::OneFactor(OneFactorBound {
            n,
            m,
            spec: GevSpec::folded_normal(),
            sigma_f: sigma_f[0],
            sigma_e,
            h_m: 0.0,
            cluster: None,
        })
    } else {
        BoundModel::MultiFactor(MultiFactorBound {
            n,
            m,
            specs: vec![GevSpec::folded_normal(); sigma_f.len()],
            signals: sigma_f.iter().map(|s| s * s).collect(),
            sigma_e,
            h_m: 0.0,
            gamma_underbar: 1.0,
            correction_prob: 0.0,
            cluster: None,
        })
    };
    match model.at_rho0(rho0) {
        Ok(r) => Ok(Some((r.params.tau, r.prob_lower_bound))),
        Err(Error::Unattainable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Empirical exceedance frequencies with the bound alongside.
pub fn run_figure_experiment<E: Executor>(grid: &FigureGrid, exec: &E) -> Result<Vec<FigureRow>> {
    let mut rows = Vec::new();
    for sigma_f in &grid.sigma_fs {
        for &n in &grid.ns {
            let bounds = grid
                .ms
                .iter()
                .map(|&m| normal_loading_bound(n, m, sigma_f, grid.sigma_e, grid.rho0))
                .collect::<Result<Vec<_>>>()?;
            for &t in &grid.ts {
                let config = SimConfig {
                    n,
                    t,
                    k: sigma_f.len(),
                    sigma_f: sigma_f.clone(),
                    error_model: ErrorModel::Iid { sigma: grid.sigma_e },
                    loading_dist: LoadingDist::StandardNormal,
                    m: grid.ms.first().copied().unwrap_or(1),
                    rho0: grid.rho0,
                    reps: grid.reps,
                    seed: grid.seed,
                };
                let empirical = exceedance_over_m(&config, &grid.ms, exec)?;
                for ((&m, emp), bound) in grid.ms.iter().zip(empirical).zip(&bounds) {
                    rows.push(FigureRow {
                        n,
                        t,
                        sigma_f: sigma_f.clone(),
                        m,
                        rho0: grid.rho0,
                        empirical: emp,
                        tau: bound.map(|b| b.0),
                        bound: bound.map(|b| b.1),
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Pca,
    Ppca,
    Spca,
    SpcaModified,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pca, Method::Ppca, Method::Spca, Method::SpcaModified];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Pca => "PCA",
            Method::Ppca => "PPCA",
            Method::Spca => "SPCA",
            Method::SpcaModified => "SPCA-mod",
        }
    }
}

/// Fit quality of one method on one replicate. Correlations are divided by
/// K so they lie in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MethodScores {
    pub factor_corr_in: f64,
    pub factor_corr_out: f64,
    pub loading_corr_in: f64,
    pub loading_corr_out: f64,
    pub rmse_in: f64,
    pub rmse_out: f64,
}

impl MethodScores {
    fn add(&mut self, o: &MethodScores) {
        self.factor_corr_in += o.factor_corr_in;
        self.factor_corr_out += o.factor_corr_out;
        self.loading_corr_in += o.loading_corr_in;
        self.loading_corr_out += o.loading_corr_out;
        self.rmse_in += o.rmse_in;
        self.rmse_out += o.rmse_out;
    }

    fn scale(&mut self, s: f64) {
        self.factor_corr_in *= s;
        self.factor_corr_out *= s;
        self.loading_corr_in *= s;
        self.loading_corr_out *= s;
        self.rmse_in *= s;
        self.rmse_out *= s;
    }
}

/// Comparison of PCA, proximate PCA and both sparse-PCA variants.
#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    /// `t` is the length of each half; 2T periods are drawn and split into
    /// a training and a test half.
    pub sim: SimConfig,
    /// Penalties as multiples of ŝ_jT, where ŝ_j is the j-th PCA
    /// eigenvalue; every column is then soft-thresholded at half the scale.
    pub alpha_scales: Vec<f64>,
}

impl ComparisonConfig {
    /// N = T = 100, K = 5, unit factor variances, U(0.5, 1.5) scales on
    /// Toeplitz(0.5) errors.
    pub fn heteroskedastic_toeplitz(n: usize, t: usize, reps: usize, seed: u64) -> Self {
        ComparisonConfig {
            sim: SimConfig {
                n,
                t,
                k: 5,
                sigma_f: vec![1.0; 5],
                error_model: ErrorModel::HeteroskedasticToeplitz {
                    lo: 0.5,
                    hi: 1.5,
                    base: 0.5,
                },
                loading_dist: LoadingDist::StandardNormal,
                m: 5,
                rho0: 0.0,
                reps,
                seed,
            },
            alpha_scales: vec![0.5, 1.0, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub alpha_scale: f64,
    pub method: Method,
    /// Mean number of units per factor (the matched m for PPCA).
    pub mean_m: f64,
    pub scores: MethodScores,
    pub valid: usize,
    pub failures: usize,
}

struct Estimate {
    factors_in: DMatrix<f64>,
    loadings_in: DMatrix<f64>,
    factors_out: DMatrix<f64>,
    loadings_out: DMatrix<f64>,
}

struct Truth<'a> {
    train: &'a DMatrix<f64>,
    test: &'a DMatrix<f64>,
    f_train: DMatrix<f64>,
    f_test: DMatrix<f64>,
    loadings: &'a DMatrix<f64>,
}

impl Estimate {
    fn score(&self, truth: &Truth<'_>) -> Result<MethodScores> {
        let k = truth.loadings.ncols() as f64;
        Ok(MethodScores {
            factor_corr_in: generalized_correlation(&truth.f_train, &self.factors_in)?.total / k,
            factor_corr_out: generalized_correlation(&truth.f_test, &self.factors_out)?.total / k,
            loading_corr_in: loading_generalized_correlation(truth.loadings, &self.loadings_in)?.total / k,
            loading_corr_out: loading_generalized_correlation(truth.loadings, &self.loadings_out)?.total / k,
            rmse_in: rmse_common_component(truth.train, &(&self.loadings_in * self.factors_in.transpose()))?,
            rmse_out: rmse_common_component(truth.test, &(&self.loadings_out * self.factors_out.transpose()))?,
        })
    }
}

/// Per-α scores in `Method::ALL` order plus the matched m.
type ReplicateScores = Vec<Result<(f64, [MethodScores; 4])>>;

fn comparison_replicate(draw: &SimDraw, t: usize, alpha_scales: &[f64]) -> Result<ReplicateScores> {
    let x = draw.panel.values();
    let train = x.columns(0, t).into_owned();
    let test = x.columns(t, t).into_owned();
    let truth = Truth {
        train: &train,
        test: &test,
        f_train: draw.factors.rows(0, t).into_owned(),
        f_test: draw.factors.rows(t, t).into_owned(),
        loadings: &draw.loadings,
    };
    let k = draw.loadings.ncols();
    let fit = pca_fit(&train, k)?;

    // Out of sample, PCA uses the training loadings as factor weights, like
    // the sparse methods use their training weights.
    let pca_out = spca_factors(&test, &fit.loadings)?;
    let pca = Estimate {
        factors_in: fit.factors.clone(),
        loadings_in: fit.loadings.clone(),
        loadings_out: proximate_loadings(&test, &pca_out)?,
        factors_out: pca_out,
    }
    .score(&truth)?;

    Ok(alpha_scales
        .iter()
        .map(|&scale| {
            let alphas: Vec<f64> = fit.eigenvalues.iter().map(|s| scale * s * t as f64).collect();
            sparse_scores(&fit, &truth, &alphas).map(|(m, s)| (m, [pca, s[0], s[1], s[2]]))
        })
        .collect())
}

/// PPCA, SPCA and SPCA-mod at one penalty, with PPCA matched to SPCA's
/// total nonzero count.
fn sparse_scores(fit: &FactorFit, truth: &Truth<'_>, alphas: &[f64]) -> Result<(f64, [MethodScores; 3])> {
    let (train, test) = (truth.train, truth.test);
    let (n, k) = fit.loadings.shape();
    let spca = spca_fit(train, fit, alphas)?;
    let m = ((spca.total_nnz() as f64 / k as f64).round() as usize).clamp(1, n);

    let w = hard_threshold_weights(&fit.loadings, m)?;
    let f_in = proximate_factors(train, &w)?;
    let f_out = proximate_factors(test, &w)?;
    let ppca = Estimate {
        loadings_in: proximate_loadings(train, &f_in)?,
        loadings_out: proximate_loadings(test, &f_out)?,
        factors_in: f_in,
        factors_out: f_out,
    };

    let spca_out = spca_factors(test, &spca.sparse_loadings)?;
    let sparse = Estimate {
        factors_in: spca.factors.clone(),
        loadings_in: spca.sparse_loadings.clone(),
        factors_out: spca_out.clone(),
        loadings_out: spca.sparse_loadings.clone(),
    };
    let modified = Estimate {
        loadings_in: spca_modified_loadings(train, &spca.factors)?,
        loadings_out: spca_modified_loadings(test, &spca_out)?,
        factors_in: spca.factors,
        factors_out: spca_out,
    };
    Ok((
        m as f64,
        [ppca.score(truth)?, sparse.score(truth)?, modified.score(truth)?],
    ))
}

/// In- and out-of-sample comparison averaged over replicates, one row per
/// (α, method).
pub fn run_comparison_experiment<E: Executor>(config: &ComparisonConfig, exec: &E) -> Result<Vec<ComparisonRow>> {
    let t = config.sim.t;
    if config.alpha_scales.is_empty() || config.alpha_scales.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::invalid("alpha grid", "need at least one nonnegative penalty"));
    }
    let mut sim = config.sim.clone();
    sim.t = 2 * t;
    let generator = Generator::new(sim)?;
    let outcomes = exec.map(config.sim.reps, |r| {
        generator
            .draw(r)
            .and_then(|d| comparison_replicate(&d, t, &config.alpha_scales))
    });

    let mut rows = Vec::new();
    for (a, &scale) in config.alpha_scales.iter().enumerate() {
        let mut sums = [MethodScores::default(); 4];
        let (mut m_sum, mut valid, mut failures) = (0.0, 0, 0);
        for outcome in &outcomes {
            match outcome.as_ref().map(|per_alpha| &per_alpha[a]) {
                Ok(Ok((m, scores))) => {
                    valid += 1;
                    m_sum += m;
                    for (s, o) in sums.iter_mut().zip(scores) {
                        s.add(o);
                    }
                }
                _ => failures += 1,
            }
        }
        for (method, mut s) in Method::ALL.into_iter().zip(sums) {
            s.scale(1.0 / valid.max(1) as f64);
            let mean_m = m_sum / valid.max(1) as f64;
            rows.push(ComparisonRow {
                alpha_scale: scale,
                method,
                mean_m: if method == Method::Pca {
                    config.sim.n as f64
                } else {
                    mean_m
                },
                scores: s,
                valid,
                failures,
            });
        }
    }
    Ok(rows)
}

/// Per-penalty summary of Δρ = ρ(F, F̃) − ρ(F, F̄) with matched counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRhoRow {
    /// Penalty as a multiple of ŝT, where ŝ is the first PCA eigenvalue.
    pub alpha_scale: f64,
    pub mean_m: f64,
    /// Replicates where PPCA's generalized correlation is at least SPCA's.
    pub ppca_at_least: usize,
    pub valid: usize,
    pub failures: usize,
    pub mean_delta: f64,
}

impl DeltaRhoRow {
    pub fn fraction(&self) -> f64 {
        self.ppca_at_least as f64 / self.valid.max(1) as f64
    }
}

fn delta_rho_replicate(draw: &SimDraw, alpha_scales: &[f64]) -> Result<Vec<Result<(usize, f64)>>> {
    let x = draw.panel.values();
    let k = draw.factors.ncols();
    let fit = pca_fit(x, k)?;
    let t = x.ncols() as f64;
    Ok(alpha_scales
        .iter()
        .map(|&scale| {
            let alphas: Vec<f64> = fit.eigenvalues.iter().map(|s| scale * s * t).collect();
            let spca = spca_fit(x, &fit, &alphas)?;
            let m = ((spca.total_nnz() as f64 / k as f64).round() as usize).max(1);
            let w = hard_threshold_weights(&fit.loadings, m)?;
            let ppca = generalized_correlation(&draw.factors, &proximate_factors(x, &w)?)?.total;
            let sparse = generalized_correlation(&draw.factors, &spca.factors)?.total;
            Ok((m, ppca - sparse))
        })
        .collect())
}

/// Δρ across replicates of `config` for penalties `alpha_scales`·ŝT.
pub fn run_delta_rho_experiment<E: Executor>(
    config: &SimConfig,
    alpha_scales: &[f64],
    exec: &E,
) -> Result<Vec<DeltaRhoRow>> {
    let generator = Generator::new(config.clone())?;
    let outcomes = exec.map(config.reps, |r| {
        generator.draw(r).and_then(|d| delta_rho_replicate(&d, alpha_scales))
    });
    Ok(alpha_scales
        .iter()
        .enumerate()
        .map(|(a, &alpha_scale)| {
            let (mut at_least, mut valid, mut failures) = (0, 0, 0);
            let (mut m_sum, mut delta_sum) = (0.0, 0.0);
            for outcome in &outcomes {
                match outcome.as_ref().map(|v| &v[a]) {
                    Ok(Ok((m, delta))) => {
                        valid += 1;
                        m_sum += *m as f64;
                        delta_sum += delta;
                        if *delta >= 0.0 {
                            at_least += 1;
                        }
                    }
                    _ => failures += 1,
                }
            }
            let denom = valid.max(1) as f64;
            DeltaRhoRow {
                alpha_scale,
                mean_m: m_sum / denom,
                ppca_at_least: at_least,
                valid,
                failures,
                mean_delta: delta_sum / denom,
            }
        })
        .collect())
}

/// Mean ρ(Λ̃, Λ)/K of the proximate loadings at one panel size.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingConsistencyRow {
    pub n: usize,
    pub t: usize,
    pub m: usize,
    pub mean_corr: f64,
    pub se: f64,
    pub valid: usize,
    pub failures: usize,
}

/// Loading-space closeness of the proximate loadings as (N, T) grow, with
/// the other settings of `config` held fixed.
pub fn run_loading_consistency<E: Executor>(
    config: &SimConfig,
    sizes: &[(usize, usize)],
    m: usize,
    exec: &E,
) -> Result<Vec<LoadingConsistencyRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &(n, t) in sizes {
        let mut sim = config.clone();
        sim.n = n;
        sim.t = t;
        sim.m = m;
        let generator = Generator::new(sim)?;
        let k = config.k as f64;
        let outcomes = exec.map(config.reps, |r| -> Result<f64> {
            let draw = generator.draw(r)?;
            let x = draw.panel.values();
            let fit = pca_fit(x, config.k)?;
            let w = hard_threshold_weights(&fit.loadings, m)?;
            let loadings = proximate_loadings(x, &proximate_factors(x, &w)?)?;
            Ok(loading_generalized_correlation(&draw.loadings, &loadings)?.total / k)
        });
        let values: Vec<f64> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
        let valid = values.len();
        let mean = values.iter().sum::<f64>() / valid.max(1) as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (valid.max(2) - 1) as f64;
        rows.push(LoadingConsistencyRow {
            n,
            t,
            m,
            mean_corr: mean,
            se: (var / valid.max(1) as f64).sqrt(),
            valid,
            failures: outcomes.len() - valid,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_replicate_is_bit_identical() {
        let mut c = SimConfig::one_factor(20, 30, 1.0);
        c.error_model = ErrorModel::HeteroskedasticToeplitz {
            lo: 0.5,
            hi: 1.5,
            base: 0.5,
        };
        let a = gen_factor_panel(&c, 3).unwrap();
        let b = gen_factor_panel(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_factor_panel(&c, 4).unwrap());
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = SimConfig::one_factor(20, 30, 1.0);
        let mut c = base.clone();
        c.reps = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.error_model = ErrorModel::Toeplitz { base: 1.0 };
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.sigma_f = vec![0.0];
        assert!(c.validate().is_err());
        let mut c = base;
        c.error_model = ErrorModel::Heteroskedastic { lo: 1.5, hi: 0.5 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn trivial_thresholds() {
        let mut c = SimConfig::one_factor(30, 40, 1.0);
        c.reps = 20;
        c.m = 5;
        c.rho0 = 0.0;
        assert_eq!(monte_carlo_exceedance(&c).unwrap().prob, 1.0);
        c.rho0 = 1.0;
        assert_eq!(monte_carlo_exceedance(&c).unwrap().prob, 0.0);
    }

    #[test]
    fn figure_names_round_trip() {
        for f in Figure::ALL {
            assert_eq!(Figure::from_name(f.name()).unwrap(), f);
        }
        assert!(Figure::from_name("fig9").is_err());
    }
}
