//! Data generation and experiment tables.

use proximate_core::evt::sample_constrained_order_stats;
use proximate_core::proximate::overlap_cap;
use proximate_core::simulate::{
    gen_factor_panel, monte_carlo_exceedance, run_comparison_experiment, run_figure_experiment, ComparisonConfig,
    ErrorModel, Figure, Method, Sequential, SimConfig,
};
use proximate_core::{generalized_correlation, pca_fit};

#[test]
fn toeplitz_errors_have_toeplitz_covariance() {
    let mut config = SimConfig::one_factor(3, 1_000_000, 1.0);
    config.error_model = ErrorModel::Toeplitz { base: 0.5 };
    let draw = gen_factor_panel(&config, 0).unwrap();
    let errors = draw.panel.values() - &draw.loadings * draw.factors.transpose();
    let cov = &errors * errors.transpose() / 1_000_000.0;
    for i in 0..3 {
        for j in 0..3 {
            let expected = 0.5f64.powi((i as i32 - j as i32).abs());
            assert!((cov[(i, j)] - expected).abs() < 1e-2, "cov[{i},{j}] = {}", cov[(i, j)]);
        }
    }
}

#[test]
fn noiseless_panel_recovers_factor_space() {
    let mut config = SimConfig::one_factor(40, 60, 1.0);
    config.k = 3;
    config.sigma_f = vec![1.0, 1.0, 1.0];
    config.m = 3;
    config.error_model = ErrorModel::Iid { sigma: 1e-12 };
    let draw = gen_factor_panel(&config, 0).unwrap();
    let fit = pca_fit(draw.panel.values(), 3).unwrap();
    let gc = generalized_correlation(&fit.factors, &draw.factors).unwrap();
    assert!((gc.total - 3.0).abs() < 1e-6, "{}", gc.total);
}

#[test]
fn exceedance_extremes() {
    let mut config = SimConfig::one_factor(50, 50, 1.0);
    config.reps = 20;
    config.m = 3;
    config.rho0 = 0.0;
    assert_eq!(monte_carlo_exceedance(&config).unwrap().prob, 1.0);
    config.rho0 = 1.0;
    assert_eq!(monte_carlo_exceedance(&config).unwrap().prob, 0.0);
}

#[test]
fn fig1_smoke_is_monotone_in_m() {
    let mut grid = Figure::Fig1.default_grid();
    grid.reps = 50;
    grid.ts = vec![100];
    let rows = run_figure_experiment(&grid, &Sequential).unwrap();
    let ms = grid.ms.clone();
    let avg: Vec<f64> = ms
        .iter()
        .map(|&m| {
            let at: Vec<f64> = rows.iter().filter(|r| r.m == m).map(|r| r.empirical.prob).collect();
            at.iter().sum::<f64>() / at.len() as f64
        })
        .collect();
    // Averages over the σ_f designs, with one replicate of slack per step.
    for w in avg.windows(2) {
        assert!(w[1] >= w[0] - 1.0 / 50.0, "{avg:?}");
    }
}

#[test]
fn fig4_design_columns() {
    let mut grid = Figure::Fig4.default_grid();
    grid.reps = 5;
    grid.ts = vec![50];
    let rows = run_figure_experiment(&grid, &Sequential).unwrap();
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(r.m, 4);
        assert_eq!(r.sigma_f, vec![1.2, 1.0]);
    }
}

#[test]
fn pca_has_lowest_in_sample_rmse() {
    let mut config = ComparisonConfig::heteroskedastic_toeplitz(60, 60, 10, 3);
    config.alpha_scales = vec![1.0, 2.0];
    let rows = run_comparison_experiment(&config, &Sequential).unwrap();
    for scale in &config.alpha_scales {
        let at: Vec<_> = rows.iter().filter(|r| r.alpha_scale == *scale).collect();
        let pca = at.iter().find(|r| r.method == Method::Pca).unwrap().scores.rmse_in;
        for r in &at {
            assert!(pca <= r.scores.rmse_in + 1e-12, "{:?} {}", r.method, r.scores.rmse_in);
        }
    }
}

#[test]
fn constrained_order_stats_sampler() {
    let (samples, short) = sample_constrained_order_stats(200, 5, &[1.44, 1.0], 0.2, 200, 9).unwrap();
    assert_eq!(samples.len() + short, 200);
    for draw in &samples {
        assert_eq!(draw.len(), 2);
        assert!(draw.iter().all(|v| *v > 0.0));
    }
    // Same seed, same samples.
    assert_eq!(
        sample_constrained_order_stats(200, 5, &[1.44, 1.0], 0.2, 200, 9)
            .unwrap()
            .0,
        samples
    );
    // c above the cap is rejected.
    assert!(sample_constrained_order_stats(200, 5, &[1.44, 1.0], overlap_cap(2) + 0.01, 10, 9).is_err());
}
