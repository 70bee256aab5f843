//! Command-line entry point.
//!
//! Every subcommand resolves its settings (defaults, then flags, then the
//! `--config` file), writes CSV outputs into the output directory and ends
//! with a `manifest.json` listing them.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use proximate_core::evt::{
    rotate_threshold_bound, sample_constrained_order_stats, BoundModel, Family, GevSpec, HProfile, MultiFactorBound,
    Norming, OneFactorBound,
};
use proximate_core::metrics::{per_factor_r2, variance_explained};
use proximate_core::panel::standardize;
use proximate_core::proximate::{
    choose_m_data_driven, fit_with_weights, overlap_cap, rotate_threshold_weights, RotationChoice, RotationSpec,
};
use proximate_core::simulate::{
    run_comparison_experiment, run_delta_rho_experiment, run_figure_experiment, run_loading_consistency,
    ComparisonConfig, ComparisonRow, Figure, FigureRow, SimConfig,
};
use proximate_core::{generalized_correlation, hard_threshold_weights, pca_fit, Error, Panel};
use serde::{Deserialize, Serialize};

use crate::config::{layered, Missing, Rotate, Search, Standardize};
use crate::error::CliError;
use crate::exec::Parallel;
use crate::io::{self, fmt_f64, Orientation};
use crate::manifest::RunManifest;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "proximate", version, about = "Sparse proximate factors for large panels")]
struct Cli {
    /// Directory for all outputs.
    #[arg(long, global = true, env = "PROXIMATE_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// TOML file whose keys override the command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Principal-component factors and loadings of a panel.
    Fit(FitArgs),
    /// Sparse proximate factors from thresholded PCA loadings.
    Proximate(ProximateArgs),
    /// Extreme-value probability bounds from a parameter file.
    Bounds(BoundsArgs),
    /// Monte Carlo exceedance and consistency experiments.
    Simulate(SimulateArgs),
    /// Proximate PCA against sparse PCA on simulated panels.
    Compare(CompareArgs),
    /// Proximate factors of a FRED-MD style macro panel.
    Fredmd(FredmdArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PanelArgs {
    /// Panel CSV: an id column and a header row.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    orientation: Option<Orientation>,
    /// Default: none.
    #[arg(long, value_enum)]
    standardize: Option<Standardize>,
    /// Default: drop-unit.
    #[arg(long, value_enum)]
    missing: Option<Missing>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    panel: PanelArgs,
    /// Number of factors.
    #[arg(short)]
    k: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProximateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    panel: PanelArgs,
    #[arg(short)]
    k: Option<usize>,
    /// Units per factor.
    #[arg(short, conflicts_with = "target_rho")]
    m: Option<usize>,
    /// Pick the smallest m whose average generalized correlation with the
    /// PCA factors reaches this value.
    #[arg(long)]
    target_rho: Option<f64>,
    #[arg(long, value_enum)]
    search: Option<Search>,
    /// Default: none.
    #[arg(long, value_enum)]
    rotate: Option<Rotate>,
    /// Overlap ratio for the rotated selection; default half the admissible
    /// maximum (1 for one factor).
    #[arg(short)]
    c: Option<f64>,
    /// CSV of unit id and group label, for the composition report.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Include an intercept in the per-factor R² regressions.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    intercept: Option<bool>,
}

#[derive(Debug, Clone, Args)]
struct BoundsArgs {
    /// TOML parameter file.
    params: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateArgs {
    /// fig1, fig2a, fig2b, fig3, fig4, delta-rho or loading-consistency.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Factor standard deviations per design, factors separated by ':',
    /// e.g. `--sigma-f 1.2:1.0,1.0:0.8`.
    #[arg(long, value_delimiter = ',')]
    sigma_f: Option<Vec<String>>,
    #[arg(long)]
    rho0: Option<f64>,
    /// Penalty multiples of ŝT for delta-rho.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Length of each of the training and test halves.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Penalty multiples of ŝ_jT.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FredmdArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(short)]
    k: Option<usize>,
    #[arg(short, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    missing: Option<Missing>,
    /// Include an intercept in the per-factor R² regressions.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    intercept: Option<bool>,
}

/// Run the CLI on `args` and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    let config = cli.config.as_deref();
    let out = cli.out.as_path();
    match &cli.command {
        Command::Fit(a) => cmd_fit(layered(a, config)?, out),
        Command::Proximate(a) => cmd_proximate(layered(a, config)?, out),
        Command::Bounds(a) => cmd_bounds(&a.params, out),
        Command::Simulate(a) => cmd_simulate(layered(a, config)?, out),
        Command::Compare(a) => cmd_compare(layered(a, config)?, out),
        Command::Fredmd(a) => cmd_fredmd(layered(a, config)?, out),
    }
}

fn required<T: Clone>(value: &Option<T>, name: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Input(format!("missing required setting '{name}'")))
}

fn load_panel(a: &PanelArgs) -> Result<Panel> {
    let input = required(&a.input, "input")?;
    let (panel, _) = io::load_csv(
        &input,
        a.orientation.unwrap_or_default(),
        a.missing.unwrap_or(Missing::DropUnit).into(),
    )?;
    let mode = a.standardize.unwrap_or(Standardize::None).into();
    Ok(standardize(&panel, mode)?.0)
}

fn cmd_fit(a: FitArgs, out: &Path) -> Result<()> {
    let mut manifest = RunManifest::new(serde_json::to_value(&a)?, None);
    let panel = load_panel(&a.panel)?;
    let fit = pca_fit(panel.values(), required(&a.k, "k")?)?;
    manifest.outputs = io::write_factor_fit(out, "", &fit, &panel)?;
    manifest.finish(out)?;
    Ok(())
}

fn cmd_proximate(a: ProximateArgs, out: &Path) -> Result<()> {
    let mut manifest = RunManifest::new(serde_json::to_value(&a)?, None);
    let mut panel = load_panel(&a.panel)?;
    if let Some(path) = &a.groups {
        panel = panel.with_groups(io::load_groups(path)?);
    }
    let x = panel.values();
    let k = required(&a.k, "k")?;
    let fit = pca_fit(x, k)?;
    let rotate = a.rotate.unwrap_or(Rotate::None);

    let m = match (a.m, a.target_rho) {
        (Some(m), None) => m,
        (None, Some(target)) => {
            if rotate != Rotate::None {
                return Err(CliError::Input(
                    "--target-rho is only supported with --rotate none".into(),
                ));
            }
            let choice = choose_m_data_driven(x, &fit, target, a.search.unwrap_or(Search::Linear).into())?;
            manifest.note("profile", &choice.profile);
            choice.m
        }
        _ => return Err(CliError::Input("give exactly one of -m and --target-rho".into())),
    };
    manifest.note("m", m);

    let weights = match rotate {
        Rotate::None => hard_threshold_weights(&fit.loadings, m)?,
        Rotate::Varimax => {
            let c = a.c.unwrap_or_else(|| (0.5 * overlap_cap(k)).min(1.0));
            let rotated = rotate_threshold_weights(&fit, &RotationSpec::new(RotationChoice::Varimax, c), m)?;
            manifest.note("c", c);
            manifest.note(
                "rotation",
                rotated
                    .rotation
                    .row_iter()
                    .map(|r| r.iter().copied().collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            );
            rotated.weights
        }
    };
    let prox = fit_with_weights(x, weights)?;

    let mut outputs = io::write_factor_fit(out, "pca_", &fit, &panel)?;
    let names = io::factor_names(k);
    io::write_weights(&out.join("weights.csv"), &prox.weights, panel.unit_ids())?;
    io::write_matrix(
        &out.join("proximate_factors.csv"),
        "time",
        panel.time_ids(),
        &names,
        &prox.factors,
    )?;
    io::write_matrix(
        &out.join("proximate_loadings.csv"),
        "unit",
        panel.unit_ids(),
        &names,
        &prox.loadings,
    )?;
    outputs.extend(["weights.csv", "proximate_factors.csv", "proximate_loadings.csv"].map(String::from));

    let gc = generalized_correlation(&fit.factors, &prox.factors)?;
    let r2 = per_factor_r2(&fit.factors, &prox.factors, a.intercept.unwrap_or(false))?;
    let mut rows = vec![
        vec!["gen_corr_total".into(), String::new(), fmt_f64(gc.total)],
        vec!["gen_corr_average".into(), String::new(), fmt_f64(gc.total / k as f64)],
    ];
    for (j, v) in gc.individual.iter().enumerate() {
        rows.push(vec!["gen_corr".into(), format!("F{}", j + 1), fmt_f64(*v)]);
    }
    for (j, v) in r2.iter().enumerate() {
        rows.push(vec!["r2_pca_on_proximate".into(), format!("F{}", j + 1), fmt_f64(*v)]);
    }
    rows.push(vec![
        "variance_explained_pca".into(),
        String::new(),
        fmt_f64(variance_explained(x, &fit.factors)?),
    ]);
    rows.push(vec![
        "variance_explained_proximate".into(),
        String::new(),
        fmt_f64(variance_explained(x, &prox.factors)?),
    ]);
    io::write_rows(&out.join("metrics.csv"), &["quantity", "factor", "value"], &rows)?;
    outputs.push("metrics.csv".into());

    if panel.groups().is_some() {
        io::write_composition(&out.join("composition.csv"), &prox.weights, &panel)?;
        outputs.push("composition.csv".into());
    }
    manifest.outputs = outputs;
    manifest.finish(out)?;
    Ok(())
}

/// h(m) in a parameter file: a constant, a table for m = 1, 2, …, or
/// "independent" / "perfect".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HSetting {
    Constant(f64),
    Table(Vec<f64>),
    Named(String),
}

impl HSetting {
    fn at(&self, m: usize) -> Result<f64> {
        match self {
            HSetting::Constant(h) => Ok(*h),
            HSetting::Table(t) => Ok(HProfile::Table(t.clone()).at(m)?),
            HSetting::Named(s) => match s.as_str() {
                "independent" => Ok(0.0),
                "perfect" => Ok(HProfile::PerfectlyDependent.at(m)?),
                other => Err(CliError::Input(format!("unknown h setting '{other}'"))),
            },
        }
    }
}

/// Parameters of the `bounds` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsParams {
    /// one-factor, multi-factor or rotate-threshold.
    pub model: String,
    pub n: usize,
    pub m: Vec<usize>,
    /// One entry per factor.
    pub sigma_f: Vec<f64>,
    #[serde(default = "one")]
    pub sigma_e: f64,
    pub h: Option<HSetting>,
    /// Solve for τ at this threshold; otherwise evaluate along `taus`.
    pub rho0: Option<f64>,
    pub taus: Option<Vec<f64>>,
    /// Loading-magnitude family; default folded-normal.
    pub family: Option<String>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub xi: Option<f64>,
    pub a_n: Option<f64>,
    pub b_n: Option<f64>,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "one")]
    pub gamma_underbar: f64,
    #[serde(default)]
    pub correction_prob: f64,
    pub c: Option<f64>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn one_u64() -> u64 {
    1
}

fn default_draws() -> usize {
    10_000
}

impl BoundsParams {
    fn gev(&self) -> Result<GevSpec> {
        let family: Family = self.family.as_deref().unwrap_or("folded-normal").parse()?;
        let mut spec = match family {
            Family::FoldedNormal => GevSpec::folded_normal(),
            Family::StandardNormal => GevSpec::standard_normal(),
            Family::Exponential => GevSpec::exponential(),
            Family::Uniform => GevSpec::uniform(),
            Family::Frechet => GevSpec::frechet(),
            Family::Gumbel | Family::Weibull | Family::Custom => GevSpec {
                mu: 0.0,
                sigma: 1.0,
                xi: 0.0,
                theta: 1.0,
                family,
                norming: Norming::Family,
            },
        };
        spec.mu = self.mu.unwrap_or(spec.mu);
        spec.sigma = self.sigma.unwrap_or(spec.sigma);
        spec.xi = self.xi.unwrap_or(spec.xi);
        spec.theta = self.theta;
        match (self.a_n, self.b_n) {
            (Some(a), Some(b)) => spec.norming = Norming::Fixed { a, b },
            (None, None) => {}
            _ => return Err(CliError::Input("give both a_n and b_n or neither".into())),
        }
        spec.validate()?;
        Ok(spec)
    }

    fn h_at(&self, m: usize) -> Result<f64> {
        self.h.as_ref().map_or(Ok(0.0), |h| h.at(m))
    }

    /// The extreme-value model at one m.
    pub fn model(&self, m: usize) -> Result<BoundModel> {
        let spec = self.gev()?;
        let h_m = self.h_at(m)?;
        match self.model.as_str() {
            "one-factor" => {
                if self.sigma_f.len() != 1 {
                    return Err(CliError::Input("one-factor needs exactly one sigma_f".into()));
                }
                Ok(BoundModel::OneFactor(OneFactorBound {
                    n: self.n,
                    m,
                    spec,
                    sigma_f: self.sigma_f[0],
                    sigma_e: self.sigma_e,
                    h_m,
                    cluster: None,
                }))
            }
            "multi-factor" => Ok(BoundModel::MultiFactor(MultiFactorBound {
                n: self.n,
                m,
                specs: vec![spec; self.sigma_f.len()],
                signals: self.sigma_f.iter().map(|s| s * s).collect(),
                sigma_e: self.sigma_e,
                h_m,
                gamma_underbar: self.gamma_underbar,
                correction_prob: self.correction_prob,
                cluster: None,
            })),
            other => Err(CliError::Input(format!("model '{other}' has no extreme-value form"))),
        }
    }

    /// Rows of (m, τ, ρ₀, bound) as written to bounds.csv.
    pub fn rows(&self) -> Result<Vec<Vec<String>>> {
        let mut rows = Vec::new();
        if self.model == "rotate-threshold" {
            let rho0 = self
                .rho0
                .ok_or_else(|| CliError::Input("rotate-threshold needs rho0".into()))?;
            let c = self
                .c
                .ok_or_else(|| CliError::Input("rotate-threshold needs c".into()))?;
            let signals: Vec<f64> = self.sigma_f.iter().map(|s| s * s).collect();
            for &m in &self.m {
                let (samples, short) = sample_constrained_order_stats(self.n, m, &signals, c, self.draws, self.seed)?;
                let p = if samples.is_empty() {
                    0.0
                } else {
                    rotate_threshold_bound(m, signals.len(), self.sigma_e, self.h_at(m)?, c, &samples, rho0)?
                        * samples.len() as f64
                        / self.draws as f64
                };
                if short > 0 {
                    log::warn!("m = {m}: {short} draws had fewer than m eligible rows and count as failures");
                }
                rows.push(vec![m.to_string(), String::new(), fmt_f64(rho0), fmt_f64(p)]);
            }
            return Ok(rows);
        }
        for &m in &self.m {
            let model = self.model(m)?;
            match (self.rho0, &self.taus) {
                (Some(rho0), None) => match model.at_rho0(rho0) {
                    Ok(r) => rows.push(vec![
                        m.to_string(),
                        fmt_f64(r.params.tau),
                        fmt_f64(rho0),
                        fmt_f64(r.prob_lower_bound),
                    ]),
                    Err(Error::Unattainable { .. }) => {
                        rows.push(vec![m.to_string(), String::new(), fmt_f64(rho0), String::new()])
                    }
                    Err(e) => return Err(e.into()),
                },
                (None, Some(taus)) => {
                    for r in model.curve(taus)? {
                        rows.push(vec![
                            m.to_string(),
                            fmt_f64(r.params.tau),
                            fmt_f64(r.rho0),
                            fmt_f64(r.prob_lower_bound),
                        ]);
                    }
                }
                _ => return Err(CliError::Input("give exactly one of rho0 and taus".into())),
            }
        }
        Ok(rows)
    }
}

pub const BOUNDS_HEADER: [&str; 4] = ["m", "tau", "rho0", "bound"];

fn cmd_bounds(params_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(params_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", params_path.display())))?;
    let params: BoundsParams = toml::from_str(&text)?;
    let mut manifest = RunManifest::new(serde_json::to_value(&params)?, Some(params.seed));
    let rows = params.rows()?;
    io::write_rows(&out.join("bounds.csv"), &BOUNDS_HEADER, &rows)?;
    manifest.outputs.push("bounds.csv".into());
    manifest.finish(out)?;
    Ok(())
}

fn parse_sigma(s: &str) -> Result<Vec<f64>> {
    s.split(':')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad sigma_f entry '{s}'")))
        })
        .collect()
}

pub const FIGURE_HEADER: [&str; 12] = [
    "n",
    "t",
    "sigma_f",
    "m",
    "rho0",
    "empirical",
    "se",
    "exceed",
    "valid",
    "failures",
    "tau",
    "bound",
];

pub fn figure_rows(rows: &[FigureRow]) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    rows.iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.t.to_string(),
                r.sigma_f.iter().map(|s| fmt_f64(*s)).collect::<Vec<_>>().join(":"),
                r.m.to_string(),
                fmt_f64(r.rho0),
                fmt_f64(r.empirical.prob),
                fmt_f64(r.empirical.se),
                r.empirical.exceed.to_string(),
                r.empirical.valid.to_string(),
                r.empirical.failures.to_string(),
                opt(r.tau),
                opt(r.bound),
            ]
        })
        .collect()
}

fn cmd_simulate(a: SimulateArgs, out: &Path) -> Result<()> {
    let name = required(&a.experiment, "experiment")?;
    let mut manifest = RunManifest::new(serde_json::to_value(&a)?, None);
    let file = format!("{name}.csv");
    match name.as_str() {
        "delta-rho" => {
            let mut config = SimConfig::one_factor(
                a.n.as_ref().and_then(|v| v.first().copied()).unwrap_or(100),
                a.t.as_ref().and_then(|v| v.first().copied()).unwrap_or(100),
                1.0,
            );
            config.reps = a.reps.unwrap_or(1000);
            config.seed = a.seed.unwrap_or(1);
            manifest.seed = Some(config.seed);
            let alphas = a.alpha.clone().unwrap_or_else(|| vec![0.1, 0.5, 1.0, 2.0, 3.0, 4.0]);
            let rows: Vec<Vec<String>> = run_delta_rho_experiment(&config, &alphas, &Parallel)?
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.alpha_scale),
                        fmt_f64(r.mean_m),
                        r.ppca_at_least.to_string(),
                        r.valid.to_string(),
                        r.failures.to_string(),
                        fmt_f64(r.fraction()),
                        fmt_f64(r.mean_delta),
                    ]
                })
                .collect();
            io::write_rows(
                &out.join(&file),
                &[
                    "alpha_scale",
                    "mean_m",
                    "ppca_at_least",
                    "valid",
                    "failures",
                    "fraction",
                    "mean_delta",
                ],
                &rows,
            )?;
        }
        "loading-consistency" => {
            let mut base =
                ComparisonConfig::heteroskedastic_toeplitz(100, 100, a.reps.unwrap_or(200), a.seed.unwrap_or(1)).sim;
            manifest.seed = Some(base.seed);
            let ns = a.n.clone().unwrap_or_else(|| vec![50, 100, 200]);
            let ts = a.t.clone().unwrap_or_else(|| ns.clone());
            if ns.len() != ts.len() {
                return Err(CliError::Input("n and t lists must have equal length".into()));
            }
            let m = a.m.as_ref().and_then(|v| v.first().copied()).unwrap_or(base.k);
            base.m = m;
            let sizes: Vec<(usize, usize)> = ns.into_iter().zip(ts).collect();
            let rows: Vec<Vec<String>> = run_loading_consistency(&base, &sizes, m, &Parallel)?
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.t.to_string(),
                        r.m.to_string(),
                        fmt_f64(r.mean_corr),
                        fmt_f64(r.se),
                        r.valid.to_string(),
                        r.failures.to_string(),
                    ]
                })
                .collect();
            io::write_rows(
                &out.join(&file),
                &["n", "t", "m", "mean_corr", "se", "valid", "failures"],
                &rows,
            )?;
        }
        _ => {
            let figure = Figure::from_name(&name)?;
            let mut grid = figure.default_grid();
            if let Some(v) = &a.n {
                grid.ns = v.clone();
            }
            if let Some(v) = &a.t {
                grid.ts = v.clone();
            }
            if let Some(v) = &a.m {
                grid.ms = v.clone();
            }
            if let Some(v) = &a.sigma_f {
                grid.sigma_fs = v.iter().map(|s| parse_sigma(s)).collect::<Result<_>>()?;
            }
            grid.rho0 = a.rho0.unwrap_or(grid.rho0);
            grid.reps = a.reps.unwrap_or(grid.reps);
            grid.seed = a.seed.unwrap_or(grid.seed);
            manifest.seed = Some(grid.seed);
            let rows = run_figure_experiment(&grid, &Parallel)?;
            let failures: usize = rows.iter().map(|r| r.empirical.failures).sum();
            manifest.note("replicate_failures", failures);
            io::write_rows(&out.join(&file), &FIGURE_HEADER, &figure_rows(&rows))?;
        }
    }
    manifest.outputs.push(file);
    manifest.finish(out)?;
    Ok(())
}

pub const COMPARISON_HEADER: [&str; 11] = [
    "alpha_scale",
    "method",
    "mean_m",
    "factor_corr_in",
    "factor_corr_out",
    "loading_corr_in",
    "loading_corr_out",
    "rmse_in",
    "rmse_out",
    "valid",
    "failures",
];

pub fn comparison_rows(rows: &[ComparisonRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let s = &r.scores;
            vec![
                fmt_f64(r.alpha_scale),
                r.method.name().to_string(),
                fmt_f64(r.mean_m),
                fmt_f64(s.factor_corr_in),
                fmt_f64(s.factor_corr_out),
                fmt_f64(s.loading_corr_in),
                fmt_f64(s.loading_corr_out),
                fmt_f64(s.rmse_in),
                fmt_f64(s.rmse_out),
                r.valid.to_string(),
                r.failures.to_string(),
            ]
        })
        .collect()
}

fn cmd_compare(a: CompareArgs, out: &Path) -> Result<()> {
    let mut config = ComparisonConfig::heteroskedastic_toeplitz(
        a.n.unwrap_or(100),
        a.t.unwrap_or(100),
        a.reps.unwrap_or(200),
        a.seed.unwrap_or(1),
    );
    if let Some(alpha) = &a.alpha {
        config.alpha_scales = alpha.clone();
    }
    let mut manifest = RunManifest::new(serde_json::to_value(&a)?, Some(config.sim.seed));
    let rows = run_comparison_experiment(&config, &Parallel)?;
    io::write_rows(&out.join("comparison.csv"), &COMPARISON_HEADER, &comparison_rows(&rows))?;
    manifest.outputs.push("comparison.csv".into());
    manifest.finish(out)?;
    Ok(())
}

/// Per-factor R² of the PCA factors on the proximate factors at each m.
pub fn fredmd_r2(panel: &Panel, k: usize, ms: &[usize], intercept: bool) -> Result<Vec<(usize, Vec<f64>)>> {
    let x = panel.values();
    let fit = pca_fit(x, k)?;
    ms.iter()
        .map(|&m| {
            let w = hard_threshold_weights(&fit.loadings, m)?;
            let prox = fit_with_weights(x, w)?;
            Ok((m, per_factor_r2(&fit.factors, &prox.factors, intercept)?))
        })
        .collect()
}

fn cmd_fredmd(a: FredmdArgs, out: &Path) -> Result<()> {
    let input = required(&a.input, "input")?;
    let mut manifest = RunManifest::new(serde_json::to_value(&a)?, None);
    let (panel, _, report) = io::load_fred_md(&input, a.missing.unwrap_or(Missing::DropUnit).into())?;
    manifest.note("leading_rows_dropped", report.leading_rows_dropped);
    manifest.note("constant_series", &report.constant_series);
    manifest.note("dropped_series", &report.missing.dropped_units);
    manifest.note("dropped_periods", &report.missing.dropped_periods);
    manifest.note("n_series", panel.n_units());
    manifest.note("n_periods", panel.n_periods());

    let k = a.k.unwrap_or(8);
    let ms = a.m.clone().unwrap_or_else(|| vec![10, 15, 20, 25]);
    let fit = pca_fit(panel.values(), k)?;
    let mut outputs = io::write_factor_fit(out, "pca_", &fit, &panel)?;
    let mut rows = Vec::new();
    for (m, r2) in fredmd_r2(&panel, k, &ms, a.intercept.unwrap_or(false))? {
        for (j, v) in r2.iter().enumerate() {
            rows.push(vec![m.to_string(), format!("F{}", j + 1), fmt_f64(*v)]);
        }
    }
    io::write_rows(&out.join("fredmd_r2.csv"), &["m", "factor", "r2"], &rows)?;
    outputs.push("fredmd_r2.csv".into());
    manifest.outputs = outputs;
    manifest.finish(out)?;
    Ok(())
}
