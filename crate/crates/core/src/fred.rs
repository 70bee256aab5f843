//! Stationarity transforms for FRED-MD style macro panels.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::{clean_missing, standardize, DropReport, MissingPolicy, Panel, StandardizeMode};
use crate::prelude::*;

/// FRED-MD transform code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformCode {
    Level,
    Diff,
    Diff2,
    Log,
    LogDiff,
    LogDiff2,
    /// First difference of the period-on-period growth rate x_t/x_{t−1} − 1.
    GrowthDiff,
}

impl TransformCode {
    pub fn from_code(code: i64) -> Result<Self> {
        Ok(match code {
            1 => TransformCode::Level,
            2 => TransformCode::Diff,
            3 => TransformCode::Diff2,
            4 => TransformCode::Log,
            5 => TransformCode::LogDiff,
            6 => TransformCode::LogDiff2,
            7 => TransformCode::GrowthDiff,
            other => return Err(Error::UnknownTransform(other)),
        })
    }

    pub fn code(self) -> i64 {
        match self {
            TransformCode::Level => 1,
            TransformCode::Diff => 2,
            TransformCode::Diff2 => 3,
            TransformCode::Log => 4,
            TransformCode::LogDiff => 5,
            TransformCode::LogDiff2 => 6,
            TransformCode::GrowthDiff => 7,
        }
    }

    /// Leading observations lost to differencing.
    pub fn lost_rows(self) -> usize {
        match self {
            TransformCode::Level | TransformCode::Log => 0,
            TransformCode::Diff | TransformCode::LogDiff => 1,
            TransformCode::Diff2 | TransformCode::LogDiff2 | TransformCode::GrowthDiff => 2,
        }
    }

    /// Transform a series; positions without a defined value (lost leading
    /// rows, logs of non-positive numbers, missing inputs) are NaN.
    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        let log = |v: &[f64]| -> Vec<f64> { v.iter().map(|&a| if a > 0.0 { a.ln() } else { f64::NAN }).collect() };
        match self {
            TransformCode::Level => x.to_vec(),
            TransformCode::Diff => diff(x),
            TransformCode::Diff2 => diff(&diff(x)),
            TransformCode::Log => log(x),
            TransformCode::LogDiff => diff(&log(x)),
            TransformCode::LogDiff2 => diff(&diff(&log(x))),
            TransformCode::GrowthDiff => {
                let mut growth = vec![f64::NAN; x.len()];
                for t in 1..x.len() {
                    growth[t] = x[t] / x[t - 1] - 1.0;
                }
                diff(&growth)
            }
        }
    }
}

fn diff(x: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    for t in 1..x.len() {
        out[t] = x[t] - x[t - 1];
    }
    out
}

/// A raw macro table before transformation: one column per series.
#[derive(Debug, Clone)]
pub struct RawSeries {
    pub dates: Vec<String>,
    pub names: Vec<String>,
    pub codes: Vec<TransformCode>,
    /// T×S, NaN where missing.
    pub values: DMatrix<f64>,
}

/// What the preparation step removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FredReport {
    pub leading_rows_dropped: usize,
    pub constant_series: Vec<String>,
    pub missing: DropReport,
}

/// Transform every series, drop the leading rows lost to the deepest
/// differencing so all series align, drop series that are constant after
/// transformation, apply the missing-value policy and z-score each series.
///
/// Returns the panel (series as units) with the codes of the kept series.
pub fn prepare_fred_md(raw: &RawSeries, policy: MissingPolicy) -> Result<(Panel, Vec<TransformCode>, FredReport)> {
    let (t, s) = raw.values.shape();
    if raw.names.len() != s || raw.codes.len() != s || raw.dates.len() != t {
        return Err(Error::invalid(
            "FRED-MD table",
            "names, codes and dates do not match the value matrix",
        ));
    }
    let lost = raw.codes.iter().map(|c| c.lost_rows()).max().unwrap_or(0);
    if t <= lost + 1 {
        return Err(Error::PanelTooSmall {
            n: s,
            t: t.saturating_sub(lost),
        });
    }
    let mut report = FredReport {
        leading_rows_dropped: lost,
        ..FredReport::default()
    };

    let mut rows = Vec::new();
    let mut names = Vec::new();
    let mut codes = Vec::new();
    for j in 0..s {
        let column: Vec<f64> = raw.values.column(j).iter().copied().collect();
        let transformed = raw.codes[j].apply(&column)[lost..].to_vec();
        if is_constant(&transformed) {
            report.constant_series.push(raw.names[j].clone());
            continue;
        }
        rows.push(transformed);
        names.push(raw.names[j].clone());
        codes.push(raw.codes[j]);
    }
    if rows.is_empty() {
        return Err(Error::invalid(
            "FRED-MD table",
            "no series left after dropping constant ones",
        ));
    }
    let width = t - lost;
    let values = DMatrix::from_fn(rows.len(), width, |i, k| rows[i][k]);
    let dates = raw.dates[lost..].to_vec();
    let (panel, missing) = clean_missing(&values, &names, &dates, policy)?;
    let codes = codes
        .into_iter()
        .zip(&names)
        .filter(|(_, name)| !missing.dropped_units.contains(name))
        .map(|(c, _)| c)
        .collect();
    report.missing = missing;
    let (panel, _) = standardize(&panel, StandardizeMode::ZScore)?;
    Ok((panel, codes, report))
}

/// Constant over its finite values (relative spread below 1e-10).
fn is_constant(x: &[f64]) -> bool {
    let finite: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return true;
    }
    let mean = finite.iter().sum::<f64>() / finite.len() as f64;
    let spread = finite.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    spread <= 1e-10 * mean.abs().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_difference_of_growth() {
        let out = TransformCode::LogDiff.apply(&[100.0, 110.0, 121.0]);
        assert!(out[0].is_nan());
        assert_relative_eq!(out[1], 0.095_310_179_804_324_87, epsilon = 1e-12);
        assert_relative_eq!(out[2], 0.095_310_179_804_324_87, epsilon = 1e-12);
    }

    #[test]
    fn level_is_identity() {
        assert_eq!(TransformCode::Level.apply(&[1.0, 5.0]), vec![1.0, 5.0]);
    }

    #[test]
    fn unknown_code() {
        assert_eq!(TransformCode::from_code(8), Err(Error::UnknownTransform(8)));
        for c in 1..=7 {
            assert_eq!(TransformCode::from_code(c).unwrap().code(), c);
        }
    }

    #[test]
    fn growth_difference() {
        let out = TransformCode::GrowthDiff.apply(&[1.0, 2.0, 3.0, 6.0]);
        assert!(out[0].is_nan() && out[1].is_nan());
        assert_relative_eq!(out[2], 0.5 - 1.0);
        assert_relative_eq!(out[3], 1.0 - 0.5);
    }

    #[test]
    fn trends_become_constant() {
        let linear: Vec<f64> = (0..20).map(|t| 3.0 + 0.5 * t as f64).collect();
        assert!(is_constant(&TransformCode::Diff.apply(&linear)));
        let expo: Vec<f64> = (0..20).map(|t| 2.0 * libm::exp(0.03 * t as f64)).collect();
        assert!(is_constant(&TransformCode::LogDiff.apply(&expo)));
        assert!(!is_constant(&TransformCode::Level.apply(&linear)));
    }
}
