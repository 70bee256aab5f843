//! The N×T observation panel plus cleaning, standardization and
//! chronological splitting.

use alloc::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::prelude::*;

/// An N×T panel: rows are cross-section units, columns are periods in
/// chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: DMatrix<f64>,
    unit_ids: Vec<String>,
    time_ids: Vec<String>,
    groups: Option<BTreeMap<String, String>>,
}

fn check_distinct(ids: &[String], axis: &'static str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId { axis, id: id.clone() });
        }
    }
    Ok(())
}

impl Panel {
    /// Validates shape, finiteness and id uniqueness. Periods are taken to be
    /// in chronological order as given.
    pub fn new(values: DMatrix<f64>, unit_ids: Vec<String>, time_ids: Vec<String>) -> Result<Self> {
        let (n, t) = values.shape();
        if n < 1 || t < 2 {
            return Err(Error::PanelTooSmall { n, t });
        }
        if unit_ids.len() != n || time_ids.len() != t {
            return Err(Error::DimensionMismatch {
                context: "panel ids",
                expected_rows: n,
                expected_cols: t,
                rows: unit_ids.len(),
                cols: time_ids.len(),
            });
        }
        check_distinct(&unit_ids, "unit")?;
        check_distinct(&time_ids, "time")?;
        for j in 0..t {
            for i in 0..n {
                if !values[(i, j)].is_finite() {
                    return Err(Error::NonFinite {
                        unit: unit_ids[i].clone(),
                        period: time_ids[j].clone(),
                    });
                }
            }
        }
        Ok(Panel {
            values,
            unit_ids,
            time_ids,
            groups: None,
        })
    }

    /// Panel with generated ids `u1..uN` and `t1..tT`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let unit_ids = (1..=values.nrows()).map(|i| format!("u{i}")).collect();
        let time_ids = (1..=values.ncols()).map(|i| format!("t{i}")).collect();
        Panel::new(values, unit_ids, time_ids)
    }

    /// Attach a unit → group label map used by composition reports.
    pub fn with_groups(mut self, groups: BTreeMap<String, String>) -> Self {
        self.groups = Some(groups);
        self
    }

    pub fn n_units(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn time_ids(&self) -> &[String] {
        &self.time_ids
    }

    pub fn groups(&self) -> Option<&BTreeMap<String, String>> {
        self.groups.as_ref()
    }

    pub fn group_of(&self, unit: &str) -> Option<&str> {
        self.groups.as_ref()?.get(unit).map(String::as_str)
    }

    /// Columns `range` of the panel, keeping ids and groups.
    pub fn periods(&self, start: usize, end: usize) -> Result<Panel> {
        if start >= end || end > self.n_periods() {
            return Err(Error::invalid(
                "period range",
                format!("{start}..{end} of {}", self.n_periods()),
            ));
        }
        let values = self.values.columns(start, end - start).into_owned();
        let mut out = Panel::new(values, self.unit_ids.clone(), self.time_ids[start..end].to_vec())?;
        out.groups = self.groups.clone();
        Ok(out)
    }

    /// Join two panels over the same units along the time axis.
    pub fn concat_periods(&self, later: &Panel) -> Result<Panel> {
        if self.unit_ids != later.unit_ids {
            return Err(Error::invalid("panel", "unit ids differ"));
        }
        let (n, t1, t2) = (self.n_units(), self.n_periods(), later.n_periods());
        let values = DMatrix::from_fn(n, t1 + t2, |i, j| {
            if j < t1 {
                self.values[(i, j)]
            } else {
                later.values[(i, j - t1)]
            }
        });
        let mut time_ids = self.time_ids.clone();
        time_ids.extend(later.time_ids.iter().cloned());
        let mut out = Panel::new(values, self.unit_ids.clone(), time_ids)?;
        out.groups = self.groups.clone();
        Ok(out)
    }
}

/// What to do with non-finite cells when building a panel from raw data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Drop every unit with a missing value.
    #[default]
    DropUnit,
    /// Drop every period with a missing value.
    DropPeriod,
    /// Refuse the data.
    Fail,
}

/// Rows and columns removed while building a panel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropReport {
    pub dropped_units: Vec<String>,
    pub dropped_periods: Vec<String>,
}

impl DropReport {
    pub fn is_empty(&self) -> bool {
        self.dropped_units.is_empty() && self.dropped_periods.is_empty()
    }
}

/// Build a panel from raw values that may contain NaN, applying `policy`.
pub fn clean_missing(
    raw: &DMatrix<f64>,
    unit_ids: &[String],
    time_ids: &[String],
    policy: MissingPolicy,
) -> Result<(Panel, DropReport)> {
    let (n, t) = raw.shape();
    let mut report = DropReport::default();
    let bad = |i: usize, j: usize| !raw[(i, j)].is_finite();
    let (keep_rows, keep_cols): (Vec<usize>, Vec<usize>) = match policy {
        MissingPolicy::Fail => ((0..n).collect(), (0..t).collect()),
        MissingPolicy::DropUnit => {
            let rows = (0..n)
                .filter(|&i| {
                    let missing = (0..t).any(|j| bad(i, j));
                    if missing {
                        report.dropped_units.push(unit_ids[i].clone());
                    }
                    !missing
                })
                .collect();
            (rows, (0..t).collect())
        }
        MissingPolicy::DropPeriod => {
            let cols = (0..t)
                .filter(|&j| {
                    let missing = (0..n).any(|i| bad(i, j));
                    if missing {
                        report.dropped_periods.push(time_ids[j].clone());
                    }
                    !missing
                })
                .collect();
            ((0..n).collect(), cols)
        }
    };
    let values = DMatrix::from_fn(keep_rows.len(), keep_cols.len(), |i, j| {
        raw[(keep_rows[i], keep_cols[j])]
    });
    let units = keep_rows.iter().map(|&i| unit_ids[i].clone()).collect();
    let times = keep_cols.iter().map(|&j| time_ids[j].clone()).collect();
    let panel = Panel::new(values, units, times)?;
    Ok((panel, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StandardizeMode {
    #[default]
    None,
    Demean,
    /// Demean and divide by the sample standard deviation (divisor T − 1).
    ZScore,
}

/// Per-unit location and scale used by a standardization, so the same map
/// can be applied to a test panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mode: StandardizeMode,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, panel: &Panel) -> Result<Panel> {
        if panel.n_units() != self.means.len() {
            return Err(Error::invalid(
                "panel",
                format!(
                    "has {} units, standardization was fitted on {}",
                    panel.n_units(),
                    self.means.len()
                ),
            ));
        }
        let v = panel.values();
        let values = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| {
            (v[(i, j)] - self.means[i]) / self.scales[i]
        });
        let mut out = Panel::new(values, panel.unit_ids.clone(), panel.time_ids.clone())?;
        out.groups = panel.groups.clone();
        Ok(out)
    }
}

/// Standardize each unit's time series and return the fitted parameters.
pub fn standardize(panel: &Panel, mode: StandardizeMode) -> Result<(Panel, Standardization)> {
    let (n, t) = panel.values.shape();
    let mut means = vec![0.0; n];
    let mut scales = vec![1.0; n];
    if mode != StandardizeMode::None {
        for i in 0..n {
            let row = panel.values.row(i);
            let mean = row.sum() / t as f64;
            means[i] = mean;
            if mode == StandardizeMode::ZScore {
                let ss: f64 = row.iter().map(|x| (x - mean) * (x - mean)).sum();
                let sd = (ss / (t - 1) as f64).sqrt();
                if !(sd > 0.0) || sd <= 1e-14 * mean.abs() {
                    return Err(Error::ZeroVariance {
                        unit: panel.unit_ids[i].clone(),
                    });
                }
                scales[i] = sd;
            }
        }
    }
    let params = Standardization { mode, means, scales };
    let out = params.apply(panel)?;
    Ok((out, params))
}

/// Chronological split; the training side gets floor(fraction · T) periods.
pub fn split_train_test(panel: &Panel, fraction: f64) -> Result<(Panel, Panel)> {
    let t = panel.n_periods();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("fraction", format!("{fraction} is not in (0, 1)")));
    }
    let cut = libm::floor(fraction * t as f64) as usize;
    if cut < 2 || t - cut < 2 {
        return Err(Error::invalid(
            "fraction",
            format!(
                "{fraction} of T = {t} leaves {cut} training and {} test periods; each side needs at least 2",
                t - cut
            ),
        ));
    }
    Ok((panel.periods(0, cut)?, panel.periods(cut, t)?))
}

/// Split, then standardize with training-sample statistics applied to both
/// sides.
pub fn split_standardized(
    panel: &Panel,
    fraction: f64,
    mode: StandardizeMode,
) -> Result<(Panel, Panel, Standardization)> {
    let (train, test) = split_train_test(panel, fraction)?;
    let (train, params) = standardize(&train, mode)?;
    let test = params.apply(&test)?;
    Ok((train, test, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row_panel(values: &[f64]) -> Panel {
        Panel::from_matrix(DMatrix::from_row_slice(1, values.len(), values)).unwrap()
    }

    #[test]
    fn demean_and_zscore() {
        let p = row_panel(&[1.0, 2.0, 3.0]);
        let (d, _) = standardize(&p, StandardizeMode::Demean).unwrap();
        assert_eq!(d.values().as_slice(), &[-1.0, 0.0, 1.0]);
        let (z, params) = standardize(&p, StandardizeMode::ZScore).unwrap();
        assert_eq!(z.values().as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(params.scales, vec![1.0]);
        let (same, _) = standardize(&p, StandardizeMode::None).unwrap();
        assert_eq!(same, p);
    }

    #[test]
    fn zscore_rejects_constant_unit() {
        let p = Panel::from_matrix(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 4.0, 4.0])).unwrap();
        match standardize(&p, StandardizeMode::ZScore) {
            Err(Error::ZeroVariance { unit }) => assert_eq!(unit, "u2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_sizes() {
        let p = row_panel(&(0..10).map(f64::from).collect::<Vec<_>>());
        let (a, b) = split_train_test(&p, 0.5).unwrap();
        assert_eq!((a.n_periods(), b.n_periods()), (5, 5));
        let p = row_panel(&(0..11).map(f64::from).collect::<Vec<_>>());
        let (a, b) = split_train_test(&p, 0.5).unwrap();
        assert_eq!((a.n_periods(), b.n_periods()), (5, 6));
        assert_eq!(a.concat_periods(&b).unwrap(), p);
        assert!(split_train_test(&p, 1.0).is_err());
        assert!(split_train_test(&p, 0.05).is_err());
    }

    #[test]
    fn test_side_uses_training_statistics() {
        let p = row_panel(&[1.0, 2.0, 3.0, 10.0, 20.0, 30.0]);
        let (train, test, params) = split_standardized(&p, 0.5, StandardizeMode::ZScore).unwrap();
        assert_relative_eq!(params.means[0], 2.0);
        assert_eq!(train.values().as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(test.values().as_slice(), &[8.0, 18.0, 28.0]);
    }

    #[test]
    fn drop_unit_policy_reports() {
        let raw = DMatrix::from_row_slice(2, 3, &[1.0, f64::NAN, 3.0, 4.0, 5.0, 6.0]);
        let ids = |p: &str, k: usize| (1..=k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let (panel, report) = clean_missing(&raw, &ids("a", 2), &ids("t", 3), MissingPolicy::DropUnit).unwrap();
        assert_eq!(panel.unit_ids(), &[String::from("a2")]);
        assert_eq!(report.dropped_units, vec![String::from("a1")]);
        let (panel, report) = clean_missing(&raw, &ids("a", 2), &ids("t", 3), MissingPolicy::DropPeriod).unwrap();
        assert_eq!(panel.n_periods(), 2);
        assert_eq!(report.dropped_periods, vec![String::from("t2")]);
        assert!(matches!(
            clean_missing(&raw, &ids("a", 2), &ids("t", 3), MissingPolicy::Fail),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn validation() {
        assert!(matches!(
            Panel::from_matrix(DMatrix::zeros(2, 1)),
            Err(Error::PanelTooSmall { .. })
        ));
        let dup = Panel::new(
            DMatrix::zeros(2, 2),
            vec!["a".into(), "a".into()],
            vec!["1".into(), "2".into()],
        );
        assert!(matches!(dup, Err(Error::DuplicateId { axis: "unit", .. })));
    }
}
