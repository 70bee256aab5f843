//! CSV readers and writers for panels, fits, weights and reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use proximate_core::fred::{prepare_fred_md, FredReport, RawSeries, TransformCode};
use proximate_core::panel::{clean_missing, DropReport, MissingPolicy};
use proximate_core::{DMatrix, FactorFit, Panel, SparseWeights};

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Which axis of the CSV holds the cross-section units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// One row per period, one column per unit (the usual layout for
    /// macro and return panels).
    #[default]
    UnitsInColumns,
    UnitsInRows,
}

fn parse_cell(cell: &str) -> Result<f64> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>()
        .map_err(|_| CliError::Input(format!("cannot parse '{cell}' as a number")))
}

/// Header (minus the id column) and rows of (id, cells).
struct Table {
    header: Vec<String>,
    rows: Vec<(String, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .iter()
        .skip(1)
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() {
        return Err(CliError::Input(format!(
            "{}: need an id column and at least one data column",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cells = record.iter().map(|c| c.trim().to_string());
        let id = cells.next().unwrap_or_default();
        rows.push((id, cells.collect()));
    }
    Ok(Table { header, rows })
}

/// Read a panel from CSV. The first column holds row ids, the header holds
/// column ids. Empty, `NA` and `NaN` cells are missing and handled by
/// `policy`.
pub fn load_csv(path: &Path, orientation: Orientation, policy: MissingPolicy) -> Result<(Panel, DropReport)> {
    let table = read_table(path)?;
    if table
        .rows
        .first()
        .is_some_and(|(id, _)| id.eq_ignore_ascii_case("transform:"))
    {
        return Err(CliError::Input(format!(
            "{} has a transform-code row; load it with the fredmd command instead",
            path.display()
        )));
    }
    let (n_rows, n_cols) = (table.rows.len(), table.header.len());
    let mut values = DMatrix::zeros(n_rows, n_cols);
    for (r, (_, cells)) in table.rows.iter().enumerate() {
        for (c, cell) in cells.iter().enumerate() {
            values[(r, c)] = parse_cell(cell)?;
        }
    }
    let row_ids: Vec<String> = table.rows.into_iter().map(|(id, _)| id).collect();
    let (raw, unit_ids, time_ids) = match orientation {
        Orientation::UnitsInColumns => (values.transpose(), table.header, row_ids),
        Orientation::UnitsInRows => (values, row_ids, table.header),
    };
    let (panel, report) = clean_missing(&raw, &unit_ids, &time_ids, policy)?;
    if !report.is_empty() {
        log::warn!(
            "dropped {} units and {} periods with missing values",
            report.dropped_units.len(),
            report.dropped_periods.len()
        );
    }
    Ok((panel, report))
}

/// Read a FRED-MD style file: a header of series names, a `Transform:` row
/// of codes, then one row per month.
pub fn load_fred_md(path: &Path, policy: MissingPolicy) -> Result<(Panel, Vec<TransformCode>, FredReport)> {
    let table = read_table(path)?;
    let mut rows = table.rows.into_iter();
    let codes = match rows.next() {
        Some((id, cells)) if id.eq_ignore_ascii_case("transform:") => cells
            .iter()
            .map(|c| {
                let code = c
                    .parse::<f64>()
                    .map_err(|_| CliError::Input(format!("bad transform code '{c}'")))?;
                Ok(TransformCode::from_code(code as i64)?)
            })
            .collect::<Result<Vec<_>>>()?,
        _ => {
            return Err(CliError::Input(format!(
                "{}: second line must be the 'Transform:' row",
                path.display()
            )))
        }
    };
    let mut dates = Vec::new();
    let mut data = Vec::new();
    for (date, cells) in rows {
        // Trailing blank lines in the published files parse as empty dates.
        if date.is_empty() {
            continue;
        }
        dates.push(date);
        data.push(cells.iter().map(|c| parse_cell(c)).collect::<Result<Vec<_>>>()?);
    }
    let values = DMatrix::from_fn(dates.len(), table.header.len(), |t, s| data[t][s]);
    let raw = RawSeries {
        dates,
        names: table.header,
        codes,
        values,
    };
    Ok(prepare_fred_md(&raw, policy)?)
}

/// Two-column CSV of unit id and group label.
pub fn load_groups(path: &Path) -> Result<BTreeMap<String, String>> {
    let table = read_table(path)?;
    let mut groups = BTreeMap::new();
    for (unit, cells) in table.rows {
        let group = cells
            .into_iter()
            .next()
            .ok_or_else(|| CliError::Input(format!("{}: group file needs two columns", path.display())))?;
        groups.insert(unit, group);
    }
    Ok(groups)
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Shortest string that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

/// Matrix with an id column and a header.
pub fn write_matrix(
    path: &Path,
    id_name: &str,
    row_ids: &[String],
    col_names: &[String],
    m: &DMatrix<f64>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(std::iter::once(id_name.to_string()).chain(col_names.iter().cloned()))?;
    for (r, id) in row_ids.iter().enumerate() {
        w.write_record(std::iter::once(id.clone()).chain(m.row(r).iter().map(|v| fmt_f64(*v))))?;
    }
    w.flush()?;
    Ok(())
}

pub fn factor_names(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("F{j}")).collect()
}

/// factors.csv, loadings.csv and eigenvalues.csv in `dir`; returns the
/// file names.
pub fn write_factor_fit(dir: &Path, prefix: &str, fit: &FactorFit, panel: &Panel) -> Result<Vec<String>> {
    let names = factor_names(fit.k());
    let files = [
        format!("{prefix}factors.csv"),
        format!("{prefix}loadings.csv"),
        format!("{prefix}eigenvalues.csv"),
    ];
    write_matrix(&dir.join(&files[0]), "time", panel.time_ids(), &names, &fit.factors)?;
    write_matrix(&dir.join(&files[1]), "unit", panel.unit_ids(), &names, &fit.loadings)?;
    let mut w = writer(&dir.join(&files[2]))?;
    w.write_record(["factor", "eigenvalue"])?;
    for (j, v) in fit.eigenvalues.iter().enumerate() {
        w.write_record([format!("F{}", j + 1), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(files.to_vec())
}

/// Nonzero weights as (unit, factor, weight), ordered by factor then by
/// decreasing magnitude.
pub fn write_weights(path: &Path, weights: &SparseWeights, unit_ids: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["unit", "factor", "weight"])?;
    for j in 0..weights.k() {
        let mut rows: Vec<usize> = weights.selected(j).to_vec();
        let col = weights.weights().column(j);
        rows.sort_by(|&a, &b| col[b].abs().total_cmp(&col[a].abs()).then(a.cmp(&b)));
        for i in rows {
            w.write_record([unit_ids[i].clone(), format!("F{}", j + 1), fmt_f64(col[i])])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Count of selected units per group label and factor.
pub fn composition(weights: &SparseWeights, panel: &Panel) -> BTreeMap<String, Vec<usize>> {
    let mut counts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for j in 0..weights.k() {
        for &i in weights.selected(j) {
            let group = panel.group_of(&panel.unit_ids()[i]).unwrap_or("(none)").to_string();
            counts.entry(group).or_insert_with(|| vec![0; weights.k()])[j] += 1;
        }
    }
    counts
}

pub fn write_composition(path: &Path, weights: &SparseWeights, panel: &Panel) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(std::iter::once("group".to_string()).chain(factor_names(weights.k())))?;
    for (group, counts) in composition(weights, panel) {
        w.write_record(std::iter::once(group).chain(counts.iter().map(|c| c.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer: header plus string rows.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
