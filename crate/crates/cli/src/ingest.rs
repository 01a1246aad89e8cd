//! CSV ingestion: wide per-variable matrices, long records, and scalar
//! responses.

use std::path::Path;

use fdmon::error::{Error, Result};
use fdmon::mfd::{mfd_from_grid, LongRecord, Mfd};
use nalgebra::DMatrix;

fn config_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("{}: {msg}", path.display()))
}

/// Wide CSV: header `id,<t1>,<t2>,...` with numeric argument values; one row
/// per observation.
pub struct WideTable {
    pub ids: Vec<String>,
    pub grid: Vec<f64>,
    /// n x g values.
    pub values: DMatrix<f64>,
}

pub fn read_wide_csv(path: &Path) -> Result<WideTable> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| config_err(path, e))?;
    let headers = rdr.headers().map_err(|e| config_err(path, e))?.clone();
    if headers.len() < 2 || headers.get(0) != Some("id") {
        return Err(config_err(path, "expected header starting with `id`"));
    }
    let grid: Vec<f64> = headers
        .iter()
        .skip(1)
        .map(|h| {
            h.parse::<f64>()
                .map_err(|_| config_err(path, format!("non-numeric argument column `{h}`")))
        })
        .collect::<Result<_>>()?;
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| config_err(path, e))?;
        if record.len() != headers.len() {
            return Err(config_err(path, "ragged row"));
        }
        ids.push(record[0].to_string());
        let row: Vec<f64> = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| config_err(path, format!("non-numeric value `{v}`")))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let values = DMatrix::from_fn(rows.len(), grid.len(), |i, j| rows[i][j]);
    Ok(WideTable { ids, grid, values })
}

fn var_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Read several wide CSVs sharing ids and grid; variable names come from the
/// file stems.
pub fn read_wide_set(paths: &[std::path::PathBuf]) -> Result<(Vec<String>, Vec<f64>, Vec<(String, DMatrix<f64>)>)> {
    if paths.is_empty() {
        return Err(Error::InvalidConfig("no data files given".into()));
    }
    let mut out = Vec::with_capacity(paths.len());
    let mut ids: Option<Vec<String>> = None;
    let mut grid: Option<Vec<f64>> = None;
    for p in paths {
        let t = read_wide_csv(p)?;
        match (&ids, &grid) {
            (None, None) => {
                ids = Some(t.ids);
                grid = Some(t.grid);
            }
            (Some(i), Some(g)) => {
                if &t.ids != i {
                    return Err(config_err(p, "observation ids differ across data files"));
                }
                if t.grid.len() != g.len()
                    || t.grid.iter().zip(g.iter()).any(|(a, b)| (a - b).abs() > 1e-12)
                {
                    return Err(config_err(p, "argument grids differ across data files"));
                }
            }
            _ => unreachable!(),
        }
        out.push((var_name(p), t.values));
    }
    Ok((ids.unwrap(), grid.unwrap(), out))
}

/// Smooth a set of wide CSVs into a functional data object.
pub fn mfd_from_wide_files(
    paths: &[std::path::PathBuf],
    n_basis: usize,
    lambda_grid: &[f64],
) -> Result<Mfd> {
    let (ids, grid, data) = read_wide_set(paths)?;
    let mfd = mfd_from_grid(&grid, &data, n_basis, lambda_grid)?;
    mfd.with_obs_ids(ids)
}

/// Long CSV: header `id,arg,<var1>,<var2>,...`; empty cells mean the
/// variable was not observed at that argument.
pub fn read_long_csv(path: &Path) -> Result<(Vec<LongRecord>, Vec<String>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| config_err(path, e))?;
    let headers = rdr.headers().map_err(|e| config_err(path, e))?.clone();
    if headers.len() < 3 || headers.get(0) != Some("id") || headers.get(1) != Some("arg") {
        return Err(config_err(path, "expected header `id,arg,<variables...>`"));
    }
    let vars: Vec<String> = headers.iter().skip(2).map(|s| s.to_string()).collect();
    let mut records = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| config_err(path, e))?;
        if record.len() != headers.len() {
            return Err(config_err(path, "ragged row"));
        }
        let arg: f64 = record[1]
            .parse()
            .map_err(|_| config_err(path, format!("non-numeric arg `{}`", &record[1])))?;
        let mut values = std::collections::BTreeMap::new();
        for (j, var) in vars.iter().enumerate() {
            let cell = &record[j + 2];
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| config_err(path, format!("non-numeric value `{cell}`")))?;
            values.insert(var.clone(), v);
        }
        records.push(LongRecord {
            id: record[0].to_string(),
            arg,
            values,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok((records, vars))
}

/// Scalar response CSV: header `id,y`.
pub fn read_scalar_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| config_err(path, e))?;
    let headers = rdr.headers().map_err(|e| config_err(path, e))?.clone();
    if headers.len() != 2 || headers.get(0) != Some("id") {
        return Err(config_err(path, "expected header `id,<response>`"));
    }
    let mut ids = Vec::new();
    let mut y = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| config_err(path, e))?;
        ids.push(record[0].to_string());
        y.push(
            record[1]
                .parse::<f64>()
                .map_err(|_| config_err(path, format!("non-numeric value `{}`", &record[1])))?,
        );
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok((ids, y))
}
