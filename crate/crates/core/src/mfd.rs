//! Multivariate functional data container: coefficient tensor over a shared
//! B-spline basis, construction from discrete observations (shared or
//! per-curve grids), standardization, subsetting, and inner products.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::basis::{self, BSplineBasis, SmoothFit};
use crate::error::{Error, Result};

/// Evaluation grid size used for pointwise standardization and any other
/// operation that has to leave coefficient space temporarily.
pub const STD_GRID_SIZE: usize = 500;

/// One discrete record of the long data format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongRecord {
    pub id: String,
    pub arg: f64,
    /// Variable name -> observed value; missing variables simply absent.
    pub values: BTreeMap<String, f64>,
}

/// Multivariate functional data set over a shared basis.
///
/// The coefficient tensor is K x n x P, stored as one K x n matrix per
/// variable; it stays three-dimensional even when n = 1 or P = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mfd {
    basis: BSplineBasis,
    /// One K x n coefficient matrix per variable.
    coef: Vec<DMatrix<f64>>,
    obs_ids: Vec<String>,
    var_names: Vec<String>,
    /// Raw discrete records retained from long-format ingestion.
    pub raw: Option<Vec<LongRecord>>,
}

/// Pointwise sample mean and standard deviation functions, re-expressed on
/// the shared basis; reusable to standardize future observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalSummary {
    pub mean_fn: Mfd,
    pub sd_fn: Mfd,
}

impl Mfd {
    pub fn new(
        basis: BSplineBasis,
        coef: Vec<DMatrix<f64>>,
        obs_ids: Vec<String>,
        var_names: Vec<String>,
    ) -> Result<Self> {
        if coef.len() != var_names.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficient matrices for {} variables",
                coef.len(),
                var_names.len()
            )));
        }
        for m in &coef {
            if m.nrows() != basis.n_basis() || m.ncols() != obs_ids.len() {
                return Err(Error::ShapeMismatch(format!(
                    "coefficient matrix is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    basis.n_basis(),
                    obs_ids.len()
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in &obs_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::ShapeMismatch(format!("duplicate obs id {id}")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for v in &var_names {
            if !seen.insert(v.as_str()) {
                return Err(Error::ShapeMismatch(format!("duplicate variable {v}")));
            }
        }
        Ok(Mfd {
            basis,
            coef,
            obs_ids,
            var_names,
            raw: None,
        })
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn n_obs(&self) -> usize {
        self.obs_ids.len()
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn obs_ids(&self) -> &[String] {
        &self.obs_ids
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    /// Same data under different observation ids.
    pub fn with_obs_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_obs() {
            return Err(Error::ShapeMismatch(format!(
                "{} observation ids for {} observations",
                ids.len(),
                self.n_obs()
            )));
        }
        self.obs_ids = ids;
        Ok(self)
    }

    /// K x n coefficient matrix of variable p.
    pub fn coef(&self, p: usize) -> &DMatrix<f64> {
        &self.coef[p]
    }

    /// Stacked coefficient matrix, n x (P*K); variable blocks in order.
    pub fn stacked_coef(&self) -> DMatrix<f64> {
        let k = self.basis.n_basis();
        let n = self.n_obs();
        let p = self.n_vars();
        let mut c = DMatrix::zeros(n, p * k);
        for (vp, m) in self.coef.iter().enumerate() {
            for i in 0..n {
                for kk in 0..k {
                    c[(i, vp * k + kk)] = m[(kk, i)];
                }
            }
        }
        c
    }

    /// Build an Mfd from a stacked n x (P*K) coefficient matrix.
    pub fn from_stacked(
        basis: BSplineBasis,
        stacked: &DMatrix<f64>,
        obs_ids: Vec<String>,
        var_names: Vec<String>,
    ) -> Result<Self> {
        let k = basis.n_basis();
        if stacked.ncols() != k * var_names.len() || stacked.nrows() != obs_ids.len() {
            return Err(Error::ShapeMismatch(
                "stacked coefficient matrix has wrong shape".into(),
            ));
        }
        let coef = (0..var_names.len())
            .map(|p| DMatrix::from_fn(k, obs_ids.len(), |kk, i| stacked[(i, p * k + kk)]))
            .collect();
        Mfd::new(basis, coef, obs_ids, var_names)
    }

    /// Evaluate variable p of observation i on a grid.
    pub fn eval(&self, p: usize, i: usize, grid: &[f64]) -> Result<DVector<f64>> {
        let z = self.basis.eval_matrix(grid)?;
        Ok(&z * self.coef[p].column(i))
    }

    /// Evaluate variable p for all observations: g x n matrix.
    pub fn eval_all(&self, p: usize, grid: &[f64]) -> Result<DMatrix<f64>> {
        let z = self.basis.eval_matrix(grid)?;
        Ok(&z * &self.coef[p])
    }

    fn resolve_obs(&self, sel: &Selector) -> Result<Vec<usize>> {
        sel.resolve(&self.obs_ids).map_err(Error::UnknownId)
    }

    fn resolve_vars(&self, sel: &Selector) -> Result<Vec<usize>> {
        sel.resolve(&self.var_names).map_err(Error::UnknownVariable)
    }

    /// Subset by observation and variable selectors; the tensor stays
    /// three-dimensional and the selector order is preserved.
    pub fn subset(&self, obs: &Selector, vars: &Selector) -> Result<Mfd> {
        let oi = self.resolve_obs(obs)?;
        let vi = self.resolve_vars(vars)?;
        let coef = vi
            .iter()
            .map(|&p| self.coef[p].select_columns(oi.iter()))
            .collect();
        let mut out = Mfd::new(
            self.basis.clone(),
            coef,
            oi.iter().map(|&i| self.obs_ids[i].clone()).collect(),
            vi.iter().map(|&p| self.var_names[p].clone()).collect(),
        )?;
        if let Some(raw) = &self.raw {
            let keep_ids: std::collections::HashSet<&str> =
                out.obs_ids.iter().map(|s| s.as_str()).collect();
            out.raw = Some(
                raw.iter()
                    .filter(|r| keep_ids.contains(r.id.as_str()))
                    .cloned()
                    .collect(),
            );
        }
        Ok(out)
    }

    pub fn subset_obs_indices(&self, idx: &[usize]) -> Result<Mfd> {
        self.subset(&Selector::Indices(idx.to_vec()), &Selector::All)
    }

    /// Sum over matched variables of the basis inner products:
    /// entry (i, j) = sum_p integral a_ip(t) b_jp(t) dt.
    pub fn inner_product(&self, other: &Mfd) -> Result<DMatrix<f64>> {
        if self.basis != other.basis || self.var_names != other.var_names {
            return Err(Error::BasisMismatch);
        }
        let w = self.basis.gram_matrix();
        let mut out = DMatrix::zeros(self.n_obs(), other.n_obs());
        for p in 0..self.n_vars() {
            out += self.coef[p].transpose() * &w * &other.coef[p];
        }
        Ok(out)
    }

    /// Pointwise empirical standardization on a 500-point grid, re-smoothed
    /// onto the shared basis with lambda = 0.
    pub fn standardize(&self) -> Result<(Mfd, FunctionalSummary)> {
        if self.n_obs() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.n_obs(),
            });
        }
        let summary = self.summary()?;
        let std = summary.standardize(self)?;
        Ok((std, summary))
    }

    /// Pointwise sample mean and sd functions of this data set.
    pub fn summary(&self) -> Result<FunctionalSummary> {
        let (lo, hi) = self.basis.domain();
        let grid = basis::linspace(lo, hi, STD_GRID_SIZE);
        let n = self.n_obs() as f64;
        let mut mean_coef = Vec::new();
        let mut sd_coef = Vec::new();
        for p in 0..self.n_vars() {
            let vals = self.eval_all(p, &grid)?;
            let mut mean = DVector::zeros(grid.len());
            let mut sd = DVector::zeros(grid.len());
            for j in 0..grid.len() {
                let row = vals.row(j);
                let m = row.sum() / n;
                let ss: f64 = row.iter().map(|v| (v - m) * (v - m)).sum();
                let s = (ss / (n - 1.0)).sqrt();
                if s < 1e-12 {
                    return Err(Error::DegenerateVariable(self.var_names[p].clone()));
                }
                mean[j] = m;
                sd[j] = s;
            }
            let mfit = project_onto_basis(&grid, &mean, &self.basis)?;
            let sfit = project_onto_basis(&grid, &sd, &self.basis)?;
            mean_coef.push(mfit);
            sd_coef.push(sfit);
        }
        let one = |coef: Vec<DVector<f64>>| -> Result<Mfd> {
            let mats = coef
                .into_iter()
                .map(|c| DMatrix::from_column_slice(self.basis.n_basis(), 1, c.as_slice()))
                .collect();
            Mfd::new(
                self.basis.clone(),
                mats,
                vec!["summary".into()],
                self.var_names.clone(),
            )
        };
        Ok(FunctionalSummary {
            mean_fn: one(mean_coef)?,
            sd_fn: one(sd_coef)?,
        })
    }
}

impl FunctionalSummary {
    /// Standardize a compatible data set pointwise by this summary.
    pub fn standardize(&self, x: &Mfd) -> Result<Mfd> {
        if x.basis != self.mean_fn.basis || x.var_names != self.mean_fn.var_names {
            return Err(Error::BasisMismatch);
        }
        let (lo, hi) = x.basis.domain();
        let grid = basis::linspace(lo, hi, STD_GRID_SIZE);
        let mut coef = Vec::new();
        for p in 0..x.n_vars() {
            let vals = x.eval_all(p, &grid)?;
            let mean = self.mean_fn.eval(p, 0, &grid)?;
            let sd = self.sd_fn.eval(p, 0, &grid)?;
            let mut out = DMatrix::zeros(grid.len(), x.n_obs());
            for j in 0..grid.len() {
                let s = sd[j];
                if s.abs() < 1e-12 {
                    return Err(Error::DegenerateVariable(x.var_names[p].clone()));
                }
                for i in 0..x.n_obs() {
                    out[(j, i)] = (vals[(j, i)] - mean[j]) / s;
                }
            }
            let fit = basis::smooth_penalized(&grid, &out, &x.basis, 0.0)?;
            coef.push(fit.coefficients);
        }
        Mfd::new(
            x.basis.clone(),
            coef,
            x.obs_ids.to_vec(),
            x.var_names.to_vec(),
        )
    }

    /// Undo the standardization: x_raw = x_std * sd + mean, pointwise.
    pub fn destandardize(&self, x: &Mfd) -> Result<Mfd> {
        if x.basis != self.mean_fn.basis || x.var_names != self.mean_fn.var_names {
            return Err(Error::BasisMismatch);
        }
        let (lo, hi) = x.basis.domain();
        let grid = basis::linspace(lo, hi, STD_GRID_SIZE);
        let mut coef = Vec::new();
        for p in 0..x.n_vars() {
            let vals = x.eval_all(p, &grid)?;
            let mean = self.mean_fn.eval(p, 0, &grid)?;
            let sd = self.sd_fn.eval(p, 0, &grid)?;
            let mut out = DMatrix::zeros(grid.len(), x.n_obs());
            for j in 0..grid.len() {
                for i in 0..x.n_obs() {
                    out[(j, i)] = vals[(j, i)] * sd[j] + mean[j];
                }
            }
            let fit = basis::smooth_penalized(&grid, &out, &x.basis, 0.0)?;
            coef.push(fit.coefficients);
        }
        Mfd::new(
            x.basis.clone(),
            coef,
            x.obs_ids.to_vec(),
            x.var_names.to_vec(),
        )
    }
}

/// Unpenalized least-squares projection of dense grid values onto the basis.
pub(crate) fn project_onto_basis(grid: &[f64], values: &DVector<f64>, b: &BSplineBasis) -> Result<DVector<f64>> {
    let y = DMatrix::from_column_slice(values.len(), 1, values.as_slice());
    let fit = basis::smooth_penalized(grid, &y, b, 0.0)?;
    Ok(fit.coefficients.column(0).into_owned())
}

/// Observation / variable selector, by index or by name.
#[derive(Debug, Clone)]
pub enum Selector {
    All,
    Indices(Vec<usize>),
    Names(Vec<String>),
}

impl Selector {
    pub fn names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Selector::Names(names.into_iter().map(Into::into).collect())
    }

    fn resolve(&self, labels: &[String]) -> std::result::Result<Vec<usize>, String> {
        match self {
            Selector::All => Ok((0..labels.len()).collect()),
            Selector::Indices(idx) => {
                for &i in idx {
                    if i >= labels.len() {
                        return Err(format!("index {i}"));
                    }
                }
                Ok(idx.clone())
            }
            Selector::Names(names) => names
                .iter()
                .map(|n| {
                    labels
                        .iter()
                        .position(|l| l == n)
                        .ok_or_else(|| n.clone())
                })
                .collect(),
        }
    }
}

/// Build an Mfd from matrices observed on a shared grid, one matrix (n x g)
/// per variable. One GCV lambda is selected per (variable, curve); each
/// lambda value needs a single factorization per variable.
pub fn mfd_from_grid(
    grid: &[f64],
    data: &[(String, DMatrix<f64>)],
    n_basis: usize,
    lambda_grid: &[f64],
) -> Result<Mfd> {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mfd_from_grid_on(grid, (lo, hi), data, n_basis, lambda_grid)
}

/// As [`mfd_from_grid`], but with the basis domain given explicitly; the
/// grid need not reach either endpoint.
pub fn mfd_from_grid_on(
    grid: &[f64],
    domain: (f64, f64),
    data: &[(String, DMatrix<f64>)],
    n_basis: usize,
    lambda_grid: &[f64],
) -> Result<Mfd> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if lambda_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = data[0].1.nrows();
    let g = grid.len();
    for (name, m) in data {
        if m.nrows() != n || m.ncols() != g {
            return Err(Error::ShapeMismatch(format!(
                "variable {name} is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                n,
                g
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
    }
    let basis = BSplineBasis::new(domain.0, domain.1, n_basis)?;
    let mut coef = Vec::new();
    for (_, m) in data {
        // values as g x n
        let y = m.transpose();
        let mut fits: Vec<SmoothFit> = Vec::new();
        for &lambda in lambda_grid {
            match basis::smooth_penalized(grid, &y, &basis, lambda) {
                Ok(f) => fits.push(f),
                Err(Error::SingularSystem) => continue,
                Err(e) => return Err(e),
            }
        }
        if fits.is_empty() {
            return Err(Error::SingularSystem);
        }
        let mut out = DMatrix::zeros(n_basis, n);
        for i in 0..n {
            let mut best: Option<&SmoothFit> = None;
            for f in &fits {
                if !f.gcv[i].is_finite() {
                    continue;
                }
                best = match best {
                    None => Some(f),
                    Some(b) => {
                        if f.gcv[i] < b.gcv[i] || (f.gcv[i] == b.gcv[i] && f.lambda > b.lambda) {
                            Some(f)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            let chosen = best.ok_or(Error::AllGcvNonFinite)?;
            out.set_column(i, &chosen.coefficients.column(i));
        }
        coef.push(out);
    }
    Mfd::new(
        basis,
        coef,
        (1..=n).map(|i| i.to_string()).collect(),
        data.iter().map(|(name, _)| name.clone()).collect(),
    )
}

/// Build an Mfd from long-format records; each curve may have its own grid.
/// Variable order and observation order follow first appearance unless
/// `variables` is given.
pub fn mfd_from_long(
    records: &[LongRecord],
    domain: (f64, f64),
    variables: Option<&[String]>,
    n_basis: usize,
    lambda_grid: &[f64],
) -> Result<Mfd> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    if lambda_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (lo, hi) = domain;
    let basis = BSplineBasis::new(lo, hi, n_basis)?;
    let mut ids: Vec<String> = Vec::new();
    let mut vars: Vec<String> = match variables {
        Some(v) => v.to_vec(),
        None => Vec::new(),
    };
    for r in records {
        if r.arg < lo - 1e-12 || r.arg > hi + 1e-12 {
            return Err(Error::ArgOutOfDomain {
                id: r.id.clone(),
                arg: r.arg,
            });
        }
        if !ids.contains(&r.id) {
            ids.push(r.id.clone());
        }
        if variables.is_none() {
            for v in r.values.keys() {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
    }
    let mut coef: Vec<DMatrix<f64>> = vars
        .iter()
        .map(|_| DMatrix::zeros(n_basis, ids.len()))
        .collect();
    for (i, id) in ids.iter().enumerate() {
        for (p, var) in vars.iter().enumerate() {
            let mut pts: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| &r.id == id)
                .filter_map(|r| r.values.get(var).map(|&v| (r.arg, v)))
                .collect();
            if pts.len() < n_basis {
                return Err(Error::InsufficientPoints {
                    id: id.clone(),
                    var: var.clone(),
                    n_points: pts.len(),
                    needed: n_basis,
                });
            }
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let grid: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let vals = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
            let fit = basis::select_lambda_gcv(&grid, &vals, &basis, lambda_grid)?;
            coef[p].set_column(i, &fit.coefficients.column(0));
        }
    }
    let mut out = Mfd::new(basis, coef, ids, vars)?;
    out.raw = Some(records.to_vec());
    Ok(out)
}
