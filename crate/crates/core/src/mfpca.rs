//! Multivariate functional principal component analysis on the shared
//! B-spline basis: a coefficient-space symmetric eigenproblem through the
//! Gram-matrix square root, plus projection of new data and truncated
//! reconstruction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfd::{FunctionalSummary, Mfd};

/// Eigenvalues within this band of zero are snapped to zero and their
/// components dropped from the usable set.
const EIGEN_FLOOR: f64 = 1e-10;

/// How the training data is put on a common scale before the eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scaling {
    /// Subtract the pointwise mean function and divide by the pointwise sd.
    Standardize,
    /// Subtract the mean function only (used for residual PCA, where the
    /// scale already carries meaning).
    CenterOnly,
}

/// Fitted MFPCA model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    /// Eigenfunctions as an Mfd with one observation per component.
    pub eigenfunctions: Mfd,
    /// Non-increasing positive eigenvalues (score variances).
    pub eigenvalues: Vec<f64>,
    /// Training scores, n x n_components.
    pub scores: DMatrix<f64>,
    /// Fraction of variance per component; sums to 1.
    pub var_prop: Vec<f64>,
    /// Standardization applied to the training data and to new data.
    pub summary: FunctionalSummary,
    pub scaling: Scaling,
    pub n_train: usize,
    /// Stacked standardized training coefficients (n x P*K), kept so charts
    /// can fall back to training statistics when no tuning data is given.
    pub train_coef: DMatrix<f64>,
}

/// Multiply the stacked coefficient matrix (rows are observations, P blocks
/// of K columns) by the block-diagonal Gram matrix.
fn apply_gram(c: &DMatrix<f64>, w: &DMatrix<f64>, n_vars: usize) -> DMatrix<f64> {
    let k = w.nrows();
    let mut out = DMatrix::zeros(c.nrows(), c.ncols());
    for p in 0..n_vars {
        let block = c.columns(p * k, k) * w;
        out.columns_mut(p * k, k).copy_from(&block);
    }
    out
}

/// Symmetric square root (and inverse square root) of a PD matrix.
fn sqrt_pair(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(w.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut s = DVector::zeros(eig.eigenvalues.len());
    let mut si = DVector::zeros(eig.eigenvalues.len());
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v <= 1e-14 * max {
            return Err(Error::EigenFailure("Gram matrix not positive definite".into()));
        }
        s[i] = v.sqrt();
        si[i] = 1.0 / v.sqrt();
    }
    let q = &eig.eigenvectors;
    let half = q * DMatrix::from_diagonal(&s) * q.transpose();
    let inv_half = q * DMatrix::from_diagonal(&si) * q.transpose();
    Ok((half, inv_half))
}

fn block_expand(m: &DMatrix<f64>, n_vars: usize) -> DMatrix<f64> {
    let k = m.nrows();
    let mut out = DMatrix::zeros(n_vars * k, n_vars * k);
    for p in 0..n_vars {
        out.view_mut((p * k, p * k), (k, k)).copy_from(m);
    }
    out
}

/// Fit MFPCA on unstandardized data; standardization is performed internally
/// and recorded in the model.
pub fn fit_mfpca(x: &Mfd) -> Result<PcaModel> {
    fit_mfpca_scaled(x, Scaling::Standardize)
}

pub fn fit_mfpca_scaled(x: &Mfd, scaling: Scaling) -> Result<PcaModel> {
    let n = x.n_obs();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let summary = match scaling {
        Scaling::Standardize => x.summary()?,
        Scaling::CenterOnly => centering_summary(x)?,
    };
    let xs = summary.standardize(x)?;
    let c = xs.stacked_coef();
    let p = x.n_vars();
    let k = x.basis().n_basis();
    // center columns; means are already ~1e-15 by linearity of the smoother
    let mut cc = c.clone();
    for j in 0..cc.ncols() {
        let m = cc.column(j).sum() / n as f64;
        for i in 0..n {
            cc[(i, j)] -= m;
        }
    }
    let cov = cc.transpose() * &cc / (n as f64 - 1.0);
    let w = x.basis().gram_matrix();
    let (w_half, w_inv_half) = sqrt_pair(&w)?;
    let wh = block_expand(&w_half, p);
    let wih = block_expand(&w_inv_half, p);
    let a = &wh * cov * &wh;
    let a = (&a + a.transpose()) / 2.0;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let m_max = (n - 1).min(p * k);
    let mut eigenvalues = Vec::new();
    let mut cols = Vec::new();
    for &idx in order.iter().take(m_max) {
        let v = eig.eigenvalues[idx];
        if v < -EIGEN_FLOOR {
            return Err(Error::EigenFailure(format!(
                "negative eigenvalue {v} below the floor"
            )));
        }
        if v <= EIGEN_FLOOR {
            continue;
        }
        eigenvalues.push(v);
        cols.push(idx);
    }
    let n_comp = eigenvalues.len();
    let mut d = DMatrix::zeros(p * k, n_comp);
    for (j, &idx) in cols.iter().enumerate() {
        d.set_column(j, &(&wih * eig.eigenvectors.column(idx)));
    }
    let mut scores = apply_gram(&c, &w, p) * &d;
    // sign convention: largest-magnitude training score on each component positive
    for j in 0..n_comp {
        let col = scores.column(j);
        let mut best = 0usize;
        for i in 0..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            scores.column_mut(j).neg_mut();
            d.column_mut(j).neg_mut();
        }
    }
    let total: f64 = eigenvalues.iter().sum();
    let var_prop = eigenvalues.iter().map(|v| v / total).collect();
    let eigenfunctions = Mfd::from_stacked(
        x.basis().clone(),
        &d.transpose(),
        (1..=n_comp).map(|m| format!("PC{m}")).collect(),
        x.var_names().to_vec(),
    )?;
    Ok(PcaModel {
        eigenfunctions,
        eigenvalues,
        scores,
        var_prop,
        summary,
        scaling,
        n_train: n,
        train_coef: c,
    })
}

/// A summary that subtracts the coefficient-space mean function and divides
/// by the constant function 1.
fn centering_summary(x: &Mfd) -> Result<FunctionalSummary> {
    let k = x.basis().n_basis();
    let n = x.n_obs() as f64;
    let mean_coef: Vec<DMatrix<f64>> = (0..x.n_vars())
        .map(|p| {
            DMatrix::from_fn(k, 1, |kk, _| x.coef(p).row(kk).sum() / n)
        })
        .collect();
    // coefficient vector of the constant 1 is all ones (partition of unity)
    let ones: Vec<DMatrix<f64>> = (0..x.n_vars())
        .map(|_| DMatrix::from_element(k, 1, 1.0))
        .collect();
    let mean_fn = Mfd::new(
        x.basis().clone(),
        mean_coef,
        vec!["summary".into()],
        x.var_names().to_vec(),
    )?;
    let sd_fn = Mfd::new(
        x.basis().clone(),
        ones,
        vec!["summary".into()],
        x.var_names().to_vec(),
    )?;
    Ok(FunctionalSummary { mean_fn, sd_fn })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Fewest leading components whose cumulative variance proportion
    /// reaches `threshold`.
    pub fn components_for_variance(&self, threshold: f64) -> Vec<usize> {
        let mut cum = 0.0;
        let mut out = Vec::new();
        for (m, &vp) in self.var_prop.iter().enumerate() {
            out.push(m);
            cum += vp;
            if cum >= threshold {
                break;
            }
        }
        out
    }

    /// Coefficient matrix (P*K x n_components) of the eigenfunctions.
    pub fn eigen_coef(&self) -> DMatrix<f64> {
        self.eigenfunctions.stacked_coef().transpose()
    }

    /// Standardize new data by the training summary and project onto the
    /// given components.
    pub fn project_scores(&self, xnew: &Mfd, components: &[usize]) -> Result<DMatrix<f64>> {
        let full = self.project_scores_all(xnew)?;
        Ok(full.select_columns(components.iter()))
    }

    /// Scores on all computed components.
    pub fn project_scores_all(&self, xnew: &Mfd) -> Result<DMatrix<f64>> {
        if xnew.basis() != self.eigenfunctions.basis()
            || xnew.var_names() != self.eigenfunctions.var_names()
        {
            return Err(Error::BasisMismatch);
        }
        let xs = self.summary.standardize(xnew)?;
        Ok(self.scores_from_std_coef(&xs.stacked_coef()))
    }

    /// Scores from already-standardized stacked coefficients.
    pub fn scores_from_std_coef(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let w = self.eigenfunctions.basis().gram_matrix();
        let p = self.eigenfunctions.n_vars();
        apply_gram(c, &w, p) * self.eigen_coef()
    }

    /// Standardized stacked coefficients of new data.
    pub fn std_coef(&self, xnew: &Mfd) -> Result<DMatrix<f64>> {
        if xnew.basis() != self.eigenfunctions.basis()
            || xnew.var_names() != self.eigenfunctions.var_names()
        {
            return Err(Error::BasisMismatch);
        }
        Ok(self.summary.standardize(xnew)?.stacked_coef())
    }

    /// Reconstruction on the standardized scale from scores over the given
    /// components.
    pub fn reconstruct(&self, scores: &DMatrix<f64>, components: &[usize]) -> Result<Mfd> {
        if scores.ncols() != components.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} score columns for {} components",
                scores.ncols(),
                components.len()
            )));
        }
        let d = self.eigen_coef();
        let d_sel = d.select_columns(components.iter());
        let stacked = scores * d_sel.transpose();
        Mfd::from_stacked(
            self.eigenfunctions.basis().clone(),
            &stacked,
            (1..=scores.nrows()).map(|i| i.to_string()).collect(),
            self.eigenfunctions.var_names().to_vec(),
        )
    }

    /// Reconstruction mapped back to the original scale.
    pub fn reconstruct_destandardized(
        &self,
        scores: &DMatrix<f64>,
        components: &[usize],
    ) -> Result<Mfd> {
        let std = self.reconstruct(scores, components)?;
        self.summary.destandardize(&std)
    }
}
