//! Scalar-on-function regression on principal-component scores: component
//! selection (variance / PRESS / GCV), least-squares coefficients, prediction
//! intervals, the three-chart monitoring scheme, and bootstrap coefficient
//! uncertainty.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::basis;
use crate::charts::{self, AlphaSpec, ChartFrame};
use crate::error::{Error, Result};
use crate::mfd::Mfd;
use crate::mfpca::{fit_mfpca, PcaModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionRule {
    Variance,
    Press,
    Gcv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SofModel {
    pub pca: PcaModel,
    /// Selected component indices, in decreasing-eigenvalue order.
    pub selected: Vec<usize>,
    /// Intercept; equals the training mean of y.
    pub beta0: f64,
    /// Score-space slope per selected component.
    pub b: Vec<f64>,
    /// Residual variance with n - M - 1 degrees of freedom.
    pub sigma2_hat: f64,
    /// Functional coefficient, one observation with P variables, on the
    /// standardized covariate scale.
    pub beta_fn: Mfd,
    pub y_train: Vec<f64>,
    pub selection_rule: SelectionRule,
    pub tot_variance_explained: f64,
}

/// Leave-one-out PRESS of the regression of y on [1, scores(cols)] using the
/// hat-diagonal identity; also returns plain SSE for GCV.
fn press_sse(y: &DVector<f64>, scores: &DMatrix<f64>, cols: &[usize]) -> Result<(f64, f64)> {
    let n = y.len();
    let m = cols.len();
    let mut z = DMatrix::zeros(n, m + 1);
    for i in 0..n {
        z[(i, 0)] = 1.0;
        for (j, &c) in cols.iter().enumerate() {
            z[(i, j + 1)] = scores[(i, c)];
        }
    }
    let ztz = z.transpose() * &z;
    let chol = ztz
        .cholesky()
        .ok_or(Error::SingularSystem)?;
    let beta = chol.solve(&(z.transpose() * y));
    let fitted = &z * &beta;
    let resid = y - fitted;
    let sse = resid.norm_squared();
    // hat diagonal h_ii = z_i (Z'Z)^-1 z_i'
    let zi_solve = chol.solve(&z.transpose()); // (m+1) x n
    let mut press = 0.0;
    for i in 0..n {
        let h: f64 = (0..m + 1).map(|j| z[(i, j)] * zi_solve[(j, i)]).sum();
        let denom = 1.0 - h;
        if denom.abs() < 1e-12 {
            return Err(Error::SingularSystem);
        }
        press += (resid[i] / denom).powi(2);
    }
    Ok((press, sse))
}

fn criterion(
    rule: SelectionRule,
    y: &DVector<f64>,
    scores: &DMatrix<f64>,
    cols: &[usize],
) -> Result<f64> {
    let n = y.len() as f64;
    let (press, sse) = press_sse(y, scores, cols)?;
    Ok(match rule {
        SelectionRule::Press => press,
        SelectionRule::Gcv => {
            let df = cols.len() as f64 + 1.0;
            (sse / n) / (1.0 - df / n).powi(2)
        }
        SelectionRule::Variance => unreachable!("variance rule has no criterion"),
    })
}

pub fn fit_sof_pc(
    y: &[f64],
    x: &Mfd,
    tot_variance_explained: f64,
    selection: SelectionRule,
) -> Result<SofModel> {
    let n = x.n_obs();
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} responses for {n} observations",
            y.len()
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let pca = fit_mfpca(x)?;
    let yv = DVector::from_row_slice(y);
    let selected: Vec<usize> = match selection {
        SelectionRule::Variance => pca.components_for_variance(tot_variance_explained),
        rule => {
            // greedy single pass in decreasing-eigenvalue order: keep a
            // candidate iff it strictly decreases the criterion
            let mut current: Vec<usize> = Vec::new();
            let mut best = criterion(rule, &yv, &pca.scores, &current)?;
            for j in 0..pca.n_components() {
                if n <= current.len() + 2 {
                    break; // keep at least one residual dof
                }
                let mut cand = current.clone();
                cand.push(j);
                match criterion(rule, &yv, &pca.scores, &cand) {
                    Ok(c) if c < best => {
                        best = c;
                        current = cand;
                    }
                    _ => {}
                }
            }
            current
        }
    };
    let m = selected.len();
    if n <= m + 1 {
        return Err(Error::InsufficientDof { n, m });
    }
    let beta0 = yv.sum() / n as f64;
    let b: Vec<f64> = selected
        .iter()
        .map(|&c| {
            let col = pca.scores.column(c);
            let num: f64 = col.iter().zip(y.iter()).map(|(s, yy)| s * yy).sum();
            let den: f64 = col.iter().map(|s| s * s).sum();
            num / den
        })
        .collect();
    let rss: f64 = (0..n)
        .map(|i| {
            let yhat: f64 = beta0
                + selected
                    .iter()
                    .zip(b.iter())
                    .map(|(&c, &bb)| bb * pca.scores[(i, c)])
                    .sum::<f64>();
            (y[i] - yhat).powi(2)
        })
        .sum();
    let sigma2_hat = rss / (n - m - 1) as f64;
    // beta_fn = sum_m b_m psi_m in coefficient space
    let d = pca.eigen_coef();
    let pk = d.nrows();
    let mut beta_coef = DMatrix::zeros(1, pk);
    for (idx, &c) in selected.iter().enumerate() {
        for r in 0..pk {
            beta_coef[(0, r)] += b[idx] * d[(r, c)];
        }
    }
    let beta_fn = Mfd::from_stacked(
        x.basis().clone(),
        &beta_coef,
        vec!["beta".into()],
        x.var_names().to_vec(),
    )?;
    Ok(SofModel {
        pca,
        selected,
        beta0,
        b,
        sigma2_hat,
        beta_fn,
        y_train: y.to_vec(),
        selection_rule: selection,
        tot_variance_explained,
    })
}

impl SofModel {
    /// Functional coefficient on the original data scale: the standardized
    /// coefficient divided pointwise by the training sd function, so that
    /// yhat = beta0 + sum_p int (X_p - mean_p) beta_p. This scale does not
    /// depend on the standardization and is the one to plot and compare.
    pub fn beta_data_scale(&self) -> Result<Mfd> {
        let basis = self.beta_fn.basis();
        let grid = basis::linspace(basis.domain().0, basis.domain().1, 500);
        let k = basis.n_basis();
        let mut coef = Vec::with_capacity(self.beta_fn.n_vars());
        for p in 0..self.beta_fn.n_vars() {
            let bv = self.beta_fn.eval(p, 0, &grid)?;
            let sv = self.pca.summary.sd_fn.eval(p, 0, &grid)?;
            let ratio = DVector::from_fn(bv.len(), |i, _| bv[i] / sv[i]);
            let c = crate::mfd::project_onto_basis(&grid, &ratio, basis)?;
            coef.push(DMatrix::from_fn(k, 1, |r, _| c[r]));
        }
        Mfd::new(
            basis.clone(),
            coef,
            vec!["beta".into()],
            self.beta_fn.var_names().to_vec(),
        )
    }
}

/// Per-observation prediction with interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SofPrediction {
    pub yhat: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub t2_new: Vec<f64>,
}

pub fn predict_sof(model: &SofModel, xnew: &Mfd, alpha_y: f64) -> Result<SofPrediction> {
    if !(0.0..1.0).contains(&alpha_y) || alpha_y == 0.0 {
        return Err(Error::InvalidConfig(format!("alpha_y {alpha_y} out of (0,1)")));
    }
    let n_train = model.pca.n_train;
    let m = model.selected.len();
    let dof = (n_train - m - 1) as f64;
    let tq = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?
        .inverse_cdf(1.0 - alpha_y / 2.0);
    let scores = model.pca.project_scores(xnew, &model.selected)?;
    let n = scores.nrows();
    let mut out = SofPrediction {
        yhat: Vec::with_capacity(n),
        lo: Vec::with_capacity(n),
        hi: Vec::with_capacity(n),
        t2_new: Vec::with_capacity(n),
    };
    for i in 0..n {
        let yhat: f64 = model.beta0
            + model
                .b
                .iter()
                .enumerate()
                .map(|(j, &bb)| bb * scores[(i, j)])
                .sum::<f64>();
        let t2: f64 = model
            .selected
            .iter()
            .enumerate()
            .map(|(j, &c)| scores[(i, j)].powi(2) / model.pca.eigenvalues[c])
            .sum();
        let half = tq * model.sigma2_hat.sqrt() * (1.0 + t2 / (n_train as f64 - 1.0)).sqrt();
        out.yhat.push(yhat);
        out.lo.push(yhat - half);
        out.hi.push(yhat + half);
        out.t2_new.push(t2);
    }
    Ok(out)
}

/// Three-chart scheme: covariate T²/SPE plus the response prediction-error
/// chart with per-observation limits.
pub fn control_charts_sof_pc(
    model: &SofModel,
    tuning_x: Option<&Mfd>,
    y_new: &[f64],
    x_new: &Mfd,
    alpha: &AlphaSpec,
) -> Result<ChartFrame> {
    if y_new.len() != x_new.n_obs() {
        return Err(Error::ShapeMismatch(format!(
            "{} responses for {} observations",
            y_new.len(),
            x_new.n_obs()
        )));
    }
    let alpha_y = alpha
        .y
        .ok_or_else(|| Error::InvalidConfig("sof charts need alpha.y".into()))?;
    let pred = predict_sof(model, x_new, alpha_y)?;
    let y_err: Vec<f64> = y_new
        .iter()
        .zip(pred.yhat.iter())
        .map(|(&y, &yh)| y - yh)
        .collect();
    let y_lo: Vec<f64> = pred
        .lo
        .iter()
        .zip(pred.yhat.iter())
        .map(|(&lo, &yh)| lo - yh)
        .collect();
    let y_hi: Vec<f64> = pred
        .hi
        .iter()
        .zip(pred.yhat.iter())
        .map(|(&hi, &yh)| hi - yh)
        .collect();
    charts::charts_with_response(
        &model.pca,
        &model.selected,
        tuning_x,
        x_new,
        alpha,
        y_err,
        y_lo,
        y_hi,
    )
}

/// Resample rows with replacement into a fresh container (ids renumbered so
/// duplicates are allowed).
fn resample_mfd(x: &Mfd, idx: &[usize]) -> Result<Mfd> {
    let k = x.basis().n_basis();
    let coef: Vec<DMatrix<f64>> = (0..x.n_vars())
        .map(|p| {
            DMatrix::from_fn(k, idx.len(), |r, c| x.coef(p)[(r, idx[c])])
        })
        .collect();
    Mfd::new(
        x.basis().clone(),
        coef,
        (0..idx.len()).map(|i| format!("r{i}")).collect(),
        x.var_names().to_vec(),
    )
}

/// Refit the full pipeline on bootstrap resamples; failed replicates are
/// returned as errors in place, never dropped. Coefficients come back on
/// the data scale, which is invariant to each replicate's standardization.
pub fn bootstrap_beta(
    model: &SofModel,
    x: &Mfd,
    nboot: usize,
    seed: u64,
) -> Vec<Result<Mfd>> {
    let n = x.n_obs();
    (0..nboot)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let yb: Vec<f64> = idx.iter().map(|&i| model.y_train[i]).collect();
            let xb = resample_mfd(x, &idx)?;
            let fit = fit_sof_pc(
                &yb,
                &xb,
                model.tot_variance_explained,
                model.selection_rule,
            )?;
            fit.beta_data_scale()
        })
        .collect()
}
