//! Chart engine: T².and SPE statistics, empirical control limits,
//! per-variable contributions with limits, and ChartFrame assembly for the
//! PCA-based monitoring scheme.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfd::Mfd;
use crate::mfpca::PcaModel;

/// Type-I error rates per chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSpec {
    pub t2: f64,
    pub spe: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

impl AlphaSpec {
    /// Defaults for the two-chart PCA scheme.
    pub fn pca_default() -> Self {
        AlphaSpec { t2: 0.025, spe: 0.025, y: None }
    }

    /// Defaults for the three-chart regression scheme.
    pub fn sof_default() -> Self {
        AlphaSpec { t2: 0.0125, spe: 0.0125, y: Some(0.025) }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| a > 0.0 && a < 1.0;
        if !ok(self.t2) || !ok(self.spe) || self.y.map_or(false, |a| !ok(a)) {
            return Err(Error::InvalidConfig("alpha rates must lie in (0,1)".into()));
        }
        Ok(())
    }
}

/// Per-observation monitoring record consumed by serialization and rendering.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartFrame {
    pub obs_ids: Vec<String>,
    pub var_names: Vec<String>,
    pub t2: Vec<f64>,
    pub t2_lim: f64,
    pub spe: Vec<f64>,
    pub spe_lim: f64,
    /// Response prediction error y* - yhat*, when a regression chart owns it.
    pub y: Option<Vec<f64>>,
    pub y_lo: Option<Vec<f64>>,
    pub y_hi: Option<Vec<f64>>,
    pub oc_t2: Vec<bool>,
    pub oc_spe: Vec<bool>,
    pub oc_y: Option<Vec<bool>>,
    /// n x P contribution matrices.
    pub cont_t2: DMatrix<f64>,
    pub cont_spe: DMatrix<f64>,
    pub cont_lim_t2: Vec<f64>,
    pub cont_lim_spe: Vec<f64>,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl ChartFrame {
    pub fn n_obs(&self) -> usize {
        self.obs_ids.len()
    }

    /// Any statistic out of control for observation i.
    pub fn any_oc(&self, i: usize) -> bool {
        self.oc_t2[i]
            || self.oc_spe[i]
            || self.oc_y.as_ref().map_or(false, |v| v[i])
    }

    /// One row per observation; floats at 17 significant digits, empty
    /// fields for absent response columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,t2,t2_lim,spe,spe_lim,y,y_lo,y_hi,oc_t2,oc_spe,oc_y");
        for v in &self.var_names {
            out.push_str(&format!(",cont_t2_{v}"));
        }
        for v in &self.var_names {
            out.push_str(&format!(",cont_spe_{v}"));
        }
        for v in &self.var_names {
            out.push_str(&format!(",cont_lim_t2_{v}"));
        }
        for v in &self.var_names {
            out.push_str(&format!(",cont_lim_spe_{v}"));
        }
        out.push('\n');
        for i in 0..self.n_obs() {
            out.push_str(&self.obs_ids[i]);
            for v in [self.t2[i], self.t2_lim, self.spe[i], self.spe_lim] {
                out.push(',');
                out.push_str(&fmt17(v));
            }
            for opt in [&self.y, &self.y_lo, &self.y_hi] {
                out.push(',');
                if let Some(col) = opt {
                    out.push_str(&fmt17(col[i]));
                }
            }
            out.push_str(&format!(",{},{}", self.oc_t2[i], self.oc_spe[i]));
            out.push(',');
            if let Some(oc) = &self.oc_y {
                out.push_str(&oc[i].to_string());
            }
            for p in 0..self.var_names.len() {
                out.push(',');
                out.push_str(&fmt17(self.cont_t2[(i, p)]));
            }
            for p in 0..self.var_names.len() {
                out.push(',');
                out.push_str(&fmt17(self.cont_spe[(i, p)]));
            }
            for p in 0..self.var_names.len() {
                out.push(',');
                out.push_str(&fmt17(self.cont_lim_t2[p]));
            }
            for p in 0..self.var_names.len() {
                out.push(',');
                out.push_str(&fmt17(self.cont_lim_spe[p]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Hotelling T² per observation from a full score matrix over the given
/// component columns.
pub fn t2_statistic(
    model: &PcaModel,
    scores: &DMatrix<f64>,
    components: &[usize],
) -> Result<Vec<f64>> {
    for &m in components {
        if model.eigenvalues.get(m).map_or(true, |&l| l <= 0.0) {
            return Err(Error::ZeroEigenvalue(m));
        }
    }
    Ok((0..scores.nrows())
        .map(|i| {
            components
                .iter()
                .map(|&m| scores[(i, m)].powi(2) / model.eigenvalues[m])
                .sum()
        })
        .collect())
}

/// Everything the chart assembly needs for one data set, computed from
/// standardized stacked coefficients.
struct StatBundle {
    t2: Vec<f64>,
    spe: Vec<f64>,
    cont_t2: DMatrix<f64>,
    cont_spe: DMatrix<f64>,
}

fn stat_bundle(
    model: &PcaModel,
    c_std: &DMatrix<f64>,
    components: &[usize],
) -> Result<StatBundle> {
    for &m in components {
        if model.eigenvalues.get(m).map_or(true, |&l| l <= 0.0) {
            return Err(Error::ZeroEigenvalue(m));
        }
    }
    let n = c_std.nrows();
    let p = model.eigenfunctions.n_vars();
    let k = model.eigenfunctions.basis().n_basis();
    let w = model.eigenfunctions.basis().gram_matrix();
    let scores = model.scores_from_std_coef(c_std);
    let d = model.eigen_coef();
    let d_sel = d.select_columns(components.iter());
    let scores_sel = scores.select_columns(components.iter());
    let resid = c_std - &scores_sel * d_sel.transpose();
    let mut cont_t2 = DMatrix::zeros(n, p);
    let mut cont_spe = DMatrix::zeros(n, p);
    // block-p partial inner products <x_i, psi_m>_p = c_ip W d_mp
    for vp in 0..p {
        let cw = c_std.columns(vp * k, k) * &w;
        let ip = &cw * d.rows(vp * k, k); // n x n_comp
        for i in 0..n {
            cont_t2[(i, vp)] = components
                .iter()
                .map(|&m| scores[(i, m)] / model.eigenvalues[m] * ip[(i, m)])
                .sum();
        }
        let rw = resid.columns(vp * k, k) * &w;
        for i in 0..n {
            let sq: f64 = (0..k).map(|j| rw[(i, j)] * resid[(i, vp * k + j)]).sum();
            cont_spe[(i, vp)] = sq;
        }
    }
    let t2 = t2_statistic(model, &scores, components)?;
    let spe = (0..n).map(|i| cont_spe.row(i).sum()).collect();
    Ok(StatBundle { t2, spe, cont_t2, cont_spe })
}

/// Squared prediction error: W-metric norm of the reconstruction residual on
/// the standardized scale.
pub fn spe_statistic(model: &PcaModel, xnew: &Mfd, components: &[usize]) -> Result<Vec<f64>> {
    let c = model.std_coef(xnew)?;
    Ok(stat_bundle(model, &c, components)?.spe)
}

/// Per-variable decompositions of T² and SPE.
pub fn contributions(
    model: &PcaModel,
    xnew: &Mfd,
    components: &[usize],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let c = model.std_coef(xnew)?;
    let b = stat_bundle(model, &c, components)?;
    Ok((b.cont_t2, b.cont_spe))
}

/// Upper empirical limit: ascending order statistic at 1-based index
/// ceil((1-alpha) n).
pub fn empirical_limit(stats: &[f64], alpha: f64) -> Result<f64> {
    if stats.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidConfig(format!("alpha {alpha} out of (0,1)")));
    }
    let mut s: Vec<f64> = stats.to_vec();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let idx = (((1.0 - alpha) * n as f64).ceil() as usize).clamp(1, n);
    Ok(s[idx - 1])
}

/// Assemble the T²/SPE ChartFrame for new data; limits come from the tuning
/// set when given, otherwise from the training statistics.
pub fn control_charts_pca(
    model: &PcaModel,
    components: Option<&[usize]>,
    tuning: Option<&Mfd>,
    newdata: &Mfd,
    alpha: &AlphaSpec,
) -> Result<ChartFrame> {
    alpha.validate()?;
    let default_comps;
    let comps: &[usize] = match components {
        Some(c) => {
            if c.is_empty() {
                return Err(Error::InvalidConfig("empty component set".into()));
            }
            c
        }
        None => {
            default_comps = model.components_for_variance(0.95);
            &default_comps
        }
    };
    let c_ref = match tuning {
        Some(t) => model.std_coef(t)?,
        None => model.train_coef.clone(),
    };
    let reference = stat_bundle(model, &c_ref, comps)?;
    let c_new = model.std_coef(newdata)?;
    let new = stat_bundle(model, &c_new, comps)?;
    assemble_frame(newdata, new, &reference, alpha)
}

fn assemble_frame(
    newdata: &Mfd,
    new: StatBundle,
    reference: &StatBundle,
    alpha: &AlphaSpec,
) -> Result<ChartFrame> {
    let p = newdata.n_vars();
    let t2_lim = empirical_limit(&reference.t2, alpha.t2)?;
    let spe_lim = empirical_limit(&reference.spe, alpha.spe)?;
    let mut cont_lim_t2 = Vec::with_capacity(p);
    let mut cont_lim_spe = Vec::with_capacity(p);
    for vp in 0..p {
        let col_t2: Vec<f64> = reference.cont_t2.column(vp).iter().cloned().collect();
        let col_spe: Vec<f64> = reference.cont_spe.column(vp).iter().cloned().collect();
        cont_lim_t2.push(empirical_limit(&col_t2, alpha.t2)?);
        cont_lim_spe.push(empirical_limit(&col_spe, alpha.spe)?);
    }
    let oc_t2 = new.t2.iter().map(|&v| v > t2_lim).collect();
    let oc_spe = new.spe.iter().map(|&v| v > spe_lim).collect();
    Ok(ChartFrame {
        obs_ids: newdata.obs_ids().to_vec(),
        var_names: newdata.var_names().to_vec(),
        t2: new.t2,
        t2_lim,
        spe: new.spe,
        spe_lim,
        y: None,
        y_lo: None,
        y_hi: None,
        oc_t2,
        oc_spe,
        oc_y: None,
        cont_t2: new.cont_t2,
        cont_spe: new.cont_spe,
        cont_lim_t2,
        cont_lim_spe,
    })
}

/// Shared by the regression schemes: same T²/SPE machinery plus a response
/// chart filled in by the caller.
pub(crate) fn charts_with_response(
    model: &PcaModel,
    components: &[usize],
    tuning: Option<&Mfd>,
    newdata: &Mfd,
    alpha: &AlphaSpec,
    y_err: Vec<f64>,
    y_lo: Vec<f64>,
    y_hi: Vec<f64>,
) -> Result<ChartFrame> {
    let mut frame = control_charts_pca(model, Some(components), tuning, newdata, alpha)?;
    let oc_y = y_err
        .iter()
        .zip(y_lo.iter().zip(y_hi.iter()))
        .map(|(&e, (&lo, &hi))| e < lo || e > hi)
        .collect();
    frame.y = Some(y_err);
    frame.y_lo = Some(y_lo);
    frame.y_hi = Some(y_hi);
    frame.oc_y = Some(oc_y);
    Ok(frame)
}
