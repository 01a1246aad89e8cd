//! Real-time monitoring over truncated domains.
//!
//! A profile observed up to a fraction `k` of its full domain is smoothed on
//! the truncated interval `(a, a + k (b - a))` and monitored with a model
//! trained on identically truncated historical data. A family of models, one
//! per `k`, lets a chart statistic be tracked as the profile accrues.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::charts::{control_charts_pca, AlphaSpec, ChartFrame};
use crate::error::{Error, Result};
use crate::fof::{fit_fof_pc, regr_cc_fof, FofModel, FofThresholds, ResidualType};
use crate::mfd::{mfd_from_grid_on, mfd_from_long, LongRecord, Mfd};
use crate::mfpca::{fit_mfpca, PcaModel};
use crate::sof::{control_charts_sof_pc, fit_sof_pc, SelectionRule, SofModel};

/// Strictly increasing sequence of domain fractions in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSeq(Vec<f64>);

impl KSeq {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        for w in values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidConfig(format!(
                    "domain fractions must be strictly increasing, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        for &k in &values {
            if !k.is_finite() || k <= 0.0 || k > 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "domain fraction {k} outside (0, 1]"
                )));
            }
        }
        Ok(KSeq(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Default for KSeq {
    /// 0.2, 0.3, ..., 1.0.
    fn default() -> Self {
        KSeq((2..=10).map(|i| i as f64 / 10.0).collect())
    }
}

fn truncated_hi(lo: f64, hi: f64, k: f64) -> f64 {
    lo + k * (hi - lo)
}

/// Smooth grid data onto each truncated domain. Returns one (k, Mfd) pair
/// per fraction; every truncated fit reuses the same number of basis
/// functions on its shorter interval.
pub fn truncate_family_grid(
    grid: &[f64],
    data: &[(String, DMatrix<f64>)],
    obs_ids: Option<&[String]>,
    k_seq: &KSeq,
    n_basis: usize,
    lambda_grid: &[f64],
) -> Result<Vec<(f64, Mfd)>> {
    if grid.is_empty() || data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::with_capacity(k_seq.values().len());
    for &k in k_seq.values() {
        let cut = truncated_hi(lo, hi, k);
        let keep: Vec<usize> = (0..grid.len())
            .filter(|&j| grid[j] <= cut + 1e-12)
            .collect();
        if keep.len() < n_basis {
            return Err(Error::AtK {
                k,
                source: Box::new(Error::InsufficientPoints {
                    id: "*".into(),
                    var: data[0].0.clone(),
                    n_points: keep.len(),
                    needed: n_basis,
                }),
            });
        }
        let sub_grid: Vec<f64> = keep.iter().map(|&j| grid[j]).collect();
        let sub_data: Vec<(String, DMatrix<f64>)> = data
            .iter()
            .map(|(name, m)| (name.clone(), m.select_columns(keep.iter())))
            .collect();
        let mfd = mfd_from_grid_on(&sub_grid, (lo, cut), &sub_data, n_basis, lambda_grid)
            .map_err(|e| Error::AtK { k, source: Box::new(e) })?;
        let mfd = match obs_ids {
            Some(ids) => mfd
                .with_obs_ids(ids.to_vec())
                .map_err(|e| Error::AtK { k, source: Box::new(e) })?,
            None => mfd,
        };
        out.push((k, mfd));
    }
    Ok(out)
}

/// Smooth long-format records onto each truncated domain. Records beyond the
/// truncation point are dropped before smoothing; each curve still needs at
/// least `n_basis` retained points.
pub fn truncate_family_long(
    records: &[LongRecord],
    domain: (f64, f64),
    variables: Option<&[String]>,
    k_seq: &KSeq,
    n_basis: usize,
    lambda_grid: &[f64],
) -> Result<Vec<(f64, Mfd)>> {
    let (lo, hi) = domain;
    let mut out = Vec::with_capacity(k_seq.values().len());
    for &k in k_seq.values() {
        let cut = truncated_hi(lo, hi, k);
        let sub: Vec<LongRecord> = records
            .iter()
            .filter(|r| r.arg <= cut + 1e-12)
            .cloned()
            .collect();
        let mfd = mfd_from_long(&sub, (lo, cut), variables, n_basis, lambda_grid)
            .map_err(|e| Error::AtK { k, source: Box::new(e) })?;
        out.push((k, mfd));
    }
    Ok(out)
}

/// Monitoring scheme applied at every truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RealTimeMode {
    Pca,
    Sof,
    Fof,
}

/// Model fitted at one truncation level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RtModel {
    Pca {
        model: PcaModel,
        components: Vec<usize>,
    },
    Sof(SofModel),
    Fof(FofModel),
}

/// One fitted model per domain fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealTimeFamily {
    pub mode: RealTimeMode,
    pub entries: Vec<(f64, RtModel)>,
}

/// Tuning knobs for the per-k fits; each scheme reads its own fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealTimeParams {
    /// Variance proportion retained by the plain monitoring scheme.
    pub variance_threshold: f64,
    pub sof_variance: f64,
    pub sof_selection: SelectionRule,
    pub fof_residual: ResidualType,
    pub fof_thresholds: FofThresholds,
}

impl Default for RealTimeParams {
    fn default() -> Self {
        RealTimeParams {
            variance_threshold: 0.95,
            sof_variance: 0.9,
            sof_selection: SelectionRule::Variance,
            fof_residual: ResidualType::Studentized,
            fof_thresholds: FofThresholds::default(),
        }
    }
}

/// Training data for a real-time family, keyed by domain fraction. The
/// scalar response of the scalar-on-function scheme is never truncated.
pub enum RealTimeTraining<'a> {
    Pca {
        x: &'a [(f64, Mfd)],
    },
    Sof {
        x: &'a [(f64, Mfd)],
        y: &'a [f64],
    },
    Fof {
        x: &'a [(f64, Mfd)],
        y: &'a [(f64, Mfd)],
    },
}

fn check_k_match(a: &[(f64, Mfd)], b: &[(f64, Mfd)], what: &str) -> Result<()> {
    if a.len() != b.len()
        || a.iter()
            .zip(b.iter())
            .any(|((ka, _), (kb, _))| (ka - kb).abs() > 1e-12)
    {
        return Err(Error::InvalidConfig(format!(
            "domain fractions of {what} do not match the covariate family"
        )));
    }
    Ok(())
}

/// Fit one model per truncation level.
pub fn fit_real_time(training: RealTimeTraining, params: &RealTimeParams) -> Result<RealTimeFamily> {
    let at = |k: f64| move |e: Error| Error::AtK { k, source: Box::new(e) };
    match training {
        RealTimeTraining::Pca { x } => {
            let mut entries = Vec::with_capacity(x.len());
            for (k, xk) in x {
                let model = fit_mfpca(xk).map_err(at(*k))?;
                let components = model.components_for_variance(params.variance_threshold);
                entries.push((*k, RtModel::Pca { model, components }));
            }
            Ok(RealTimeFamily {
                mode: RealTimeMode::Pca,
                entries,
            })
        }
        RealTimeTraining::Sof { x, y } => {
            let mut entries = Vec::with_capacity(x.len());
            for (k, xk) in x {
                let model = fit_sof_pc(y, xk, params.sof_variance, params.sof_selection)
                    .map_err(at(*k))?;
                entries.push((*k, RtModel::Sof(model)));
            }
            Ok(RealTimeFamily {
                mode: RealTimeMode::Sof,
                entries,
            })
        }
        RealTimeTraining::Fof { x, y } => {
            check_k_match(x, y, "the response family")?;
            let mut entries = Vec::with_capacity(x.len());
            for ((k, xk), (_, yk)) in x.iter().zip(y.iter()) {
                let model = fit_fof_pc(yk, xk, params.fof_residual, params.fof_thresholds)
                    .map_err(at(*k))?;
                entries.push((*k, RtModel::Fof(model)));
            }
            Ok(RealTimeFamily {
                mode: RealTimeMode::Fof,
                entries,
            })
        }
    }
}

/// New observations (and optional tuning sets) keyed by domain fraction.
pub enum RealTimeNewData<'a> {
    Pca {
        x: &'a [(f64, Mfd)],
        tuning: Option<&'a [(f64, Mfd)]>,
    },
    Sof {
        x: &'a [(f64, Mfd)],
        y: &'a [f64],
        tuning: Option<&'a [(f64, Mfd)]>,
    },
    Fof {
        x: &'a [(f64, Mfd)],
        y: &'a [(f64, Mfd)],
        tuning: Option<(&'a [(f64, Mfd)], &'a [(f64, Mfd)])>,
    },
}

fn family_ks(family: &RealTimeFamily) -> Vec<f64> {
    family.entries.iter().map(|(k, _)| *k).collect()
}

fn check_k_against(ks: &[f64], data: &[(f64, Mfd)], what: &str) -> Result<()> {
    if ks.len() != data.len()
        || ks
            .iter()
            .zip(data.iter())
            .any(|(ka, (kb, _))| (ka - kb).abs() > 1e-12)
    {
        return Err(Error::InvalidConfig(format!(
            "domain fractions of {what} do not match the fitted family"
        )));
    }
    Ok(())
}

/// Run the per-k charts. The significance levels are applied unchanged at
/// every truncation level; no correction across levels is made.
pub fn monitor_real_time(
    family: &RealTimeFamily,
    newdata: &RealTimeNewData,
    alpha: &AlphaSpec,
) -> Result<Vec<(f64, ChartFrame)>> {
    let ks = family_ks(family);
    let mut frames = Vec::with_capacity(ks.len());
    match (family.mode, newdata) {
        (RealTimeMode::Pca, RealTimeNewData::Pca { x, tuning }) => {
            check_k_against(&ks, x, "new data")?;
            if let Some(t) = tuning {
                check_k_against(&ks, t, "tuning data")?;
            }
            for (i, (k, entry)) in family.entries.iter().enumerate() {
                let RtModel::Pca { model, components } = entry else {
                    unreachable!()
                };
                let tun = tuning.map(|t| &t[i].1);
                let frame =
                    control_charts_pca(model, Some(components), tun, &x[i].1, alpha)
                        .map_err(|e| Error::AtK { k: *k, source: Box::new(e) })?;
                frames.push((*k, frame));
            }
        }
        (RealTimeMode::Sof, RealTimeNewData::Sof { x, y, tuning }) => {
            check_k_against(&ks, x, "new data")?;
            if let Some(t) = tuning {
                check_k_against(&ks, t, "tuning data")?;
            }
            for (i, (k, entry)) in family.entries.iter().enumerate() {
                let RtModel::Sof(model) = entry else { unreachable!() };
                let tun = tuning.map(|t| &t[i].1);
                let frame = control_charts_sof_pc(model, tun, y, &x[i].1, alpha)
                    .map_err(|e| Error::AtK { k: *k, source: Box::new(e) })?;
                frames.push((*k, frame));
            }
        }
        (RealTimeMode::Fof, RealTimeNewData::Fof { x, y, tuning }) => {
            check_k_against(&ks, x, "new data")?;
            check_k_against(&ks, y, "new response data")?;
            if let Some((tx, ty)) = tuning {
                check_k_against(&ks, tx, "tuning data")?;
                check_k_against(&ks, ty, "tuning response data")?;
            }
            for (i, (k, entry)) in family.entries.iter().enumerate() {
                let RtModel::Fof(model) = entry else { unreachable!() };
                let tun = tuning.map(|(tx, ty)| (&ty[i].1, &tx[i].1));
                let frame = regr_cc_fof(model, tun, &y[i].1, &x[i].1, alpha)
                    .map_err(|e| Error::AtK { k: *k, source: Box::new(e) })?;
                frames.push((*k, frame));
            }
        }
        _ => {
            return Err(Error::InvalidConfig(
                "new data shape does not match the fitted family mode".into(),
            ))
        }
    }
    Ok(frames)
}

/// One statistic of one observation at one truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub k: f64,
    pub statistic: String,
    pub value: f64,
    pub limit: f64,
    pub oc: bool,
}

/// Extract the k-indexed path of every chart statistic for one observation.
pub fn extract_path(frames: &[(f64, ChartFrame)], id: &str) -> Result<Vec<PathPoint>> {
    let mut out = Vec::new();
    for (k, frame) in frames {
        let i = frame
            .obs_ids
            .iter()
            .position(|o| o == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        out.push(PathPoint {
            k: *k,
            statistic: "t2".into(),
            value: frame.t2[i],
            limit: frame.t2_lim,
            oc: frame.oc_t2[i],
        });
        out.push(PathPoint {
            k: *k,
            statistic: "spe".into(),
            value: frame.spe[i],
            limit: frame.spe_lim,
            oc: frame.oc_spe[i],
        });
        if let (Some(y), Some(hi), Some(oc)) = (&frame.y, &frame.y_hi, &frame.oc_y) {
            out.push(PathPoint {
                k: *k,
                statistic: "y".into(),
                value: y[i],
                limit: hi[i],
                oc: oc[i],
            });
        }
    }
    Ok(out)
}

/// CSV with columns k, statistic, value, limit, oc.
pub fn path_csv(points: &[PathPoint]) -> String {
    let mut s = String::from("k,statistic,value,limit,oc\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{:.16e},{:.16e},{}\n",
            p.k, p.statistic, p.value, p.limit, p.oc
        ));
    }
    s
}
