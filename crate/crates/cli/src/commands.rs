//! Subcommand implementations. Each returns the desired exit code.

use std::path::{Path, PathBuf};

use fdmon::archive::{ArchivedModel, ModelArchive};
use fdmon::charts::{AlphaSpec, ChartFrame};
use fdmon::error::{Error, Result};
use fdmon::fof::{fit_fof_pc, regr_cc_fof};
use fdmon::mfd::Mfd;
use fdmon::mfpca::fit_mfpca;
use fdmon::realtime::{
    extract_path, fit_real_time, monitor_real_time, path_csv, truncate_family_grid, PathPoint,
    RealTimeNewData, RealTimeParams, RealTimeTraining,
};
use fdmon::render;
use fdmon::simgen::{sim_funcharts, simulate_mfd, SimDataset};
use fdmon::sof::{control_charts_sof_pc, fit_sof_pc};
use serde_json::json;

use crate::ingest::{mfd_from_wide_files, read_scalar_csv, read_wide_set};
use crate::params::Params;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OC: i32 = 2;

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

fn write_dataset(dir: &Path, name: &str, ds: &SimDataset) -> Result<()> {
    let sub = dir.join(name);
    for var in ["X1", "X2", "X3", "Y"] {
        write_file(&sub, &format!("{var}.csv"), &ds.wide_csv(var)?)?;
    }
    write_file(&sub, "y_scalar.csv", &ds.scalar_csv())?;
    Ok(())
}

pub fn cmd_simulate(params: &Params, out: &Path, seed: Option<u64>) -> Result<i32> {
    let seed = seed.or(params.seed).unwrap_or(0);
    if params.nobs.is_some() || params.r2.is_some() || params.shift_x.is_some() {
        // Custom single dataset instead of the composite scenario.
        let cfg = params.sim_config(seed)?;
        let ds = simulate_mfd(&cfg)?;
        write_dataset(out, "dat", &ds)?;
        let manifest = json!({
            "seed": seed,
            "datasets": { "dat": { "nobs": cfg.nobs, "r2": cfg.r2 } },
        });
        write_file(out, "manifest.json", &serde_json::to_string_pretty(&manifest).unwrap())?;
        println!("{}", json!({"written": ["dat"], "seed": seed}));
        return Ok(EXIT_OK);
    }
    let sc = sim_funcharts(seed)?;
    write_dataset(out, "datI", &sc.dat_i)?;
    write_dataset(out, "datI_tun", &sc.dat_i_tun)?;
    write_dataset(out, "datII", &sc.dat_ii)?;
    let manifest = json!({
        "seed": seed,
        "datasets": {
            "datI": { "nobs": 1000, "r2": 0.97, "shifts": "none" },
            "datI_tun": { "nobs": 1000, "r2": 0.97, "shifts": "none" },
            "datII": {
                "nobs": 60,
                "r2": 0.97,
                "groups": [
                    { "rows": "1-20", "shifts": "none" },
                    { "rows": "21-40", "shift_x3": "A", "d_x3": 20.0,
                      "shift_y": "D", "d_y": 0.5, "d_y_scalar": 1.0 },
                    { "rows": "41-60", "shift_x3": "A", "d_x3": 40.0,
                      "shift_y": "D", "d_y": 1.5, "d_y_scalar": 2.0 },
                ],
            },
        },
    });
    write_file(out, "manifest.json", &serde_json::to_string_pretty(&manifest).unwrap())?;
    println!(
        "{}",
        json!({"written": ["datI", "datI_tun", "datII"], "seed": seed})
    );
    Ok(EXIT_OK)
}

pub struct FitInputs {
    pub data: Vec<PathBuf>,
    pub long_data: Option<PathBuf>,
    pub y_data: Vec<PathBuf>,
    pub y_scalar: Option<PathBuf>,
}

/// Covariate ingestion: wide per-variable files, or one long-format file.
fn load_covariates(
    data: &[PathBuf],
    long_data: &Option<PathBuf>,
    params: &Params,
) -> Result<Mfd> {
    let n_basis = params.n_basis();
    let lambda = params.lambda_grid();
    match (data.is_empty(), long_data) {
        (false, None) => mfd_from_wide_files(data, n_basis, &lambda),
        (true, Some(p)) => {
            let (records, vars) = crate::ingest::read_long_csv(p)?;
            let domain = params.domain.unwrap_or([0.0, 1.0]);
            fdmon::mfd::mfd_from_long(
                &records,
                (domain[0], domain[1]),
                Some(&vars),
                n_basis,
                &lambda,
            )
        }
        _ => Err(Error::InvalidConfig(
            "give either --data files or one --long-data file".into(),
        )),
    }
}

fn scalar_response(path: &Option<PathBuf>, x: &Mfd) -> Result<Vec<f64>> {
    let path = path
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("this mode needs --y-scalar".into()))?;
    let (ids, y) = read_scalar_csv(path)?;
    if ids != x.obs_ids() {
        return Err(Error::InvalidConfig(format!(
            "{}: response ids do not match the covariate data",
            path.display()
        )));
    }
    Ok(y)
}

pub fn cmd_fit(mode: &str, inputs: &FitInputs, params: &Params, out: &Path) -> Result<i32> {
    let n_basis = params.n_basis();
    let lambda = params.lambda_grid();
    let x = load_covariates(&inputs.data, &inputs.long_data, params)?;
    let (model, summary) = match mode {
        "pca" => {
            let model = fit_mfpca(&x)?;
            let components = model.components_for_variance(params.variance_threshold());
            let summary = json!({
                "mode": "pca",
                "n_components": components.len(),
                "variance_explained": components.iter().map(|&m| model.var_prop[m]).sum::<f64>(),
            });
            let alpha = params.alpha(AlphaSpec::pca_default())?;
            (ArchivedModel::Pca { model, components, alpha }, summary)
        }
        "sof" => {
            let y = scalar_response(&inputs.y_scalar, &x)?;
            let model = fit_sof_pc(&y, &x, params.sof_variance(), params.selection())?;
            let summary = json!({
                "mode": "sof",
                "selected": model.selected,
                "selection_rule": model.selection_rule,
                "sigma2_hat": model.sigma2_hat,
            });
            let alpha = params.alpha(AlphaSpec::sof_default())?;
            (ArchivedModel::Sof { model, alpha }, summary)
        }
        "fof" => {
            if inputs.y_data.is_empty() {
                return Err(Error::InvalidConfig("fof mode needs --y-data".into()));
            }
            let y = mfd_from_wide_files(&inputs.y_data, n_basis, &lambda)?;
            let model = fit_fof_pc(&y, &x, params.residual_type(), params.fof_thresholds())?;
            let summary = json!({
                "mode": "fof",
                "L": model.sel_x.len(),
                "M": model.sel_y.len(),
                "K": model.sel_res.len(),
                "residual_type": model.residual_type,
            });
            let alpha = params.alpha(AlphaSpec::pca_default())?;
            (ArchivedModel::Fof { model, alpha }, summary)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown fit mode {other}; expected pca, sof, or fof"
            )))
        }
    };
    let archive = ModelArchive::new(model);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    archive.save(&out.join("model.json"))?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(EXIT_OK)
}

pub struct MonitorInputs {
    pub model: PathBuf,
    pub data: Vec<PathBuf>,
    pub long_data: Option<PathBuf>,
    pub y_data: Vec<PathBuf>,
    pub y_scalar: Option<PathBuf>,
    pub tuning: Vec<PathBuf>,
    pub tuning_y: Vec<PathBuf>,
}

fn frame_outputs(frame: &ChartFrame, out: &Path, stem: &str) -> Result<()> {
    write_file(out, &format!("{stem}.csv"), &frame.to_csv())?;
    write_file(out, &format!("{stem}.json"), &frame.to_json()?)?;
    Ok(())
}

fn any_oc(frame: &ChartFrame) -> bool {
    (0..frame.n_obs()).any(|i| frame.any_oc(i))
}

pub fn cmd_monitor(
    inputs: &MonitorInputs,
    params: &Params,
    out: &Path,
    fail_on_oc: bool,
) -> Result<i32> {
    let archive = ModelArchive::load(&inputs.model)?;
    let n_basis = params.n_basis();
    let lambda = params.lambda_grid();
    let x = load_covariates(&inputs.data, &inputs.long_data, params)?;
    let tuning = if inputs.tuning.is_empty() {
        None
    } else {
        Some(mfd_from_wide_files(&inputs.tuning, n_basis, &lambda)?)
    };
    let frame = match &archive.model {
        ArchivedModel::Pca { model, components, alpha } => {
            let alpha = params.alpha(*alpha)?;
            fdmon::charts::control_charts_pca(model, Some(components), tuning.as_ref(), &x, &alpha)?
        }
        ArchivedModel::Sof { model, alpha } => {
            let alpha = params.alpha(*alpha)?;
            let y = scalar_response(&inputs.y_scalar, &x)?;
            control_charts_sof_pc(model, tuning.as_ref(), &y, &x, &alpha)?
        }
        ArchivedModel::Fof { model, alpha } => {
            let alpha = params.alpha(*alpha)?;
            if inputs.y_data.is_empty() {
                return Err(Error::InvalidConfig("fof monitoring needs --y-data".into()));
            }
            let y = mfd_from_wide_files(&inputs.y_data, n_basis, &lambda)?;
            let tuning_pair = match (&tuning, inputs.tuning_y.is_empty()) {
                (Some(tx), false) => {
                    let ty = mfd_from_wide_files(&inputs.tuning_y, n_basis, &lambda)?;
                    Some((tx.clone(), ty))
                }
                (Some(_), true) => {
                    return Err(Error::InvalidConfig(
                        "fof tuning needs --tuning-y alongside --tuning".into(),
                    ))
                }
                (None, _) => None,
            };
            regr_cc_fof(
                model,
                tuning_pair.as_ref().map(|(tx, ty)| (ty, tx)),
                &y,
                &x,
                &alpha,
            )?
        }
        ArchivedModel::Realtime { .. } => {
            return Err(Error::InvalidConfig(
                "archive holds a real-time family; use the realtime subcommand".into(),
            ))
        }
    };
    frame_outputs(&frame, out, "frame")?;
    let n_oc = (0..frame.n_obs()).filter(|&i| frame.any_oc(i)).count();
    println!(
        "{}",
        json!({"mode": archive.model.mode(), "n_obs": frame.n_obs(), "n_oc": n_oc})
    );
    if fail_on_oc && any_oc(&frame) {
        return Ok(EXIT_OC);
    }
    Ok(EXIT_OK)
}

pub struct RealtimeInputs {
    pub mode: String,
    pub train: Vec<PathBuf>,
    pub train_y: Vec<PathBuf>,
    pub train_scalar: Option<PathBuf>,
    pub new: Vec<PathBuf>,
    pub new_y: Vec<PathBuf>,
    pub new_scalar: Option<PathBuf>,
    pub id: Option<String>,
}

fn k_label(k: f64) -> String {
    format!("{k}")
}

pub fn cmd_realtime(
    inputs: &RealtimeInputs,
    params: &Params,
    out: &Path,
    fail_on_oc: bool,
) -> Result<i32> {
    let n_basis = params.n_basis();
    let lambda = params.lambda_grid();
    let k_seq = params.k_seq()?;
    let rt_params = RealTimeParams {
        variance_threshold: params.variance_threshold(),
        sof_variance: params.sof_variance(),
        sof_selection: params.selection(),
        fof_residual: params.residual_type(),
        fof_thresholds: params.fof_thresholds(),
    };
    let truncate = |paths: &[PathBuf]| -> Result<Vec<(f64, Mfd)>> {
        let (ids, grid, data) = read_wide_set(paths)?;
        truncate_family_grid(&grid, &data, Some(&ids), &k_seq, n_basis, &lambda)
    };
    let train = truncate(&inputs.train)?;
    let new = truncate(&inputs.new)?;
    let (family, frames) = match inputs.mode.as_str() {
        "pca" => {
            let family = fit_real_time(RealTimeTraining::Pca { x: &train }, &rt_params)?;
            let alpha = params.alpha(AlphaSpec::pca_default())?;
            let frames = monitor_real_time(
                &family,
                &RealTimeNewData::Pca { x: &new, tuning: None },
                &alpha,
            )?;
            (family, frames)
        }
        "sof" => {
            let path = inputs
                .train_scalar
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("sof mode needs --y-scalar".into()))?;
            let (_, y_train) = read_scalar_csv(path)?;
            let path = inputs
                .new_scalar
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("sof mode needs --new-y-scalar".into()))?;
            let (_, y_new) = read_scalar_csv(path)?;
            let family =
                fit_real_time(RealTimeTraining::Sof { x: &train, y: &y_train }, &rt_params)?;
            let alpha = params.alpha(AlphaSpec::sof_default())?;
            let frames = monitor_real_time(
                &family,
                &RealTimeNewData::Sof { x: &new, y: &y_new, tuning: None },
                &alpha,
            )?;
            (family, frames)
        }
        "fof" => {
            if inputs.train_y.is_empty() || inputs.new_y.is_empty() {
                return Err(Error::InvalidConfig(
                    "fof mode needs --y-data and --new-y-data".into(),
                ));
            }
            let train_y = truncate(&inputs.train_y)?;
            let new_y = truncate(&inputs.new_y)?;
            let family =
                fit_real_time(RealTimeTraining::Fof { x: &train, y: &train_y }, &rt_params)?;
            let alpha = params.alpha(AlphaSpec::pca_default())?;
            let frames = monitor_real_time(
                &family,
                &RealTimeNewData::Fof { x: &new, y: &new_y, tuning: None },
                &alpha,
            )?;
            (family, frames)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown realtime mode {other}; expected pca, sof, or fof"
            )))
        }
    };
    let _ = family;
    for (k, frame) in &frames {
        frame_outputs(frame, out, &format!("frame_k{}", k_label(*k)))?;
    }
    let mut path_written = None;
    if let Some(id) = &inputs.id {
        let path = extract_path(&frames, id)?;
        let p = write_file(out, &format!("path_{id}.csv"), &path_csv(&path))?;
        path_written = Some(p.display().to_string());
    }
    let oc = frames.iter().any(|(_, f)| any_oc(f));
    println!(
        "{}",
        json!({
            "mode": inputs.mode,
            "n_fractions": frames.len(),
            "path": path_written,
        })
    );
    if fail_on_oc && oc {
        return Ok(EXIT_OC);
    }
    Ok(EXIT_OK)
}

pub struct RenderInputs {
    pub kind: String,
    pub input: Vec<PathBuf>,
    pub new: Vec<PathBuf>,
    pub id: Option<String>,
}

fn load_frame(path: &Path) -> Result<ChartFrame> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::KindMismatch(format!("{} is not a chart frame: {e}", path.display()))
    })
}

fn load_path_points(path: &Path) -> Result<Vec<PathPoint>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    if lines.next() != Some("k,statistic,value,limit,oc") {
        return Err(Error::KindMismatch(format!(
            "{} is not a realtime path file",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::KindMismatch(format!(
                "{}: malformed path row",
                path.display()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                Error::KindMismatch(format!("{}: non-numeric path value", path.display()))
            })
        };
        out.push(PathPoint {
            k: parse(f[0])?,
            statistic: f[1].to_string(),
            value: parse(f[2])?,
            limit: parse(f[3])?,
            oc: f[4] == "true",
        });
    }
    Ok(out)
}

pub fn cmd_render(inputs: &RenderInputs, params: &Params, out: &Path) -> Result<i32> {
    let kind = render::RenderKind::parse(&inputs.kind)?;
    let first = inputs
        .input
        .first()
        .ok_or_else(|| Error::InvalidConfig("render needs --input".into()))?;
    let n_basis = params.n_basis();
    let lambda = params.lambda_grid();
    let svg = match kind {
        render::RenderKind::Curves => {
            let mfd = mfd_from_wide_files(&inputs.input, n_basis, &lambda)?;
            render::render_curves(&mfd)?
        }
        render::RenderKind::Eigenfunctions => {
            let archive = ModelArchive::load(first)?;
            match &archive.model {
                ArchivedModel::Pca { model, components, .. } => {
                    render::render_eigenfunctions(model, components)?
                }
                other => {
                    return Err(Error::KindMismatch(format!(
                        "eigenfunctions rendering needs a pca archive, got {}",
                        other.mode()
                    )))
                }
            }
        }
        render::RenderKind::Charts => render::render_charts(&load_frame(first)?),
        render::RenderKind::Contributions => {
            let frame = load_frame(first)?;
            let id = inputs
                .id
                .clone()
                .or_else(|| frame.obs_ids.first().cloned())
                .ok_or(Error::EmptyInput)?;
            render::render_contributions(&frame, &id)?
        }
        render::RenderKind::MonitorOverlay => {
            if inputs.new.is_empty() {
                return Err(Error::InvalidConfig(
                    "monitor-overlay needs --new data files".into(),
                ));
            }
            let reference = mfd_from_wide_files(&inputs.input, n_basis, &lambda)?;
            let new = mfd_from_wide_files(&inputs.new, n_basis, &lambda)?;
            render::render_monitor_overlay(&reference, &new, None)?
        }
        render::RenderKind::BetaSurface => {
            let archive = ModelArchive::load(first)?;
            match &archive.model {
                ArchivedModel::Fof { model, .. } => render::render_beta_surface(model)?,
                other => {
                    return Err(Error::KindMismatch(format!(
                        "beta-surface rendering needs a fof archive, got {}",
                        other.mode()
                    )))
                }
            }
        }
        render::RenderKind::RealtimePath => {
            render::render_realtime_path(&load_path_points(first)?)?
        }
    };
    let path = write_file(out, &format!("{}.svg", inputs.kind), &svg)?;
    println!("{}", json!({"written": path.display().to_string()}));
    Ok(EXIT_OK)
}
