//! The JSON parameter file shared by every subcommand.
//!
//! Unknown keys are rejected so a typo cannot silently fall back to a
//! default. Every field is optional; accessors supply the defaults.

use std::path::Path;

use fdmon::basis::default_lambda_grid;
use fdmon::charts::AlphaSpec;
use fdmon::error::{Error, Result};
use fdmon::fof::{FofThresholds, ResidualType};
use fdmon::realtime::KSeq;
use fdmon::simgen::{ShiftType, SimConfig};
use fdmon::sof::SelectionRule;
use serde::Deserialize;

pub const DEFAULT_N_BASIS: usize = 15;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaOverride {
    pub t2: Option<f64>,
    pub spe: Option<f64>,
    pub y: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdOverride {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub res: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    // Smoothing.
    pub n_basis: Option<usize>,
    pub lambda_grid: Option<Vec<f64>>,
    /// Domain for long-format ingestion; wide files carry their own grid.
    pub domain: Option<[f64; 2]>,
    // Model fitting.
    pub variance_threshold: Option<f64>,
    pub sof_variance: Option<f64>,
    pub selection: Option<SelectionRule>,
    pub residual_type: Option<ResidualType>,
    pub thresholds: Option<ThresholdOverride>,
    pub alpha: Option<AlphaOverride>,
    // Real-time monitoring.
    pub k_seq: Option<Vec<f64>>,
    // Simulation.
    pub seed: Option<u64>,
    pub nobs: Option<usize>,
    pub r2: Option<f64>,
    pub shift_x: Option<[String; 3]>,
    pub d_x: Option<[f64; 3]>,
    pub shift_y: Option<String>,
    pub d_y: Option<f64>,
    pub d_y_scalar: Option<f64>,
}

impl Params {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Params::default()),
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("parameter file {}: {e}", p.display())))
            }
        }
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis.unwrap_or(DEFAULT_N_BASIS)
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        self.lambda_grid.clone().unwrap_or_else(default_lambda_grid)
    }

    pub fn variance_threshold(&self) -> f64 {
        self.variance_threshold.unwrap_or(0.95)
    }

    pub fn sof_variance(&self) -> f64 {
        self.sof_variance.unwrap_or(0.9)
    }

    pub fn selection(&self) -> SelectionRule {
        self.selection.unwrap_or(SelectionRule::Variance)
    }

    pub fn residual_type(&self) -> ResidualType {
        self.residual_type.unwrap_or(ResidualType::Studentized)
    }

    pub fn fof_thresholds(&self) -> FofThresholds {
        let base = FofThresholds::default();
        match &self.thresholds {
            None => base,
            Some(t) => FofThresholds {
                x: t.x.unwrap_or(base.x),
                y: t.y.unwrap_or(base.y),
                res: t.res.unwrap_or(base.res),
            },
        }
    }

    /// Chart significance levels: mode defaults with any overrides applied.
    pub fn alpha(&self, base: AlphaSpec) -> Result<AlphaSpec> {
        let mut out = base;
        if let Some(a) = &self.alpha {
            if let Some(v) = a.t2 {
                out.t2 = v;
            }
            if let Some(v) = a.spe {
                out.spe = v;
            }
            if let Some(v) = a.y {
                out.y = Some(v);
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn k_seq(&self) -> Result<KSeq> {
        match &self.k_seq {
            None => Ok(KSeq::default()),
            Some(v) => KSeq::new(v.clone()),
        }
    }

    /// Simulation settings for a single dataset (the `simulate` subcommand's
    /// custom mode); seed handled by the caller.
    pub fn sim_config(&self, seed: u64) -> Result<SimConfig> {
        let mut cfg = SimConfig::in_control(self.nobs.unwrap_or(1000), seed);
        if let Some(r2) = self.r2 {
            cfg.r2 = r2;
        }
        if let Some(s) = &self.shift_x {
            for (i, name) in s.iter().enumerate() {
                cfg.shift_x[i] = ShiftType::parse(name)?;
            }
        }
        if let Some(d) = self.d_x {
            cfg.d_x = d;
        }
        if let Some(s) = &self.shift_y {
            cfg.shift_y = ShiftType::parse(s)?;
        }
        if let Some(d) = self.d_y {
            cfg.d_y = d;
        }
        if let Some(d) = self.d_y_scalar {
            cfg.d_y_scalar = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
