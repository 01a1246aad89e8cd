//! Simulation generator: multivariate functional covariates with a known
//! Karhunen-Loeve eigenstructure, a scalar response with calibrated R²,
//! a functional response driven by a built-in coefficient matrix, and mean
//! shifts of types A-D with severity d.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::linspace;
use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 150;
pub const N_VARS: usize = 3;
/// Karhunen-Loeve truncation order of the covariate processes.
pub const N_COMP: usize = 50;
/// Discrete-point noise standard deviation.
pub const POINT_NOISE_SD: f64 = 0.05;
/// Overall scale of the injected mean-shift shapes. Calibrated so the
/// documented severities give detection rates comparable to the reference
/// scenario (d around 20-40 for covariates, 0.5-1.5 for the functional
/// response).
pub const SHIFT_SCALE: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftType {
    None,
    A,
    B,
    C,
    D,
}

impl ShiftType {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" | "" => Ok(ShiftType::None),
            "A" | "a" => Ok(ShiftType::A),
            "B" | "b" => Ok(ShiftType::B),
            "C" | "c" => Ok(ShiftType::C),
            "D" | "d" => Ok(ShiftType::D),
            other => Err(Error::InvalidShiftType(other.to_string())),
        }
    }

    /// Mean displacement at t for severity d.
    pub fn shape(self, d: f64, t: f64) -> f64 {
        let k = d * SHIFT_SCALE;
        match self {
            ShiftType::None => 0.0,
            ShiftType::A => k * (t * (1.0 - t) - 1.0 / 6.0),
            ShiftType::B => k * (t - 0.5),
            ShiftType::C => k,
            ShiftType::D => k * (t * (1.0 - t) - 1.0 / 6.0) + k * (t - 0.5),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub nobs: usize,
    pub r2: f64,
    pub shift_x: [ShiftType; N_VARS],
    pub d_x: [f64; N_VARS],
    pub shift_y: ShiftType,
    pub d_y: f64,
    pub d_y_scalar: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn in_control(nobs: usize, seed: u64) -> Self {
        SimConfig {
            nobs,
            r2: 0.97,
            shift_x: [ShiftType::None; N_VARS],
            d_x: [0.0; N_VARS],
            shift_y: ShiftType::None,
            d_y: 0.0,
            d_y_scalar: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nobs == 0 {
            return Err(Error::InvalidConfig("nobs must be at least 1".into()));
        }
        b_for_r2(self.r2)?;
        let finite = self.d_x.iter().all(|v| v.is_finite())
            && self.d_y.is_finite()
            && self.d_y_scalar.is_finite();
        if !finite {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimDataset {
    pub grid: Vec<f64>,
    /// One nobs x 150 matrix per covariate.
    pub x: Vec<DMatrix<f64>>,
    pub y_fun: DMatrix<f64>,
    pub y_scalar: Vec<f64>,
    /// True covariate scores (nobs x 50), kept for calibration checks.
    pub xi: DMatrix<f64>,
    pub obs_ids: Vec<String>,
}

/// Scalar-response slope matched to the supported R² targets.
pub fn b_for_r2(r2: f64) -> Result<f64> {
    let close = |a: f64| (r2 - a).abs() < 1e-9;
    if close(0.97) {
        Ok(0.587709)
    } else if close(0.86) {
        Ok(0.5533828)
    } else if close(0.74) {
        Ok(0.5133249)
    } else {
        Err(Error::UnsupportedR2(r2))
    }
}

/// Orthonormal Fourier system on (0,1): f_1 = 1, then cos/sin pairs.
pub fn fourier(m: usize, t: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    if m == 1 {
        1.0
    } else if m % 2 == 0 {
        let k = (m / 2) as f64;
        std::f64::consts::SQRT_2 * (tau * k * t).cos()
    } else {
        let k = ((m - 1) / 2) as f64;
        std::f64::consts::SQRT_2 * (tau * k * t).sin()
    }
}

/// Unit loading vector rotating with the component index.
pub fn loading(m: usize) -> [f64; N_VARS] {
    let th = m as f64 * std::f64::consts::PI / 7.0;
    let v = [th.cos(), th.sin(), (2.0 * th).cos()];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / norm, v[1] / norm, v[2] / norm]
}

/// Covariate eigenvalues: geometric decay normalized so they sum to 3.
pub fn eigenvalues() -> [f64; N_COMP] {
    let total: f64 = (1..=N_COMP).map(|m| 0.7f64.powi(m as i32)).sum();
    let c = 3.0 / total;
    std::array::from_fn(|i| c * 0.7f64.powi(i as i32 + 1))
}

/// Built-in function-on-function coefficients, l, m = 1..10 (0-indexed).
pub fn fof_b() -> DMatrix<f64> {
    DMatrix::from_fn(10, 10, |l, m| {
        if l.abs_diff(m) <= 1 {
            0.8f64.powi(l.max(m) as i32 + 1)
        } else {
            0.0
        }
    })
}

/// Response-score variances implied by the built-in coefficients.
pub fn fof_eigenvalues() -> [f64; 10] {
    let b = fof_b();
    let lam = eigenvalues();
    std::array::from_fn(|m| (0..10).map(|l| b[(l, m)].powi(2) * lam[l]).sum())
}

/// Error variance giving the target population R² for the scalar response.
pub fn sigma2_eps(r2: f64) -> Result<f64> {
    let b = b_for_r2(r2)?;
    let lam = eigenvalues();
    let signal: f64 = lam.iter().take(10).map(|&l| b * b * l).sum();
    Ok(signal * (1.0 - r2) / r2)
}

/// Generate with per-observation counter-based substreams so output is
/// independent of scheduling and concatenation offsets are explicit.
fn generate(config: &SimConfig, dataset_id: u64, obs_offset: u64, id_start: usize) -> Result<SimDataset> {
    config.validate()?;
    let n = config.nobs;
    let grid = linspace(0.0, 1.0, GRID_SIZE);
    let lam = eigenvalues();
    let b_scalar = b_for_r2(config.r2)?;
    let s2 = sigma2_eps(config.r2)?;
    let bfof = fof_b();
    let lam_y = fof_eigenvalues();
    let std_norm = Normal::new(0.0, 1.0).unwrap();
    let loadings: Vec<[f64; N_VARS]> = (1..=N_COMP).map(loading).collect();
    // Fourier values cached per component and grid point
    let fvals = DMatrix::from_fn(N_COMP, GRID_SIZE, |m, j| fourier(m + 1, grid[j]));
    let mut x: Vec<DMatrix<f64>> =
        (0..N_VARS).map(|_| DMatrix::zeros(n, GRID_SIZE)).collect();
    let mut y_fun = DMatrix::zeros(n, GRID_SIZE);
    let mut y_scalar = vec![0.0; n];
    let mut xi = DMatrix::zeros(n, N_COMP);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream((dataset_id << 32) | (obs_offset + i as u64));
        // draw order is part of the output contract: scores, covariate
        // noise, scalar error, response score errors, response noise
        for m in 0..N_COMP {
            xi[(i, m)] = std_norm.sample(&mut rng) * lam[m].sqrt();
        }
        for (p, xp) in x.iter_mut().enumerate() {
            for j in 0..GRID_SIZE {
                let mut v = config.shift_x[p].shape(config.d_x[p], grid[j]);
                for m in 0..N_COMP {
                    v += xi[(i, m)] * loadings[m][p] * fvals[(m, j)];
                }
                xp[(i, j)] = v + std_norm.sample(&mut rng) * POINT_NOISE_SD;
            }
        }
        let eps_scalar = std_norm.sample(&mut rng) * s2.sqrt();
        y_scalar[i] = (0..10).map(|m| xi[(i, m)] * b_scalar).sum::<f64>()
            + eps_scalar
            + config.d_y_scalar;
        let eta: Vec<f64> = (0..10)
            .map(|m| {
                let signal: f64 = (0..10).map(|l| xi[(i, l)] * bfof[(l, m)]).sum();
                signal + std_norm.sample(&mut rng) * (0.3 * lam_y[m]).sqrt()
            })
            .collect();
        for j in 0..GRID_SIZE {
            let mut v = config.shift_y.shape(config.d_y, grid[j]);
            for (m, &e) in eta.iter().enumerate() {
                v += e * fvals[(m, j)];
            }
            y_fun[(i, j)] = v + std_norm.sample(&mut rng) * POINT_NOISE_SD;
        }
    }
    Ok(SimDataset {
        grid,
        x,
        y_fun,
        y_scalar,
        xi,
        obs_ids: (id_start..id_start + n).map(|i| (i + 1).to_string()).collect(),
    })
}

pub fn simulate_mfd(config: &SimConfig) -> Result<SimDataset> {
    generate(config, 0, 0, 0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimScenario {
    pub dat_i: SimDataset,
    pub dat_i_tun: SimDataset,
    pub dat_ii: SimDataset,
}

/// The composite scenario: 1000 fitting observations, 1000 tuning
/// observations, and a 60-observation Phase-II set split into an in-control
/// group and two shifted groups of rising severity.
pub fn sim_funcharts(seed: u64) -> Result<SimScenario> {
    let dat_i = generate(&SimConfig::in_control(1000, seed), 1, 0, 0)?;
    let dat_i_tun = generate(&SimConfig::in_control(1000, seed), 2, 0, 0)?;
    let mut groups = Vec::new();
    for (g, (d_x3, d_y_scalar, d_y)) in
        [(0.0, 0.0, 0.0), (20.0, 1.0, 0.5), (40.0, 2.0, 1.5)].iter().enumerate()
    {
        let cfg = SimConfig {
            nobs: 20,
            r2: 0.97,
            shift_x: [
                ShiftType::None,
                ShiftType::None,
                if *d_x3 > 0.0 { ShiftType::A } else { ShiftType::None },
            ],
            d_x: [0.0, 0.0, *d_x3],
            shift_y: if *d_y > 0.0 { ShiftType::D } else { ShiftType::None },
            d_y: *d_y,
            d_y_scalar: *d_y_scalar,
            seed,
        };
        groups.push(generate(&cfg, 3, (g * 20) as u64, g * 20)?);
    }
    let dat_ii = concat(&groups);
    Ok(SimScenario { dat_i, dat_i_tun, dat_ii })
}

fn concat(parts: &[SimDataset]) -> SimDataset {
    let n: usize = parts.iter().map(|p| p.y_scalar.len()).sum();
    let stack = |get: &dyn Fn(&SimDataset) -> &DMatrix<f64>| {
        let mut out = DMatrix::zeros(n, GRID_SIZE);
        let mut row = 0;
        for p in parts {
            let m = get(p);
            out.rows_mut(row, m.nrows()).copy_from(m);
            row += m.nrows();
        }
        out
    };
    SimDataset {
        grid: parts[0].grid.clone(),
        x: (0..N_VARS).map(|p| stack(&|d: &SimDataset| &d.x[p])).collect(),
        y_fun: stack(&|d: &SimDataset| &d.y_fun),
        y_scalar: parts.iter().flat_map(|p| p.y_scalar.iter().cloned()).collect(),
        xi: {
            let mut out = DMatrix::zeros(n, N_COMP);
            let mut row = 0;
            for p in parts {
                out.rows_mut(row, p.xi.nrows()).copy_from(&p.xi);
                row += p.xi.nrows();
            }
            out
        },
        obs_ids: parts.iter().flat_map(|p| p.obs_ids.iter().cloned()).collect(),
    }
}

impl SimDataset {
    pub fn nobs(&self) -> usize {
        self.y_scalar.len()
    }

    /// Wide CSV for one functional variable: id column plus one column per
    /// grid point, headers carrying the numeric argument values.
    pub fn wide_csv(&self, var: &str) -> Result<String> {
        let m = match var {
            "X1" => &self.x[0],
            "X2" => &self.x[1],
            "X3" => &self.x[2],
            "Y" => &self.y_fun,
            other => return Err(Error::UnknownVariable(other.to_string())),
        };
        let mut out = String::from("id");
        for &t in &self.grid {
            out.push_str(&format!(",{t}"));
        }
        out.push('\n');
        for i in 0..self.nobs() {
            out.push_str(&self.obs_ids[i]);
            for j in 0..GRID_SIZE {
                out.push_str(&format!(",{:.16e}", m[(i, j)]));
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn scalar_csv(&self) -> String {
        let mut out = String::from("id,y\n");
        for i in 0..self.nobs() {
            out.push_str(&format!("{},{:.16e}\n", self.obs_ids[i], self.y_scalar[i]));
        }
        out
    }

    /// Long CSV: one row per (observation, grid point), all functional
    /// variables as columns.
    pub fn long_csv(&self) -> String {
        let mut out = String::from("id,arg,X1,X2,X3,Y\n");
        for i in 0..self.nobs() {
            for j in 0..GRID_SIZE {
                out.push_str(&format!(
                    "{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    self.obs_ids[i],
                    self.grid[j],
                    self.x[0][(i, j)],
                    self.x[1][(i, j)],
                    self.x[2][(i, j)],
                    self.y_fun[(i, j)],
                ));
            }
        }
        out
    }
}
