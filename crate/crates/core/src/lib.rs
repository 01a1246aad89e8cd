//! Phase-II statistical process monitoring of multivariate functional data.
//!
//! Pipeline: penalized B-spline smoothing of discrete observations into
//! functional data containers, multivariate functional PCA, Hotelling T2 /
//! SPE control charts with contribution analysis, regression-adjusted charts
//! for scalar and functional responses, real-time truncated-domain
//! monitoring, and a calibrated simulation generator.

pub mod archive;
pub mod basis;
pub mod charts;
pub mod error;
pub mod fof;
pub mod mfd;
pub mod mfpca;
pub mod realtime;
pub mod render;
pub mod simgen;
pub mod sof;

pub use error::{Error, Result};
