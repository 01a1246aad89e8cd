//! Versioned JSON persistence for fitted models.
//!
//! An archive embeds everything monitoring needs — basis definition,
//! coefficient matrices with their dimensions, eigenvalues, scores,
//! regression coefficients, and standardization summaries — so a reloaded
//! model reproduces every statistic bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::charts::AlphaSpec;
use crate::error::{Error, Result};
use crate::fof::FofModel;
use crate::mfpca::PcaModel;
use crate::realtime::RealTimeFamily;
use crate::sof::SofModel;

pub const SCHEMA_VERSION: &str = "1";

/// A fitted model together with the settings monitoring will reuse.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ArchivedModel {
    Pca {
        model: PcaModel,
        components: Vec<usize>,
        alpha: AlphaSpec,
    },
    Sof {
        model: SofModel,
        alpha: AlphaSpec,
    },
    Fof {
        model: FofModel,
        alpha: AlphaSpec,
    },
    Realtime {
        family: RealTimeFamily,
        alpha: AlphaSpec,
    },
}

impl ArchivedModel {
    pub fn mode(&self) -> &'static str {
        match self {
            ArchivedModel::Pca { .. } => "pca",
            ArchivedModel::Sof { .. } => "sof",
            ArchivedModel::Fof { .. } => "fof",
            ArchivedModel::Realtime { .. } => "realtime",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArchive {
    pub schema_version: String,
    pub model: ArchivedModel,
}

impl ModelArchive {
    pub fn new(model: ArchivedModel) -> Self {
        ModelArchive {
            schema_version: SCHEMA_VERSION.to_string(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(format!("archive serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // Check the version first so an old archive fails with a clear
        // message rather than a field-level parse error.
        #[derive(Deserialize)]
        struct VersionProbe {
            schema_version: String,
        }
        let probe: VersionProbe = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("not a model archive: {e}")))?;
        if probe.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersionMismatch {
                expected: SCHEMA_VERSION.to_string(),
                found: probe.schema_version,
            });
        }
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("malformed model archive: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }
}
