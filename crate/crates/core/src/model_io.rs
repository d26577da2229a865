//! Self-contained JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::write_all;
use crate::eda::{EdaModel, MvEdaModel};
use crate::elm::ElmModel;
use crate::error::{EdaError, Result};

/// Any fitted model, tagged by kind so one loader handles every file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    Elm(ElmModel),
    Eda(EdaModel),
    MvEda(MvEdaModel),
}

impl ModelFile {
    pub fn views(&self) -> usize {
        match self {
            ModelFile::MvEda(m) => m.views.len(),
            _ => 1,
        }
    }
}

pub fn save_model(model: &ModelFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(model).map_err(|e| EdaError::Serde(e.to_string()))?;
    write_all(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| EdaError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| EdaError::Serde(format!("{}: {e}", path.display())))
}
