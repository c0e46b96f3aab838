//! JSON checkpoints at `<run>/epoch_<k>`. Floats are written in shortest
//! round-trip form and parsed back exactly, so a saved model reloads bit for
//! bit.

use std::fs;
use std::path::{Path, PathBuf};

use qpu_core::cubeedge::GenConfig;
use qpu_core::layers::ModelGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub epoch: usize,
    pub train: TrainConfig,
    /// Generator settings of the data the model was trained on.
    pub data: GenConfig,
    pub model: ModelGraph,
}

impl Checkpoint {
    pub fn new(epoch: usize, train: TrainConfig, data: GenConfig, model: ModelGraph) -> Self {
        Self { version: CHECKPOINT_VERSION, epoch, train, data, model }
    }
}

pub fn checkpoint_path(run: &Path, epoch: usize) -> PathBuf {
    run.join(format!("epoch_{epoch}"))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let json = serde_json::to_vec(ckpt).map_err(|source| Error::Checkpoint { path: path.into(), source })?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint =
        serde_json::from_slice(&bytes).map_err(|source| Error::Checkpoint { path: path.into(), source })?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Contradiction(format!(
            "checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    // re-validate layer shapes
    ModelGraph::new(ckpt.model.input, ckpt.model.layers.clone())?;
    Ok(ckpt)
}
