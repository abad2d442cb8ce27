//! JSON checkpoints: named parameter tensors with shapes, optimizer state,
//! the resolved run config, its hash and the trial seed.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{io_err, RunConfig, RunError};
use crate::nn::{OptimizerState, ParamStore};

pub const FORMAT: &str = "scrawl-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major values.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub trial: usize,
    pub seed: u64,
    pub epochs: usize,
    /// Walk seed of the final evaluation; re-evaluating with it reproduces
    /// `final_metric`.
    pub eval_seed: u64,
    pub final_loss: f64,
    pub final_metric: f64,
    pub params: Vec<NamedTensor>,
    pub optimizer: OptimizerState,
}

impl Checkpoint {
    pub fn tensors(store: &ParamStore<f32>) -> Vec<NamedTensor> {
        store
            .names()
            .iter()
            .zip(store.values())
            .map(|(name, v)| NamedTensor {
                name: name.clone(),
                shape: [v.nrows(), v.ncols()],
                values: v.iter().map(|&x| f64::from(x)).collect(),
            })
            .collect()
    }

    /// Copies the stored tensors into `store`, matching names and shapes.
    pub fn restore(&self, store: &mut ParamStore<f32>) -> Result<(), RunError> {
        if self.params.len() != store.len() {
            return Err(RunError::Runtime(format!(
                "checkpoint has {} tensors, the model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for (i, t) in self.params.iter().enumerate() {
            let (name, cur) = (&store.names()[i], &store.values()[i]);
            if *name != t.name || cur.dim() != (t.shape[0], t.shape[1]) {
                return Err(RunError::Runtime(format!(
                    "tensor {i}: checkpoint has {} {:?}, the model has {name} {:?}",
                    t.name,
                    t.shape,
                    cur.dim()
                )));
            }
            let value = Array2::from_shape_vec((t.shape[0], t.shape[1]), t.values.iter().map(|&x| x as f32).collect())
                .map_err(|e| RunError::Runtime(format!("tensor {}: {e}", t.name)))?;
            store.values_mut()[i] = value;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), RunError> {
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        std::fs::write(path, text).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let ck: Self = serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        if ck.format != FORMAT {
            return Err(RunError::Config(format!("{}: unknown checkpoint format `{}`", path.display(), ck.format)));
        }
        Ok(ck)
    }
}
