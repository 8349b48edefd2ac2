//! JSON checkpoint of a network: input width, layer shapes, activation and
//! row-major parameters. Floats are written in shortest round-trip form, so
//! a load reproduces every parameter bit for bit.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Layer, Network};
use crate::error::{DpiError, Result};
use crate::io::write_atomic;

const FORMAT: &str = "dpi-network";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointRecord {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub activation: Activation,
    pub layers: Vec<LayerRecord>,
}

impl From<&Network> for CheckpointRecord {
    fn from(net: &Network) -> Self {
        Self {
            format: FORMAT.to_owned(),
            version: VERSION,
            input_dim: net.input_dim(),
            activation: net.activation(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<CheckpointRecord> for Network {
    type Error = DpiError;

    fn try_from(rec: CheckpointRecord) -> Result<Self> {
        if rec.format != FORMAT || rec.version != VERSION {
            return Err(DpiError::Format(format!(
                "unsupported checkpoint {} v{}",
                rec.format, rec.version
            )));
        }
        let layers = rec
            .layers
            .into_iter()
            .map(|l| {
                let weight = Array2::from_shape_vec((l.rows, l.cols), l.weight)
                    .map_err(|e| DpiError::Format(format!("layer weight: {e}")))?;
                Ok(Layer {
                    weight,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Network::from_layers(rec.input_dim, layers, rec.activation)
    }
}

impl Network {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CheckpointRecord::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: CheckpointRecord = serde_json::from_str(text)?;
        rec.try_into()
    }
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    write_atomic(path, net.to_json()?.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    Network::from_json(&std::fs::read_to_string(path)?)
}
