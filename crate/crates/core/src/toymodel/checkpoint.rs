//! Binary checkpoint container.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    8 bytes  "BLENDRCK"
//! version  u32
//! hlen     u64      length of the JSON header
//! header   hlen bytes of UTF-8 JSON
//! tensors  f64 values, row-major, in header order
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, DenoiserModel};
use super::world::ToyWorldSpec;
use crate::diffusion::NoiseScheduleConfig;
use crate::error::{Error, Result};
use crate::io::{read_bytes, write_atomic};

pub const MAGIC: &[u8; 8] = b"BLENDRCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub world: ToyWorldSpec,
    pub noise: NoiseScheduleConfig,
    pub model: DenoiserModel,
    pub train_seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    world: ToyWorldSpec,
    noise: NoiseScheduleConfig,
    architecture: Architecture,
    n_concepts: usize,
    n_attributes: usize,
    train_seed: u64,
    tensors: Vec<TensorInfo>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let params = &self.model.params;
        let header = Header {
            world: self.world.clone(),
            noise: self.noise,
            architecture: self.model.arch,
            n_concepts: self.model.n_concepts,
            n_attributes: self.model.n_attributes,
            train_seed: self.train_seed,
            tensors: params
                .tensor_names()
                .into_iter()
                .zip(params.shapes())
                .map(|(name, shape)| TensorInfo { name, shape })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in params.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |m: &str| Error::format(origin, m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..).ok_or_else(|| bad("truncated"))?;
        let json = body.get(..hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| bad(&format!("header: {e}")))?;
        header.world.validate()?;

        let mut model = DenoiserModel::new(header.architecture, header.n_concepts, header.n_attributes, 0)?;
        let expected_shapes = model.params.shapes();
        let got_shapes: Vec<Vec<usize>> = header.tensors.iter().map(|t| t.shape.clone()).collect();
        if expected_shapes != got_shapes {
            return Err(bad("tensor shapes do not match the architecture"));
        }
        let mut raw = body[hlen..].chunks_exact(8);
        let total: usize = expected_shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        if raw.len() != total || !raw.remainder().is_empty() {
            return Err(bad("tensor payload has the wrong length"));
        }
        for t in model.params.tensors_mut() {
            for v in t.iter_mut() {
                *v = f64::from_le_bytes(raw.next().unwrap().try_into().unwrap());
            }
        }
        if !model.params.all_finite() {
            return Err(bad("non-finite parameters"));
        }
        Ok(Self { world: header.world, noise: header.noise, model, train_seed: header.train_seed })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?, path)
    }
}
