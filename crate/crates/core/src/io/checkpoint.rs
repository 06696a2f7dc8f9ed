//! Network checkpoints: a directory holding `manifest.json` and one flat
//! `params.wnct` container with every parameter concatenated in order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::{read_tensor, write_tensor};
use super::table::{read_json, write_json, TOOL_VERSION};
use crate::error::{Error, Result};
use crate::models::{compose, Network, Variant, WNetSpec};
use crate::nn::{Scalar, Tensor4};

pub const MANIFEST: &str = "manifest.json";
pub const PARAMS: &str = "params.wnct";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 4],
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub variant: Variant,
    pub spec: WNetSpec,
    pub seed: u64,
    /// Epoch (1-based) the parameters were taken from; 0 for untrained.
    pub epoch: usize,
    pub param_count: usize,
    pub params: Vec<ParamEntry>,
    /// Free-form training context (configs, validation score).
    #[serde(default)]
    pub extra: serde_json::Value,
}

pub fn save_checkpoint<T: Scalar>(
    dir: &Path,
    network: &Network<T>,
    seed: u64,
    epoch: usize,
    extra: serde_json::Value,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut params = Vec::with_capacity(network.params.len());
    let mut flat = Vec::with_capacity(network.params.scalar_count());
    for p in network.params.iter() {
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape(),
            offset: flat.len(),
        });
        flat.extend_from_slice(p.value.data());
    }
    write_tensor(&dir.join(PARAMS), &[flat.len()], &flat)?;
    let manifest = CheckpointManifest {
        format_version: 1,
        tool_version: TOOL_VERSION.to_string(),
        variant: network.spec.variant,
        spec: network.spec.clone(),
        seed,
        epoch,
        param_count: flat.len(),
        params,
        extra,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(dir.to_path_buf())
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(Error::data(format!("no checkpoint manifest at {}", path.display())));
    }
    read_json(&path)
}

/// Rebuilds the network from the manifest spec and restores its parameters.
pub fn load_checkpoint<T: Scalar>(dir: &Path) -> Result<(Network<T>, CheckpointManifest)> {
    let manifest = read_manifest(dir)?;
    let mut network: Network<T> = compose(&manifest.spec, manifest.seed)?;
    let (dims, flat) = read_tensor::<T>(&dir.join(PARAMS))?;
    if dims != [manifest.param_count] || network.params.len() != manifest.params.len() {
        return Err(Error::data("checkpoint parameter layout does not match its spec"));
    }
    for (p, e) in network.params.iter_mut().zip(&manifest.params) {
        let n: usize = e.shape.iter().product();
        if p.name != e.name || p.value.shape() != e.shape || e.offset + n > flat.len() {
            return Err(Error::data(format!("checkpoint entry {} does not match the network", e.name)));
        }
        p.value = Tensor4::from_vec(e.shape, flat[e.offset..e.offset + n].to_vec())?;
    }
    Ok((network, manifest))
}
