//! Parameter checkpoints: a little-endian `f64` blob plus a JSON manifest
//! describing what the blob is (model kind, sizes, seed, training step).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Parameterized;
use crate::scalar::Scalar;
use crate::world_model::ModelDims;

const MAGIC: &[u8; 4] = b"NDGO";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad magic or version in {0}")]
    BadHeader(PathBuf),
    #[error("parameter count mismatch: blob has {got}, model wants {want}")]
    CountMismatch { got: usize, want: usize },
}

/// Sidecar description of a parameter blob.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: String,
    pub dims: ModelDims,
    pub seed: u64,
    pub env_steps: usize,
    pub param_count: usize,
    pub tensor_sizes: Vec<usize>,
    pub format_version: u32,
}

/// Write `<base>.bin` and `<base>.json`.
pub fn save<S: Scalar, P: Parameterized<S>>(
    base: &Path,
    kind: &str,
    dims: &ModelDims,
    seed: u64,
    env_steps: usize,
    net: &mut P,
) -> Result<(), CheckpointError> {
    let mut tensor_sizes = Vec::new();
    net.visit_params(&mut |p, _| tensor_sizes.push(p.len()));
    let flat = net.params_flat();
    let manifest = CheckpointManifest {
        kind: kind.to_string(),
        dims: dims.clone(),
        seed,
        env_steps,
        param_count: flat.len(),
        tensor_sizes,
        format_version: FORMAT_VERSION,
    };
    let mut blob = Vec::with_capacity(8 + flat.len() * 8);
    blob.extend_from_slice(MAGIC);
    blob.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    blob.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    for v in &flat {
        blob.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
    }
    let mut f = fs::File::create(base.with_extension("bin"))?;
    f.write_all(&blob)?;
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(base.with_extension("json"), json)?;
    Ok(())
}

/// Read the manifest next to a blob.
pub fn read_manifest(base: &Path) -> Result<CheckpointManifest, CheckpointError> {
    let text = fs::read_to_string(base.with_extension("json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Load a blob into an existing network of matching layout.
pub fn load<S: Scalar, P: Parameterized<S>>(base: &Path, net: &mut P) -> Result<(), CheckpointError> {
    let mut f = fs::File::open(base.with_extension("bin"))?;
    let mut raw = Vec::new();
    f.read_to_end(&mut raw)?;
    if raw.len() < 16 || &raw[..4] != MAGIC {
        return Err(CheckpointError::BadHeader(base.to_path_buf()));
    }
    let version = u32::from_le_bytes(raw[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CheckpointError::BadHeader(base.to_path_buf()));
    }
    let count = u64::from_le_bytes(raw[8..16].try_into().unwrap()) as usize;
    let want = net.num_params();
    if count != want || raw.len() != 16 + count * 8 {
        return Err(CheckpointError::CountMismatch { got: count, want });
    }
    let values: Vec<S> = raw[16..]
        .chunks_exact(8)
        .map(|c| S::from_f64(f64::from_le_bytes(c.try_into().unwrap())).unwrap())
        .collect();
    net.load_flat(&values);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world_model::WorldModel;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let dims = ModelDims::tiny(2, 4);
        let mut m = WorldModel::<f64>::new(3, dims.clone());
        let base = dir.path().join("world_model");
        save(&base, "world_model", &dims, 3, 1234, &mut m).unwrap();
        let manifest = read_manifest(&base).unwrap();
        assert_eq!(manifest.kind, "world_model");
        assert_eq!(manifest.env_steps, 1234);
        let mut fresh = WorldModel::<f64>::new(99, dims);
        assert_ne!(fresh.params_flat(), m.params_flat());
        load(&base, &mut fresh).unwrap();
        assert_eq!(fresh.params_flat(), m.params_flat());
    }

    #[test]
    fn wrong_size_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let dims = ModelDims::tiny(2, 4);
        let mut m = WorldModel::<f64>::new(3, dims.clone());
        let base = dir.path().join("wm");
        save(&base, "world_model", &dims, 3, 0, &mut m).unwrap();
        let mut other = WorldModel::<f64>::new(3, ModelDims::tiny(3, 4));
        assert!(matches!(
            load(&base, &mut other),
            Err(CheckpointError::CountMismatch { .. })
        ));
    }
}
