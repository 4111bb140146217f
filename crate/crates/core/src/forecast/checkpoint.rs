//! Versioned binary checkpoint: magic, version, JSON header, then every
//! parameter as little-endian f64. Files are named by their SHA-256.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::forecaster::{Forecaster, MODEL_VERSION};
use super::tape::Matrix;
use super::windows::Standardizer;
use super::{ModelConfig, ModelDims, Transformer};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DSFC";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_EXTENSION: &str = "ckpt";

#[derive(Debug, Serialize, Deserialize)]
struct ParamShape {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    model_version: String,
    seed: u64,
    config: ModelConfig,
    dims: ModelDims,
    manifest_hash: String,
    selected_features: Vec<String>,
    targets: Vec<String>,
    covariates: Vec<String>,
    categories: Vec<String>,
    feature_scaler: Standardizer,
    target_scaler: Standardizer,
    params: Vec<ParamShape>,
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Forecaster {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            model_version: MODEL_VERSION.into(),
            seed: self.config.seed,
            config: self.config.clone(),
            dims: self.net.dims,
            manifest_hash: self.manifest_hash.clone(),
            selected_features: self.selected_features.clone(),
            targets: self.targets.clone(),
            covariates: self.covariates.clone(),
            categories: self.categories.clone(),
            feature_scaler: self.feature_scaler.clone(),
            target_scaler: self.target_scaler.clone(),
            params: self
                .params
                .names
                .iter()
                .zip(&self.params.values)
                .map(|(name, m)| ParamShape {
                    name: name.clone(),
                    rows: m.rows,
                    cols: m.cols,
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let scalars = self.params.scalar_count();
        let mut out = Vec::with_capacity(24 + header.len() + 8 * scalars);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(scalars as u64).to_le_bytes());
        for m in &self.params.values {
            for v in &m.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Decodes a checkpoint; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |offset: usize, reason: &str| Error::Corrupt {
            path: path.into(),
            offset: offset as u64,
            reason: reason.into(),
        };
        let take = |offset: usize, len: usize| -> Result<&[u8]> {
            bytes
                .get(
                    offset
                        ..offset
                            .checked_add(len)
                            .ok_or_else(|| corrupt(offset, "length overflow"))?,
                )
                .ok_or_else(|| corrupt(offset, "unexpected end of file"))
        };
        if take(0, 4)? != MAGIC {
            return Err(corrupt(0, "bad magic"));
        }
        let version = u32::from_le_bytes(take(4, 4)?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(4, &format!("unsupported checkpoint version {version}")));
        }
        let header_len = u64::from_le_bytes(take(8, 8)?.try_into().expect("8 bytes")) as usize;
        let header: Header =
            serde_json::from_slice(take(16, header_len)?).map_err(|e| corrupt(16, &format!("bad header: {e}")))?;
        let mut offset = 16 + header_len;
        let scalars = u64::from_le_bytes(take(offset, 8)?.try_into().expect("8 bytes")) as usize;
        offset += 8;

        header.config.validate().map_err(|e| corrupt(16, &e.to_string()))?;
        let (net, mut params) = Transformer::new::<f64>(header.dims, &header.config, header.seed);
        if params.len() != header.params.len() || params.scalar_count() != scalars {
            return Err(corrupt(16, "parameter layout does not match the configuration"));
        }
        for (i, shape) in header.params.iter().enumerate() {
            let m = &params.values[i];
            if params.names[i] != shape.name || m.rows != shape.rows || m.cols != shape.cols {
                return Err(corrupt(16, &format!("unexpected parameter `{}`", shape.name)));
            }
            let n = shape.rows * shape.cols;
            let raw = take(offset, 8 * n)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            params.values[i] = Matrix::from_vec(shape.rows, shape.cols, data);
            offset += 8 * n;
        }
        if offset != bytes.len() {
            return Err(corrupt(offset, "trailing bytes"));
        }
        let hash = OnceLock::new();
        let _ = hash.set(content_hash(bytes));
        Ok(Forecaster {
            config: header.config,
            manifest_hash: header.manifest_hash,
            selected_features: header.selected_features,
            targets: header.targets,
            covariates: header.covariates,
            categories: header.categories,
            feature_scaler: header.feature_scaler,
            target_scaler: header.target_scaler,
            net,
            params,
            hash,
        })
    }

    /// Writes `<dir>/<hash>.ckpt` via a temporary file and rename.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bytes = self.to_bytes();
        let hash = content_hash(&bytes);
        let path = dir.join(format!("{hash}.{CHECKPOINT_EXTENSION}"));
        let tmp = dir.join(format!(".{hash}.tmp"));
        std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads a checkpoint. A file named by a content hash must match it.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let actual = content_hash(&bytes);
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if stem.len() == 64 && stem.bytes().all(|b| b.is_ascii_hexdigit()) && stem != actual {
                return Err(Error::Integrity(format!("{} hashes to {actual}", path.display())));
            }
        }
        Self::from_bytes(&bytes, path)
    }
}
