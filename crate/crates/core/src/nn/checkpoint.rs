//! Checkpoint format: `<stem>.json` manifest + `<stem>.bin` blob.
//!
//! The manifest lists every tensor (name, shape, byte offset into the blob)
//! plus the model/train configs, seed, target scale, normalizer column count
//! and the best validation MSE. The blob is little-endian f64, row-major, in
//! manifest order. Save/load round-trips bit-exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::{ModelConfig, ModelParams, Normalizer, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset of the tensor's row-major f64 data within the blob.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub seed: u64,
    pub target_scale: f64,
    pub best_val_mse: Option<f64>,
    pub tensors: Vec<TensorEntry>,
}

fn manifest_path(stem: &Path) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn blob_path(stem: &Path) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(".bin");
    PathBuf::from(p)
}

/// All tensors in checkpoint order: trainable slots, then normalizer stats.
fn tensor_views(params: &ModelParams) -> Result<Vec<(String, Vec<usize>, Vec<f64>)>> {
    let normalizer = params.normalizer.as_ref().ok_or(Error::MissingNormalizer)?;
    let names = params.slot_names();
    let shapes = params.slot_shapes();
    let mut out: Vec<(String, Vec<usize>, Vec<f64>)> = names
        .into_iter()
        .zip(shapes)
        .zip(params.trainable_slots())
        .map(|((name, shape), (data, _))| (name, shape, data.to_vec()))
        .collect();
    out.push((
        "norm.mean".to_string(),
        vec![normalizer.mean.len()],
        normalizer.mean.clone(),
    ));
    out.push((
        "norm.std".to_string(),
        vec![normalizer.std.len()],
        normalizer.std.clone(),
    ));
    Ok(out)
}

/// Write `<stem>.json` and `<stem>.bin`.
pub fn save_checkpoint(
    params: &ModelParams,
    tcfg: &TrainConfig,
    best_val_mse: Option<f64>,
    stem: &Path,
) -> Result<()> {
    let tensors = tensor_views(params)?;
    let mut entries = Vec::with_capacity(tensors.len());
    let mut blob: Vec<u8> = Vec::new();
    for (name, shape, data) in &tensors {
        entries.push(TensorEntry {
            name: name.clone(),
            shape: shape.clone(),
            offset: blob.len() as u64,
        });
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format_version: 1,
        model_config: params.config.clone(),
        train_config: tcfg.clone(),
        seed: params.config.seed,
        target_scale: params.target_scale,
        best_val_mse,
        tensors: entries,
    };
    let mut f = fs::File::create(manifest_path(stem))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    fs::write(blob_path(stem), &blob)?;
    Ok(())
}

/// Rebuild parameters from `<stem>.json` + `<stem>.bin`.
pub fn load_checkpoint(stem: &Path) -> Result<(ModelParams, CheckpointManifest)> {
    let manifest: CheckpointManifest =
        serde_json::from_str(&fs::read_to_string(manifest_path(stem))?)?;
    let blob = fs::read(blob_path(stem))?;
    let read_tensor = |entry: &TensorEntry| -> Result<Vec<f64>> {
        let len: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + len * 8;
        if end > blob.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {} overruns blob ({} > {})",
                entry.name,
                end,
                blob.len()
            )));
        }
        Ok(blob[start..end]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect())
    };

    let mut params = ModelParams::init(&manifest.model_config)?;
    params.target_scale = manifest.target_scale;
    let names = params.slot_names();
    let shapes = params.slot_shapes();
    let mut entry_iter = manifest.tensors.iter();
    for ((name, shape), (slot, _)) in names.iter().zip(&shapes).zip(params.trainable_slots_mut()) {
        let entry = entry_iter
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("manifest missing tensor {name}")))?;
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::Checkpoint(format!(
                "tensor mismatch: expected {name} {shape:?}, manifest has {} {:?}",
                entry.name, entry.shape
            )));
        }
        let data = read_tensor(entry)?;
        slot.copy_from_slice(&data);
    }
    let mut norm = Normalizer {
        mean: Vec::new(),
        std: Vec::new(),
    };
    for (name, field) in [("norm.mean", &mut norm.mean), ("norm.std", &mut norm.std)] {
        let entry = entry_iter
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("manifest missing tensor {name}")))?;
        if entry.name != name {
            return Err(Error::Checkpoint(format!(
                "tensor mismatch: expected {name}, manifest has {}",
                entry.name
            )));
        }
        *field = read_tensor(entry)?;
    }
    if norm.mean.len() != manifest.model_config.input_dim
        || norm.std.len() != manifest.model_config.input_dim
    {
        return Err(Error::Checkpoint("normalizer width != input_dim".into()));
    }
    params.normalizer = Some(norm);
    Ok((params, manifest))
}

// Matrix is stored row-major already; this impl block documents the layout
// dependency for future format changes.
#[allow(dead_code)]
fn _layout_guard(m: &Matrix) -> &[f64] {
    m.data()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::LabeledDataset;
    use crate::nn::train::{eval_mse, train};

    fn trained_pair() -> (ModelParams, TrainConfig, LabeledDataset) {
        use rand::Rng;
        use std::collections::BTreeMap;
        let mut rng = crate::seeding::derive_rng(21, "ckpt-data");
        let mut features = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for i in 0..150 {
            let wallet = format!("0x{i:04}");
            let row: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            labels.insert(wallet.clone(), (500.0 + 250.0 * row[0]).clamp(0.0, 1000.0));
            features.insert(wallet, row);
        }
        let wallets: Vec<String> = features.keys().cloned().collect();
        let split = crate::labels::split_wallets(&wallets, 0.2, 21).unwrap();
        let dataset = LabeledDataset::new(&features, &labels, split, 21).unwrap();
        let mcfg = ModelConfig {
            input_dim: 3,
            block_dims: vec![(16, 16), (16, 8)],
            head_dims: (8, 4, 1),
            dropout_p: 0.1,
            ln_epsilon: 1e-5,
            seed: 21,
        };
        let tcfg = TrainConfig {
            max_epochs: 10,
            seed: 21,
            ..TrainConfig::default()
        };
        let (params, _) = train(&dataset, &mcfg, &tcfg).unwrap();
        (params, tcfg, dataset)
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let (params, tcfg, dataset) = trained_pair();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("model");
        save_checkpoint(&params, &tcfg, Some(0.123), &stem).unwrap();
        let (loaded, manifest) = load_checkpoint(&stem).unwrap();
        assert_eq!(loaded, params);
        assert_eq!(manifest.best_val_mse, Some(0.123));
        assert_eq!(manifest.train_config, tcfg);

        // Saving the loaded params reproduces identical files.
        let stem2 = dir.path().join("model2");
        save_checkpoint(&loaded, &tcfg, Some(0.123), &stem2).unwrap();
        assert_eq!(
            fs::read(stem.with_extension("bin")).unwrap(),
            fs::read(stem2.with_extension("bin")).unwrap()
        );

        // Loaded params reproduce validation MSE exactly.
        let val_rows = dataset.rows_in(crate::labels::Split::Val);
        let norm = params.normalizer.as_ref().unwrap();
        let x_val = norm.apply_matrix(&Matrix::from_rows(
            &val_rows.iter().map(|r| r.features.clone()).collect::<Vec<_>>(),
        ));
        let y_val: Vec<f64> = val_rows.iter().map(|r| r.target / 1000.0).collect();
        let a = eval_mse(&params, &x_val, &y_val, 256).unwrap();
        let b = eval_mse(&loaded, &x_val, &y_val, 256).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn corrupt_manifest_is_rejected() {
        let (params, tcfg, _) = trained_pair();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("model");
        save_checkpoint(&params, &tcfg, None, &stem).unwrap();
        // Truncate the blob.
        let blob = fs::read(stem.with_extension("bin")).unwrap();
        fs::write(stem.with_extension("bin"), &blob[..blob.len() / 2]).unwrap();
        assert!(load_checkpoint(&stem).is_err());
    }
}
