//! The residual-MLP regressor, written from first principles.
//!
//! Architecture: input projection -> four residual blocks (two linear layers
//! with SiLU, residual addition, layer normalization, dropout; projection
//! shortcut when widths differ) -> two-layer regression head. Training uses
//! AdamW on MSE with plateau LR reduction and early stopping; all math is
//! 64-bit and bit-deterministic for a given seed.

pub mod adamw;
pub mod checkpoint;
pub mod matrix;
pub mod model;
pub mod train;

pub use adamw::{adamw_step, AdamWState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use matrix::Matrix;
pub use model::{backward, forward_batch, forward_single, ForwardCache, ForwardMode, Gradients};
pub use train::{eval_mse, predict, train, train_with_progress, EpochStats, TrainingHistory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::derive_rng;

/// Network shape and regularization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// (in, out) width of each residual block; consecutive entries must chain.
    pub block_dims: Vec<(usize, usize)>,
    /// (in, hidden, out) of the regression head; `out` must be 1.
    pub head_dims: (usize, usize, usize),
    pub dropout_p: f64,
    pub ln_epsilon: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Paper-default shape: projection to 1024, four residual blocks
    /// narrowing 1024 -> 512 -> 256, head 256 -> 64 -> 1.
    pub fn with_input_dim(input_dim: usize, seed: u64) -> Self {
        ModelConfig {
            input_dim,
            block_dims: vec![(1024, 1024), (1024, 512), (512, 512), (512, 256)],
            head_dims: (256, 64, 1),
            dropout_p: 0.1,
            ln_epsilon: 1e-5,
            seed,
        }
    }

    /// Width the input projection maps to (first block's input width).
    pub fn projection_out(&self) -> usize {
        self.block_dims.first().map_or(self.head_dims.0, |b| b.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidModelConfig("input_dim must be positive".into()));
        }
        for (i, (d_in, d_out)) in self.block_dims.iter().enumerate() {
            if *d_in == 0 || *d_out == 0 {
                return Err(Error::InvalidModelConfig(format!(
                    "block {i} has zero width"
                )));
            }
            if i + 1 < self.block_dims.len() && self.block_dims[i + 1].0 != *d_out {
                return Err(Error::InvalidModelConfig(format!(
                    "block {i} out width {d_out} does not chain into block {} in width {}",
                    i + 1,
                    self.block_dims[i + 1].0
                )));
            }
        }
        let last_out = self.block_dims.last().map_or(self.projection_out(), |b| b.1);
        if self.head_dims.0 != last_out {
            return Err(Error::InvalidModelConfig(format!(
                "head input {} must equal last block output {last_out}",
                self.head_dims.0
            )));
        }
        if self.head_dims.1 == 0 || self.head_dims.2 != 1 {
            return Err(Error::InvalidModelConfig(
                "head must be (in, hidden > 0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidModelConfig("dropout_p must lie in [0, 1)".into()));
        }
        if !(self.ln_epsilon.is_finite() && self.ln_epsilon > 0.0) {
            return Err(Error::InvalidModelConfig("ln_epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Optimizer and schedule settings. Defaults follow the reference recipe:
/// AdamW at lr 5e-4 / weight decay 1e-4, MSE on targets scaled into [0, 1],
/// up to 500 epochs with plateau LR reduction and early stopping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub early_stop_patience: usize,
    /// Smallest loss decrease that counts as an improvement for both the
    /// plateau rule and early stopping.
    pub min_improvement: f64,
    pub target_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            weight_decay: 1e-4,
            max_epochs: 500,
            batch_size: 256,
            plateau_factor: 0.5,
            plateau_patience: 10,
            min_lr: 1e-6,
            early_stop_patience: 30,
            min_improvement: 1e-6,
            target_scale: 1000.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidTrainConfig("lr must be > 0".into()));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::InvalidTrainConfig("plateau_factor must lie in (0, 1)".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidTrainConfig("batch_size must be >= 1".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::InvalidTrainConfig("max_epochs must be >= 1".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidTrainConfig("weight_decay must be >= 0".into()));
        }
        if !(self.target_scale.is_finite() && self.target_scale > 0.0) {
            return Err(Error::InvalidTrainConfig("target_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-feature z-score statistics, fit on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_shift: Vec<f64>,
    /// Projection shortcut, present exactly when in width != out width.
    pub shortcut: Option<Matrix>,
}

/// All learnable tensors plus normalizer statistics and the target scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub proj_w: Matrix,
    pub proj_b: Vec<f64>,
    pub blocks: Vec<BlockParams>,
    pub head_w1: Matrix,
    pub head_b1: Vec<f64>,
    pub head_ln_gain: Vec<f64>,
    pub head_ln_shift: Vec<f64>,
    pub head_w2: Matrix,
    pub head_b2: Vec<f64>,
    pub normalizer: Option<Normalizer>,
    pub target_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    LnGain,
    LnShift,
}

impl ParamKind {
    /// Decoupled weight decay applies to linear weights and biases, never to
    /// layer-norm gain/shift.
    pub fn decays(&self) -> bool {
        matches!(self, ParamKind::Weight | ParamKind::Bias)
    }
}

impl ModelParams {
    /// Seeded fan-in-scaled uniform init: weights U(-sqrt(1/fan_in),
    /// +sqrt(1/fan_in)), biases zero, LN gain 1 / shift 0.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = derive_rng(config.seed, "model-init");
        let mut init_weight = |fan_in: usize, fan_out: usize| -> Matrix {
            use rand::Rng;
            let bound = (1.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                .collect();
            Matrix::from_vec(fan_in, fan_out, data)
        };

        let p_out = config.projection_out();
        let proj_w = init_weight(config.input_dim, p_out);
        let mut blocks = Vec::with_capacity(config.block_dims.len());
        for (d_in, d_out) in &config.block_dims {
            let w1 = init_weight(*d_in, *d_out);
            let w2 = init_weight(*d_out, *d_out);
            let shortcut = if d_in != d_out {
                Some(init_weight(*d_in, *d_out))
            } else {
                None
            };
            blocks.push(BlockParams {
                w1,
                b1: vec![0.0; *d_out],
                w2,
                b2: vec![0.0; *d_out],
                ln_gain: vec![1.0; *d_out],
                ln_shift: vec![0.0; *d_out],
                shortcut,
            });
        }
        let (h_in, h_hidden, h_out) = config.head_dims;
        let head_w1 = init_weight(h_in, h_hidden);
        let head_w2 = init_weight(h_hidden, h_out);
        Ok(ModelParams {
            config: config.clone(),
            proj_w,
            proj_b: vec![0.0; p_out],
            blocks,
            head_w1,
            head_b1: vec![0.0; h_hidden],
            head_ln_gain: vec![1.0; h_hidden],
            head_ln_shift: vec![0.0; h_hidden],
            head_w2,
            head_b2: vec![0.0; h_out],
            normalizer: None,
            target_scale: 1000.0,
        })
    }

    /// Trainable tensors in canonical order, with their decay class.
    pub fn trainable_slots_mut(&mut self) -> Vec<(&mut [f64], ParamKind)> {
        let mut slots: Vec<(&mut [f64], ParamKind)> = Vec::new();
        slots.push((self.proj_w.data_mut(), ParamKind::Weight));
        slots.push((self.proj_b.as_mut_slice(), ParamKind::Bias));
        for block in &mut self.blocks {
            slots.push((block.w1.data_mut(), ParamKind::Weight));
            slots.push((block.b1.as_mut_slice(), ParamKind::Bias));
            slots.push((block.w2.data_mut(), ParamKind::Weight));
            slots.push((block.b2.as_mut_slice(), ParamKind::Bias));
            slots.push((block.ln_gain.as_mut_slice(), ParamKind::LnGain));
            slots.push((block.ln_shift.as_mut_slice(), ParamKind::LnShift));
            if let Some(p) = &mut block.shortcut {
                slots.push((p.data_mut(), ParamKind::Weight));
            }
        }
        slots.push((self.head_w1.data_mut(), ParamKind::Weight));
        slots.push((self.head_b1.as_mut_slice(), ParamKind::Bias));
        slots.push((self.head_ln_gain.as_mut_slice(), ParamKind::LnGain));
        slots.push((self.head_ln_shift.as_mut_slice(), ParamKind::LnShift));
        slots.push((self.head_w2.data_mut(), ParamKind::Weight));
        slots.push((self.head_b2.as_mut_slice(), ParamKind::Bias));
        slots
    }

    /// Immutable view of the trainable tensors, same order as
    /// [`Self::trainable_slots_mut`].
    pub fn trainable_slots(&self) -> Vec<(&[f64], ParamKind)> {
        let mut slots: Vec<(&[f64], ParamKind)> = Vec::new();
        slots.push((self.proj_w.data(), ParamKind::Weight));
        slots.push((self.proj_b.as_slice(), ParamKind::Bias));
        for block in &self.blocks {
            slots.push((block.w1.data(), ParamKind::Weight));
            slots.push((block.b1.as_slice(), ParamKind::Bias));
            slots.push((block.w2.data(), ParamKind::Weight));
            slots.push((block.b2.as_slice(), ParamKind::Bias));
            slots.push((block.ln_gain.as_slice(), ParamKind::LnGain));
            slots.push((block.ln_shift.as_slice(), ParamKind::LnShift));
            if let Some(p) = &block.shortcut {
                slots.push((p.data(), ParamKind::Weight));
            }
        }
        slots.push((self.head_w1.data(), ParamKind::Weight));
        slots.push((self.head_b1.as_slice(), ParamKind::Bias));
        slots.push((self.head_ln_gain.as_slice(), ParamKind::LnGain));
        slots.push((self.head_ln_shift.as_slice(), ParamKind::LnShift));
        slots.push((self.head_w2.data(), ParamKind::Weight));
        slots.push((self.head_b2.as_slice(), ParamKind::Bias));
        slots
    }

    /// Names of the trainable tensors, aligned with the slot order.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names = vec!["proj.w".to_string(), "proj.b".to_string()];
        for (i, block) in self.blocks.iter().enumerate() {
            names.push(format!("block{i}.w1"));
            names.push(format!("block{i}.b1"));
            names.push(format!("block{i}.w2"));
            names.push(format!("block{i}.b2"));
            names.push(format!("block{i}.ln_gain"));
            names.push(format!("block{i}.ln_shift"));
            if block.shortcut.is_some() {
                names.push(format!("block{i}.shortcut"));
            }
        }
        names.extend(
            ["head.w1", "head.b1", "head.ln_gain", "head.ln_shift", "head.w2", "head.b2"]
                .map(str::to_string),
        );
        names
    }

    /// Shapes of the trainable tensors, aligned with the slot order.
    pub fn slot_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = vec![
            vec![self.proj_w.rows(), self.proj_w.cols()],
            vec![self.proj_b.len()],
        ];
        for block in &self.blocks {
            shapes.push(vec![block.w1.rows(), block.w1.cols()]);
            shapes.push(vec![block.b1.len()]);
            shapes.push(vec![block.w2.rows(), block.w2.cols()]);
            shapes.push(vec![block.b2.len()]);
            shapes.push(vec![block.ln_gain.len()]);
            shapes.push(vec![block.ln_shift.len()]);
            if let Some(p) = &block.shortcut {
                shapes.push(vec![p.rows(), p.cols()]);
            }
        }
        shapes.push(vec![self.head_w1.rows(), self.head_w1.cols()]);
        shapes.push(vec![self.head_b1.len()]);
        shapes.push(vec![self.head_ln_gain.len()]);
        shapes.push(vec![self.head_ln_shift.len()]);
        shapes.push(vec![self.head_w2.rows(), self.head_w2.cols()]);
        shapes.push(vec![self.head_b2.len()]);
        shapes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_train_config_matches_reference_recipe() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr, 5e-4);
        assert_eq!(cfg.weight_decay, 1e-4);
        assert_eq!(cfg.max_epochs, 500);
        assert_eq!(cfg.batch_size, 256);
        assert_eq!(cfg.plateau_factor, 0.5);
        assert_eq!(cfg.plateau_patience, 10);
        assert_eq!(cfg.min_lr, 1e-6);
        assert_eq!(cfg.early_stop_patience, 30);
        assert_eq!(cfg.target_scale, 1000.0);
    }

    #[test]
    fn default_model_shape_chains() {
        let cfg = ModelConfig::with_input_dim(10, 1);
        cfg.validate().unwrap();
        assert_eq!(cfg.block_dims, vec![(1024, 1024), (1024, 512), (512, 512), (512, 256)]);
        assert_eq!(cfg.head_dims, (256, 64, 1));
        assert_eq!(cfg.projection_out(), 1024);
    }

    #[test]
    fn broken_chain_is_rejected() {
        let mut cfg = ModelConfig::with_input_dim(10, 1);
        cfg.block_dims = vec![(1024, 512), (256, 256)];
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::with_input_dim(10, 1);
        cfg.head_dims = (128, 64, 1);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn init_is_seed_deterministic_and_shaped() {
        let cfg = ModelConfig {
            input_dim: 5,
            block_dims: vec![(16, 16), (16, 8)],
            head_dims: (8, 4, 1),
            dropout_p: 0.1,
            ln_epsilon: 1e-5,
            seed: 11,
        };
        let a = ModelParams::init(&cfg).unwrap();
        let b = ModelParams::init(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.blocks[0].shortcut.is_none());
        assert!(a.blocks[1].shortcut.is_some());
        assert_eq!(a.proj_w.rows(), 5);
        assert_eq!(a.proj_w.cols(), 16);
        let bound = (1.0f64 / 5.0).sqrt();
        assert!(a.proj_w.data().iter().all(|w| w.abs() <= bound));
        assert_eq!(a.slot_names().len(), a.trainable_slots().len());
    }
}
