//! Training loop: seeded shuffling, MSE on scaled targets, plateau LR
//! reduction on train loss, early stopping on validation loss, best-epoch
//! parameter snapshotting.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::labels::{LabeledDataset, Split};
use crate::seeding::derive_rng;

use super::adamw::{adamw_step, AdamWState};
use super::matrix::Matrix;
use super::model::{backward, forward_batch, ForwardMode};
use super::{ModelConfig, ModelParams, Normalizer, TrainConfig};

impl Normalizer {
    /// Per-column mean and population std of the given rows, with a 1e-8
    /// floor for constant columns. Fit on training rows only.
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() < 2 {
            return Err(Error::InsufficientData {
                need: 2,
                got: x.rows(),
            });
        }
        let n = x.rows() as f64;
        let cols = x.cols();
        let mut mean = vec![0.0; cols];
        for i in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; cols];
        for i in 0..x.rows() {
            for (j, v) in x.row(i).iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(1e-8)).collect();
        Ok(Normalizer { mean, std })
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

fn gather_rows(x: &Matrix, indices: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(indices.len(), x.cols());
    for (r, &idx) in indices.iter().enumerate() {
        out.row_mut(r).copy_from_slice(x.row(idx));
    }
    out
}

/// Mean squared error of eval-mode predictions against scaled targets.
pub fn eval_mse(params: &ModelParams, x: &Matrix, targets_scaled: &[f64], batch_size: usize) -> Result<f64> {
    let mut sse = 0.0;
    let n = x.rows();
    let mut start = 0;
    while start < n {
        let end = (start + batch_size).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let xb = gather_rows(x, &indices);
        let (preds, _) = forward_batch(params, &xb, ForwardMode::Eval)?;
        for (p, t) in preds.iter().zip(&targets_scaled[start..end]) {
            let d = p - t;
            sse += d * d;
        }
        start = end;
    }
    Ok(sse / n as f64)
}

/// Train on the dataset's train split, validating on its val split.
/// Returns the parameters of the best validation epoch and the history.
pub fn train(
    dataset: &LabeledDataset,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(ModelParams, TrainingHistory)> {
    train_with_progress(dataset, mcfg, tcfg, |_| {})
}

pub fn train_with_progress(
    dataset: &LabeledDataset,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelParams, TrainingHistory)> {
    mcfg.validate()?;
    tcfg.validate()?;
    let train_rows = dataset.rows_in(Split::Train);
    let val_rows = dataset.rows_in(Split::Val);
    if train_rows.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if val_rows.is_empty() {
        return Err(Error::EmptySplit("val"));
    }
    for row in train_rows.iter().chain(&val_rows) {
        if row.features.len() != mcfg.input_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("input_dim {}", mcfg.input_dim),
                got: format!("{} features for wallet {}", row.features.len(), row.wallet),
            });
        }
    }

    let x_train_raw = Matrix::from_rows(&train_rows.iter().map(|r| r.features.clone()).collect::<Vec<_>>());
    let normalizer = Normalizer::fit(&x_train_raw)?;
    let x_train = normalizer.apply_matrix(&x_train_raw);
    let y_train: Vec<f64> = train_rows.iter().map(|r| r.target / tcfg.target_scale).collect();
    let x_val_raw = Matrix::from_rows(&val_rows.iter().map(|r| r.features.clone()).collect::<Vec<_>>());
    let x_val = normalizer.apply_matrix(&x_val_raw);
    let y_val: Vec<f64> = val_rows.iter().map(|r| r.target / tcfg.target_scale).collect();

    let mut params = ModelParams::init(mcfg)?;
    params.normalizer = Some(normalizer);
    params.target_scale = tcfg.target_scale;

    let mut state = AdamWState::new(&params);
    let mut lr = tcfg.lr;
    let n_train = x_train.rows();

    let mut history = Vec::new();
    let mut best_train = f64::INFINITY;
    let mut plateau_bad = 0usize;
    let mut best_val = f64::INFINITY;
    let mut early_bad = 0usize;
    let mut best_epoch = 0usize;
    let mut best_params: Option<ModelParams> = None;

    for epoch in 1..=tcfg.max_epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        let mut rng = derive_rng(tcfg.seed, &format!("shuffle/{epoch}"));
        order.shuffle(&mut rng);

        let mut sse = 0.0;
        for batch in order.chunks(tcfg.batch_size) {
            let xb = gather_rows(&x_train, batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y_train[i]).collect();
            let step = state.step_count() + 1;
            let (preds, cache) =
                forward_batch(&params, &xb, ForwardMode::Train { seed: tcfg.seed, step })?;
            let bsize = batch.len() as f64;
            let mut d_preds = Vec::with_capacity(batch.len());
            for (p, t) in preds.iter().zip(&yb) {
                let d = p - t;
                sse += d * d;
                d_preds.push(2.0 * d / bsize);
            }
            let grads = backward(&params, cache, &d_preds)?;
            adamw_step(&mut params, &grads, &mut state, lr, tcfg.weight_decay);
        }
        let train_mse = sse / n_train as f64;
        let val_mse = eval_mse(&params, &x_val, &y_val, tcfg.batch_size)?;

        let stats = EpochStats {
            epoch,
            train_mse,
            val_mse,
            lr,
        };
        on_epoch(&stats);
        history.push(stats);

        if val_mse < best_val - tcfg.min_improvement {
            best_val = val_mse;
            best_epoch = epoch;
            best_params = Some(params.clone());
            early_bad = 0;
        } else {
            early_bad += 1;
        }

        if train_mse < best_train - tcfg.min_improvement {
            best_train = train_mse;
            plateau_bad = 0;
        } else {
            plateau_bad += 1;
            if plateau_bad >= tcfg.plateau_patience {
                lr = (lr * tcfg.plateau_factor).max(tcfg.min_lr);
                plateau_bad = 0;
            }
        }

        if early_bad >= tcfg.early_stop_patience {
            break;
        }
    }

    let final_params = best_params.unwrap_or(params);
    Ok((
        final_params,
        TrainingHistory {
            epochs: history,
            best_epoch,
            best_val_mse: best_val,
        },
    ))
}

/// Normalize raw feature rows with the stored statistics, run an eval-mode
/// forward pass, rescale to score units, clamp to [0, 1000].
pub fn predict(params: &ModelParams, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let normalizer = params.normalizer.as_ref().ok_or(Error::MissingNormalizer)?;
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    for row in rows {
        if row.len() != params.config.input_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("input_dim {}", params.config.input_dim),
                got: format!("{} features", row.len()),
            });
        }
    }
    let x_raw = Matrix::from_rows(rows);
    let x = normalizer.apply_matrix(&x_raw);
    let mut out = Vec::with_capacity(rows.len());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + 256).min(x.rows());
        let indices: Vec<usize> = (start..end).collect();
        let xb = gather_rows(&x, &indices);
        let (preds, _) = forward_batch(params, &xb, ForwardMode::Eval)?;
        out.extend(
            preds
                .iter()
                .map(|p| (p * params.target_scale).clamp(0.0, 1000.0)),
        );
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn small_model(input_dim: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            input_dim,
            block_dims: vec![(32, 32), (32, 16)],
            head_dims: (16, 8, 1),
            dropout_p: 0.1,
            ln_epsilon: 1e-5,
            seed,
        }
    }

    fn toy_dataset(n: usize, seed: u64, target_fn: impl Fn(&[f64]) -> f64) -> LabeledDataset {
        use rand::Rng;
        let mut rng = derive_rng(seed, "toy-data");
        let mut features = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for i in 0..n {
            let wallet = format!("0x{i:05}");
            let row: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            labels.insert(wallet.clone(), target_fn(&row).clamp(0.0, 1000.0));
            features.insert(wallet, row);
        }
        let wallets: Vec<String> = features.keys().cloned().collect();
        let split = crate::labels::split_wallets(&wallets, 0.2, seed).unwrap();
        LabeledDataset::new(&features, &labels, split, seed).unwrap()
    }

    #[test]
    fn normalizer_examples() {
        let m = Matrix::from_vec(3, 2, vec![1.0, 0.0, 1.0, 2.0, 1.0, 1.0]);
        let norm = Normalizer::fit(&m).unwrap();
        // Constant column floors at 1e-8; column [0, 2, 1] has mean 1.
        assert_eq!(norm.mean[0], 1.0);
        assert_eq!(norm.std[0], 1e-8);
        assert_eq!(norm.mean[1], 1.0);
        let two_rows = Matrix::from_vec(2, 1, vec![0.0, 2.0]);
        let norm = Normalizer::fit(&two_rows).unwrap();
        assert_eq!(norm.mean[0], 1.0);
        assert_eq!(norm.std[0], 1.0);
        assert!(matches!(
            Normalizer::fit(&Matrix::zeros(1, 2)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn normalized_train_matrix_is_standardized() {
        use rand::Rng;
        let mut rng = derive_rng(8, "norm-check");
        let x = Matrix::from_vec(200, 3, (0..600).map(|_| rng.random_range(-5.0..9.0)).collect());
        let norm = Normalizer::fit(&x).unwrap();
        let z = norm.apply_matrix(&x);
        for j in 0..3 {
            let col: Vec<f64> = (0..200).map(|i| z.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / 200.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 200.0;
            assert!(mean.abs() < 1e-9, "mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "std {}", var.sqrt());
        }
    }

    #[test]
    fn constant_target_converges_fast() {
        let dataset = toy_dataset(300, 3, |_| 400.0);
        let mcfg = small_model(4, 3);
        let tcfg = TrainConfig {
            max_epochs: 50,
            batch_size: 8,
            seed: 3,
            ..TrainConfig::default()
        };
        let (params, history) = train(&dataset, &mcfg, &tcfg).unwrap();
        // Constant targets: the degenerate regression collapses to the
        // constant predictor well inside the 50-epoch budget.
        assert!(history.best_val_mse < 1e-4, "best val mse {}", history.best_val_mse);
        let val_rows = dataset.rows_in(Split::Val);
        let preds = predict(&params, &val_rows.iter().map(|r| r.features.clone()).collect::<Vec<_>>()).unwrap();
        for p in preds {
            assert!((p - 400.0).abs() < 50.0, "pred {p}");
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let dataset = toy_dataset(120, 5, |row| 500.0 + 300.0 * row[0]);
        let mcfg = small_model(4, 5);
        let tcfg = TrainConfig {
            max_epochs: 8,
            seed: 5,
            ..TrainConfig::default()
        };
        let (p1, h1) = train(&dataset, &mcfg, &tcfg).unwrap();
        let (p2, h2) = train(&dataset, &mcfg, &tcfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn best_so_far_val_mse_is_nonincreasing() {
        let dataset = toy_dataset(200, 7, |row| 500.0 + 200.0 * row[1] - 100.0 * row[2]);
        let mcfg = small_model(4, 7);
        let tcfg = TrainConfig {
            max_epochs: 30,
            seed: 7,
            ..TrainConfig::default()
        };
        let (_, history) = train(&dataset, &mcfg, &tcfg).unwrap();
        let mut best = f64::INFINITY;
        for e in &history.epochs {
            let new_best = best.min(e.val_mse);
            assert!(new_best <= best);
            best = new_best;
        }
        assert!((history.best_val_mse - best).abs() <= 1e-6 || history.best_val_mse <= best);
    }

    #[test]
    fn empty_split_is_rejected() {
        let mut dataset = toy_dataset(50, 9, |_| 100.0);
        for s in dataset.split.values_mut() {
            *s = Split::Train;
        }
        let err = train(&dataset, &small_model(4, 9), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptySplit("val")));
    }

    #[test]
    fn predict_is_deterministic_and_clamped() {
        let dataset = toy_dataset(100, 11, |row| 500.0 + 400.0 * row[0]);
        let mcfg = small_model(4, 11);
        let tcfg = TrainConfig {
            max_epochs: 5,
            seed: 11,
            ..TrainConfig::default()
        };
        let (params, _) = train(&dataset, &mcfg, &tcfg).unwrap();
        let rows = vec![vec![0.1, -0.2, 0.9, 0.0]; 2];
        let a = predict(&params, &rows).unwrap();
        assert_eq!(a[0], a[1]);
        // Wild inputs stay clamped to the score range.
        let wild: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 1e4, -1e6, 999.0, 1e5])
            .collect();
        for p in predict(&params, &wild).unwrap() {
            assert!((0.0..=1000.0).contains(&p));
        }
    }

    #[test]
    fn predict_without_normalizer_fails() {
        let params = ModelParams::init(&small_model(4, 1)).unwrap();
        assert!(matches!(
            predict(&params, &[vec![0.0; 4]]),
            Err(Error::MissingNormalizer)
        ));
    }
}
