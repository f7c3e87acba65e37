//! AdamW with decoupled weight decay.
//!
//! beta1 = 0.9, beta2 = 0.999, eps = 1e-8. Decay applies to linear weights
//! and biases but not to layer-norm gain/shift:
//! theta <- theta - lr * mhat / (sqrt(vhat) + eps) - lr * wd * theta.

use super::model::Gradients;
use super::ModelParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// First/second moment estimates per trainable tensor, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamWState {
    pub fn new(params: &ModelParams) -> Self {
        let sizes: Vec<usize> = params.trainable_slots().iter().map(|(s, _)| s.len()).collect();
        AdamWState {
            m: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            v: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One optimizer step over every trainable tensor.
pub fn adamw_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamWState,
    lr: f64,
    weight_decay: f64,
) {
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - BETA1.powi(t);
    let bias2 = 1.0 - BETA2.powi(t);
    let grad_slots = grads.slots();
    let param_slots = params.trainable_slots_mut();
    assert_eq!(grad_slots.len(), param_slots.len(), "gradient/parameter slot mismatch");
    for (slot_idx, (slot, kind)) in param_slots.into_iter().enumerate() {
        let g = grad_slots[slot_idx];
        let m = &mut state.m[slot_idx];
        let v = &mut state.v[slot_idx];
        let decay = if kind.decays() { lr * weight_decay } else { 0.0 };
        for i in 0..slot.len() {
            let gi = g[i];
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            let old = slot[i];
            slot[i] = old - lr * m_hat / (v_hat.sqrt() + EPS) - decay * old;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{backward, forward_batch, ForwardMode};
    use crate::nn::{Matrix, ModelConfig};

    fn tiny_params(seed: u64) -> ModelParams {
        ModelParams::init(&ModelConfig {
            input_dim: 3,
            block_dims: vec![(8, 4)],
            head_dims: (4, 4, 1),
            dropout_p: 0.0,
            ln_epsilon: 1e-5,
            seed,
        })
        .unwrap()
    }

    fn zero_grads(params: &ModelParams) -> Gradients {
        let x = Matrix::zeros(1, 3);
        let (_, cache) = forward_batch(params, &x, ForwardMode::Eval).unwrap();
        backward(params, cache, &[0.0]).unwrap()
    }

    #[test]
    fn zero_gradients_apply_pure_decay() {
        let mut params = tiny_params(5);
        let before = params.proj_w.data().to_vec();
        let grads = zero_grads(&params);
        let mut state = AdamWState::new(&params);
        let (lr, wd) = (5e-4, 1e-4);
        adamw_step(&mut params, &grads, &mut state, lr, wd);
        for (new, old) in params.proj_w.data().iter().zip(&before) {
            // theta' = theta - lr*wd*theta exactly.
            assert_eq!(*new, old - lr * wd * old);
        }
        // LN gain never decays: stays exactly 1.
        assert!(params.blocks[0].ln_gain.iter().all(|g| *g == 1.0));
    }

    #[test]
    fn scalar_first_step_hand_computed() {
        // theta = 1, g = 1, t = 1: m = 0.1, v = 0.001, mhat = 1, vhat = 1,
        // theta' = 1 - lr/(1 + eps) - lr*wd.
        let theta = 1.0f64;
        let g = 1.0f64;
        let (lr, wd) = (5e-4, 1e-4);
        let m = (1.0 - BETA1) * g;
        let v = (1.0 - BETA2) * g * g;
        let m_hat = m / (1.0 - BETA1);
        let v_hat = v / (1.0 - BETA2);
        let updated = theta - lr * m_hat / (v_hat.sqrt() + EPS) - lr * wd * theta;
        let expected = 1.0 - 5e-4 - 5e-8;
        assert!((updated - expected).abs() < 1e-11, "{updated} vs {expected}");
        assert!((m_hat - 1.0).abs() < 1e-15);
        assert!((v_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut params = tiny_params(9);
            let mut state = AdamWState::new(&params);
            let x = Matrix::from_vec(2, 3, vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75]);
            for step in 0..5 {
                let (preds, cache) =
                    forward_batch(&params, &x, ForwardMode::Train { seed: 1, step }).unwrap();
                let d: Vec<f64> = preds.iter().map(|p| 2.0 * (p - 0.3) / 2.0).collect();
                let grads = backward(&params, cache, &d).unwrap();
                adamw_step(&mut params, &grads, &mut state, 5e-4, 1e-4);
            }
            (params, state)
        };
        let (p1, s1) = run();
        let (p2, s2) = run();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }
}
