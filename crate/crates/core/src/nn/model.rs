//! Exact forward and reverse-mode math for the residual MLP.
//!
//! Forward, per batch row:
//!   proj = SiLU(W0 x + b0)
//!   block: h = Dropout(LN(skip(in) + W2 SiLU(W1 in + b1) + b2))
//!          with skip = P in when widths differ, identity otherwise
//!   head:  y = Wh2 SiLU(LN(Wh1 h + bh1)) + bh2
//!
//! Dropout uses inverted scaling 1/(1-p) and is active only in train mode;
//! the mask stream is keyed by (seed, step, layer). `backward` consumes the
//! cache by value, so a cache can never be reused.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::seeding::derive_rng;

use super::matrix::{linear_forward, matmul, Matrix};
use super::{BlockParams, ModelParams};

/// Train mode enables dropout with a deterministic per-step mask stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train { seed: u64, step: u64 },
    Eval,
}

pub struct BlockCache {
    z1: Matrix,
    sig1: Matrix,
    a1: Matrix,
    nhat: Matrix,
    inv_std: Vec<f64>,
    mask: Option<Matrix>,
}

/// Intermediate activations needed by [`backward`].
pub struct ForwardCache {
    x: Matrix,
    z0: Matrix,
    sig0: Matrix,
    a0: Matrix,
    blocks: Vec<BlockCache>,
    block_outs: Vec<Matrix>,
    nhat_h: Matrix,
    inv_std_h: Vec<f64>,
    lnout_h: Matrix,
    sig_h: Matrix,
    ah: Matrix,
}

/// Parameter gradients, mirroring [`ModelParams`] shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub proj_w: Matrix,
    pub proj_b: Vec<f64>,
    pub blocks: Vec<BlockGradients>,
    pub head_w1: Matrix,
    pub head_b1: Vec<f64>,
    pub head_ln_gain: Vec<f64>,
    pub head_ln_shift: Vec<f64>,
    pub head_w2: Matrix,
    pub head_b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_shift: Vec<f64>,
    pub shortcut: Option<Matrix>,
}

impl Gradients {
    /// Slices in the same canonical order as `ModelParams::trainable_slots`.
    pub fn slots(&self) -> Vec<&[f64]> {
        let mut slots: Vec<&[f64]> = Vec::new();
        slots.push(self.proj_w.data());
        slots.push(&self.proj_b);
        for block in &self.blocks {
            slots.push(block.w1.data());
            slots.push(&block.b1);
            slots.push(block.w2.data());
            slots.push(&block.b2);
            slots.push(&block.ln_gain);
            slots.push(&block.ln_shift);
            if let Some(p) = &block.shortcut {
                slots.push(p.data());
            }
        }
        slots.push(self.head_w1.data());
        slots.push(&self.head_b1);
        slots.push(&self.head_ln_gain);
        slots.push(&self.head_ln_shift);
        slots.push(self.head_w2.data());
        slots.push(&self.head_b2);
        slots
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// SiLU(z) = z * sigmoid(z); returns (sigmoid(z), silu(z)).
fn silu(z: &Matrix) -> (Matrix, Matrix) {
    let mut sig = z.clone();
    sig.map_in_place(sigmoid);
    let act = z.hadamard(&sig);
    (sig, act)
}

/// d SiLU / dz given z and cached sigmoid(z), times the upstream gradient.
fn silu_backward(upstream: &Matrix, z: &Matrix, sig: &Matrix) -> Matrix {
    let mut out = upstream.clone();
    let (zd, sd) = (z.data(), sig.data());
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let s = sd[i];
        *v *= s + zd[i] * s * (1.0 - s);
    }
    out
}

/// Per-row layer norm; returns (nhat, inv_std, gain * nhat + shift).
fn layer_norm_forward(s: &Matrix, gain: &[f64], shift: &[f64], eps: f64) -> (Matrix, Vec<f64>, Matrix) {
    let (rows, cols) = (s.rows(), s.cols());
    let mut nhat = Matrix::zeros(rows, cols);
    let mut out = Matrix::zeros(rows, cols);
    let mut inv_std = vec![0.0; rows];
    let n = cols as f64;
    for i in 0..rows {
        let row = s.row(i);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + eps).sqrt();
        inv_std[i] = inv;
        let nh = nhat.row_mut(i);
        for (j, v) in row.iter().enumerate() {
            nh[j] = (v - mean) * inv;
        }
        let o = out.row_mut(i);
        for j in 0..cols {
            o[j] = nh[j] * gain[j] + shift[j];
        }
    }
    (nhat, inv_std, out)
}

/// Layer-norm backward. Returns d(pre-norm input); accumulates dgain/dshift.
fn layer_norm_backward(
    d_out: &Matrix,
    nhat: &Matrix,
    inv_std: &[f64],
    gain: &[f64],
    d_gain: &mut [f64],
    d_shift: &mut [f64],
) -> Matrix {
    let (rows, cols) = (d_out.rows(), d_out.cols());
    let n = cols as f64;
    let mut d_s = Matrix::zeros(rows, cols);
    for i in 0..rows {
        let dout_row = d_out.row(i);
        let nhat_row = nhat.row(i);
        for j in 0..cols {
            d_gain[j] += dout_row[j] * nhat_row[j];
            d_shift[j] += dout_row[j];
        }
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for j in 0..cols {
            let dn = dout_row[j] * gain[j];
            m1 += dn;
            m2 += dn * nhat_row[j];
        }
        m1 /= n;
        m2 /= n;
        let ds_row = d_s.row_mut(i);
        for j in 0..cols {
            let dn = dout_row[j] * gain[j];
            ds_row[j] = inv_std[i] * (dn - m1 - nhat_row[j] * m2);
        }
    }
    d_s
}

/// Inverted-dropout mask of factors {0, 1/(1-p)}, keyed by (seed, step, layer).
fn dropout_mask(rows: usize, cols: usize, p: f64, seed: u64, step: u64, layer: usize) -> Matrix {
    let mut rng = derive_rng(seed, &format!("dropout/{step}/{layer}"));
    let keep_scale = 1.0 / (1.0 - p);
    // Keep when the draw falls below (1-p) * 2^64.
    let threshold = ((1.0 - p) * (u64::MAX as f64)) as u64;
    let mut mask = Matrix::zeros(rows, cols);
    for v in mask.data_mut() {
        *v = if rng.next_u64() < threshold { keep_scale } else { 0.0 };
    }
    mask
}

fn block_forward(
    input: &Matrix,
    params: &BlockParams,
    eps: f64,
    dropout_p: f64,
    mode: ForwardMode,
    layer: usize,
) -> (BlockCache, Matrix) {
    let z1 = linear_forward(input, &params.w1, &params.b1);
    let (sig1, a1) = silu(&z1);
    let mut s = linear_forward(&a1, &params.w2, &params.b2);
    match &params.shortcut {
        Some(p) => {
            let skip = matmul(input, p);
            s = s.add(&skip);
        }
        None => s = s.add(input),
    }
    let (nhat, inv_std, ln_out) = layer_norm_forward(&s, &params.ln_gain, &params.ln_shift, eps);
    let (mask, out) = match mode {
        ForwardMode::Train { seed, step } if dropout_p > 0.0 => {
            let mask = dropout_mask(ln_out.rows(), ln_out.cols(), dropout_p, seed, step, layer);
            let out = ln_out.hadamard(&mask);
            (Some(mask), out)
        }
        _ => (None, ln_out),
    };
    (
        BlockCache {
            z1,
            sig1,
            a1,
            nhat,
            inv_std,
            mask,
        },
        out,
    )
}

/// Batched forward pass over normalized inputs (one row per sample).
/// Returns per-row predictions (in scaled target units) and the cache.
pub fn forward_batch(
    params: &ModelParams,
    x: &Matrix,
    mode: ForwardMode,
) -> Result<(Vec<f64>, ForwardCache)> {
    if x.cols() != params.config.input_dim {
        return Err(Error::ShapeMismatch {
            expected: format!("input_dim {}", params.config.input_dim),
            got: format!("{} columns", x.cols()),
        });
    }
    let eps = params.config.ln_epsilon;
    let z0 = linear_forward(x, &params.proj_w, &params.proj_b);
    let (sig0, a0) = silu(&z0);

    let mut blocks = Vec::with_capacity(params.blocks.len());
    let mut block_outs: Vec<Matrix> = Vec::with_capacity(params.blocks.len());
    for (layer, block) in params.blocks.iter().enumerate() {
        let input = block_outs.last().unwrap_or(&a0);
        let (cache, out) = block_forward(input, block, eps, params.config.dropout_p, mode, layer);
        blocks.push(cache);
        block_outs.push(out);
    }

    let h = block_outs.last().unwrap_or(&a0);
    let zh1 = linear_forward(h, &params.head_w1, &params.head_b1);
    let (nhat_h, inv_std_h, lnout_h) =
        layer_norm_forward(&zh1, &params.head_ln_gain, &params.head_ln_shift, eps);
    let (sig_h, ah) = silu(&lnout_h);
    let y = linear_forward(&ah, &params.head_w2, &params.head_b2);
    let preds: Vec<f64> = (0..y.rows()).map(|i| y.get(i, 0)).collect();

    Ok((
        preds,
        ForwardCache {
            x: x.clone(),
            z0,
            sig0,
            a0,
            blocks,
            block_outs,
            nhat_h,
            inv_std_h,
            lnout_h,
            sig_h,
            ah,
        },
    ))
}

/// Single-sample forward.
pub fn forward_single(params: &ModelParams, x: &[f64], mode: ForwardMode) -> Result<(f64, ForwardCache)> {
    let m = Matrix::from_vec(1, x.len(), x.to_vec());
    let (preds, cache) = forward_batch(params, &m, mode)?;
    Ok((preds[0], cache))
}

/// Reverse-mode pass. `d_preds` is dLoss/dPrediction per batch row (the
/// caller folds in any 1/batch factor); gradients therefore accumulate the
/// batch sum of per-row contributions. The cache is consumed: reuse is
/// impossible by construction.
pub fn backward(params: &ModelParams, cache: ForwardCache, d_preds: &[f64]) -> Result<Gradients> {
    let batch = cache.x.rows();
    if d_preds.len() != batch {
        return Err(Error::LengthMismatch {
            left: d_preds.len(),
            right: batch,
        });
    }
    let d_y = Matrix::from_vec(batch, 1, d_preds.to_vec());

    // Head: y = Wh2 * SiLU(LN(Wh1 h + bh1)) + bh2.
    let head_w2_grad = matmul(&cache.ah.transpose(), &d_y);
    let head_b2_grad = d_y.col_sums();
    let d_ah = matmul(&d_y, &params.head_w2.transpose());
    let d_lnout_h = silu_backward(&d_ah, &cache.lnout_h, &cache.sig_h);
    let mut head_ln_gain_grad = vec![0.0; params.head_ln_gain.len()];
    let mut head_ln_shift_grad = vec![0.0; params.head_ln_shift.len()];
    let d_zh1 = layer_norm_backward(
        &d_lnout_h,
        &cache.nhat_h,
        &cache.inv_std_h,
        &params.head_ln_gain,
        &mut head_ln_gain_grad,
        &mut head_ln_shift_grad,
    );
    let h = cache.block_outs.last().unwrap_or(&cache.a0);
    let head_w1_grad = matmul(&h.transpose(), &d_zh1);
    let head_b1_grad = d_zh1.col_sums();
    let mut d_out = matmul(&d_zh1, &params.head_w1.transpose());

    // Blocks in reverse.
    let mut block_grads: Vec<BlockGradients> = Vec::with_capacity(params.blocks.len());
    for (layer, (block, bc)) in params.blocks.iter().zip(&cache.blocks).enumerate().rev() {
        let input = if layer == 0 {
            &cache.a0
        } else {
            &cache.block_outs[layer - 1]
        };
        let d_ln_out = match &bc.mask {
            Some(mask) => d_out.hadamard(mask),
            None => d_out,
        };
        let mut ln_gain_grad = vec![0.0; block.ln_gain.len()];
        let mut ln_shift_grad = vec![0.0; block.ln_shift.len()];
        let d_s = layer_norm_backward(
            &d_ln_out,
            &bc.nhat,
            &bc.inv_std,
            &block.ln_gain,
            &mut ln_gain_grad,
            &mut ln_shift_grad,
        );
        // Main path.
        let w2_grad = matmul(&bc.a1.transpose(), &d_s);
        let b2_grad = d_s.col_sums();
        let d_a1 = matmul(&d_s, &block.w2.transpose());
        let d_z1 = silu_backward(&d_a1, &bc.z1, &bc.sig1);
        let w1_grad = matmul(&input.transpose(), &d_z1);
        let b1_grad = d_z1.col_sums();
        let mut d_input = matmul(&d_z1, &block.w1.transpose());
        // Skip path.
        let shortcut_grad = match &block.shortcut {
            Some(p) => {
                let p_grad = matmul(&input.transpose(), &d_s);
                d_input = d_input.add(&matmul(&d_s, &p.transpose()));
                Some(p_grad)
            }
            None => {
                d_input = d_input.add(&d_s);
                None
            }
        };
        block_grads.push(BlockGradients {
            w1: w1_grad,
            b1: b1_grad,
            w2: w2_grad,
            b2: b2_grad,
            ln_gain: ln_gain_grad,
            ln_shift: ln_shift_grad,
            shortcut: shortcut_grad,
        });
        d_out = d_input;
    }
    block_grads.reverse();

    // Projection: a0 = SiLU(W0 x + b0); input gradient is not needed.
    let d_z0 = silu_backward(&d_out, &cache.z0, &cache.sig0);
    let proj_w_grad = matmul(&cache.x.transpose(), &d_z0);
    let proj_b_grad = d_z0.col_sums();

    Ok(Gradients {
        proj_w: proj_w_grad,
        proj_b: proj_b_grad,
        blocks: block_grads,
        head_w1: head_w1_grad,
        head_b1: head_b1_grad,
        head_ln_gain: head_ln_gain_grad,
        head_ln_shift: head_ln_shift_grad,
        head_w2: head_w2_grad,
        head_b2: head_b2_grad,
    })
}
