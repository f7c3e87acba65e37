//! Row-major f64 matrices with a register-tiled GEMM.
//!
//! Every output element is reduced sequentially by a single thread (rayon
//! splits work across independent row blocks), so results are bit-identical
//! regardless of thread count.

use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

const MR: usize = 4; // output rows per register tile
const NR: usize = 16; // output cols per register tile
const KB: usize = 64; // k-panel depth; keeps the active B panel cache-hot

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "data length must match shape");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        // Blocked transpose keeps both sides cache-friendly.
        const B: usize = 32;
        for i0 in (0..self.rows).step_by(B) {
            for j0 in (0..self.cols).step_by(B) {
                for i in i0..(i0 + B).min(self.rows) {
                    let row = self.row(i);
                    for j in j0..(j0 + B).min(self.cols) {
                        out.data[j * self.rows + i] = row[j];
                    }
                }
            }
        }
        out
    }

    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64 + Sync) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }

    /// Column sums (used for bias gradients).
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    /// Add a row vector to every row.
    pub fn add_row_vector(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols);
        for i in 0..self.rows {
            for (v, b) in self.row_mut(i).iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    /// Element-wise sum of two equal-shape matrices.
    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Element-wise product of two equal-shape matrices.
    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// `a (m x k) * b (k x n)`, parallel over row blocks of `a`.
///
/// k is processed in panels so the active slice of `b` stays in cache; each
/// output element is still reduced in ascending-k order by a single thread,
/// so results are bit-identical for any thread count.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(
        a.cols, b.rows,
        "matmul shape mismatch: {}x{} * {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = Matrix::zeros(m, n);
    // Rows handled per rayon task: a few MR-blocks per thread, so task
    // dispatch stays negligible next to the kernel work.
    let n_threads = rayon::current_num_threads().max(1);
    let rows_per_task = (m.div_ceil(4 * n_threads)).div_ceil(MR).max(1) * MR;
    let mut k0 = 0;
    while k0 < k {
        let kb = (k - k0).min(KB);
        let b_panel = &b.data[k0 * n..(k0 + kb) * n];
        out.data
            .par_chunks_mut(rows_per_task * n)
            .enumerate()
            .for_each(|(task, out_task)| {
                let task_i0 = task * rows_per_task;
                let task_rows = out_task.len() / n;
                let mut r0 = 0;
                while r0 < task_rows {
                    let i0 = task_i0 + r0;
                    let rows_here = (task_rows - r0).min(MR);
                    gemm_panel(
                        &a.data[i0 * k..(i0 + rows_here) * k],
                        b_panel,
                        &mut out_task[r0 * n..(r0 + rows_here) * n],
                        rows_here,
                        k,
                        n,
                        k0,
                        kb,
                    );
                    r0 += rows_here;
                }
            });
        k0 += kb;
    }
    out
}

/// Accumulate one k-panel: `out (rows_here x n) += a_block[:, k0..k0+kb] * b_panel`.
#[allow(clippy::too_many_arguments)]
fn gemm_panel(
    a: &[f64],
    b_panel: &[f64],
    out: &mut [f64],
    rows_here: usize,
    k: usize,
    n: usize,
    k0: usize,
    kb: usize,
) {
    let n_main = n - n % NR;
    if rows_here == MR {
        let (a0, rest) = a.split_at(k);
        let (a1, rest) = rest.split_at(k);
        let (a2, a3) = rest.split_at(k);
        let (a0, a1) = (&a0[k0..k0 + kb], &a1[k0..k0 + kb]);
        let (a2, a3) = (&a2[k0..k0 + kb], &a3[k0..k0 + kb]);
        let mut j0 = 0;
        while j0 < n_main {
            let mut acc0: [f64; NR] = out[j0..j0 + NR].try_into().expect("NR segment");
            let mut acc1: [f64; NR] = out[n + j0..n + j0 + NR].try_into().expect("NR segment");
            let mut acc2: [f64; NR] = out[2 * n + j0..2 * n + j0 + NR].try_into().expect("NR segment");
            let mut acc3: [f64; NR] = out[3 * n + j0..3 * n + j0 + NR].try_into().expect("NR segment");
            for kk in 0..kb {
                let b_seg: &[f64; NR] =
                    b_panel[kk * n + j0..kk * n + j0 + NR].try_into().expect("NR segment");
                let (v0, v1, v2, v3) = (a0[kk], a1[kk], a2[kk], a3[kk]);
                for j in 0..NR {
                    acc0[j] = v0.mul_add(b_seg[j], acc0[j]);
                    acc1[j] = v1.mul_add(b_seg[j], acc1[j]);
                    acc2[j] = v2.mul_add(b_seg[j], acc2[j]);
                    acc3[j] = v3.mul_add(b_seg[j], acc3[j]);
                }
            }
            out[j0..j0 + NR].copy_from_slice(&acc0);
            out[n + j0..n + j0 + NR].copy_from_slice(&acc1);
            out[2 * n + j0..2 * n + j0 + NR].copy_from_slice(&acc2);
            out[3 * n + j0..3 * n + j0 + NR].copy_from_slice(&acc3);
            j0 += NR;
        }
    } else {
        let mut j0 = 0;
        while j0 < n_main {
            for r in 0..rows_here {
                let a_r = &a[r * k + k0..r * k + k0 + kb];
                let mut acc: [f64; NR] =
                    out[r * n + j0..r * n + j0 + NR].try_into().expect("NR segment");
                for (kk, v) in a_r.iter().enumerate() {
                    let b_seg: &[f64; NR] =
                        b_panel[kk * n + j0..kk * n + j0 + NR].try_into().expect("NR segment");
                    for j in 0..NR {
                        acc[j] = v.mul_add(b_seg[j], acc[j]);
                    }
                }
                out[r * n + j0..r * n + j0 + NR].copy_from_slice(&acc);
            }
            j0 += NR;
        }
    }
    // Remainder columns.
    if n_main < n {
        for r in 0..rows_here {
            for j in n_main..n {
                let mut acc = out[r * n + j];
                for kk in 0..kb {
                    acc = a[r * k + k0 + kk].mul_add(b_panel[kk * n + j], acc);
                }
                out[r * n + j] = acc;
            }
        }
    }
}

/// `x * w + bias`, the dense-layer forward primitive.
pub fn linear_forward(x: &Matrix, w: &Matrix, bias: &[f64]) -> Matrix {
    let mut out = matmul(x, w);
    out.add_row_vector(bias);
    out
}
