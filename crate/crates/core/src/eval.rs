//! Evaluation artifacts: tolerance accuracy, residual distributions, bin-wise
//! behavioral summaries, and machine-readable report files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{LpFeatures, SwapFeatures};

pub const RESIDUAL_BIN_WIDTH: f64 = 10.0;
pub const RESIDUAL_RANGE: f64 = 300.0;
pub const SCORE_BIN_WIDTH: u32 = 100;
pub const DEFAULT_TOLERANCE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Lp,
    Swap,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Lp => "lp",
            Role::Swap => "swap",
        })
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Role::Lp),
            "swap" => Ok(Role::Swap),
            other => Err(Error::InvalidConfig(format!("unknown role `{other}`"))),
        }
    }
}

/// Fraction of predictions within `tol` of their target.
pub fn tolerance_accuracy(preds: &[f64], targets: &[f64], tol: f64) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = preds
        .iter()
        .zip(targets)
        .filter(|(p, t)| (*p - *t).abs() <= tol)
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Width-10 histogram over [-300, 300] with two outlier tails, so counts
/// always reconcile with the wallet count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualHistogram {
    pub bins: Vec<HistBin>,
    pub below: usize,
    pub above: usize,
}

impl ResidualHistogram {
    pub fn total_count(&self) -> usize {
        self.below + self.above + self.bins.iter().map(|b| b.count).sum::<usize>()
    }
}

/// Residuals are prediction minus target; std is the population std.
pub fn residual_stats(preds: &[f64], targets: &[f64]) -> Result<(f64, f64, ResidualHistogram)> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.len() < 2 {
        return Err(Error::InsufficientData {
            need: 2,
            got: preds.len(),
        });
    }
    let residuals: Vec<f64> = preds.iter().zip(targets).map(|(p, t)| p - t).collect();
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = var.sqrt();

    let n_bins = (2.0 * RESIDUAL_RANGE / RESIDUAL_BIN_WIDTH) as usize;
    let mut bins: Vec<HistBin> = (0..n_bins)
        .map(|i| HistBin {
            lo: -RESIDUAL_RANGE + i as f64 * RESIDUAL_BIN_WIDTH,
            hi: -RESIDUAL_RANGE + (i + 1) as f64 * RESIDUAL_BIN_WIDTH,
            count: 0,
        })
        .collect();
    let mut below = 0;
    let mut above = 0;
    for r in &residuals {
        if *r < -RESIDUAL_RANGE {
            below += 1;
        } else {
            let idx = ((r + RESIDUAL_RANGE) / RESIDUAL_BIN_WIDTH).floor() as usize;
            if idx >= n_bins {
                above += 1;
            } else {
                bins[idx].count += 1;
            }
        }
    }
    Ok((mean, std, ResidualHistogram { bins, below, above }))
}

/// Role-specific averaged metrics of one score bin, mirroring the reference
/// summary tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum BinMetrics {
    Lp {
        avg_deposit_usd: f64,
        avg_withdraw_usd: f64,
        avg_holding_days: f64,
        liquidity_remaining: f64,
        deposit_frequency: f64,
    },
    Swap {
        avg_volume_usd: f64,
        avg_holding_days: f64,
        avg_swap_count: f64,
        avg_unique_tokens: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub score_lo: u32,
    pub score_hi: u32,
    pub wallet_count: usize,
    pub metrics: BinMetrics,
}

fn score_bin_index(score: f64) -> usize {
    // Scores are clamped to [0, 1000]; 1000 belongs to the top bin.
    ((score / SCORE_BIN_WIDTH as f64).floor() as usize).min(9)
}

/// Width-100 bin means of LP behavior columns; empty bins are omitted.
/// Every featured wallet must have a score.
pub fn bin_summary_lp(
    features: &BTreeMap<String, LpFeatures>,
    scores: &BTreeMap<String, f64>,
) -> Result<Vec<BinRow>> {
    let mut sums: Vec<(usize, [f64; 5])> = vec![(0, [0.0; 5]); 10];
    for (wallet, f) in features {
        let score = scores.get(wallet).ok_or_else(|| Error::MissingScore(wallet.clone()))?;
        let idx = score_bin_index(*score);
        let entry = &mut sums[idx];
        entry.0 += 1;
        entry.1[0] += f.total_deposit_usd;
        entry.1[1] += f.total_withdraw_usd;
        entry.1[2] += f.avg_holding_days;
        entry.1[3] += f.liquidity_retention;
        entry.1[4] += f.deposit_freq_per_month;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .filter(|(_, (count, _))| *count > 0)
        .map(|(i, (count, s))| {
            let n = count as f64;
            BinRow {
                score_lo: i as u32 * SCORE_BIN_WIDTH,
                score_hi: (i as u32 + 1) * SCORE_BIN_WIDTH,
                wallet_count: count,
                metrics: BinMetrics::Lp {
                    avg_deposit_usd: s[0] / n,
                    avg_withdraw_usd: s[1] / n,
                    avg_holding_days: s[2] / n,
                    liquidity_remaining: s[3] / n,
                    deposit_frequency: s[4] / n,
                },
            }
        })
        .collect())
}

/// Width-100 bin means of swap behavior columns; empty bins are omitted.
pub fn bin_summary_swap(
    features: &BTreeMap<String, SwapFeatures>,
    scores: &BTreeMap<String, f64>,
) -> Result<Vec<BinRow>> {
    let mut sums: Vec<(usize, [f64; 4])> = vec![(0, [0.0; 4]); 10];
    for (wallet, f) in features {
        let score = scores.get(wallet).ok_or_else(|| Error::MissingScore(wallet.clone()))?;
        let idx = score_bin_index(*score);
        let entry = &mut sums[idx];
        entry.0 += 1;
        entry.1[0] += f.total_volume_usd;
        entry.1[1] += f.avg_inter_swap_days;
        entry.1[2] += f.swap_count as f64;
        entry.1[3] += f.unique_tokens as f64;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .filter(|(_, (count, _))| *count > 0)
        .map(|(i, (count, s))| {
            let n = count as f64;
            BinRow {
                score_lo: i as u32 * SCORE_BIN_WIDTH,
                score_hi: (i as u32 + 1) * SCORE_BIN_WIDTH,
                wallet_count: count,
                metrics: BinMetrics::Swap {
                    avg_volume_usd: s[0] / n,
                    avg_holding_days: s[1] / n,
                    avg_swap_count: s[2] / n,
                    avg_unique_tokens: s[3] / n,
                },
            }
        })
        .collect())
}

/// Per-wallet evaluation row retained in the report for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub wallet: String,
    pub target: f64,
    pub pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub role: Role,
    pub n_wallets: usize,
    pub tolerance: f64,
    pub tol_accuracy: f64,
    pub residual_mean: f64,
    pub residual_std: f64,
    pub residual_histogram: ResidualHistogram,
    pub bin_table: Vec<BinRow>,
    /// Which score the bin table is keyed on ("predicted").
    pub binned_by: String,
    pub rows: Vec<ResidualRow>,
}

/// Assemble a report for the LP role: predictions vs noise-free blueprint
/// targets, binned by predicted score.
pub fn build_report_lp(
    wallets: &[String],
    preds: &[f64],
    targets: &[f64],
    features: &BTreeMap<String, LpFeatures>,
) -> Result<EvalReport> {
    build_report(Role::Lp, wallets, preds, targets, |scores| {
        let subset: BTreeMap<String, LpFeatures> = wallets
            .iter()
            .filter_map(|w| features.get(w).map(|f| (w.clone(), f.clone())))
            .collect();
        bin_summary_lp(&subset, scores)
    })
}

pub fn build_report_swap(
    wallets: &[String],
    preds: &[f64],
    targets: &[f64],
    features: &BTreeMap<String, SwapFeatures>,
) -> Result<EvalReport> {
    build_report(Role::Swap, wallets, preds, targets, |scores| {
        let subset: BTreeMap<String, SwapFeatures> = wallets
            .iter()
            .filter_map(|w| features.get(w).map(|f| (w.clone(), f.clone())))
            .collect();
        bin_summary_swap(&subset, scores)
    })
}

fn build_report(
    role: Role,
    wallets: &[String],
    preds: &[f64],
    targets: &[f64],
    bin_fn: impl FnOnce(&BTreeMap<String, f64>) -> Result<Vec<BinRow>>,
) -> Result<EvalReport> {
    if wallets.len() != preds.len() {
        return Err(Error::LengthMismatch {
            left: wallets.len(),
            right: preds.len(),
        });
    }
    let tol_accuracy = tolerance_accuracy(preds, targets, DEFAULT_TOLERANCE)?;
    let (residual_mean, residual_std, residual_histogram) = residual_stats(preds, targets)?;
    let pred_scores: BTreeMap<String, f64> = wallets
        .iter()
        .cloned()
        .zip(preds.iter().copied())
        .collect();
    let bin_table = bin_fn(&pred_scores)?;
    let rows = wallets
        .iter()
        .zip(preds.iter().zip(targets))
        .map(|(w, (p, t))| ResidualRow {
            wallet: w.clone(),
            target: *t,
            pred: *p,
        })
        .collect();
    Ok(EvalReport {
        role,
        n_wallets: wallets.len(),
        tolerance: DEFAULT_TOLERANCE,
        tol_accuracy,
        residual_mean,
        residual_std,
        residual_histogram,
        bin_table,
        binned_by: "predicted".to_string(),
        rows,
    })
}

/// Write report.json, bins.csv and residuals.csv into `dir`.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<()> {
    if report.n_wallets == 0 {
        return Err(Error::EmptyReport);
    }
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut f, report)?;
    f.write_all(b"\n")?;

    let mut wtr = csv::Writer::from_path(dir.join("bins.csv"))?;
    match report.role {
        Role::Lp => {
            wtr.write_record([
                "Score Range",
                "Avg Deposit ($)",
                "Avg Withdraw ($)",
                "Avg Holding (days)",
                "Liquidity Remaining",
                "Deposit Frequency",
                "Wallet Count",
            ])?;
            for row in &report.bin_table {
                let BinMetrics::Lp {
                    avg_deposit_usd,
                    avg_withdraw_usd,
                    avg_holding_days,
                    liquidity_remaining,
                    deposit_frequency,
                } = &row.metrics
                else {
                    return Err(Error::InvalidConfig("swap bin row in LP report".into()));
                };
                wtr.write_record([
                    format!("[{}, {})", row.score_lo, row.score_hi),
                    format!("{avg_deposit_usd:.6}"),
                    format!("{avg_withdraw_usd:.6}"),
                    format!("{avg_holding_days:.6}"),
                    format!("{liquidity_remaining:.6}"),
                    format!("{deposit_frequency:.6}"),
                    format!("{}", row.wallet_count),
                ])?;
            }
        }
        Role::Swap => {
            wtr.write_record([
                "Score Bin",
                "Avg Volume ($)",
                "Avg Holding (days)",
                "Avg Swap Count",
                "Avg Unique Tokens",
                "Wallet Count",
            ])?;
            for row in &report.bin_table {
                let BinMetrics::Swap {
                    avg_volume_usd,
                    avg_holding_days,
                    avg_swap_count,
                    avg_unique_tokens,
                } = &row.metrics
                else {
                    return Err(Error::InvalidConfig("LP bin row in swap report".into()));
                };
                wtr.write_record([
                    format!("[{}, {})", row.score_lo, row.score_hi),
                    format!("{avg_volume_usd:.6}"),
                    format!("{avg_holding_days:.6}"),
                    format!("{avg_swap_count:.6}"),
                    format!("{avg_unique_tokens:.6}"),
                    format!("{}", row.wallet_count),
                ])?;
            }
        }
    }
    wtr.flush()?;

    let mut wtr = csv::Writer::from_path(dir.join("residuals.csv"))?;
    wtr.write_record(["wallet", "target", "pred", "residual"])?;
    for row in &report.rows {
        wtr.write_record([
            row.wallet.clone(),
            format!("{:.6}", row.target),
            format!("{:.6}", row.pred),
            format!("{:.6}", row.pred - row.target),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_report(path: &Path) -> Result<EvalReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData { need: 2, got: a.len() });
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        let dx = x - mean;
        let dy = y - mean;
        num += dx * dy;
        da += dx * dx;
        db += dy * dy;
    }
    if da == 0.0 || db == 0.0 {
        return Err(Error::InsufficientData { need: 2, got: 1 });
    }
    Ok(num / (da * db).sqrt())
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        i = j + 1;
    }
    ranks
}
