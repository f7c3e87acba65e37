//! Noise-augmented training targets and leakage-free wallet splits.
//!
//! Labels are a pure function of `(seed, wallet, blueprint total)`: each
//! wallet gets its own generator keyed by seed and wallet id, so parallel
//! generation and subset re-generation reproduce exactly, regardless of map
//! iteration order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::blueprint::ScoreBreakdown;
use crate::error::{Error, Result};
use crate::seeding::derive_rng_keyed;

pub const SCORE_MAX: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

/// Gaussian-perturbed blueprint totals, clamped to [0, 1000].
pub fn make_labels(
    scores: &BTreeMap<String, ScoreBreakdown>,
    sigma: f64,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidSigma(sigma));
    }
    let mut out = BTreeMap::new();
    for (wallet, breakdown) in scores {
        let noise = if sigma > 0.0 {
            let mut rng = derive_rng_keyed(seed, "label", wallet);
            Normal::new(0.0, sigma)
                .expect("sigma validated above")
                .sample(&mut rng)
        } else {
            0.0
        };
        out.insert(wallet.clone(), (breakdown.total + noise).clamp(0.0, SCORE_MAX));
    }
    Ok(out)
}

/// Deterministic seed-keyed wallet partition.
///
/// Wallets are ranked by a keyed hash, so the partition is invariant to input
/// order; |Val| is `round(val_fraction * n)`.
pub fn split_wallets(
    wallets: &[String],
    val_fraction: f64,
    seed: u64,
) -> Result<BTreeMap<String, Split>> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidValFraction(val_fraction));
    }
    let unique: BTreeSet<&String> = wallets.iter().collect();
    if unique.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = unique.len();
    let n_val = (val_fraction * n as f64).round() as usize;
    let mut ranked: Vec<(u64, &String)> = unique
        .into_iter()
        .map(|w| {
            use rand::RngCore;
            let mut rng = derive_rng_keyed(seed, "split", w);
            (rng.next_u64(), w)
        })
        .collect();
    ranked.sort();
    let mut out = BTreeMap::new();
    for (i, (_, wallet)) in ranked.into_iter().enumerate() {
        let split = if i < n_val { Split::Val } else { Split::Train };
        out.insert(wallet.clone(), split);
    }
    Ok(out)
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub wallet: String,
    pub features: Vec<f64>,
    pub target: f64,
}

/// Feature rows with targets and the wallet-level split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub rows: Vec<DatasetRow>,
    pub split: BTreeMap<String, Split>,
    pub seed: u64,
}

impl LabeledDataset {
    /// Assemble rows (in wallet order) from parallel maps. Every wallet must
    /// have a feature vector, a label in [0, 1000], and a split assignment.
    pub fn new(
        features: &BTreeMap<String, Vec<f64>>,
        labels: &BTreeMap<String, f64>,
        split: BTreeMap<String, Split>,
        seed: u64,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(features.len());
        for (wallet, feats) in features {
            let target = *labels
                .get(wallet)
                .ok_or_else(|| Error::MissingScore(wallet.clone()))?;
            if !(0.0..=SCORE_MAX).contains(&target) {
                return Err(Error::InvalidConfig(format!(
                    "target {target} for wallet {wallet} outside [0, {SCORE_MAX}]"
                )));
            }
            if !split.contains_key(wallet) {
                return Err(Error::MissingScore(wallet.clone()));
            }
            rows.push(DatasetRow {
                wallet: wallet.clone(),
                features: feats.clone(),
                target,
            });
        }
        Ok(LabeledDataset { rows, split, seed })
    }

    pub fn rows_in(&self, which: Split) -> Vec<&DatasetRow> {
        self.rows
            .iter()
            .filter(|r| self.split.get(&r.wallet) == Some(&which))
            .collect()
    }

    /// CSV export: wallet, feature columns, target, split.
    pub fn write_csv<W: Write>(&self, feature_names: &[&str], w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["wallet"];
        header.extend_from_slice(feature_names);
        header.push("target");
        header.push("split");
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.wallet.clone()];
            rec.extend(row.features.iter().map(|v| format!("{v:.6}")));
            rec.push(format!("{:.6}", row.target));
            rec.push(self.split[&row.wallet].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, seed: u64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let n_cols = headers.len();
        if n_cols < 3 {
            return Err(Error::ShapeMismatch {
                expected: "wallet,...features...,target,split".into(),
                got: headers.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut rows = Vec::new();
        let mut split = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let wallet = rec[0].to_string();
            let mut features = Vec::with_capacity(n_cols - 3);
            for i in 1..n_cols - 2 {
                features.push(rec[i].parse::<f64>().map_err(|_| {
                    Error::InvalidConfig(format!("bad feature for wallet {wallet}"))
                })?);
            }
            let target: f64 = rec[n_cols - 2]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad target for wallet {wallet}")))?;
            split.insert(wallet.clone(), rec[n_cols - 1].parse()?);
            rows.push(DatasetRow {
                wallet,
                features,
                target,
            });
        }
        Ok(LabeledDataset { rows, split, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn breakdowns(totals: &[(&str, f64)]) -> BTreeMap<String, ScoreBreakdown> {
        totals
            .iter()
            .map(|(w, t)| {
                (
                    w.to_string(),
                    ScoreBreakdown {
                        wallet: w.to_string(),
                        sub_scores: BTreeMap::new(),
                        total: *t,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let scores = breakdowns(&[("0xa", 123.45), ("0xb", 999.0)]);
        let labels = make_labels(&scores, 0.0, 7).unwrap();
        assert_eq!(labels["0xa"], 123.45);
        assert_eq!(labels["0xb"], 999.0);
    }

    #[test]
    fn labels_are_clamped() {
        let scores = breakdowns(&[("0xa", 995.0)]);
        for seed in 0..200 {
            let labels = make_labels(&scores, 25.0, seed).unwrap();
            assert!(labels["0xa"] <= 1000.0);
            assert!(labels["0xa"] >= 0.0);
        }
    }

    #[test]
    fn labels_key_on_seed_and_wallet_only() {
        let a = breakdowns(&[("0xa", 500.0), ("0xb", 500.0)]);
        let b = breakdowns(&[("0xb", 500.0), ("0xa", 500.0), ("0xc", 100.0)]);
        let la = make_labels(&a, 25.0, 7).unwrap();
        let lb = make_labels(&b, 25.0, 7).unwrap();
        assert_eq!(la["0xa"], lb["0xa"]);
        assert_eq!(la["0xb"], lb["0xb"]);
        assert_ne!(la["0xa"], la["0xb"]);
    }

    #[test]
    fn noise_std_matches_sigma() {
        // Monte Carlo over 100k wallets at blueprint 500 (no clamping bias).
        let scores = breakdowns(
            &(0..100_000)
                .map(|i| (format!("0x{i:06}"), 500.0))
                .collect::<Vec<_>>()
                .iter()
                .map(|(w, t)| (w.as_str(), *t))
                .collect::<Vec<_>>(),
        );
        let labels = make_labels(&scores, 25.0, 42).unwrap();
        let n = labels.len() as f64;
        let mean: f64 = labels.values().map(|l| l - 500.0).sum::<f64>() / n;
        let var: f64 = labels.values().map(|l| (l - 500.0 - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!((std - 25.0).abs() < 0.5, "std = {std}");
        // Mean within 3 sigma / sqrt(n) of zero.
        assert!(mean.abs() < 3.0 * 25.0 / n.sqrt(), "mean = {mean}");
    }

    #[test]
    fn split_sizes() {
        let wallets: Vec<String> = (0..10).map(|i| format!("0x{i}")).collect();
        let split = split_wallets(&wallets, 0.2, 1).unwrap();
        let n_val = split.values().filter(|s| **s == Split::Val).count();
        assert_eq!(n_val, 2);

        // Paper-scale cohort: 20% of 44,975 wallets is 8,995.
        let wallets: Vec<String> = (0..44_975).map(|i| format!("0x{i:06}")).collect();
        let split = split_wallets(&wallets, 0.2, 1).unwrap();
        let n_val = split.values().filter(|s| **s == Split::Val).count();
        assert_eq!(n_val, 8_995);
    }

    #[test]
    fn split_is_deterministic_and_order_insensitive() {
        let mut wallets: Vec<String> = (0..100).map(|i| format!("0x{i}")).collect();
        let a = split_wallets(&wallets, 0.3, 9).unwrap();
        wallets.reverse();
        let b = split_wallets(&wallets, 0.3, 9).unwrap();
        assert_eq!(a, b);
        let c = split_wallets(&wallets, 0.3, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(matches!(split_wallets(&[], 0.2, 1), Err(Error::EmptyInput)));
        let wallets = vec!["0xa".to_string()];
        assert!(matches!(
            split_wallets(&wallets, 0.0, 1),
            Err(Error::InvalidValFraction(_))
        ));
        assert!(matches!(
            split_wallets(&wallets, 1.0, 1),
            Err(Error::InvalidValFraction(_))
        ));
    }

    #[test]
    fn dataset_csv_round_trip() {
        let features: BTreeMap<String, Vec<f64>> = [
            ("0xa".to_string(), vec![1.0, 2.0]),
            ("0xb".to_string(), vec![3.0, 4.0]),
        ]
        .into_iter()
        .collect();
        let labels: BTreeMap<String, f64> =
            [("0xa".to_string(), 10.5), ("0xb".to_string(), 20.25)].into_iter().collect();
        let split = split_wallets(&features.keys().cloned().collect::<Vec<_>>(), 0.5, 3).unwrap();
        let ds = LabeledDataset::new(&features, &labels, split, 3).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&["f0", "f1"], &mut buf).unwrap();
        let back = LabeledDataset::read_csv(&buf[..], 3).unwrap();
        assert_eq!(back, ds);
    }

    mod prop {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn every_wallet_in_exactly_one_partition(n in 1usize..200, seed in 0u64..500) {
                let wallets: Vec<String> = (0..n).map(|i| format!("0x{i}")).collect();
                let split = split_wallets(&wallets, 0.2, seed).unwrap();
                prop_assert_eq!(split.len(), n);
                let n_val = split.values().filter(|s| **s == Split::Val).count();
                let expected = (0.2 * n as f64).round() as usize;
                prop_assert_eq!(n_val, expected);
            }
        }
    }
}
