//! Interpretable 0-1000 blueprint scores.
//!
//! Each role (LP, swapper) has seven capped sub-categories whose caps sum to
//! exactly 1000, so no single trait can dominate the total. Transforms are
//! log-saturating for volumes/counts (the data spans many orders of
//! magnitude) and bounded for ratios.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::PoolContext;
use crate::features::{LpFeatures, SwapFeatures};

/// LP sub-categories in canonical (cap declaration) order.
pub const LP_CATEGORIES: [&str; 7] = [
    "volume",
    "holding",
    "retention",
    "frequency",
    "age",
    "consistency",
    "pool_ctx",
];

/// Swap sub-categories in canonical (cap declaration) order.
pub const SWAP_CATEGORIES: [&str; 7] = [
    "volume",
    "count",
    "diversity",
    "temporal",
    "vol_exposure",
    "routing",
    "integrity",
];

/// Reference constants used by the scoring transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlueprintRefs {
    pub lp_volume_ref_usd: f64,
    pub holding_ref_days: f64,
    pub freq_decay_per_month: f64,
    pub age_ref_days: f64,
    pub cv_clamp: f64,
    pub tvl_ref_usd: f64,
    pub swap_volume_ref_usd: f64,
    pub count_ref: f64,
    pub diversity_ref_tokens: f64,
    pub hops_ref: f64,
    pub fee_tier_score: BTreeMap<u32, f64>,
}

/// Sub-category caps and reference constants for both roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlueprintConfig {
    pub lp_caps: BTreeMap<String, f64>,
    pub swap_caps: BTreeMap<String, f64>,
    pub refs: BlueprintRefs,
}

impl Default for BlueprintConfig {
    fn default() -> Self {
        let lp_caps = [
            ("volume", 200.0),
            ("holding", 250.0),
            ("retention", 250.0),
            ("frequency", 100.0),
            ("age", 100.0),
            ("consistency", 50.0),
            ("pool_ctx", 50.0),
        ];
        let swap_caps = [
            ("volume", 250.0),
            ("count", 200.0),
            ("diversity", 150.0),
            ("temporal", 100.0),
            ("vol_exposure", 100.0),
            ("routing", 100.0),
            ("integrity", 100.0),
        ];
        BlueprintConfig {
            lp_caps: lp_caps.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            swap_caps: swap_caps.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            refs: BlueprintRefs {
                lp_volume_ref_usd: 1e7,
                holding_ref_days: 720.0,
                freq_decay_per_month: 20.0,
                age_ref_days: 365.0,
                cv_clamp: 2.0,
                tvl_ref_usd: 1e9,
                swap_volume_ref_usd: 1e8,
                count_ref: 1000.0,
                diversity_ref_tokens: 8.0,
                hops_ref: 2.0,
                fee_tier_score: [(100, 0.6), (500, 1.0), (3000, 0.8), (10000, 0.5)]
                    .into_iter()
                    .collect(),
            },
        }
    }
}

impl BlueprintConfig {
    pub fn validate(&self) -> Result<()> {
        for (role, caps, expected) in [
            ("lp", &self.lp_caps, &LP_CATEGORIES),
            ("swap", &self.swap_caps, &SWAP_CATEGORIES),
        ] {
            for name in expected.iter() {
                if !caps.contains_key(*name) {
                    return Err(Error::InvalidConfig(format!(
                        "{role}_caps missing sub-category `{name}`"
                    )));
                }
            }
            for (name, cap) in caps {
                if !expected.contains(&name.as_str()) {
                    return Err(Error::InvalidConfig(format!(
                        "{role}_caps has unknown sub-category `{name}`"
                    )));
                }
                if !cap.is_finite() || *cap < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "{role}_caps[{name}] must be a finite non-negative number"
                    )));
                }
            }
            let sum: f64 = expected.iter().map(|c| caps[*c]).sum();
            if sum != 1000.0 {
                return Err(Error::InvalidConfig(format!(
                    "{role}_caps must sum to exactly 1000, got {sum}"
                )));
            }
        }
        let r = &self.refs;
        for (name, v) in [
            ("lp_volume_ref_usd", r.lp_volume_ref_usd),
            ("holding_ref_days", r.holding_ref_days),
            ("freq_decay_per_month", r.freq_decay_per_month),
            ("age_ref_days", r.age_ref_days),
            ("cv_clamp", r.cv_clamp),
            ("tvl_ref_usd", r.tvl_ref_usd),
            ("swap_volume_ref_usd", r.swap_volume_ref_usd),
            ("count_ref", r.count_ref),
            ("diversity_ref_tokens", r.diversity_ref_tokens),
            ("hops_ref", r.hops_ref),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("ref `{name}` must be > 0")));
            }
        }
        if r.fee_tier_score.is_empty() {
            return Err(Error::InvalidConfig("fee_tier_score must not be empty".into()));
        }
        for (tier, score) in &r.fee_tier_score {
            if !(score.is_finite() && (0.0..=1.0).contains(score)) {
                return Err(Error::InvalidConfig(format!(
                    "fee_tier_score[{tier}] must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: BlueprintConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Per-wallet blueprint result: capped sub-category points plus their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub wallet: String,
    pub sub_scores: BTreeMap<String, f64>,
    pub total: f64,
}

fn sat(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Context weight of a pool in [0, 1]: half log-saturating TVL, half fee-tier
/// quality.
pub fn pool_context_factor(pool: &PoolContext, cfg: &BlueprintConfig) -> Result<f64> {
    let tier_score = *cfg
        .refs
        .fee_tier_score
        .get(&pool.fee_tier_ppm)
        .ok_or(Error::UnknownFeeTier(pool.fee_tier_ppm))?;
    let tvl_part = sat((1.0 + pool.tvl_usd).log10() / (1.0 + cfg.refs.tvl_ref_usd).log10());
    Ok(0.5 * tvl_part + 0.5 * tier_score)
}

/// Blueprint score for a liquidity provider feature vector.
pub fn score_lp(f: &LpFeatures, cfg: &BlueprintConfig) -> ScoreBreakdown {
    let r = &cfg.refs;
    let caps = &cfg.lp_caps;
    let mut sub = BTreeMap::new();
    sub.insert(
        "volume".to_string(),
        caps["volume"] * sat((1.0 + f.total_deposit_usd).log10() / (1.0 + r.lp_volume_ref_usd).log10()),
    );
    sub.insert(
        "holding".to_string(),
        caps["holding"] * sat(f.avg_holding_days / r.holding_ref_days),
    );
    sub.insert("retention".to_string(), caps["retention"] * f.liquidity_retention);
    sub.insert(
        "frequency".to_string(),
        caps["frequency"] * (-f.deposit_freq_per_month / r.freq_decay_per_month).exp(),
    );
    sub.insert("age".to_string(), caps["age"] * sat(f.wallet_age_days / r.age_ref_days));
    sub.insert(
        "consistency".to_string(),
        caps["consistency"] * (1.0 - sat(f.deposit_cv / r.cv_clamp)),
    );
    sub.insert("pool_ctx".to_string(), caps["pool_ctx"] * f.pool_ctx_weight);
    let total = LP_CATEGORIES.iter().map(|c| sub[*c]).sum();
    ScoreBreakdown {
        wallet: f.wallet.clone(),
        sub_scores: sub,
        total,
    }
}

/// Blueprint score for a swapper feature vector.
pub fn score_swap(f: &SwapFeatures, cfg: &BlueprintConfig) -> ScoreBreakdown {
    let r = &cfg.refs;
    let caps = &cfg.swap_caps;
    let mut sub = BTreeMap::new();
    sub.insert(
        "volume".to_string(),
        caps["volume"]
            * sat((1.0 + f.total_volume_usd).log10() / (1.0 + r.swap_volume_ref_usd).log10())
            * (0.5 + 0.5 * f.pool_ctx_weight),
    );
    sub.insert(
        "count".to_string(),
        caps["count"] * sat((1.0 + f.swap_count as f64).log10() / (1.0 + r.count_ref).log10()),
    );
    sub.insert(
        "diversity".to_string(),
        caps["diversity"] * sat(f.unique_tokens as f64 / r.diversity_ref_tokens),
    );
    // Full temporal credit for mean gaps between 1 and ~31.6 days, ramping to
    // zero at 0.01 days and ~363 days.
    let u = f.avg_inter_swap_days.max(1e-4).log10();
    sub.insert(
        "temporal".to_string(),
        caps["temporal"] * ((u + 2.0) / 2.0).min((2.56 - u) / 1.06).clamp(0.0, 1.0),
    );
    sub.insert(
        "vol_exposure".to_string(),
        caps["vol_exposure"] * (1.0 - 2.0 * (f.volatility_exposure - 0.5).abs()),
    );
    sub.insert(
        "routing".to_string(),
        caps["routing"] * sat((f.avg_route_hops - 1.0) / r.hops_ref),
    );
    sub.insert(
        "integrity".to_string(),
        (caps["integrity"] - caps["integrity"] * f.micro_swap_ratio - caps["integrity"] * f.wash_ratio)
            .max(0.0),
    );
    let total = SWAP_CATEGORIES.iter().map(|c| sub[*c]).sum();
    ScoreBreakdown {
        wallet: f.wallet.clone(),
        sub_scores: sub,
        total,
    }
}

/// CSV export: `wallet`, one column per sub-category in canonical order, `total`.
pub fn write_scores_csv<W: Write>(
    scores: &BTreeMap<String, ScoreBreakdown>,
    categories: &[&str],
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["wallet".to_string()];
    header.extend(categories.iter().map(|c| c.to_string()));
    header.push("total".to_string());
    wtr.write_record(&header)?;
    for (wallet, breakdown) in scores {
        let mut rec = vec![wallet.clone()];
        for c in categories {
            rec.push(format!("{:.6}", breakdown.sub_scores[*c]));
        }
        rec.push(format!("{:.6}", breakdown.total));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read back the wallet -> total column of a scores CSV.
pub fn read_score_totals_csv<R: std::io::Read>(r: R) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let total_idx = headers
        .iter()
        .position(|h| h == "total")
        .ok_or_else(|| Error::InvalidConfig("scores csv missing `total` column".into()))?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let wallet = rec
            .get(0)
            .ok_or_else(|| Error::InvalidConfig("scores csv missing wallet column".into()))?;
        let total: f64 = rec[total_idx]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad total for wallet {wallet}")))?;
        out.insert(wallet.to_string(), total);
    }
    Ok(out)
}
