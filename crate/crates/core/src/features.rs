//! Per-wallet behavioral feature aggregation.
//!
//! LP features come from deposit/withdraw events, swap features from swaps.
//! Holding time uses FIFO matching of withdrawal USD against prior deposit
//! USD per (wallet, pool); unmatched deposit value is held to the observation
//! end. Wash detection flags the second leg of an A->B then B->A round trip
//! by the same wallet in the same pool within one hour; a pair consumes both
//! legs, so each swap is flagged at most once.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{Read, Write};

use crate::blueprint::{pool_context_factor, BlueprintConfig};
use crate::error::{Error, Result};
use crate::event::{EventDetail, EventLog};

const SECONDS_PER_DAY: f64 = 86_400.0;
const WASH_WINDOW_SECS: i64 = 3_600;
const MICRO_SWAP_USD: f64 = 50.0;
const DUSK_LP_USD: f64 = 10.0;
const DUSK_SWAP_USD: f64 = 50.0;

/// Aggregated liquidity-provision behavior of one wallet.
#[derive(Debug, Clone, PartialEq)]
pub struct LpFeatures {
    pub wallet: String,
    pub total_deposit_usd: f64,
    pub total_withdraw_usd: f64,
    pub deposit_count: u32,
    pub withdraw_count: u32,
    pub deposit_freq_per_month: f64,
    pub avg_holding_days: f64,
    pub liquidity_retention: f64,
    pub wallet_age_days: f64,
    pub deposit_cv: f64,
    pub pool_ctx_weight: f64,
}

impl LpFeatures {
    /// Numeric feature columns in declaration order (wallet excluded).
    pub const FEATURE_NAMES: [&'static str; 10] = [
        "total_deposit_usd",
        "total_withdraw_usd",
        "deposit_count",
        "withdraw_count",
        "deposit_freq_per_month",
        "avg_holding_days",
        "liquidity_retention",
        "wallet_age_days",
        "deposit_cv",
        "pool_ctx_weight",
    ];

    pub fn to_feature_vec(&self) -> Vec<f64> {
        vec![
            self.total_deposit_usd,
            self.total_withdraw_usd,
            self.deposit_count as f64,
            self.withdraw_count as f64,
            self.deposit_freq_per_month,
            self.avg_holding_days,
            self.liquidity_retention,
            self.wallet_age_days,
            self.deposit_cv,
            self.pool_ctx_weight,
        ]
    }
}

/// Aggregated swap behavior of one wallet.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapFeatures {
    pub wallet: String,
    pub total_volume_usd: f64,
    pub swap_count: u32,
    pub unique_tokens: u32,
    pub avg_inter_swap_days: f64,
    pub volatility_exposure: f64,
    pub avg_route_hops: f64,
    pub micro_swap_ratio: f64,
    pub wash_ratio: f64,
    pub pool_ctx_weight: f64,
}

impl SwapFeatures {
    /// Numeric feature columns in declaration order (wallet excluded).
    pub const FEATURE_NAMES: [&'static str; 9] = [
        "total_volume_usd",
        "swap_count",
        "unique_tokens",
        "avg_inter_swap_days",
        "volatility_exposure",
        "avg_route_hops",
        "micro_swap_ratio",
        "wash_ratio",
        "pool_ctx_weight",
    ];

    pub fn to_feature_vec(&self) -> Vec<f64> {
        vec![
            self.total_volume_usd,
            self.swap_count as f64,
            self.unique_tokens as f64,
            self.avg_inter_swap_days,
            self.volatility_exposure,
            self.avg_route_hops,
            self.micro_swap_ratio,
            self.wash_ratio,
            self.pool_ctx_weight,
        ]
    }
}

fn check_window(log: &EventLog, observation_end: i64) -> Result<()> {
    if let Some(max_ts) = log.max_ts() {
        if observation_end < max_ts {
            return Err(Error::InvalidWindow {
                observation_end,
                max_ts,
            });
        }
    }
    Ok(())
}

#[derive(Default)]
struct LpAccum {
    total_deposit: f64,
    total_withdraw: f64,
    deposit_count: u32,
    withdraw_count: u32,
    deposit_amounts: Vec<f64>,
    first_ts: i64,
    last_ts: i64,
    ctx_weighted: f64,
    // FIFO queues of open deposit value per pool. BTreeMap keeps the final
    // held-to-end summation order deterministic.
    open: BTreeMap<String, VecDeque<(i64, f64)>>,
    holding_usd_days: f64,
}

/// Aggregate LP features for every wallet with at least one deposit or
/// withdrawal. `cfg` supplies the pool-context weighting constants.
pub fn extract_lp_features(
    log: &EventLog,
    observation_end: i64,
    cfg: &BlueprintConfig,
) -> Result<BTreeMap<String, LpFeatures>> {
    check_window(log, observation_end)?;
    let mut acc: BTreeMap<String, LpAccum> = BTreeMap::new();
    for event in log.iter() {
        let is_deposit = match event.detail {
            EventDetail::Deposit { .. } => true,
            EventDetail::Withdraw { .. } => false,
            EventDetail::Swap { .. } => continue,
        };
        let a = acc.entry(event.wallet.clone()).or_default();
        if a.deposit_count + a.withdraw_count == 0 {
            a.first_ts = event.ts;
        }
        a.last_ts = event.ts;
        if is_deposit {
            a.deposit_count += 1;
            a.total_deposit += event.amount_usd;
            a.deposit_amounts.push(event.amount_usd);
            a.ctx_weighted += event.amount_usd * pool_context_factor(&event.pool, cfg)?;
            a.open
                .entry(event.pool.pool_id.clone())
                .or_default()
                .push_back((event.ts, event.amount_usd));
        } else {
            a.withdraw_count += 1;
            a.total_withdraw += event.amount_usd;
            let mut remaining = event.amount_usd;
            if let Some(queue) = a.open.get_mut(&event.pool.pool_id) {
                while remaining > 0.0 {
                    let Some(front) = queue.front_mut() else { break };
                    let matched = remaining.min(front.1);
                    a.holding_usd_days +=
                        matched * (event.ts - front.0) as f64 / SECONDS_PER_DAY;
                    front.1 -= matched;
                    remaining -= matched;
                    if front.1 <= 0.0 {
                        queue.pop_front();
                    }
                }
            }
        }
    }

    let mut out = BTreeMap::new();
    for (wallet, mut a) in acc {
        for queue in a.open.values() {
            for (ts, open_usd) in queue {
                a.holding_usd_days += open_usd * (observation_end - ts) as f64 / SECONDS_PER_DAY;
            }
        }
        let avg_holding_days = if a.total_deposit > 0.0 {
            a.holding_usd_days / a.total_deposit
        } else {
            0.0
        };
        let liquidity_retention = if a.total_deposit > 0.0 {
            (1.0 - a.total_withdraw / a.total_deposit).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let active_span_days = (a.last_ts - a.first_ts) as f64 / SECONDS_PER_DAY;
        let deposit_freq_per_month =
            a.deposit_count as f64 / (active_span_days / 30.0).max(1.0 / 30.0);
        let deposit_cv = if a.deposit_amounts.len() >= 2 {
            let n = a.deposit_amounts.len() as f64;
            let mean = a.deposit_amounts.iter().sum::<f64>() / n;
            if mean > 0.0 {
                let var =
                    a.deposit_amounts.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                var.sqrt() / mean
            } else {
                0.0
            }
        } else {
            0.0
        };
        let pool_ctx_weight = if a.total_deposit > 0.0 {
            a.ctx_weighted / a.total_deposit
        } else {
            0.0
        };
        out.insert(
            wallet.clone(),
            LpFeatures {
                wallet,
                total_deposit_usd: a.total_deposit,
                total_withdraw_usd: a.total_withdraw,
                deposit_count: a.deposit_count,
                withdraw_count: a.withdraw_count,
                deposit_freq_per_month,
                avg_holding_days,
                liquidity_retention,
                wallet_age_days: (observation_end - a.first_ts) as f64 / SECONDS_PER_DAY,
                deposit_cv,
                pool_ctx_weight,
            },
        );
    }
    Ok(out)
}

#[derive(Default)]
struct SwapAccum {
    volume: f64,
    count: u32,
    tokens: BTreeSet<String>,
    first_ts: i64,
    last_ts: i64,
    nonstable_volume: f64,
    hops_sum: u64,
    micro_count: u32,
    wash_count: u32,
    ctx_weighted: f64,
    // Unconsumed round-trip candidates per pool: (ts, token_in, token_out).
    candidates: HashMap<String, Vec<(i64, String, String)>>,
}

/// Aggregate swap features for every wallet with at least one swap.
pub fn extract_swap_features(
    log: &EventLog,
    observation_end: i64,
    cfg: &BlueprintConfig,
) -> Result<BTreeMap<String, SwapFeatures>> {
    check_window(log, observation_end)?;
    let mut acc: BTreeMap<String, SwapAccum> = BTreeMap::new();
    for event in log.iter() {
        let EventDetail::Swap {
            token_in,
            token_out,
            route_hops,
        } = &event.detail
        else {
            continue;
        };
        let a = acc.entry(event.wallet.clone()).or_default();
        if a.count == 0 {
            a.first_ts = event.ts;
        }
        a.last_ts = event.ts;
        a.count += 1;
        a.volume += event.amount_usd;
        a.tokens.insert(token_in.clone());
        a.tokens.insert(token_out.clone());
        if !event.pool.is_stable_pair {
            a.nonstable_volume += event.amount_usd;
        }
        a.hops_sum += u64::from(*route_hops);
        if event.amount_usd < MICRO_SWAP_USD {
            a.micro_count += 1;
        }
        a.ctx_weighted += event.amount_usd * pool_context_factor(&event.pool, cfg)?;

        let pool_candidates = a.candidates.entry(event.pool.pool_id.clone()).or_default();
        let reversed = pool_candidates.iter().position(|(ts, tin, tout)| {
            event.ts - ts <= WASH_WINDOW_SECS && tin == token_out && tout == token_in
        });
        if let Some(idx) = reversed {
            // Second leg of a round trip: flag it and consume the first leg.
            pool_candidates.remove(idx);
            a.wash_count += 1;
        } else {
            pool_candidates.push((event.ts, token_in.clone(), token_out.clone()));
        }
    }

    let mut out = BTreeMap::new();
    for (wallet, a) in acc {
        let n = a.count as f64;
        let avg_inter_swap_days = if a.count >= 2 {
            (a.last_ts - a.first_ts) as f64 / SECONDS_PER_DAY / (n - 1.0)
        } else {
            (observation_end - a.first_ts) as f64 / SECONDS_PER_DAY
        };
        out.insert(
            wallet.clone(),
            SwapFeatures {
                wallet,
                total_volume_usd: a.volume,
                swap_count: a.count,
                unique_tokens: a.tokens.len() as u32,
                avg_inter_swap_days,
                volatility_exposure: if a.volume > 0.0 {
                    a.nonstable_volume / a.volume
                } else {
                    0.0
                },
                avg_route_hops: a.hops_sum as f64 / n,
                micro_swap_ratio: a.micro_count as f64 / n,
                wash_ratio: a.wash_count as f64 / n,
                pool_ctx_weight: if a.volume > 0.0 { a.ctx_weighted / a.volume } else { 0.0 },
            },
        );
    }
    Ok(out)
}

/// Dusk rule: a single, negligible transaction.
pub trait DuskRule {
    fn is_dusk(&self) -> bool;
}

impl DuskRule for LpFeatures {
    fn is_dusk(&self) -> bool {
        self.deposit_count + self.withdraw_count == 1 && self.total_deposit_usd < DUSK_LP_USD
    }
}

impl DuskRule for SwapFeatures {
    fn is_dusk(&self) -> bool {
        self.swap_count == 1 && self.total_volume_usd < DUSK_SWAP_USD
    }
}

/// Drop dusk wallets; returns the kept map and the dropped wallet ids.
pub fn filter_dusk<T: DuskRule>(features: BTreeMap<String, T>) -> (BTreeMap<String, T>, Vec<String>) {
    let mut kept = BTreeMap::new();
    let mut dropped = Vec::new();
    for (wallet, f) in features {
        if f.is_dusk() {
            dropped.push(wallet);
        } else {
            kept.insert(wallet, f);
        }
    }
    (kept, dropped)
}

fn write_features_csv<W: Write>(
    names: &[&str],
    rows: impl Iterator<Item = (String, Vec<f64>, [u32; 2])>,
    count_cols: [usize; 2],
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["wallet"];
    header.extend_from_slice(names);
    wtr.write_record(&header)?;
    for (wallet, values, counts) in rows {
        let mut rec = vec![wallet];
        for (i, v) in values.iter().enumerate() {
            if i == count_cols[0] {
                rec.push(format!("{}", counts[0]));
            } else if i == count_cols[1] {
                rec.push(format!("{}", counts[1]));
            } else {
                rec.push(format!("{v:.6}"));
            }
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// CSV export: header row, one row per wallet, floats with 6 decimals.
pub fn write_lp_features_csv<W: Write>(features: &BTreeMap<String, LpFeatures>, w: W) -> Result<()> {
    write_features_csv(
        &LpFeatures::FEATURE_NAMES,
        features
            .iter()
            .map(|(k, f)| (k.clone(), f.to_feature_vec(), [f.deposit_count, f.withdraw_count])),
        [2, 3],
        w,
    )
}

pub fn write_swap_features_csv<W: Write>(
    features: &BTreeMap<String, SwapFeatures>,
    w: W,
) -> Result<()> {
    write_features_csv(
        &SwapFeatures::FEATURE_NAMES,
        features
            .iter()
            .map(|(k, f)| (k.clone(), f.to_feature_vec(), [f.swap_count, f.unique_tokens])),
        [1, 2],
        w,
    )
}

fn read_features_csv<R: Read>(names: &[&str], r: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let mut expected = vec!["wallet"];
    expected.extend_from_slice(names);
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::ShapeMismatch {
            expected: expected.join(","),
            got: got.join(","),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let wallet = rec[0].to_string();
        let mut values = Vec::with_capacity(names.len());
        for field in rec.iter().skip(1) {
            values.push(field.parse::<f64>().map_err(|_| {
                Error::InvalidConfig(format!("bad numeric field for wallet {wallet}"))
            })?);
        }
        out.push((wallet, values));
    }
    Ok(out)
}

pub fn read_lp_features_csv<R: Read>(r: R) -> Result<BTreeMap<String, LpFeatures>> {
    let rows = read_features_csv(&LpFeatures::FEATURE_NAMES, r)?;
    let mut out = BTreeMap::new();
    for (wallet, v) in rows {
        out.insert(
            wallet.clone(),
            LpFeatures {
                wallet,
                total_deposit_usd: v[0],
                total_withdraw_usd: v[1],
                deposit_count: v[2] as u32,
                withdraw_count: v[3] as u32,
                deposit_freq_per_month: v[4],
                avg_holding_days: v[5],
                liquidity_retention: v[6],
                wallet_age_days: v[7],
                deposit_cv: v[8],
                pool_ctx_weight: v[9],
            },
        );
    }
    Ok(out)
}

pub fn read_swap_features_csv<R: Read>(r: R) -> Result<BTreeMap<String, SwapFeatures>> {
    let rows = read_features_csv(&SwapFeatures::FEATURE_NAMES, r)?;
    let mut out = BTreeMap::new();
    for (wallet, v) in rows {
        out.insert(
            wallet.clone(),
            SwapFeatures {
                wallet,
                total_volume_usd: v[0],
                swap_count: v[1] as u32,
                unique_tokens: v[2] as u32,
                avg_inter_swap_days: v[3],
                volatility_exposure: v[4],
                avg_route_hops: v[5],
                micro_swap_ratio: v[6],
                wash_ratio: v[7],
                pool_ctx_weight: v[8],
            },
        );
    }
    Ok(out)
}
