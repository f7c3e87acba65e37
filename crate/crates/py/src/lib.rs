//! Python bindings for the wallet scoring engine.
//!
//! Exposes the main types and operations: cohort synthesis, event-log
//! parsing/validation, feature extraction, dusk filtering, blueprint
//! scoring, label generation, wallet splits, model training/prediction,
//! and the end-to-end pipeline. See python/smoke_test.py for usage.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dexscore_core::blueprint::{score_lp, score_swap, BlueprintConfig, ScoreBreakdown};
use dexscore_core::eval::Role;
use dexscore_core::event::{parse_events_str, validate_log, EventLog as CoreEventLog};
use dexscore_core::features::{filter_dusk, LpFeatures, SwapFeatures};
use dexscore_core::labels::LabeledDataset;
use dexscore_core::nn::{
    load_checkpoint, save_checkpoint, train_with_progress, ModelConfig, TrainConfig,
};
use dexscore_core::pipeline::{run_pipeline, RunConfig};
use dexscore_core::synth::{
    default_mix, default_pools, generate_cohort, lp_mix, swap_mix, ArchetypeSpec,
};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_role(role: &str) -> PyResult<Role> {
    role.parse().map_err(err)
}

fn blueprint_from_json(config_json: Option<&str>) -> PyResult<BlueprintConfig> {
    match config_json {
        Some(text) => {
            let cfg: BlueprintConfig = serde_json::from_str(text).map_err(err)?;
            cfg.validate().map_err(err)?;
            Ok(cfg)
        }
        None => Ok(BlueprintConfig::default()),
    }
}

fn mix_by_name(mix: &str) -> PyResult<Vec<ArchetypeSpec>> {
    match mix {
        "default" => Ok(default_mix()),
        "lp" => Ok(lp_mix()),
        "swap" => Ok(swap_mix()),
        other => serde_json::from_str(other).map_err(|_| {
            PyValueError::new_err(format!(
                "mix must be \"default\", \"lp\", \"swap\", or an archetype-spec JSON array, got `{other}`"
            ))
        }),
    }
}

/// Immutable, time-ordered event log.
#[pyclass(name = "EventLog", from_py_object)]
#[derive(Clone)]
struct PyEventLog {
    inner: CoreEventLog,
}

#[pymethods]
impl PyEventLog {
    /// Parse line-delimited JSON event records.
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        Ok(PyEventLog {
            inner: parse_events_str(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(err)?;
        Self::from_jsonl(&text)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_jsonl_string()
    }

    /// All invariant violations as strings; empty means valid.
    fn validate(&self) -> Vec<String> {
        validate_log(&self.inner).iter().map(|v| v.to_string()).collect()
    }

    fn max_ts(&self) -> Option<i64> {
        self.inner.max_ts()
    }
}

/// Generate a synthetic cohort; returns (event_log, manifest_json).
#[pyfunction]
#[pyo3(signature = (n, seed, span_days=1095, mix="default"))]
fn synth_cohort(n: usize, seed: u64, span_days: u32, mix: &str) -> PyResult<(PyEventLog, String)> {
    let mix = mix_by_name(mix)?;
    let (log, manifest) =
        generate_cohort(n, &mix, &default_pools(), seed, span_days).map_err(err)?;
    Ok((
        PyEventLog { inner: log },
        serde_json::to_string_pretty(&manifest).map_err(err)?,
    ))
}

fn lp_to_dict<'py>(py: Python<'py>, f: &LpFeatures) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (name, value) in LpFeatures::FEATURE_NAMES.iter().zip(f.to_feature_vec()) {
        d.set_item(name, value)?;
    }
    Ok(d)
}

fn swap_to_dict<'py>(py: Python<'py>, f: &SwapFeatures) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (name, value) in SwapFeatures::FEATURE_NAMES.iter().zip(f.to_feature_vec()) {
        d.set_item(name, value)?;
    }
    Ok(d)
}

/// Per-wallet feature dicts for one role, before dusk filtering.
#[pyfunction]
#[pyo3(signature = (log, role, observation_end=None, config_json=None))]
fn extract_features<'py>(
    py: Python<'py>,
    log: &PyEventLog,
    role: &str,
    observation_end: Option<i64>,
    config_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let role = parse_role(role)?;
    let cfg = blueprint_from_json(config_json)?;
    let end = observation_end
        .or_else(|| log.inner.max_ts())
        .ok_or_else(|| PyValueError::new_err("empty event log"))?;
    let out = PyDict::new(py);
    match role {
        Role::Lp => {
            let feats =
                dexscore_core::features::extract_lp_features(&log.inner, end, &cfg).map_err(err)?;
            for (w, f) in &feats {
                out.set_item(w, lp_to_dict(py, f)?)?;
            }
        }
        Role::Swap => {
            let feats = dexscore_core::features::extract_swap_features(&log.inner, end, &cfg)
                .map_err(err)?;
            for (w, f) in &feats {
                out.set_item(w, swap_to_dict(py, f)?)?;
            }
        }
    }
    Ok(out)
}

fn lp_from_map(wallet: &str, m: &HashMap<String, f64>) -> PyResult<LpFeatures> {
    let get = |k: &str| {
        m.get(k)
            .copied()
            .ok_or_else(|| PyValueError::new_err(format!("feature dict missing `{k}`")))
    };
    Ok(LpFeatures {
        wallet: wallet.to_string(),
        total_deposit_usd: get("total_deposit_usd")?,
        total_withdraw_usd: get("total_withdraw_usd")?,
        deposit_count: get("deposit_count")? as u32,
        withdraw_count: get("withdraw_count")? as u32,
        deposit_freq_per_month: get("deposit_freq_per_month")?,
        avg_holding_days: get("avg_holding_days")?,
        liquidity_retention: get("liquidity_retention")?,
        wallet_age_days: get("wallet_age_days")?,
        deposit_cv: get("deposit_cv")?,
        pool_ctx_weight: get("pool_ctx_weight")?,
    })
}

fn swap_from_map(wallet: &str, m: &HashMap<String, f64>) -> PyResult<SwapFeatures> {
    let get = |k: &str| {
        m.get(k)
            .copied()
            .ok_or_else(|| PyValueError::new_err(format!("feature dict missing `{k}`")))
    };
    Ok(SwapFeatures {
        wallet: wallet.to_string(),
        total_volume_usd: get("total_volume_usd")?,
        swap_count: get("swap_count")? as u32,
        unique_tokens: get("unique_tokens")? as u32,
        avg_inter_swap_days: get("avg_inter_swap_days")?,
        volatility_exposure: get("volatility_exposure")?,
        avg_route_hops: get("avg_route_hops")?,
        micro_swap_ratio: get("micro_swap_ratio")?,
        wash_ratio: get("wash_ratio")?,
        pool_ctx_weight: get("pool_ctx_weight")?,
    })
}

/// Drop dusk wallets; returns (kept, dropped_wallets).
#[pyfunction]
fn dusk_filter<'py>(
    py: Python<'py>,
    features: HashMap<String, HashMap<String, f64>>,
    role: &str,
) -> PyResult<(Bound<'py, PyDict>, Vec<String>)> {
    let role = parse_role(role)?;
    let kept_dict = PyDict::new(py);
    let dropped = match role {
        Role::Lp => {
            let parsed: BTreeMap<String, LpFeatures> = features
                .iter()
                .map(|(w, m)| lp_from_map(w, m).map(|f| (w.clone(), f)))
                .collect::<PyResult<_>>()?;
            let (kept, dropped) = filter_dusk(parsed);
            for (w, f) in &kept {
                kept_dict.set_item(w, lp_to_dict(py, f)?)?;
            }
            dropped
        }
        Role::Swap => {
            let parsed: BTreeMap<String, SwapFeatures> = features
                .iter()
                .map(|(w, m)| swap_from_map(w, m).map(|f| (w.clone(), f)))
                .collect::<PyResult<_>>()?;
            let (kept, dropped) = filter_dusk(parsed);
            for (w, f) in &kept {
                kept_dict.set_item(w, swap_to_dict(py, f)?)?;
            }
            dropped
        }
    };
    Ok((kept_dict, dropped))
}

/// Blueprint scores; returns {wallet: {sub_category: points, ..., "total": points}}.
#[pyfunction]
#[pyo3(signature = (features, role, config_json=None))]
fn blueprint_scores<'py>(
    py: Python<'py>,
    features: HashMap<String, HashMap<String, f64>>,
    role: &str,
    config_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let role = parse_role(role)?;
    let cfg = blueprint_from_json(config_json)?;
    let out = PyDict::new(py);
    let emit = |breakdown: ScoreBreakdown| -> PyResult<()> {
        let d = PyDict::new(py);
        for (k, v) in &breakdown.sub_scores {
            d.set_item(k, v)?;
        }
        d.set_item("total", breakdown.total)?;
        out.set_item(&breakdown.wallet, d)?;
        Ok(())
    };
    for (w, m) in &features {
        match role {
            Role::Lp => emit(score_lp(&lp_from_map(w, m)?, &cfg))?,
            Role::Swap => emit(score_swap(&swap_from_map(w, m)?, &cfg))?,
        }
    }
    Ok(out)
}

/// Noise-augmented labels keyed by (seed, wallet), clamped to [0, 1000].
#[pyfunction]
fn make_labels(
    totals: HashMap<String, f64>,
    sigma: f64,
    seed: u64,
) -> PyResult<HashMap<String, f64>> {
    let breakdowns: BTreeMap<String, ScoreBreakdown> = totals
        .into_iter()
        .map(|(w, t)| {
            let b = ScoreBreakdown {
                wallet: w.clone(),
                sub_scores: BTreeMap::new(),
                total: t,
            };
            (w, b)
        })
        .collect();
    let labels = dexscore_core::labels::make_labels(&breakdowns, sigma, seed).map_err(err)?;
    Ok(labels.into_iter().collect())
}

/// Leakage-free wallet split; returns {wallet: "train" | "val"}.
#[pyfunction]
fn split_wallets(
    wallets: Vec<String>,
    val_fraction: f64,
    seed: u64,
) -> PyResult<HashMap<String, String>> {
    let split = dexscore_core::labels::split_wallets(&wallets, val_fraction, seed).map_err(err)?;
    Ok(split.into_iter().map(|(w, s)| (w, s.to_string())).collect())
}

/// Fraction of predictions within `tol` of the targets.
#[pyfunction]
fn tolerance_accuracy(preds: Vec<f64>, targets: Vec<f64>, tol: f64) -> PyResult<f64> {
    dexscore_core::eval::tolerance_accuracy(&preds, &targets, tol).map_err(err)
}

/// Spearman rank correlation.
#[pyfunction]
fn spearman(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    dexscore_core::eval::spearman(&a, &b).map_err(err)
}

/// Trained residual-MLP regressor.
#[pyclass(name = "Model")]
struct PyModel {
    params: dexscore_core::nn::ModelParams,
    train_config: TrainConfig,
    best_val_mse: Option<f64>,
}

#[pymethods]
impl PyModel {
    /// Train on aligned (wallet, features, target) rows with a seed-keyed
    /// wallet split. Returns (model, history) where history is a list of
    /// (epoch, train_mse, val_mse, lr) tuples.
    #[staticmethod]
    #[pyo3(signature = (wallets, features, targets, seed, val_fraction=0.2, model_json=None, train_json=None))]
    fn train(
        wallets: Vec<String>,
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
        seed: u64,
        val_fraction: f64,
        model_json: Option<&str>,
        train_json: Option<&str>,
    ) -> PyResult<(Self, Vec<(usize, f64, f64, f64)>)> {
        if wallets.len() != features.len() || wallets.len() != targets.len() {
            return Err(PyValueError::new_err("wallets, features, targets must align"));
        }
        let feature_map: BTreeMap<String, Vec<f64>> =
            wallets.iter().cloned().zip(features).collect();
        let labels: BTreeMap<String, f64> = wallets.iter().cloned().zip(targets).collect();
        let split =
            dexscore_core::labels::split_wallets(&wallets, val_fraction, seed).map_err(err)?;
        let dataset = LabeledDataset::new(&feature_map, &labels, split, seed).map_err(err)?;
        let input_dim = feature_map.values().next().map_or(0, Vec::len);
        let mcfg: ModelConfig = match model_json {
            Some(text) => serde_json::from_str(text).map_err(err)?,
            None => ModelConfig::with_input_dim(input_dim, seed),
        };
        let tcfg: TrainConfig = match train_json {
            Some(text) => serde_json::from_str(text).map_err(err)?,
            None => TrainConfig {
                seed,
                ..TrainConfig::default()
            },
        };
        let mut history = Vec::new();
        let (params, hist) = train_with_progress(&dataset, &mcfg, &tcfg, |e| {
            history.push((e.epoch, e.train_mse, e.val_mse, e.lr));
        })
        .map_err(err)?;
        Ok((
            PyModel {
                params,
                train_config: tcfg,
                best_val_mse: Some(hist.best_val_mse),
            },
            history,
        ))
    }

    /// Refined scores in [0, 1000] for raw feature rows.
    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        dexscore_core::nn::predict(&self.params, &features).map_err(err)
    }

    /// Write <stem>.json + <stem>.bin.
    fn save(&self, stem: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.params, &self.train_config, self.best_val_mse, &stem).map_err(err)
    }

    #[staticmethod]
    fn load(stem: PathBuf) -> PyResult<Self> {
        let (params, manifest) = load_checkpoint(&stem).map_err(err)?;
        Ok(PyModel {
            params,
            train_config: manifest.train_config,
            best_val_mse: manifest.best_val_mse,
        })
    }

    #[getter]
    fn best_val_mse(&self) -> Option<f64> {
        self.best_val_mse
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.params.config.input_dim
    }
}

/// Run the full pipeline on an events file; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (events_path, role, out_dir, seed=42, sigma=25.0, val_fraction=0.2, observation_end=None, model_json=None, train_json=None))]
#[allow(clippy::too_many_arguments)]
fn pipeline(
    events_path: PathBuf,
    role: &str,
    out_dir: PathBuf,
    seed: u64,
    sigma: f64,
    val_fraction: f64,
    observation_end: Option<i64>,
    model_json: Option<&str>,
    train_json: Option<&str>,
) -> PyResult<String> {
    let mut cfg = RunConfig::new(parse_role(role)?, events_path, out_dir, seed);
    cfg.sigma = sigma;
    cfg.val_fraction = val_fraction;
    cfg.observation_end = observation_end;
    if let Some(text) = model_json {
        cfg.model = Some(serde_json::from_str(text).map_err(err)?);
    }
    if let Some(text) = train_json {
        cfg.train = serde_json::from_str(text).map_err(err)?;
    }
    let outputs = run_pipeline(&cfg).map_err(err)?;
    serde_json::to_string(&outputs.report).map_err(err)
}

#[pymodule]
fn dexscore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEventLog>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synth_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(dusk_filter, m)?)?;
    m.add_function(wrap_pyfunction!(blueprint_scores, m)?)?;
    m.add_function(wrap_pyfunction!(make_labels, m)?)?;
    m.add_function(wrap_pyfunction!(split_wallets, m)?)?;
    m.add_function(wrap_pyfunction!(tolerance_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    m.add("LP_FEATURE_NAMES", LpFeatures::FEATURE_NAMES.to_vec())?;
    m.add("SWAP_FEATURE_NAMES", SwapFeatures::FEATURE_NAMES.to_vec())?;
    Ok(())
}
