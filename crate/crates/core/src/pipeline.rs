//! End-to-end run: ingest -> featurize -> dusk filter -> blueprint -> labels
//! -> split -> train -> predict(val) -> evaluate.
//!
//! Every intermediate artifact is written to the output directory so the
//! blueprint stage stays inspectable: features.csv, dusk_dropped.txt,
//! scores.csv, dataset.csv, model checkpoint, history.csv, preds.csv, then
//! report.json / bins.csv / residuals.csv. Identical configs and seeds
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use crate::blueprint::{
    score_lp, score_swap, write_scores_csv, BlueprintConfig, ScoreBreakdown, LP_CATEGORIES,
    SWAP_CATEGORIES,
};
use crate::error::{Error, Result};
use crate::eval::{build_report_lp, build_report_swap, emit_report, EvalReport, Role};
use crate::event::{parse_events, EventLog};
use crate::features::{
    extract_lp_features, extract_swap_features, filter_dusk, write_lp_features_csv,
    write_swap_features_csv, LpFeatures, SwapFeatures,
};
use crate::labels::{make_labels, split_wallets, LabeledDataset, Split};
use crate::nn::{
    predict, save_checkpoint, train_with_progress, EpochStats, ModelConfig, TrainConfig,
};

pub const DEFAULT_SIGMA: f64 = 25.0;
pub const DEFAULT_VAL_FRACTION: f64 = 0.2;

/// Full configuration of one pipeline run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub role: Role,
    pub seed: u64,
    pub sigma: f64,
    pub val_fraction: f64,
    pub events_path: PathBuf,
    pub out_dir: PathBuf,
    /// Defaults to the maximum event timestamp.
    pub observation_end: Option<i64>,
    pub blueprint: BlueprintConfig,
    /// Defaults to the reference architecture sized for the role's features.
    pub model: Option<ModelConfig>,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn new(role: Role, events_path: PathBuf, out_dir: PathBuf, seed: u64) -> Self {
        RunConfig {
            role,
            seed,
            sigma: DEFAULT_SIGMA,
            val_fraction: DEFAULT_VAL_FRACTION,
            events_path,
            out_dir,
            observation_end: None,
            blueprint: BlueprintConfig::default(),
            model: None,
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidValFraction(self.val_fraction));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidSigma(self.sigma));
        }
        self.blueprint.validate()?;
        if let Some(m) = &self.model {
            m.validate()?;
        }
        self.train.validate()?;
        if !self.events_path.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("events file {} not found", self.events_path.display()),
            )));
        }
        Ok(())
    }
}

/// Role-specific feature table kept in memory between stages.
pub enum FeatureSet {
    Lp(BTreeMap<String, LpFeatures>),
    Swap(BTreeMap<String, SwapFeatures>),
}

impl FeatureSet {
    pub fn extract(
        role: Role,
        log: &EventLog,
        observation_end: i64,
        cfg: &BlueprintConfig,
    ) -> Result<Self> {
        Ok(match role {
            Role::Lp => FeatureSet::Lp(extract_lp_features(log, observation_end, cfg)?),
            Role::Swap => FeatureSet::Swap(extract_swap_features(log, observation_end, cfg)?),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            FeatureSet::Lp(m) => m.len(),
            FeatureSet::Swap(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn filter_dusk(self) -> (Self, Vec<String>) {
        match self {
            FeatureSet::Lp(m) => {
                let (kept, dropped) = filter_dusk(m);
                (FeatureSet::Lp(kept), dropped)
            }
            FeatureSet::Swap(m) => {
                let (kept, dropped) = filter_dusk(m);
                (FeatureSet::Swap(kept), dropped)
            }
        }
    }

    pub fn wallets(&self) -> Vec<String> {
        match self {
            FeatureSet::Lp(m) => m.keys().cloned().collect(),
            FeatureSet::Swap(m) => m.keys().cloned().collect(),
        }
    }

    pub fn feature_names(&self) -> &'static [&'static str] {
        match self {
            FeatureSet::Lp(_) => &LpFeatures::FEATURE_NAMES,
            FeatureSet::Swap(_) => &SwapFeatures::FEATURE_NAMES,
        }
    }

    pub fn feature_vectors(&self) -> BTreeMap<String, Vec<f64>> {
        match self {
            FeatureSet::Lp(m) => m.iter().map(|(k, f)| (k.clone(), f.to_feature_vec())).collect(),
            FeatureSet::Swap(m) => m.iter().map(|(k, f)| (k.clone(), f.to_feature_vec())).collect(),
        }
    }

    pub fn score(&self, cfg: &BlueprintConfig) -> BTreeMap<String, ScoreBreakdown> {
        match self {
            FeatureSet::Lp(m) => m.iter().map(|(k, f)| (k.clone(), score_lp(f, cfg))).collect(),
            FeatureSet::Swap(m) => m.iter().map(|(k, f)| (k.clone(), score_swap(f, cfg))).collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path)?;
        match self {
            FeatureSet::Lp(m) => write_lp_features_csv(m, file),
            FeatureSet::Swap(m) => write_swap_features_csv(m, file),
        }
    }
}

/// Artifact paths and the final report of a pipeline run.
pub struct PipelineOutputs {
    pub report: EvalReport,
    pub report_path: PathBuf,
    pub checkpoint_stem: PathBuf,
    pub n_wallets_kept: usize,
    pub n_dusk_dropped: usize,
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutputs> {
    run_pipeline_with_progress(cfg, |_| {})
}

/// Run the full pipeline, invoking `on_epoch` for each training epoch.
pub fn run_pipeline_with_progress(
    cfg: &RunConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<PipelineOutputs> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;

    // Ingest.
    let file = fs::File::open(&cfg.events_path)?;
    let log = parse_events(BufReader::new(file))?;
    let observation_end = match cfg.observation_end {
        Some(end) => end,
        None => log.max_ts().ok_or(Error::EmptyInput)?,
    };

    // Featurize and filter.
    let features = FeatureSet::extract(cfg.role, &log, observation_end, &cfg.blueprint)?;
    features.write_csv(&cfg.out_dir.join("features.csv"))?;
    let (kept, dropped) = features.filter_dusk();
    fs::write(cfg.out_dir.join("dusk_dropped.txt"), dropped.join("\n") + "\n")?;
    if kept.is_empty() {
        return Err(Error::EmptyInput);
    }

    // Blueprint scores.
    let scores = kept.score(&cfg.blueprint);
    let categories: &[&str] = match cfg.role {
        Role::Lp => &LP_CATEGORIES,
        Role::Swap => &SWAP_CATEGORIES,
    };
    write_scores_csv(&scores, categories, fs::File::create(cfg.out_dir.join("scores.csv"))?)?;

    // Labels and split.
    let labels = make_labels(&scores, cfg.sigma, cfg.seed)?;
    let wallets = kept.wallets();
    let split = split_wallets(&wallets, cfg.val_fraction, cfg.seed)?;
    let vectors = kept.feature_vectors();
    let dataset = LabeledDataset::new(&vectors, &labels, split, cfg.seed)?;
    dataset.write_csv(
        kept.feature_names(),
        fs::File::create(cfg.out_dir.join("dataset.csv"))?,
    )?;

    // Train.
    let input_dim = kept.feature_names().len();
    let mcfg = cfg
        .model
        .clone()
        .unwrap_or_else(|| ModelConfig::with_input_dim(input_dim, cfg.seed));
    let (params, history) = train_with_progress(&dataset, &mcfg, &cfg.train, on_epoch)?;
    let mut history_file = fs::File::create(cfg.out_dir.join("history.csv"))?;
    writeln!(history_file, "epoch,train_mse,val_mse,lr")?;
    for e in &history.epochs {
        writeln!(history_file, "{},{},{},{}", e.epoch, e.train_mse, e.val_mse, e.lr)?;
    }
    let checkpoint_stem = cfg.out_dir.join("model");
    save_checkpoint(&params, &cfg.train, Some(history.best_val_mse), &checkpoint_stem)?;

    // Predict the validation wallets and evaluate against noise-free
    // blueprint totals.
    let val_wallets: Vec<String> = dataset
        .rows
        .iter()
        .filter(|r| dataset.split.get(&r.wallet) == Some(&Split::Val))
        .map(|r| r.wallet.clone())
        .collect();
    let val_rows: Vec<Vec<f64>> = val_wallets.iter().map(|w| vectors[w].clone()).collect();
    let preds = predict(&params, &val_rows)?;
    let targets: Vec<f64> = val_wallets.iter().map(|w| scores[w].total).collect();

    let mut preds_file = fs::File::create(cfg.out_dir.join("preds.csv"))?;
    writeln!(preds_file, "wallet,pred")?;
    for (w, p) in val_wallets.iter().zip(&preds) {
        writeln!(preds_file, "{w},{p:.6}")?;
    }

    let report = match &kept {
        FeatureSet::Lp(m) => build_report_lp(&val_wallets, &preds, &targets, m)?,
        FeatureSet::Swap(m) => build_report_swap(&val_wallets, &preds, &targets, m)?,
    };
    emit_report(&report, &cfg.out_dir)?;

    Ok(PipelineOutputs {
        report,
        report_path: cfg.out_dir.join("report.json"),
        checkpoint_stem,
        n_wallets_kept: wallets.len(),
        n_dusk_dropped: dropped.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{default_pools, generate_cohort, lp_mix};

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

    #[test]
    fn pipeline_end_to_end_small() {
        let dir = tempfile::tempdir().unwrap();
        let events_path = dir.path().join("events.jsonl");
        let (log, manifest) = generate_cohort(400, &lp_mix(), &default_pools(), 5, 730).unwrap();
        log.write_jsonl(fs::File::create(&events_path).unwrap()).unwrap();

        let out_dir = dir.path().join("out");
        let mut cfg = RunConfig::new(Role::Lp, events_path, out_dir.clone(), 5);
        cfg.observation_end = Some(manifest.observation_end);
        cfg.model = Some(small_model(10, 5));
        cfg.train.max_epochs = 15;
        let outputs = run_pipeline(&cfg).unwrap();

        assert!(outputs.n_dusk_dropped > 0);
        for artifact in [
            "features.csv",
            "dusk_dropped.txt",
            "scores.csv",
            "dataset.csv",
            "history.csv",
            "model.json",
            "model.bin",
            "preds.csv",
            "report.json",
            "bins.csv",
            "residuals.csv",
        ] {
            assert!(out_dir.join(artifact).exists(), "{artifact} missing");
        }
        assert_eq!(outputs.report.role, Role::Lp);
        assert!(outputs.report.n_wallets > 0);
    }

    #[test]
    fn pipeline_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let events_path = dir.path().join("events.jsonl");
        let (log, manifest) = generate_cohort(300, &lp_mix(), &default_pools(), 9, 730).unwrap();
        log.write_jsonl(fs::File::create(&events_path).unwrap()).unwrap();

        let run = |out: &Path| {
            let mut cfg = RunConfig::new(Role::Lp, events_path.clone(), out.to_path_buf(), 9);
            cfg.observation_end = Some(manifest.observation_end);
            cfg.model = Some(small_model(10, 9));
            cfg.train.max_epochs = 8;
            run_pipeline(&cfg).unwrap();
        };
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        run(&out_a);
        run(&out_b);
        for artifact in ["report.json", "model.bin", "model.json", "dataset.csv", "scores.csv"] {
            let a = fs::read(out_a.join(artifact)).unwrap();
            let b = fs::read(out_b.join(artifact)).unwrap();
            assert_eq!(a, b, "{artifact} differs between identical runs");
        }
    }

    #[test]
    fn invalid_val_fraction_fails_before_any_work() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(
            Role::Lp,
            dir.path().join("missing.jsonl"),
            dir.path().join("out"),
            1,
        );
        cfg.val_fraction = 0.0;
        assert!(matches!(run_pipeline(&cfg), Err(Error::InvalidValFraction(_))));
        assert!(!dir.path().join("out").exists());
    }
}
