//! `dexscore` — behavioral scoring pipeline for DEX wallet event logs.
//!
//! Subcommands: synth, ingest, featurize, score, train, predict, evaluate,
//! pipeline. Every command is deterministic for a given seed: identical
//! inputs produce byte-identical outputs. Exit codes: 0 ok, 1 pipeline
//! error, 2 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use dexscore_core::blueprint::{
    read_score_totals_csv, write_scores_csv, BlueprintConfig, ScoreBreakdown, LP_CATEGORIES,
    SWAP_CATEGORIES,
};
use dexscore_core::eval::{build_report_lp, build_report_swap, emit_report, Role};
use dexscore_core::event::{parse_events, validate_log};
use dexscore_core::features::{read_lp_features_csv, read_swap_features_csv};
use dexscore_core::labels::{make_labels, split_wallets, LabeledDataset};
use dexscore_core::nn::{
    load_checkpoint, predict, save_checkpoint, train_with_progress, ModelConfig, TrainConfig,
};
use dexscore_core::pipeline::{
    run_pipeline_with_progress, FeatureSet, RunConfig, DEFAULT_SIGMA, DEFAULT_VAL_FRACTION,
};
use dexscore_core::synth::{
    default_mix, default_pools, generate_cohort, lp_mix, swap_mix, ArchetypeSpec, PoolSpec,
    DEFAULT_SPAN_DAYS,
};

/// Environment variable holding the default blueprint config path.
const CONFIG_ENV: &str = "DEXSCORE_CONFIG";

#[derive(Parser)]
#[command(name = "dexscore", version, about = "Behavioral scoring for DEX wallet event logs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct ConfigArg {
    /// Blueprint config JSON; falls back to $DEXSCORE_CONFIG, then defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> anyhow::Result<BlueprintConfig> {
        let path = self
            .config
            .clone()
            .or_else(|| std::env::var(CONFIG_ENV).ok().map(PathBuf::from));
        match path {
            Some(p) => BlueprintConfig::from_json_file(&p)
                .with_context(|| format!("loading blueprint config {}", p.display())),
            None => Ok(BlueprintConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic wallet cohort as JSONL events plus a manifest.
    Synth {
        /// Number of wallets.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SPAN_DAYS)]
        span_days: u32,
        /// Archetype mix: "default", "lp", "swap", or a JSON file path.
        #[arg(long, default_value = "default")]
        mix: String,
        /// Pool universe JSON file (defaults to the built-in six pools).
        #[arg(long)]
        pools: Option<PathBuf>,
        /// Output events path; the manifest is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse, validate, and canonicalize an event log.
    Ingest {
        #[arg(long)]
        events: PathBuf,
        /// Canonical (sorted) JSONL output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate per-wallet features for one role.
    Featurize {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        role: RoleArg,
        /// Observation end (unix seconds); defaults to the last event.
        #[arg(long)]
        observation_end: Option<i64>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the dusk filter and compute blueprint scores from features.
    Score {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        role: RoleArg,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Where to write dropped dusk wallets (one per line).
        #[arg(long)]
        dropped: Option<PathBuf>,
    },
    /// Train the refinement model on noise-augmented blueprint targets.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Blueprint scores CSV (targets before noise).
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        role: RoleArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_VAL_FRACTION)]
        val_fraction: f64,
        /// Model config JSON override.
        #[arg(long)]
        model_config: Option<PathBuf>,
        /// Train config JSON override.
        #[arg(long)]
        train_config: Option<PathBuf>,
        /// Checkpoint stem; writes <stem>.json and <stem>.bin.
        #[arg(long)]
        out_model: PathBuf,
        /// Per-epoch loss CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Predict refined scores for feature rows with a trained checkpoint.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        role: RoleArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build evaluation reports from predictions and blueprint targets.
    Evaluate {
        /// Predictions CSV (wallet,pred).
        #[arg(long)]
        preds: PathBuf,
        /// Blueprint scores CSV (targets).
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        role: RoleArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the whole pipeline: ingest through evaluate.
    Pipeline {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        role: RoleArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_VAL_FRACTION)]
        val_fraction: f64,
        #[arg(long)]
        observation_end: Option<i64>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        model_config: Option<PathBuf>,
        #[arg(long)]
        train_config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum RoleArg {
    Lp,
    Swap,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Role {
        match r {
            RoleArg::Lp => Role::Lp,
            RoleArg::Swap => Role::Swap,
        }
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf, what: &str) -> anyhow::Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

fn resolve_mix(mix: &str) -> anyhow::Result<Vec<ArchetypeSpec>> {
    match mix {
        "default" => Ok(default_mix()),
        "lp" => Ok(lp_mix()),
        "swap" => Ok(swap_mix()),
        path => load_json(&PathBuf::from(path), "archetype mix"),
    }
}

fn read_features(role: Role, path: &PathBuf) -> anyhow::Result<FeatureSet> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(match role {
        Role::Lp => FeatureSet::Lp(read_lp_features_csv(file)?),
        Role::Swap => FeatureSet::Swap(read_swap_features_csv(file)?),
    })
}

fn read_preds_csv(path: &PathBuf) -> anyhow::Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let wallet = rec.get(0).context("preds csv missing wallet column")?.to_string();
        let pred: f64 = rec.get(1).context("preds csv missing pred column")?.parse()?;
        out.insert(wallet, pred);
    }
    Ok(out)
}

fn run(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Synth {
            n,
            seed,
            span_days,
            mix,
            pools,
            out,
        } => {
            let mix = resolve_mix(&mix)?;
            let pools: Vec<PoolSpec> = match pools {
                Some(p) => load_json(&p, "pool universe")?,
                None => default_pools(),
            };
            let (log, manifest) = generate_cohort(n, &mix, &pools, seed, span_days)?;
            log.write_jsonl(fs::File::create(&out)?)?;
            let manifest_path = out.with_extension("manifest.json");
            let mut f = fs::File::create(&manifest_path)?;
            serde_json::to_writer_pretty(&mut f, &manifest)?;
            f.write_all(b"\n")?;
            println!(
                "wrote {} events for {n} wallets to {} (manifest: {})",
                log.len(),
                out.display(),
                manifest_path.display()
            );
        }
        Cmd::Ingest { events, out } => {
            let log = parse_events(BufReader::new(fs::File::open(&events)?))?;
            let violations = validate_log(&log);
            if !violations.is_empty() {
                for v in &violations {
                    eprintln!("violation: {v}");
                }
                bail!("{} invariant violations", violations.len());
            }
            log.write_jsonl(fs::File::create(&out)?)?;
            println!("ingested {} events -> {}", log.len(), out.display());
        }
        Cmd::Featurize {
            events,
            role,
            observation_end,
            config,
            out,
        } => {
            let role = Role::from(role);
            let blueprint = config.load()?;
            let log = parse_events(BufReader::new(fs::File::open(&events)?))?;
            let end = match observation_end {
                Some(e) => e,
                None => log.max_ts().context("event log is empty")?,
            };
            let features = FeatureSet::extract(role, &log, end, &blueprint)?;
            features.write_csv(&out)?;
            println!("wrote {} {role} wallets to {}", features.len(), out.display());
        }
        Cmd::Score {
            features,
            role,
            config,
            out,
            dropped,
        } => {
            let role = Role::from(role);
            let blueprint = config.load()?;
            let features = read_features(role, &features)?;
            let (kept, dusk) = features.filter_dusk();
            if let Some(path) = dropped {
                fs::write(path, dusk.join("\n") + "\n")?;
            }
            let scores = kept.score(&blueprint);
            let categories: &[&str] = match role {
                Role::Lp => &LP_CATEGORIES,
                Role::Swap => &SWAP_CATEGORIES,
            };
            write_scores_csv(&scores, categories, fs::File::create(&out)?)?;
            println!(
                "scored {} wallets ({} dusk dropped) -> {}",
                scores.len(),
                dusk.len(),
                out.display()
            );
        }
        Cmd::Train {
            features,
            scores,
            role,
            seed,
            sigma,
            val_fraction,
            model_config,
            train_config,
            out_model,
            history,
        } => {
            let role = Role::from(role);
            let features = read_features(role, &features)?;
            let (kept, _) = features.filter_dusk();
            let totals = read_score_totals_csv(fs::File::open(&scores)?)?;
            let breakdowns: BTreeMap<String, ScoreBreakdown> = totals
                .iter()
                .map(|(w, t)| {
                    (
                        w.clone(),
                        ScoreBreakdown {
                            wallet: w.clone(),
                            sub_scores: BTreeMap::new(),
                            total: *t,
                        },
                    )
                })
                .collect();
            let labels = make_labels(&breakdowns, sigma, seed)?;
            let wallets = kept.wallets();
            let split = split_wallets(&wallets, val_fraction, seed)?;
            let vectors = kept.feature_vectors();
            let dataset = LabeledDataset::new(&vectors, &labels, split, seed)?;
            let mcfg = match model_config {
                Some(p) => load_json(&p, "model config")?,
                None => ModelConfig::with_input_dim(kept.feature_names().len(), seed),
            };
            let tcfg = match train_config {
                Some(p) => load_json(&p, "train config")?,
                None => TrainConfig {
                    seed,
                    ..TrainConfig::default()
                },
            };
            let mut lines = vec!["epoch,train_mse,val_mse,lr".to_string()];
            let (params, hist) = train_with_progress(&dataset, &mcfg, &tcfg, |e| {
                println!("{},{},{},{}", e.epoch, e.train_mse, e.val_mse, e.lr);
                lines.push(format!("{},{},{},{}", e.epoch, e.train_mse, e.val_mse, e.lr));
            })?;
            save_checkpoint(&params, &tcfg, Some(hist.best_val_mse), &out_model)?;
            if let Some(path) = history {
                fs::write(path, lines.join("\n") + "\n")?;
            }
            println!(
                "trained {} epochs (best epoch {}, val mse {:.6e}); checkpoint: {}.json/.bin",
                hist.epochs.len(),
                hist.best_epoch,
                hist.best_val_mse,
                out_model.display()
            );
        }
        Cmd::Predict {
            model,
            features,
            role,
            out,
        } => {
            let role = Role::from(role);
            let (params, _) = load_checkpoint(&model)?;
            let features = read_features(role, &features)?;
            let vectors = features.feature_vectors();
            let wallets: Vec<String> = vectors.keys().cloned().collect();
            let rows: Vec<Vec<f64>> = wallets.iter().map(|w| vectors[w].clone()).collect();
            let preds = predict(&params, &rows)?;
            let mut f = fs::File::create(&out)?;
            writeln!(f, "wallet,pred")?;
            for (w, p) in wallets.iter().zip(&preds) {
                writeln!(f, "{w},{p:.6}")?;
            }
            println!("predicted {} wallets -> {}", wallets.len(), out.display());
        }
        Cmd::Evaluate {
            preds,
            scores,
            features,
            role,
            out_dir,
        } => {
            let role = Role::from(role);
            let preds_map = read_preds_csv(&preds)?;
            let totals = read_score_totals_csv(fs::File::open(&scores)?)?;
            let features = read_features(role, &features)?;
            let wallets: Vec<String> = preds_map.keys().cloned().collect();
            let pred_vec: Vec<f64> = wallets.iter().map(|w| preds_map[w]).collect();
            let targets: Vec<f64> = wallets
                .iter()
                .map(|w| {
                    totals
                        .get(w)
                        .copied()
                        .ok_or_else(|| dexscore_core::Error::MissingScore(w.clone()))
                })
                .collect::<dexscore_core::Result<_>>()?;
            let report = match &features {
                FeatureSet::Lp(m) => build_report_lp(&wallets, &pred_vec, &targets, m)?,
                FeatureSet::Swap(m) => build_report_swap(&wallets, &pred_vec, &targets, m)?,
            };
            emit_report(&report, &out_dir)?;
            println!(
                "evaluated {} wallets: tolerance accuracy {:.4} -> {}",
                report.n_wallets,
                report.tol_accuracy,
                out_dir.display()
            );
        }
        Cmd::Pipeline {
            events,
            role,
            seed,
            sigma,
            val_fraction,
            observation_end,
            config,
            model_config,
            train_config,
            out_dir,
        } => {
            let mut cfg = RunConfig::new(Role::from(role), events, out_dir.clone(), seed);
            cfg.sigma = sigma;
            cfg.val_fraction = val_fraction;
            cfg.observation_end = observation_end;
            cfg.blueprint = config.load()?;
            if let Some(p) = model_config {
                cfg.model = Some(load_json(&p, "model config")?);
            }
            if let Some(p) = train_config {
                cfg.train = load_json(&p, "train config")?;
            }
            let outputs = run_pipeline_with_progress(&cfg, |e| {
                println!("{},{},{},{}", e.epoch, e.train_mse, e.val_mse, e.lr);
            })?;
            println!(
                "pipeline done: {} wallets kept, {} dusk dropped, tolerance accuracy {:.4}",
                outputs.n_wallets_kept, outputs.n_dusk_dropped, outputs.report.tol_accuracy
            );
            println!("report: {}", outputs.report_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
