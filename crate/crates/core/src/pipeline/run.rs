use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::report::report;
use crate::corpus::{
    ingest, read_messages, read_records, write_ingest_output, CorpusRecord, Group, STATS_FILE,
};
use crate::econometrics::{
    estimate_spec, format_regression_table, panel_from_predictions, write_coefficients_csv, write_observations,
    write_result_json,
};
use crate::embeddings::{train_skipgram, EmbeddingMatrix, SgnsConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    accuracy_diff_by_word, balanced_subsample, choose_threshold, format_metric_table, metric_report, predict_records,
    read_predictions, word_color, write_diff_csv, write_metrics_csv, write_predictions, write_word_color_csv,
    Objective, SampleKind,
};
use crate::math::derive_seed;
use crate::models::{best_cell, run_grid, train_model, TrainConfig, TrainedModel};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const HISTORY_FILE: &str = "manifest_history.jsonl";
pub const FAILED_SUFFIX: &str = ".failed";

pub const STAGE_INGEST: &str = "ingest";
pub const STAGE_EMBED: &str = "embed";
pub const STAGE_TRAIN: &str = "train";
pub const STAGE_EVALUATE: &str = "evaluate";
pub const STAGE_ESTIMATE: &str = "estimate";
pub const STAGE_REPORT: &str = "report";

pub const VECTORS_FILE: &str = "vectors.txt";
pub const MODEL_FILE: &str = "model.json";
pub const GRID_FILE: &str = "grid.csv";
pub const TEST_PREDICTIONS: &str = "test_predictions.jsonl";
pub const EVAL_PREDICTIONS: &str = "evaluation_predictions.jsonl";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_TXT: &str = "metrics.txt";
pub const WORD_COLOR_FILE: &str = "word_color.csv";
pub const WORD_DIFF_FILE: &str = "word_diff.csv";
pub const EVAL_STATS_FILE: &str = "evaluation_stats.json";
pub const PANEL_FILE: &str = "panel.csv";
pub const COEFFICIENTS_FILE: &str = "coefficients.csv";
pub const RESULTS_FILE: &str = "results.json";
pub const TABLES_FILE: &str = "tables.txt";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// Digest of the stage's parameters and upstream outputs.
    pub fingerprint: String,
    /// Output path relative to the run directory, to its sha256.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub deterministic: bool,
    /// Input path as written in the config, to its sha256.
    pub inputs: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for e in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            files_under(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Relative path with forward slashes, so manifests compare across hosts.
fn rel(root: &Path, p: &Path) -> String {
    let r = p.strip_prefix(root).unwrap_or(p);
    r.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn digest_outputs(run_dir: &Path, stage_dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    files_under(stage_dir, &mut files)?;
    files.into_iter().map(|p| Ok((rel(run_dir, &p), file_digest(&p)?))).collect()
}

fn outputs_intact(run_dir: &Path, rec: &StageRecord) -> bool {
    !rec.outputs.is_empty()
        && rec
            .outputs
            .iter()
            .all(|(p, d)| file_digest(&run_dir.join(p)).is_ok_and(|x| &x == d))
}

fn fingerprint<T: Serialize>(name: &str, params: &T, upstream: &[&StageRecord]) -> Result<String> {
    let up: BTreeMap<&str, &BTreeMap<String, String>> =
        upstream.iter().map(|s| (s.name.as_str(), &s.outputs)).collect();
    let v = serde_json::json!({ "stage": name, "params": params, "upstream": up });
    Ok(sha256_hex(serde_json::to_string(&v)?.as_bytes()))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    run_dir: PathBuf,
    previous: Option<RunManifest>,
    force: bool,
}

impl Runner<'_> {
    /// Run one stage in its own directory, or reuse the previous run's
    /// outputs when the fingerprint and digests still match.
    fn stage<F>(&self, name: &str, fp: String, body: F) -> Result<StageRecord>
    where
        F: FnOnce(&Path) -> Result<()>,
    {
        let dir = self.run_dir.join(name);
        if !self.force {
            if let Some(prev) = self.previous.as_ref().and_then(|m| m.stage(name)) {
                if prev.fingerprint == fp && outputs_intact(&self.run_dir, prev) {
                    log::info!("stage {name}: up to date");
                    return Ok(prev.clone());
                }
            }
        }
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        log::info!("stage {name}: running");
        let t0 = Instant::now();
        if let Err(e) = body(&dir) {
            let failed = self.run_dir.join(format!("{name}{FAILED_SUFFIX}"));
            if failed.exists() {
                let _ = fs::remove_dir_all(&failed);
            }
            if let Err(io) = fs::rename(&dir, &failed) {
                log::warn!("could not quarantine {}: {io}", dir.display());
            }
            return Err(Error::Stage {
                stage: name.to_string(),
                source: Box::new(e),
            });
        }
        let wall_ms = (!self.cfg.deterministic).then(|| t0.elapsed().as_millis() as u64);
        Ok(StageRecord {
            name: name.to_string(),
            fingerprint: fp,
            outputs: digest_outputs(&self.run_dir, &dir)?,
            wall_ms,
        })
    }

    fn path(&self, stage: &str, file: &str) -> PathBuf {
        self.run_dir.join(stage).join(file)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Rerun every stage even when its outputs are up to date.
    pub force: bool,
}

/// Validate `cfg` and run every configured stage in order, writing
/// `manifest.json` into the output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    run_pipeline_with(cfg, RunOptions::default())
}

pub fn run_pipeline_with(cfg: &RunConfig, opts: RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    let run_dir = cfg.out_dir();
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let manifest_path = run_dir.join(MANIFEST_FILE);
    let previous = RunManifest::load(&manifest_path).ok();

    let mut inputs = BTreeMap::new();
    for p in cfg.input_files()? {
        let key = p.to_string_lossy().replace('\\', "/");
        inputs.insert(key, file_digest(&cfg.resolve(&p))?);
    }
    let config_hash = sha256_hex(cfg.to_toml()?.as_bytes());
    let r = Runner {
        cfg,
        run_dir: run_dir.clone(),
        previous,
        force: opts.force,
    };
    let mut stages: Vec<StageRecord> = Vec::new();

    // ingest
    let ingest_seed = derive_seed(cfg.seed, STAGE_INGEST);
    let fp = fingerprint(
        STAGE_INGEST,
        &serde_json::json!({ "ingest": cfg.ingest, "inputs": inputs, "seed": ingest_seed }),
        &[],
    )?;
    let ingest_rec = r.stage(STAGE_INGEST, fp, |dir| run_ingest(cfg, dir, ingest_seed))?;
    stages.push(ingest_rec.clone());

    // embed
    let mut embed_rec = None;
    if let (Some(sg), None) = (&cfg.embeddings, &cfg.data.vectors) {
        let sg = SgnsConfig {
            seed: derive_seed(cfg.seed, STAGE_EMBED),
            threads: if cfg.deterministic { 1 } else { sg.threads },
            ..sg.clone()
        };
        let fp = fingerprint(STAGE_EMBED, &sg, &[&ingest_rec])?;
        let rec = r.stage(STAGE_EMBED, fp, |dir| {
            let recs = all_records(&r.run_dir.join(STAGE_INGEST))?;
            let sentences: Vec<Vec<String>> = recs.into_iter().map(|x| x.tokens).collect();
            let (emb, _) = train_skipgram(&sentences, &sg)?;
            emb.save(&dir.join(VECTORS_FILE))
        })?;
        stages.push(rec.clone());
        embed_rec = Some(rec);
    }
    let vectors_path = match &cfg.data.vectors {
        Some(p) => Some(cfg.resolve(p)),
        None => embed_rec.as_ref().map(|_| r.path(STAGE_EMBED, VECTORS_FILE)),
    };

    // train
    let tc = TrainConfig {
        seed: derive_seed(cfg.seed, STAGE_TRAIN),
        ..cfg.train.clone()
    };
    let mut up = vec![&ingest_rec];
    up.extend(embed_rec.as_ref());
    let fp = fingerprint(
        STAGE_TRAIN,
        &serde_json::json!({ "model": cfg.model, "train": tc, "grid": cfg.grid, "vectors": inputs_for(&inputs, cfg.data.vectors.as_deref()) }),
        &up,
    )?;
    let train_rec = r.stage(STAGE_TRAIN, fp, |dir| {
        let ingest_dir = r.run_dir.join(STAGE_INGEST);
        let train = read_records(&ingest_dir.join("train.jsonl"))?;
        let val = read_records(&ingest_dir.join("validation.jsonl"))?;
        let emb = match (&vectors_path, cfg.uses_embeddings()) {
            (Some(p), true) => Some(EmbeddingMatrix::load(p)?),
            _ => None,
        };
        let model = match &cfg.grid {
            Some(g) => {
                let results = run_grid(&cfg.model, &g.nodes, &g.dropouts, &train, &val, emb.as_ref(), &tc, g.jobs)?;
                write_grid_csv(&dir.join(GRID_FILE), &results)?;
                best_cell(&results).expect("non-empty grid").model.clone()
            }
            None => train_model(&cfg.model, &train, &val, emb.as_ref(), &tc)?,
        };
        model.save(&dir.join(MODEL_FILE))
    })?;
    stages.push(train_rec.clone());

    // evaluate
    let eval_seed = derive_seed(cfg.seed, STAGE_EVALUATE);
    let fp = fingerprint(
        STAGE_EVALUATE,
        &serde_json::json!({ "evaluate": cfg.evaluate, "seed": eval_seed }),
        &[&ingest_rec, &train_rec],
    )?;
    let eval_rec = r.stage(STAGE_EVALUATE, fp, |dir| {
        run_evaluate(cfg, &r.run_dir, dir, eval_seed)
    })?;
    stages.push(eval_rec.clone());

    // estimate
    let mut est_rec = None;
    if !cfg.estimate.is_empty() {
        let fp = fingerprint(
            STAGE_ESTIMATE,
            &serde_json::json!({ "estimate": cfg.estimate, "calendar": cfg.calendar, "series": cfg.series }),
            &[&eval_rec],
        )?;
        let rec = r.stage(STAGE_ESTIMATE, fp, |dir| run_estimate(cfg, &r.run_dir, dir))?;
        stages.push(rec.clone());
        est_rec = Some(rec);
    }

    // report
    let mut up = vec![&ingest_rec, &eval_rec];
    up.extend(est_rec.as_ref());
    let fp = fingerprint(STAGE_REPORT, &cfg.evaluate.top_words, &up)?;
    let rep = r.stage(STAGE_REPORT, fp, |dir| {
        let rep = report(&r.run_dir, cfg.evaluate.top_words)?;
        fs::write(dir.join(REPORT_FILE), rep.text).map_err(|e| Error::io(dir, e))
    })?;
    stages.push(rep);

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        seed: cfg.seed,
        deterministic: cfg.deterministic,
        inputs,
        stages,
    };
    manifest.save(&manifest_path)?;
    append_history(&run_dir.join(HISTORY_FILE), &manifest)?;
    Ok(manifest)
}

fn inputs_for(inputs: &BTreeMap<String, String>, p: Option<&Path>) -> Option<String> {
    p.and_then(|p| inputs.get(&p.to_string_lossy().replace('\\', "/")).cloned())
}

fn append_history(path: &Path, m: &RunManifest) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(m)?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

fn all_records(ingest_dir: &Path) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for g in [Group::Train, Group::Validation, Group::Test, Group::Evaluation] {
        let p = crate::corpus::group_file(ingest_dir, g);
        if p.exists() {
            out.extend(read_records(&p)?);
        }
    }
    Ok(out)
}

fn run_ingest(cfg: &RunConfig, dir: &Path, seed: u64) -> Result<()> {
    let msgs = read_messages(&cfg.resolve(&cfg.data.training))?;
    let mut out = ingest(msgs, &cfg.ingest_config(seed, false)?)?;
    if !cfg.data.evaluation.is_empty() {
        let mut msgs = Vec::new();
        for p in &cfg.data.evaluation {
            msgs.extend(read_messages(&cfg.resolve(p))?);
        }
        let ev = ingest(msgs, &cfg.ingest_config(seed, true)?)?;
        write_json(&dir.join(EVAL_STATS_FILE), &ev.stats)?;
        out.evaluation = ev.evaluation;
    }
    let mut seen = BTreeSet::new();
    for r in out.all_records() {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::invalid(format!("message id `{}` occurs more than once", r.id)));
        }
    }
    write_ingest_output(dir, &out)?;
    debug_assert!(dir.join(STATS_FILE).exists());
    Ok(())
}

/// One row per grid cell.
pub fn write_grid_csv(path: &Path, results: &[crate::models::GridResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(["nodes", "dropout", "seed", "best_val_accuracy"]).map_err(err)?;
    for g in results {
        w.write_record([
            g.cell.nodes.to_string(),
            g.cell.dropout.to_string(),
            g.seed.to_string(),
            g.best_val_accuracy.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub objective: Objective,
    /// Applied to every prediction file.
    pub threshold: f64,
    /// Maximizes min(sensitivity, specificity) on validation.
    pub balanced: f64,
}

fn run_evaluate(cfg: &RunConfig, run_dir: &Path, dir: &Path, seed: u64) -> Result<()> {
    let ingest_dir = run_dir.join(STAGE_INGEST);
    let model = TrainedModel::load(&run_dir.join(STAGE_TRAIN).join(MODEL_FILE))?;
    let val = read_records(&ingest_dir.join("validation.jsonl"))?;
    let test = read_records(&ingest_dir.join("test.jsonl"))?;
    let vp = predict_records(&model, &val, 0.5)?;
    let scores: Vec<f64> = vp.iter().map(|p| p.score).collect();
    let labels: Vec<u8> = vp.iter().map(|p| p.label).collect();
    let th = Thresholds {
        objective: cfg.evaluate.objective,
        threshold: choose_threshold(&scores, &labels, cfg.evaluate.objective)?,
        balanced: choose_threshold(&scores, &labels, Objective::Balanced)?,
    };
    write_json(&dir.join(THRESHOLDS_FILE), &th)?;

    let tp = predict_records(&model, &test, th.threshold)?;
    write_predictions(&dir.join(TEST_PREDICTIONS), &tp)?;
    let mut reports = vec![metric_report(&tp, th.threshold, cfg.evaluate.objective, SampleKind::Unbalanced)?];
    if cfg.evaluate.balanced_sample {
        let bal = balanced_subsample(&tp, |p| p.label, seed)?;
        reports.push(metric_report(&bal, th.balanced, Objective::Balanced, SampleKind::Balanced)?);
    }
    write_json(&dir.join(METRICS_JSON), &reports)?;
    write_metrics_csv(&dir.join(METRICS_CSV), &reports)?;
    let table = format_metric_table("Model evaluation on test set", &reports);
    fs::write(dir.join(METRICS_TXT), table).map_err(|e| Error::io(dir, e))?;

    let eval_path = crate::corpus::group_file(&ingest_dir, Group::Evaluation);
    let mut all = tp.clone();
    if eval_path.exists() {
        let ep = predict_records(&model, &read_records(&eval_path)?, th.threshold)?;
        write_predictions(&dir.join(EVAL_PREDICTIONS), &ep)?;
        let bins = accuracy_diff_by_word(&tp, &ep, &cfg.evaluate.diff);
        write_diff_csv(&dir.join(WORD_DIFF_FILE), &bins)?;
        all.extend(ep);
    }
    write_word_color_csv(&dir.join(WORD_COLOR_FILE), &word_color(&all))
}

fn run_estimate(cfg: &RunConfig, run_dir: &Path, dir: &Path) -> Result<()> {
    let eval_dir = run_dir.join(STAGE_EVALUATE);
    let mut preds = read_predictions(&eval_dir.join(TEST_PREDICTIONS))?;
    let ep = eval_dir.join(EVAL_PREDICTIONS);
    if ep.exists() {
        preds.extend(read_predictions(&ep)?);
    }
    let (panel, dropped) = panel_from_predictions(&preds, cfg.series, &cfg.calendar);
    if dropped > 0 {
        log::warn!("{dropped} predictions fall outside the two-year calendar");
    }
    write_observations(&dir.join(PANEL_FILE), &panel)?;
    let mut results = Vec::new();
    for e in &cfg.estimate {
        let (spec, opts) = e.resolve()?;
        results.push(estimate_spec(&spec, &panel, &opts)?);
    }
    write_coefficients_csv(&dir.join(COEFFICIENTS_FILE), &results)?;
    write_result_json(&dir.join(RESULTS_FILE), &results)?;
    let table = format_regression_table("Event-study regressions", &results);
    fs::write(dir.join(TABLES_FILE), table).map_err(|e| Error::io(dir, e))
}
