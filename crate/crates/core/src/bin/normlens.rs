use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use normlens::corpus::{
    apply_mask, group_file, ingest, read_messages, read_records, resolve_records, write_ingest_output,
    write_records, Group, IngestConfig, MaskTable, SplitFractions, TargetPair,
};
use normlens::econometrics::{
    estimate_spec, format_regression_table, panel_from_predictions, read_observations, write_coefficients_csv,
    write_result_json, CalendarIndex, EstimateOptions, FeMethod, Outcome, Series, SpecDef, VcovChoice,
};
use normlens::embeddings::{train_skipgram, EmbeddingMatrix, SgnsConfig};
use normlens::error::{Error, Result};
use normlens::evaluation::{
    accuracy_diff_by_word, balanced_subsample, choose_threshold, format_metric_table, metric_report, predict_records,
    read_predictions, word_color, write_diff_csv, write_metrics_csv, write_predictions, write_word_color_csv,
    DiffParams, Objective, PredictionRecord, SampleKind,
};
use normlens::models::{
    best_cell, run_grid, train_model, ImbalanceStrategy, ModelKind, ModelSpec, TrainConfig, TrainedModel,
};
use normlens::pipeline::{demo, report, run_pipeline_with, write_grid_csv, DemoOptions, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "normlens", version, about = "Measure social norms in short texts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tokenize, censor the target pair, mask, filter and split messages.
    Ingest(IngestArgs),
    /// Apply mask files to existing records.
    Mask(MaskArgs),
    /// Train skip-gram word vectors on records.
    Embed(EmbedArgs),
    /// Train one classifier.
    Train(TrainArgs),
    /// Train a node-count by dropout grid and keep the best cell.
    Grid(GridArgs),
    /// Score records, choose thresholds and write metrics.
    Evaluate(EvaluateArgs),
    /// Word Color of every token in prediction files.
    Wordcolor(WordColorArgs),
    /// Per-token accuracy differences between two prediction sets.
    Worddiff(WordDiffArgs),
    /// Event-study regressions on a panel.
    Estimate(EstimateArgs),
    /// Summarize a run directory.
    Report(ReportArgs),
    /// Generate a synthetic corpus and run the whole pipeline on it.
    Demo(DemoArgs),
    /// Run the pipeline from a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value = "han,hon")]
    pair: String,
    #[arg(long, default_value_t = 10)]
    min_words: usize,
    #[arg(long, default_value_t = 25)]
    max_words: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "64,16,20")]
    split: String,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// One hashtag per line.
    #[arg(long)]
    drop_hashtags: Option<PathBuf>,
    /// Keep every record in a single evaluation set instead of splitting.
    #[arg(long)]
    evaluation: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaskArgs {
    /// Record file or ingest directory.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Record file or ingest directory (all groups are used).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    neg: usize,
    #[arg(long, default_value_t = 10)]
    min_count: u64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long)]
    subsample: Option<f64>,
    /// More than one thread gives non-reproducible vectors.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "lstm")]
    model: ModelKind,
    #[arg(long, default_value = "balanced-batch")]
    imbalance: ImbalanceStrategy,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    retrain_vectors: bool,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 5.0)]
    max_epochs: f64,
    #[arg(long)]
    seed: u64,
    /// Training records: file or ingest directory.
    #[arg(long)]
    train: PathBuf,
    /// Validation records: file or ingest directory.
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    emb: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> Result<(Vec<normlens::corpus::CorpusRecord>, Vec<normlens::corpus::CorpusRecord>, Option<EmbeddingMatrix>)> {
        let train = resolve_records(&self.train, &[Group::Train])?;
        let val = resolve_records(&self.val, &[Group::Validation])?;
        let emb = match (&self.emb, self.model.needs_embeddings()) {
            (Some(p), _) => Some(EmbeddingMatrix::load(p)?),
            (None, true) => {
                return Err(Error::Config(format!("model `{}` needs --emb", self.model)));
            }
            (None, false) => None,
        };
        Ok((train, val, emb))
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            imbalance: self.imbalance,
            retrain_vectors: self.retrain_vectors,
            learning_rate: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    m: ModelArgs,
    #[arg(long, default_value_t = 125)]
    nodes: usize,
    #[arg(long, default_value_t = 0.25)]
    dropout: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    m: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "125,250,500")]
    nodes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5")]
    dropouts: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory for grid.csv and the best model.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Ingest directory or record file. Thresholds come from its
    /// validation set when present.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "accuracy")]
    objective: Objective,
    /// Also report metrics on a class-balanced subsample.
    #[arg(long)]
    balanced_sample: bool,
    /// Fixed threshold instead of one chosen on validation data.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WordColorArgs {
    /// Prediction files, or directories holding predictions.jsonl.
    #[arg(long = "in", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 15)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WordDiffArgs {
    /// Period A (before) predictions.
    #[arg(long)]
    a: PathBuf,
    /// Period B (after) predictions.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 0.005)]
    bin_width: f64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value_t = 5)]
    min_support: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Preset or `time_trends:` expression; repeat for several columns.
    #[arg(long, required = true)]
    spec: Vec<String>,
    #[arg(long, default_value = "follow_norms")]
    outcome: Outcome,
    #[arg(long, default_value = "cluster:day")]
    vcov: VcovChoice,
    /// Panel CSV, or prediction JSONL files turned into a panel.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Series label for prediction input.
    #[arg(long, default_value = "heshe")]
    series: Series,
    #[arg(long)]
    aggregate: bool,
    /// Year-1 inclusion probability; Year-1 rows get weight 1/p.
    #[arg(long)]
    sample_weight: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Keep only rows whose true class is this value.
    #[arg(long)]
    subset: Option<u8>,
    #[arg(long)]
    dummies: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = 15)]
    top: usize,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "lstm")]
    model: ModelKind,
    #[arg(long, default_value_t = 40_000)]
    year2_messages: usize,
    #[arg(long, default_value_t = 20_000)]
    year1_messages: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Rerun stages whose outputs are up to date.
    #[arg(long)]
    force: bool,
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_text(p: &Path, s: &str) -> Result<()> {
    fs::write(p, s).map_err(|e| Error::io(p, e))
}

fn json_out<T: serde::Serialize>(p: &Path, v: &T) -> Result<()> {
    write_text(p, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn predictions_in(p: &Path) -> Result<Vec<PredictionRecord>> {
    if p.is_dir() {
        read_predictions(&p.join("predictions.jsonl"))
    } else {
        read_predictions(p)
    }
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let mut cfg = IngestConfig::new(TargetPair::parse(&a.pair)?, a.seed);
    cfg.min_words = a.min_words;
    cfg.max_words = a.max_words;
    cfg.split = SplitFractions::parse(&a.split)?;
    cfg.evaluation = a.evaluation;
    cfg.mask = a.mask.as_deref().map(MaskTable::from_dir).transpose()?;
    if let Some(p) = &a.drop_hashtags {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        cfg.drop_hashtags = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    }
    let mut msgs = Vec::new();
    for p in &a.input {
        msgs.extend(read_messages(p)?);
    }
    let out = ingest(msgs, &cfg)?;
    for p in write_ingest_output(&a.out, &out)? {
        println!("wrote {}", p.display());
    }
    println!("{}", serde_json::to_string(&out.stats)?);
    Ok(())
}

fn cmd_mask(a: MaskArgs) -> Result<()> {
    let mask = MaskTable::from_dir(&a.mask)?;
    let jobs: Vec<(PathBuf, PathBuf)> = if a.input.is_dir() {
        mkdir(&a.out)?;
        [Group::Train, Group::Validation, Group::Test, Group::Evaluation]
            .into_iter()
            .map(|g| (group_file(&a.input, g), group_file(&a.out, g)))
            .filter(|(i, _)| i.exists())
            .collect()
    } else {
        vec![(a.input.clone(), a.out.clone())]
    };
    for (src, dst) in jobs {
        let mut changed = 0usize;
        let recs: Vec<_> = read_records(&src)?
            .into_iter()
            .map(|mut r| {
                let masked = apply_mask(&r.tokens, &mask);
                changed += masked.iter().zip(&r.tokens).filter(|(a, b)| a != b).count();
                r.tokens = masked;
                r
            })
            .collect();
        write_records(&dst, &recs)?;
        println!("{}: {} records, {changed} tokens masked", dst.display(), recs.len());
    }
    Ok(())
}

fn cmd_embed(a: EmbedArgs) -> Result<()> {
    let recs = if a.input.is_dir() {
        let mut v = Vec::new();
        for g in [Group::Train, Group::Validation, Group::Test, Group::Evaluation] {
            let p = group_file(&a.input, g);
            if p.exists() {
                v.extend(read_records(&p)?);
            }
        }
        v
    } else {
        read_records(&a.input)?
    };
    let sentences: Vec<Vec<String>> = recs.into_iter().map(|r| r.tokens).collect();
    let cfg = SgnsConfig {
        dim: a.dim,
        window: a.window,
        negative: a.neg,
        min_count: a.min_count,
        epochs: a.epochs,
        subsample: a.subsample,
        seed: a.seed,
        threads: a.threads,
        ..Default::default()
    };
    let (emb, _) = train_skipgram(&sentences, &cfg)?;
    emb.save(&a.out)?;
    println!("wrote {} vectors of dimension {} to {}", emb.len(), emb.dim(), a.out.display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let (train, val, emb) = a.m.load()?;
    let spec = ModelSpec {
        nodes: a.nodes,
        dropout: a.dropout,
        ..ModelSpec::new(a.m.model)
    };
    let model = train_model(&spec, &train, &val, emb.as_ref(), &a.m.train_config())?;
    model.save(&a.out)?;
    println!("validation accuracy {:.4}; wrote {}", model.best_val_accuracy(), a.out.display());
    Ok(())
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let (train, val, emb) = a.m.load()?;
    let base = ModelSpec::new(a.m.model);
    let results = run_grid(&base, &a.nodes, &a.dropouts, &train, &val, emb.as_ref(), &a.m.train_config(), a.jobs)?;
    mkdir(&a.out)?;
    write_grid_csv(&a.out.join("grid.csv"), &results)?;
    for r in &results {
        println!("{:<28}{:.4}", r.cell.name(), r.best_val_accuracy);
    }
    let best = best_cell(&results).expect("non-empty grid");
    best.model.save(&a.out.join("model.json"))?;
    println!("best {}", best.cell.name());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let data = resolve_records(&a.data, &[Group::Test, Group::Evaluation])?;
    let val_path = group_file(&a.data, Group::Validation);
    let (threshold, balanced) = match a.threshold {
        Some(t) => (t, t),
        None if a.data.is_dir() && val_path.exists() => {
            let vp = predict_records(&model, &read_records(&val_path)?, 0.5)?;
            let s: Vec<f64> = vp.iter().map(|p| p.score).collect();
            let l: Vec<u8> = vp.iter().map(|p| p.label).collect();
            (choose_threshold(&s, &l, a.objective)?, choose_threshold(&s, &l, Objective::Balanced)?)
        }
        None => (model.threshold, model.threshold),
    };
    let preds = predict_records(&model, &data, threshold)?;
    mkdir(&a.out)?;
    write_predictions(&a.out.join("predictions.jsonl"), &preds)?;
    json_out(
        &a.out.join("thresholds.json"),
        &serde_json::json!({ "objective": a.objective, "threshold": threshold, "balanced": balanced }),
    )?;
    let mut reports = vec![metric_report(&preds, threshold, a.objective, SampleKind::Unbalanced)?];
    if a.balanced_sample {
        let bal = balanced_subsample(&preds, |p| p.label, a.seed)?;
        reports.push(metric_report(&bal, balanced, Objective::Balanced, SampleKind::Balanced)?);
    }
    json_out(&a.out.join("metrics.json"), &reports)?;
    write_metrics_csv(&a.out.join("metrics.csv"), &reports)?;
    let table = format_metric_table("Model evaluation", &reports);
    write_text(&a.out.join("metrics.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_wordcolor(a: WordColorArgs) -> Result<()> {
    let mut preds = Vec::new();
    for p in &a.input {
        preds.extend(predictions_in(p)?);
    }
    let wc = word_color(&preds);
    if let Some(out) = &a.out {
        write_word_color_csv(out, &wc)?;
    }
    println!("highest:");
    for w in wc.iter().take(a.top) {
        println!("  {:<20}{:>8.4}{:>8}", w.token, w.wc, w.count);
    }
    println!("lowest:");
    for w in wc.iter().rev().take(a.top) {
        println!("  {:<20}{:>8.4}{:>8}", w.token, w.wc, w.count);
    }
    Ok(())
}

fn cmd_worddiff(a: WordDiffArgs) -> Result<()> {
    let params = DiffParams {
        bin_width: a.bin_width,
        bins: a.bins,
        top_k: a.top_k,
        min_support: a.min_support,
    };
    let bins = accuracy_diff_by_word(&predictions_in(&a.a)?, &predictions_in(&a.b)?, &params);
    write_diff_csv(&a.out, &bins)?;
    for b in &bins {
        let toks: Vec<&str> = b.tokens.iter().map(|t| t.token.as_str()).collect();
        println!("[{:.3}, {:.3}) {:>5}  {}", b.lower, b.upper, b.n_tokens, toks.join(" "));
    }
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let mut panel = Vec::new();
    let mut preds = Vec::new();
    for p in &a.data {
        if p.extension().is_some_and(|e| e == "csv") {
            panel.extend(read_observations(p)?);
        } else {
            preds.extend(predictions_in(p)?);
        }
    }
    if !preds.is_empty() {
        let (obs, dropped) = panel_from_predictions(&preds, a.series, &CalendarIndex::default());
        if dropped > 0 {
            eprintln!("{dropped} predictions fall outside the calendar");
        }
        panel.extend(obs);
    }
    let opts = EstimateOptions {
        outcome: a.outcome,
        vcov: a.vcov,
        scale: a.scale,
        subset: a.subset,
        year1_inclusion: a.sample_weight,
        fe_method: if a.dummies { FeMethod::Dummies } else { FeMethod::Within },
        aggregate: a.aggregate,
    };
    let mut results = Vec::new();
    for s in &a.spec {
        results.push(estimate_spec(&SpecDef::parse(s)?, &panel, &opts)?);
    }
    mkdir(&a.out)?;
    write_coefficients_csv(&a.out.join("coefficients.csv"), &results)?;
    write_result_json(&a.out.join("results.json"), &results)?;
    let table = format_regression_table("Event-study regressions", &results);
    write_text(&a.out.join("tables.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Ingest(a) => cmd_ingest(a),
        Cmd::Mask(a) => cmd_mask(a),
        Cmd::Embed(a) => cmd_embed(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Grid(a) => cmd_grid(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Wordcolor(a) => cmd_wordcolor(a),
        Cmd::Worddiff(a) => cmd_worddiff(a),
        Cmd::Estimate(a) => cmd_estimate(a),
        Cmd::Report(a) => {
            print!("{}", report(&a.run, a.top)?.text);
            Ok(())
        }
        Cmd::Demo(a) => {
            let opts = DemoOptions {
                seed: a.seed,
                year2_messages: a.year2_messages,
                year1_messages: a.year1_messages,
                model: a.model,
                ..Default::default()
            };
            let m = demo(&a.out, &opts)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
            print!("{}", report(&a.out.join("run"), 10)?.text);
            Ok(())
        }
        Cmd::Run(a) => {
            let cfg = RunConfig::load(&a.config)?;
            let m = run_pipeline_with(&cfg, RunOptions { force: a.force })?;
            println!("{}", serde_json::to_string_pretty(&m)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
