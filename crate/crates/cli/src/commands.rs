use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use neamer_core::baseline::{
    score_records, train, train_with_retry, write_f1_log, write_params, Dataset, ModelConfig, RetryError, SeedRun,
    TrainOutcome,
};
use neamer_core::corpus::{ingest_csv, ingest_csv_lenient, Corpus, CorpusError, Label, Language, Split};
use neamer_core::ensemble::{
    combine, combine_topk, diff_predictions, group_by_sample, read_checkpoint_metas, read_predictions_jsonl,
    read_scores_jsonl, write_checkpoint_metas, write_predictions_jsonl, write_scores_jsonl, CheckpointMeta,
    Prediction, ScoreRecord, Strategy,
};
use neamer_core::evaluation::{
    confusion, f1_scores, per_feature_f1, render_stability, roc_auc, stability_report, RunSummary,
};
use neamer_core::locality::{
    featurize, read_features_jsonl, read_ner_jsonl, write_features_jsonl, LocalityVector, LocalityWarning, NerSpan,
};
use neamer_core::locator::Locator;
use neamer_core::stats::{label_statistics, render_table, write_csv as write_stats_csv};

use crate::config::RunConfig;
use crate::{Cli, Command, EnsembleMode, GlobalArgs, ValidationError};

const BASELINE_TAG: &str = "baseline";

/// Effective settings after applying flags over the config file.
struct Ctx {
    config: RunConfig,
    global: GlobalArgs,
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ValidationError(msg.into()))
}

impl Ctx {
    fn new(global: GlobalArgs) -> Result<Self> {
        let mut config = match &global.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &global.out {
            config.out_dir = out.clone();
        }
        if let Some(epochs) = global.epochs {
            config.model.epochs = epochs;
        }
        if let Some(seed) = global.seed {
            config.model.seeds = vec![seed];
            config.model.retry_seeds.retain(|&s| s != seed);
        }
        config.model.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(Ctx { config, global })
    }

    fn split_or(&self, default: Split) -> Split {
        self.global.split.unwrap_or(default)
    }

    fn data_path(&self, explicit: Option<&PathBuf>, split: Split) -> Result<PathBuf> {
        explicit
            .or_else(|| self.config.data.get(split))
            .cloned()
            .ok_or_else(|| invalid(format!("no input CSV for split {split}; pass a path or set data.{split} in the config")))
    }

    fn ner_path(&self, explicit: Option<&PathBuf>, split: Split) -> Option<PathBuf> {
        explicit.or_else(|| self.config.ner.get(split)).cloned()
    }

    fn keep_language(&self, language: Language) -> bool {
        self.global.language.is_none_or(|l| l == language)
    }

    /// Strict ingestion, then the optional language filter.
    fn load_corpus(&self, path: &Path, split: Split) -> Result<Corpus> {
        let corpus = ingest_csv(path, &self.config.columns, split).map_err(corpus_error)?;
        Ok(self.filter(corpus))
    }

    fn filter(&self, corpus: Corpus) -> Corpus {
        if self.global.language.is_none() {
            return corpus;
        }
        let provenance = corpus.provenance().clone();
        let kept = corpus.samples().iter().filter(|s| self.keep_language(s.language)).cloned().collect();
        Corpus::new(kept, provenance)
    }

    fn out_path(&self, name: &str) -> Result<PathBuf> {
        let dir = &self.config.out_dir;
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(dir.join(name))
    }

    fn write_out(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_path(name)?;
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Text report, stamped only on request.
    fn write_report(&self, name: &str, mut text: String) -> Result<PathBuf> {
        if self.global.stamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let _ = writeln!(text, "generated_at_unix: {secs}");
        }
        self.write_out(name, text.as_bytes())
    }
}

/// I/O failures stay I/O errors; everything else about a corpus is invalid input.
fn corpus_error(err: CorpusError) -> anyhow::Error {
    match err {
        CorpusError::Io { .. } => anyhow::Error::new(err),
        other => invalid(other.to_string()),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_ner(path: Option<&Path>) -> Result<BTreeMap<String, Vec<NerSpan>>> {
    match path {
        Some(p) => read_ner_jsonl(&read_bytes(p)?[..]).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => Ok(BTreeMap::new()),
    }
}

fn compute_features(ctx: &Ctx, corpus: &Corpus, ner_path: Option<&Path>) -> Result<BTreeMap<String, LocalityVector>> {
    if ner_path.is_none() {
        eprintln!("note: no NER spans given; the Entity feature is false for every sample");
    }
    let ner = read_ner(ner_path)?;
    let locator = Locator::default();
    let mut vectors = BTreeMap::new();
    for sample in corpus {
        let spans = ner.get(&sample.id).map(Vec::as_slice).unwrap_or(&[]);
        let extraction = featurize(sample, spans, &ctx.config.wordlists, &locator).map_err(|e| invalid(e.to_string()))?;
        if let Some(LocalityWarning::EmptyOccurrences { id }) = &extraction.warning {
            eprintln!("warning: MWE {:?} not found in sample {id}; all features false", sample.mwe);
        }
        vectors.insert(sample.id.clone(), extraction.vector);
    }
    Ok(vectors)
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(cli.global)?;
    match cli.command {
        Command::Ingest { input } => ingest(&ctx, input.as_ref()),
        Command::Features { input, ner } => features(&ctx, input.as_ref(), ner.as_ref()),
        Command::Stats { input, ner } => stats(&ctx, input.as_ref(), ner.as_ref()),
        Command::Train { train, valid } => train_cmd(&ctx, train.as_ref(), valid.as_ref()),
        Command::Eval {
            gold,
            scores,
            predictions,
            ner,
            features,
        } => eval(&ctx, gold.as_ref(), &scores, predictions.as_ref(), ner.as_ref(), features.as_ref()),
        Command::Ensemble { scores, metas } => ensemble(&ctx, &scores, metas.as_ref()),
        Command::Diff { a, b, gold, ner } => diff(&ctx, &a, &b, gold.as_ref(), ner.as_ref()),
    }
}

fn ingest(ctx: &Ctx, input: Option<&PathBuf>) -> Result<()> {
    let split = ctx.split_or(Split::Validation);
    let path = ctx.data_path(input, split)?;
    let report = ingest_csv_lenient(&path, &ctx.config.columns, split).map_err(corpus_error)?;
    let corpus = ctx.filter(report.corpus);

    let mut csv_out = Vec::new();
    corpus.write_csv(&mut csv_out)?;
    let csv_path = ctx.write_out(&format!("corpus_{split}.csv"), &csv_out)?;

    let mut text = format!("input: {}\nsplit: {split}\naccepted: {}\nrejected: {}\n", path.display(), corpus.len(), report.rejected.len());
    for err in &report.rejected {
        let _ = writeln!(text, "  {err}");
    }
    let report_path = ctx.write_report(&format!("ingest_{split}.txt"), text.clone())?;
    print!("{text}");
    println!("wrote {} and {}", csv_path.display(), report_path.display());
    if !report.rejected.is_empty() {
        bail!(ValidationError(format!("{} rows rejected", report.rejected.len())));
    }
    Ok(())
}

fn features(ctx: &Ctx, input: Option<&PathBuf>, ner: Option<&PathBuf>) -> Result<()> {
    let split = ctx.split_or(Split::Validation);
    let corpus = ctx.load_corpus(&ctx.data_path(input, split)?, split)?;
    let vectors = compute_features(ctx, &corpus, ctx.ner_path(ner, split).as_deref())?;
    let mut out = Vec::new();
    write_features_jsonl(&mut out, corpus.iter().map(|s| (s.id.as_str(), &vectors[&s.id])))?;
    let path = ctx.write_out(&format!("features_{split}.jsonl"), &out)?;
    println!("wrote {} vectors to {}", vectors.len(), path.display());
    Ok(())
}

fn stats(ctx: &Ctx, input: Option<&PathBuf>, ner: Option<&PathBuf>) -> Result<()> {
    let split = ctx.split_or(Split::ZeroShotTrain);
    let corpus = ctx.load_corpus(&ctx.data_path(input, split)?, split)?;
    let vectors = compute_features(ctx, &corpus, ctx.ner_path(ner, split).as_deref())?;
    let rows = label_statistics(&corpus, &vectors).map_err(|e| invalid(e.to_string()))?;
    let table = render_table(&rows);
    let mut csv_out = Vec::new();
    write_stats_csv(&mut csv_out, &rows)?;
    ctx.write_out(&format!("stats_{split}.csv"), &csv_out)?;
    ctx.write_report(&format!("stats_{split}.txt"), table.clone())?;
    print!("{table}");
    Ok(())
}

fn prepare(ctx: &Ctx, path: &Path, split: Split) -> Result<(Corpus, Dataset)> {
    let corpus = ctx.load_corpus(path, split)?;
    let vectors = compute_features(ctx, &corpus, ctx.config.ner.get(split).map(PathBuf::as_path))?;
    let data = Dataset::prepare(&corpus, &vectors, &ctx.config.model, true).map_err(|e| invalid(e.to_string()))?;
    Ok((corpus, data))
}

/// The most frequent language in the corpus, earliest code on ties.
fn dominant_language(corpus: &Corpus) -> Language {
    let mut counts: BTreeMap<Language, usize> = BTreeMap::new();
    for s in corpus {
        *counts.entry(s.language).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
        .unwrap_or(Language::En)
}

fn train_cmd(ctx: &Ctx, train_csv: Option<&PathBuf>, valid_csv: Option<&PathBuf>) -> Result<()> {
    let model: &ModelConfig = &ctx.config.model;
    let train_split = ctx.split_or(Split::ZeroShotTrain);
    let (train_corpus, train_set) = prepare(ctx, &ctx.data_path(train_csv, train_split)?, train_split)?;
    let (valid_corpus, valid_set) = prepare(ctx, &ctx.data_path(valid_csv, Split::Validation)?, Split::Validation)?;
    let language = ctx.global.language.unwrap_or_else(|| dominant_language(&train_corpus));

    let mut trainer = |seed: u64| {
        eprintln!("training seed {seed}");
        train(model, &train_set, &valid_set, seed).map(|o| {
            let f1 = o.best_f1;
            (o, f1)
        })
    };
    let (attempts, exhausted) = match train_with_retry(&model.seed_schedule(), &mut trainer) {
        Ok(attempts) => (attempts, false),
        Err(RetryError::RetrySeedsExhausted { attempts }) => (attempts, true),
        Err(RetryError::Trainer { seed, source }) => return Err(invalid(format!("seed {seed}: {source}"))),
    };

    let mut metas = Vec::new();
    let mut summaries = Vec::new();
    for run in &attempts {
        write_attempt(ctx, run, &valid_set, &valid_corpus)?;
        let mut tags = Vec::new();
        if run.is_retry {
            tags.push("retry".to_string());
        }
        if run.failed {
            tags.push("failed".to_string());
        }
        metas.push(CheckpointMeta {
            model_id: model_id(run.seed),
            language_target: language,
            validation_f1: run.best_f1,
            tags,
        });
        summaries.push(RunSummary {
            tag: BASELINE_TAG.into(),
            seed: run.seed,
            best_f1: run.best_f1,
            failed: run.failed,
        });
        println!(
            "seed {:>4}  best epoch {:>2}  validation F1 {:.4}{}",
            run.seed,
            run.output.best_epoch,
            run.best_f1,
            if run.failed { "  (failed)" } else { "" }
        );
    }
    let mut metas_out = Vec::new();
    write_checkpoint_metas(&mut metas_out, &metas)?;
    ctx.write_out("checkpoints.json", &metas_out)?;
    let stability = render_stability(&stability_report(&summaries));
    ctx.write_report("stability.txt", stability.clone())?;
    print!("{stability}");
    if exhausted {
        bail!(ValidationError("retry seeds exhausted before every failure was replaced".into()));
    }
    Ok(())
}

fn model_id(seed: u64) -> String {
    format!("{BASELINE_TAG}-s{seed}")
}

fn write_attempt(ctx: &Ctx, run: &SeedRun<TrainOutcome>, valid_set: &Dataset, valid_corpus: &Corpus) -> Result<()> {
    let id = model_id(run.seed);
    let mut params = Vec::new();
    write_params(&mut params, &run.output.params)?;
    ctx.write_out(&format!("{id}.params"), &params)?;
    let mut log = Vec::new();
    write_f1_log(&mut log, &run.output.epoch_f1)?;
    ctx.write_out(&format!("{id}_f1.csv"), &log)?;
    let records = score_records(&run.output.params, valid_set, valid_corpus, &id).map_err(|e| invalid(e.to_string()))?;
    let mut scores = Vec::new();
    write_scores_jsonl(&mut scores, &records)?;
    ctx.write_out(&format!("{id}_scores_validation.jsonl"), &scores)?;
    Ok(())
}

fn read_scores(ctx: &Ctx, paths: &[PathBuf]) -> Result<Vec<ScoreRecord>> {
    let mut records = Vec::new();
    for p in paths {
        let mut part = read_scores_jsonl(&read_bytes(p)?[..]).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        part.retain(|r| ctx.keep_language(r.language));
        records.extend(part);
    }
    Ok(records)
}

fn combine_records(ctx: &Ctx, records: &[ScoreRecord], metas: Option<&PathBuf>) -> Result<BTreeMap<String, Prediction>> {
    let mode = ctx.global.strategy.unwrap_or(EnsembleMode::Mean);
    let strategy = match mode {
        EnsembleMode::Mean | EnsembleMode::Topk => Strategy::MeanScore,
        EnsembleMode::Vote | EnsembleMode::TopkVote => Strategy::MajorityVote,
    };
    match mode {
        EnsembleMode::Mean | EnsembleMode::Vote => combine(&group_by_sample(records), strategy).map_err(|e| invalid(e.to_string())),
        EnsembleMode::Topk | EnsembleMode::TopkVote => {
            let k = ctx.global.k.ok_or_else(|| invalid("top-k ensembling needs --k"))?;
            let path = metas
                .or(ctx.config.checkpoint_meta.as_ref())
                .ok_or_else(|| invalid("top-k ensembling needs --metas or checkpoint_meta in the config"))?;
            let metas = read_checkpoint_metas(&read_bytes(path)?[..]).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            combine_topk(records, &metas, k, strategy).map_err(|e| invalid(e.to_string()))
        }
    }
}

fn ensemble(ctx: &Ctx, scores: &[PathBuf], metas: Option<&PathBuf>) -> Result<()> {
    let records = read_scores(ctx, scores)?;
    let predictions = combine_records(ctx, &records, metas)?;
    let mut out = Vec::new();
    write_predictions_jsonl(&mut out, &predictions)?;
    let path = ctx.write_out("predictions.jsonl", &out)?;
    let non_idiomatic = predictions.values().filter(|p| p.label == Label::NonIdiomatic).count();
    println!(
        "combined {} samples ({} idiomatic, {non_idiomatic} non-idiomatic) into {}",
        predictions.len(),
        predictions.len() - non_idiomatic,
        path.display()
    );
    Ok(())
}

fn gold_vectors(ctx: &Ctx, gold: &Corpus, split: Split, ner: Option<&PathBuf>, features: Option<&PathBuf>) -> Result<BTreeMap<String, LocalityVector>> {
    match features {
        Some(p) => read_features_jsonl(&read_bytes(p)?[..]).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => compute_features(ctx, gold, ctx.ner_path(ner, split).as_deref()),
    }
}

fn eval(
    ctx: &Ctx,
    gold_csv: Option<&PathBuf>,
    scores: &[PathBuf],
    predictions: Option<&PathBuf>,
    ner: Option<&PathBuf>,
    features: Option<&PathBuf>,
) -> Result<()> {
    let split = ctx.split_or(Split::Validation);
    let gold = ctx.load_corpus(&ctx.data_path(gold_csv, split)?, split)?;
    let pred = match (predictions, scores.is_empty()) {
        (Some(p), _) => read_predictions_jsonl(&read_bytes(p)?[..]).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        (None, false) => {
            let mut records = read_scores(ctx, scores)?;
            records.retain(|r| gold.get(&r.sample_id).is_some());
            combine_records(ctx, &records, None)?
        }
        (None, true) => bail!(ValidationError("eval needs --scores or --predictions".into())),
    };
    let vectors = gold_vectors(ctx, &gold, split, ner, features)?;

    let mut gold_labels = Vec::with_capacity(gold.len());
    let mut pred_labels = Vec::with_capacity(gold.len());
    let mut pred_scores = Vec::with_capacity(gold.len());
    let (mut gold_map, mut pred_map) = (BTreeMap::new(), BTreeMap::new());
    for s in &gold {
        let g = s.label.ok_or_else(|| invalid(format!("sample {} has no gold label", s.id)))?;
        let p = pred.get(&s.id).ok_or_else(|| invalid(format!("no prediction for sample {}", s.id)))?;
        gold_labels.push(g);
        pred_labels.push(p.label);
        pred_scores.push(p.score);
        gold_map.insert(s.id.clone(), g);
        pred_map.insert(s.id.clone(), p.label);
    }
    let matrix = confusion(&gold_labels, &pred_labels).map_err(|e| invalid(e.to_string()))?;
    let report = f1_scores(&matrix).map_err(|e| invalid(e.to_string()))?;

    let mut text = format!("split: {split}\nsamples: {}\n\n{matrix}\n\n", gold.len());
    for (k, name) in ["0 (Idiomatic)", "1 (Non-idiomatic)"].iter().enumerate() {
        let c = report.per_class[k];
        let _ = writeln!(
            text,
            "class {name:<18} precision {:>5.1}  recall {:>5.1}  F1 {:>5.1}  support {}",
            100.0 * c.precision,
            100.0 * c.recall,
            100.0 * c.f1,
            c.support
        );
    }
    let _ = writeln!(text, "\nmacro F1: {:.1}\nmicro F1: {:.1}", 100.0 * report.macro_f1, 100.0 * report.micro_f1);

    match roc_auc(&gold_labels, &pred_scores) {
        Ok(curve) => {
            let _ = writeln!(text, "AUC: {:.4}", curve.auc);
            let mut roc = Vec::new();
            curve.write_csv(&mut roc)?;
            ctx.write_out(&format!("roc_{split}.csv"), &roc)?;
        }
        Err(e) => {
            let _ = writeln!(text, "AUC: n/a ({e})");
        }
    }

    let table = per_feature_f1(&gold_map, &pred_map, &vectors).map_err(|e| invalid(e.to_string()))?;
    let _ = write!(text, "\n{table}");
    let mut per_feature = csv::Writer::from_writer(Vec::new());
    per_feature.write_record(["feature", "count", "micro_f1"])?;
    for row in &table.rows {
        per_feature.write_record([row.feature.name().to_string(), row.count.to_string(), format!("{:.1}", row.micro_f1)])?;
    }
    let per_feature = per_feature.into_inner().map_err(|e| anyhow!(e.to_string()))?;
    ctx.write_out(&format!("per_feature_{split}.csv"), &per_feature)?;

    ctx.write_report(&format!("eval_{split}.txt"), text.clone())?;
    print!("{text}");
    Ok(())
}

fn diff(ctx: &Ctx, a: &Path, b: &Path, gold_csv: Option<&PathBuf>, ner: Option<&PathBuf>) -> Result<()> {
    let split = ctx.split_or(Split::Validation);
    let gold = ctx.load_corpus(&ctx.data_path(gold_csv, split)?, split)?;
    let read = |p: &Path| -> Result<BTreeMap<String, Prediction>> {
        let mut preds = read_predictions_jsonl(&read_bytes(p)?[..]).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        preds.retain(|id, _| gold.get(id).is_some());
        Ok(preds)
    };
    let (pa, pb) = (read(a)?, read(b)?);
    let vectors = compute_features(ctx, &gold, ctx.ner_path(ner, split).as_deref())?;
    let report = diff_predictions(&pa, &pb, &gold, Some(&vectors)).map_err(|e| invalid(e.to_string()))?;
    let text = format!("a: {}\nb: {}\n{report}", a.display(), b.display());
    ctx.write_report("diff.txt", text.clone())?;
    print!("{text}");
    Ok(())
}
