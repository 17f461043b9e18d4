//! The stages behind each subcommand.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use cccp_core::baseline::baseline_tree_scores;
use cccp_core::centrality::centrality_tree_scores;
use cccp_core::pb::{evaluate_pb, pb_tree_scores, train_pb, PbDiagnostics, PbModel};
use cccp_core::rb::{evaluate_rb, extract_distance_embedding, rb_tree_scores, train_rb, RbDiagnostics, RbModel};
use cccp_core::report::{corpus_counts, AggregationMode, ComparisonReport};
use cccp_core::synth::generate_synthetic;
use cccp_core::{ConversationTree, Corpus, Metric, ScoreRow, ScoreTable};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{CorpusSource, RunConfig};
use crate::corpus_io::{cap_per_platform, corpus_to_tsv, load_corpora, LoadReport};
use crate::models::{pb_from_text, pb_to_text, rb_from_text, rb_to_text};
use crate::output::{
    corpus_summary_tsv, render_report, report_from_dir, sha256_hex, skipped_tsv, write_scores, ClassifierSummary, Staging,
};
use crate::tables::{contexts_tsv, pairs_tsv, CONTEXTS_HEADER, PAIRS_HEADER};

pub const RB_MODEL: &str = "models/rb.model";
pub const PB_MODEL: &str = "models/pb.model";

/// Loads or generates the corpus, then applies the per-platform cap.
pub fn obtain_corpus(cfg: &RunConfig) -> Result<(Corpus, LoadReport)> {
    let (corpus, report) = match &cfg.source {
        CorpusSource::Files(paths) => load_corpora(paths)?,
        CorpusSource::Synthetic(configs) => {
            let mut merged: Option<Corpus> = None;
            for c in configs {
                let part = generate_synthetic(c)?;
                merged = Some(match merged {
                    None => part,
                    Some(m) => m.merge(part)?,
                });
            }
            let corpus = merged.context("no synthetic profile")?;
            let report = LoadReport {
                records: corpus.post_count(),
                loaded: corpus.len(),
                skipped: Vec::new(),
            };
            (corpus, report)
        }
    };
    let corpus = match cfg.cap_per_platform {
        Some(cap) => cap_per_platform(corpus, cap, cfg.seed)?,
        None => corpus,
    };
    anyhow::ensure!(!corpus.is_empty(), "corpus is empty after --cap-per-platform");
    Ok((corpus, report))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start worker threads")
}

/// Applies `f` to every conversation on the pool, keeping corpus order.
fn per_tree<F, E>(pool: &rayon::ThreadPool, corpus: &Corpus, metric: Metric, f: F) -> Result<ScoreTable>
where
    F: Fn(&ConversationTree) -> std::result::Result<Vec<ScoreRow>, E> + Sync,
    E: Send + std::error::Error + Sync + 'static,
{
    let parts: Vec<std::result::Result<Vec<ScoreRow>, E>> = pool.install(|| corpus.trees().par_iter().map(&f).collect());
    let mut table = ScoreTable::new(metric);
    for p in parts {
        table.rows.extend(p?);
    }
    Ok(table)
}

#[derive(Clone, Debug, Default)]
pub struct Models {
    pub rb: Option<RbModel>,
    pub pb: Option<PbModel>,
}

#[derive(Clone, Debug, Default)]
pub struct Training {
    pub models: Models,
    pub rb: Option<RbDiagnostics>,
    pub pb: Option<PbDiagnostics>,
}

pub fn train(corpus: &Corpus, cfg: &RunConfig) -> Result<Training> {
    let mut out = Training::default();
    if cfg.wants(Metric::Rb) {
        let (model, diag) = train_rb(corpus, &cfg.rb).context("training the response-based model")?;
        out.models.rb = Some(model);
        out.rb = Some(diag);
    }
    if cfg.wants(Metric::Pb) {
        let (model, diag) = train_pb(corpus, &cfg.pb).context("training the prediction-based model")?;
        out.models.pb = Some(model);
        out.pb = Some(diag);
    }
    Ok(out)
}

pub fn evaluate(corpus: &Corpus, cfg: &RunConfig, models: &Models) -> Result<(Option<RbDiagnostics>, Option<PbDiagnostics>)> {
    let rb = match &models.rb {
        Some(m) if cfg.wants(Metric::Rb) => Some(evaluate_rb(corpus, m, &cfg.rb.pairs)?),
        _ => None,
    };
    let pb = match &models.pb {
        Some(m) if cfg.wants(Metric::Pb) => Some(evaluate_pb(corpus, m)?),
        _ => None,
    };
    Ok((rb, pb))
}

/// Score tables of every selected metric; prediction-based scores come as
/// a normalized and a raw table.
pub fn score(corpus: &Corpus, cfg: &RunConfig, models: &Models) -> Result<Vec<ScoreTable>> {
    let pool = pool(cfg.jobs)?;
    let mut tables = Vec::new();
    if cfg.wants(Metric::Baseline) {
        tables.push(per_tree(&pool, corpus, Metric::Baseline, |t| {
            Ok::<_, std::convert::Infallible>(baseline_tree_scores(t, &cfg.baseline))
        })?);
    }
    if cfg.wants(Metric::Rb) {
        let model = models.rb.as_ref().context("no response-based model")?;
        tables.push(per_tree(&pool, corpus, Metric::Rb, |t| rb_tree_scores(t, model, &cfg.rb.pairs))?);
    }
    if cfg.wants(Metric::Pb) {
        let model = models.pb.as_ref().context("no prediction-based model")?;
        let parts: Vec<_> = pool.install(|| corpus.trees().par_iter().map(|t| pb_tree_scores(t, model)).collect());
        let mut norm = ScoreTable::new(Metric::Pb);
        let mut raw = ScoreTable::new(Metric::PbRaw);
        for p in parts {
            let p = p?;
            norm.rows.extend(p.normalized);
            raw.rows.extend(p.raw);
        }
        tables.push(norm);
        tables.push(raw);
    }
    if cfg.wants(Metric::Centrality) {
        tables.push(per_tree(&pool, corpus, Metric::Centrality, |t| {
            Ok::<_, std::convert::Infallible>(centrality_tree_scores(t, cfg.endpoints))
        })?);
    }
    Ok(tables)
}

fn classifier_summary(rb: Option<&RbDiagnostics>, pb: Option<&PbDiagnostics>) -> ClassifierSummary {
    let mut s = ClassifierSummary::default();
    if let Some(d) = rb {
        s.push("rb", "pairs", d.pairs);
        s.push("rb", "positives", d.positives);
        s.push("rb", "precision", format!("{:.6}", d.precision()));
        s.push("rb", "recall", format!("{:.6}", d.recall()));
        s.push("rb", "accuracy", format!("{:.6}", d.confusion.accuracy()));
    }
    if let Some(d) = pb {
        s.push("pb", "contexts", d.contexts);
        s.push("pb", "precision", format!("{:.6}", d.precision));
        s.push("pb", "new_fraction", format!("{:.6}", d.new_fraction));
        s.push("pb", "new_target_fraction", format!("{:.6}", d.new_target_fraction));
    }
    s
}

fn write_models(stage: &mut Staging, models: &Models) -> Result<()> {
    if let Some(m) = &models.rb {
        stage.write(RB_MODEL, &rb_to_text(m))?;
        let mut emb = String::from("reply_distance\tprobability\n");
        for (bucket, p) in extract_distance_embedding(m)? {
            emb.push_str(&format!("{bucket}\t{p:.6}\n"));
        }
        stage.write("embedding.tsv", &emb)?;
    }
    if let Some(m) = &models.pb {
        stage.write(PB_MODEL, &pb_to_text(m))?;
    }
    Ok(())
}

/// Pair and context listings for audit.
fn write_exports(stage: &mut Staging, corpus: &Corpus, cfg: &RunConfig) -> Result<()> {
    if cfg.wants(Metric::Rb) {
        let mut text = format!("{PAIRS_HEADER}\n");
        for t in corpus.trees() {
            text.push_str(&pairs_tsv(t, &cfg.rb.pairs));
        }
        stage.write("pairs.tsv", &text)?;
    }
    if cfg.wants(Metric::Pb) {
        let mut text = format!("{CONTEXTS_HEADER}\n");
        for t in corpus.trees() {
            text.push_str(&contexts_tsv(t, cfg.pb.max_slots));
        }
        stage.write("contexts.tsv", &text)?;
    }
    Ok(())
}

fn write_corpus_files(stage: &mut Staging, corpus: &Corpus, load: &LoadReport) -> Result<()> {
    stage.write("corpus_summary.tsv", &corpus_summary_tsv(&corpus_counts(corpus)))?;
    stage.write("skipped.tsv", &skipped_tsv(&load.skipped))?;
    Ok(())
}

fn write_report(stage: &mut Staging, report: &ComparisonReport) -> Result<()> {
    for (name, contents) in render_report(report) {
        stage.write(name, &contents)?;
    }
    Ok(())
}

fn corpus_json(corpus: &Corpus, load: &LoadReport) -> serde_json::Value {
    json!({
        "source": corpus.source(),
        "conversations": corpus.len(),
        "posts": corpus.post_count(),
        "skipped": load.skipped.len(),
        "sha256": sha256_hex(corpus_to_tsv(corpus).as_bytes()),
    })
}

/// Writes manifest.json as the last staged file.
fn write_manifest(stage: &mut Staging, command: &str, config: serde_json::Value, corpus: Option<serde_json::Value>) -> Result<()> {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let files: Vec<_> = stage
        .checksums()?
        .into_iter()
        .map(|(path, sha256)| json!({ "path": path, "sha256": sha256 }))
        .collect();
    let manifest = json!({
        "tool": "cccp",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "created_unix": created,
        "config": config,
        "corpus": corpus,
        "files": files,
    });
    stage.write("manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))
}

/// Validation summary for `ingest-check`.
pub fn ingest_check(cfg: &RunConfig, out: Option<&Path>) -> Result<String> {
    let (corpus, load) = obtain_corpus(cfg)?;
    let mut text = format!("{} records, {} conversations loaded, {} skipped\n", load.records, corpus.len(), load.skipped.len());
    text.push_str(&corpus_summary_tsv(&corpus_counts(&corpus)));
    if !load.skipped.is_empty() {
        text.push_str(&skipped_tsv(&load.skipped));
    }
    if let Some(dir) = out {
        let mut stage = Staging::new(dir)?;
        write_corpus_files(&mut stage, &corpus, &load)?;
        stage.write("corpus.tsv", &corpus_to_tsv(&corpus))?;
        write_manifest(&mut stage, "ingest-check", cfg.to_json(), Some(corpus_json(&corpus, &load)))?;
        stage.commit()?;
    }
    Ok(text)
}

pub fn run_train(cfg: &RunConfig, out: &Path, export: bool) -> Result<Training> {
    let (corpus, load) = obtain_corpus(cfg)?;
    let training = train(&corpus, cfg)?;
    let mut stage = Staging::new(out)?;
    write_corpus_files(&mut stage, &corpus, &load)?;
    write_models(&mut stage, &training.models)?;
    stage.write("classifier.tsv", &classifier_summary(training.rb.as_ref(), training.pb.as_ref()).to_tsv())?;
    if export {
        write_exports(&mut stage, &corpus, cfg)?;
    }
    write_manifest(&mut stage, "train", cfg.to_json(), Some(corpus_json(&corpus, &load)))?;
    stage.commit()?;
    Ok(training)
}

pub fn load_models(dir: &Path, cfg: &RunConfig) -> Result<Models> {
    let read = |rel: &str| fs::read_to_string(dir.join(rel)).with_context(|| format!("cannot read {}", dir.join(rel).display()));
    let mut models = Models::default();
    if cfg.wants(Metric::Rb) {
        models.rb = Some(rb_from_text(&read(RB_MODEL)?).with_context(|| format!("in {RB_MODEL}"))?);
    }
    if cfg.wants(Metric::Pb) {
        models.pb = Some(pb_from_text(&read(PB_MODEL)?).with_context(|| format!("in {PB_MODEL}"))?);
    }
    Ok(models)
}

pub fn run_score(cfg: &RunConfig, models_dir: Option<&Path>, out: &Path) -> Result<()> {
    let models = match models_dir {
        Some(d) => load_models(d, cfg)?,
        None => Models::default(),
    };
    let (corpus, load) = obtain_corpus(cfg)?;
    let tables = score(&corpus, cfg, &models)?;
    let (rb, pb) = evaluate(&corpus, cfg, &models)?;
    let mut stage = Staging::new(out)?;
    write_corpus_files(&mut stage, &corpus, &load)?;
    write_scores(&mut stage, &tables)?;
    stage.write("classifier.tsv", &classifier_summary(rb.as_ref(), pb.as_ref()).to_tsv())?;
    write_manifest(&mut stage, "score", cfg.to_json(), Some(corpus_json(&corpus, &load)))?;
    stage.commit()?;
    Ok(())
}

/// Rebuilds the report files of a scored directory into `out`.
pub fn run_report(from: &Path, out: &Path, metrics: Option<&[Metric]>, mode: AggregationMode) -> Result<ComparisonReport> {
    let report = report_from_dir(from, metrics, mode)?;
    let mut stage = Staging::new(out)?;
    write_report(&mut stage, &report)?;
    let config = json!({
        "from": from.display().to_string(),
        "metrics": metrics.map(|m| m.iter().map(|x| x.as_str()).collect::<Vec<_>>()),
        "aggregation": mode.as_str(),
    });
    write_manifest(&mut stage, "report", config, None)?;
    stage.commit()?;
    Ok(report)
}

/// Everything: corpus, training, scoring, then the report built from the
/// persisted tables so `report --from` reproduces it byte for byte.
pub fn run_all(cfg: &RunConfig, out: &Path, export: bool) -> Result<ComparisonReport> {
    let (corpus, load) = obtain_corpus(cfg)?;
    let training = train(&corpus, cfg)?;
    let tables = score(&corpus, cfg, &training.models)?;
    let mut stage = Staging::new(out)?;
    write_corpus_files(&mut stage, &corpus, &load)?;
    write_models(&mut stage, &training.models)?;
    write_scores(&mut stage, &tables)?;
    stage.write("classifier.tsv", &classifier_summary(training.rb.as_ref(), training.pb.as_ref()).to_tsv())?;
    if export {
        write_exports(&mut stage, &corpus, cfg)?;
    }
    let report = report_from_dir(stage.dir(), Some(&cfg.metrics), cfg.aggregation)?;
    write_report(&mut stage, &report)?;
    write_manifest(&mut stage, "run", cfg.to_json(), Some(corpus_json(&corpus, &load)))?;
    stage.commit()?;
    Ok(report)
}
