//! Output directory layout, staging and report files.
//!
//! ```text
//! OUT/
//!   manifest.json
//!   corpus_summary.tsv  skipped.tsv
//!   scores/<metric>.tsv
//!   models/rb.model  models/pb.model
//!   classifier.tsv  embedding.tsv
//!   means.tsv  correlations.tsv  correlation_pairs.tsv  diagnostics.tsv  report.txt
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cccp_core::report::{build_report, ClassifierDiagnostics, ComparisonReport, PlatformCount, AggregationMode};
use cccp_core::{Metric, Platform, ScoreTable};
use sha2::{Digest, Sha256};

use crate::corpus_io::Skipped;
use crate::tables::{fmt_opt, parse_score_table, score_table_to_tsv};

pub const REPORT_FILES: [&str; 5] = ["means.tsv", "correlations.tsv", "correlation_pairs.tsv", "diagnostics.tsv", "report.txt"];

/// Files are written to a hidden sibling directory and moved into place
/// by [`Staging::commit`]; dropping an uncommitted stage deletes it.
pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let name = target
            .file_name()
            .with_context(|| format!("output path {} has no final component", target.display()))?;
        fs::create_dir_all(&parent).with_context(|| format!("cannot create {}", parent.display()))?;
        let dir = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            target: target.to_path_buf(),
            dir,
            files: Vec::new(),
            committed: false,
        })
    }

    /// The staging directory itself.
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(())
    }

    /// Paths written so far with their SHA-256, sorted by path.
    pub fn checksums(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let bytes = fs::read(self.dir.join(rel))?;
            out.push((rel.clone(), sha256_hex(&bytes)));
        }
        out.sort();
        Ok(out)
    }

    /// Moves every staged file into the target directory, replacing files of
    /// the same name and leaving anything else there untouched.
    pub fn commit(mut self) -> Result<PathBuf> {
        fs::create_dir_all(&self.target).with_context(|| format!("cannot create {}", self.target.display()))?;
        for rel in &self.files {
            let dest = self.target.join(rel);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(self.dir.join(rel), &dest).with_context(|| format!("cannot move output to {}", dest.display()))?;
        }
        fs::remove_dir_all(&self.dir)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn score_path(metric: Metric) -> String {
    format!("scores/{}.tsv", metric.as_str())
}

pub fn write_scores(stage: &mut Staging, tables: &[ScoreTable]) -> Result<()> {
    for t in tables {
        stage.write(&score_path(t.metric), &score_table_to_tsv(t))?;
    }
    Ok(())
}

pub fn corpus_summary_tsv(counts: &[PlatformCount]) -> String {
    let mut out = String::from("platform\tconversations\tposts\n");
    for c in counts {
        let _ = writeln!(out, "{}\t{}\t{}", c.platform.as_str(), c.conversations, c.posts);
    }
    out
}

pub fn parse_corpus_summary(text: &str) -> Result<Vec<PlatformCount>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            bail!("corpus_summary.tsv line {}: expected 3 fields", i + 1);
        }
        out.push(PlatformCount {
            platform: f[0].parse::<Platform>().map_err(|e| anyhow::anyhow!("{e}"))?,
            conversations: f[1].parse()?,
            posts: f[2].parse()?,
        });
    }
    Ok(out)
}

pub fn skipped_tsv(skipped: &[Skipped]) -> String {
    let mut out = String::from("conversation_id\tplatform\terror\tdetail\n");
    for s in skipped {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", s.conversation_id, s.platform.as_str(), s.error.kind(), s.error);
    }
    out
}

/// Classifier measures as `model, measure, value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassifierSummary {
    pub rows: Vec<(String, String, String)>,
}

impl ClassifierSummary {
    pub fn push(&mut self, model: &str, measure: &str, value: impl ToString) {
        self.rows.push((model.into(), measure.into(), value.to_string()));
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model\tmeasure\tvalue\n");
        for (m, k, v) in &self.rows {
            let _ = writeln!(out, "{m}\t{k}\t{v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (i, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                bail!("classifier.tsv line {}: expected 3 fields", i + 1);
            }
            s.push(f[0], f[1], f[2]);
        }
        Ok(s)
    }

    fn get(&self, model: &str, measure: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|(m, k, _)| m == model && k == measure)
            .and_then(|(_, _, v)| v.parse().ok())
    }

    pub fn diagnostics(&self) -> ClassifierDiagnostics {
        ClassifierDiagnostics {
            rb_precision: self.get("rb", "precision"),
            rb_recall: self.get("rb", "recall"),
            pb_precision: self.get("pb", "precision"),
            pb_new_fraction: self.get("pb", "new_fraction"),
        }
    }
}

/// Reads persisted tables and summaries from a run directory and assembles
/// the report. `required` defaults to every reported metric with a table.
pub fn report_from_dir(dir: &Path, required: Option<&[Metric]>, mode: AggregationMode) -> Result<ComparisonReport> {
    let read = |rel: &str| fs::read_to_string(dir.join(rel)).with_context(|| format!("cannot read {}", dir.join(rel).display()));
    let counts = parse_corpus_summary(&read("corpus_summary.tsv")?)?;
    let mut tables = Vec::new();
    for metric in [Metric::Baseline, Metric::Rb, Metric::Pb, Metric::PbRaw, Metric::Centrality] {
        let rel = score_path(metric);
        if dir.join(&rel).exists() {
            let table = parse_score_table(metric, &read(&rel)?).with_context(|| format!("in {rel}"))?;
            tables.push(table);
        }
    }
    let present: Vec<Metric> = Metric::REPORTED.into_iter().filter(|m| tables.iter().any(|t| t.metric == *m)).collect();
    let required = required.map(<[Metric]>::to_vec).unwrap_or(present);
    if required.is_empty() {
        bail!("no score tables under {}", dir.join("scores").display());
    }
    let diagnostics = if dir.join("classifier.tsv").exists() {
        ClassifierSummary::parse(&read("classifier.tsv")?)?.diagnostics()
    } else {
        ClassifierSummary::default().diagnostics()
    };
    Ok(build_report(counts, &tables, &required, diagnostics, mode)?)
}

fn label(m: Metric) -> &'static str {
    match m {
        Metric::Pb => "pb*",
        other => other.as_str(),
    }
}

/// Report files by name; a pure function of the report.
pub fn render_report(report: &ComparisonReport) -> Vec<(&'static str, String)> {
    let platforms = report.platforms();
    let metrics = &report.correlations.metrics;
    let mut files = Vec::new();

    let mut means = String::from("metric\tplatform\tn_conversations\tmean\traw_mean\n");
    for &m in metrics {
        for &p in &platforms {
            let entry = report.means.iter().find(|x| x.metric == m && x.platform == p);
            let raw_metric = if m == Metric::Pb { Metric::PbRaw } else { m };
            let _ = writeln!(
                means,
                "{}\t{}\t{}\t{}\t{}",
                m.as_str(),
                p.as_str(),
                entry.map_or(0, |e| e.conversations),
                fmt_opt(entry.and_then(|e| e.mean)),
                fmt_opt(report.mean(raw_metric, p))
            );
        }
    }
    files.push(("means.tsv", means));

    let mut corr = String::from("metric");
    for m in metrics {
        let _ = write!(corr, "\t{}", m.as_str());
    }
    corr.push('\n');
    for (i, m) in metrics.iter().enumerate() {
        corr.push_str(m.as_str());
        for j in 0..metrics.len() {
            let _ = write!(corr, "\t{}", fmt_opt(report.correlations.r[i][j]));
        }
        corr.push('\n');
    }
    files.push(("correlations.tsv", corr));

    let mut pairs = String::from("metric_a\tmetric_b\tr\tn\n");
    for i in 0..metrics.len() {
        for j in i + 1..metrics.len() {
            let _ = writeln!(
                pairs,
                "{}\t{}\t{}\t{}",
                metrics[i].as_str(),
                metrics[j].as_str(),
                fmt_opt(report.correlations.r[i][j]),
                report.correlations.n[i][j]
            );
        }
    }
    files.push(("correlation_pairs.tsv", pairs));

    let d = &report.diagnostics;
    let mut diag = String::from("measure\tvalue\n");
    for (k, v) in [
        ("rb_precision", d.rb_precision),
        ("rb_recall", d.rb_recall),
        ("pb_precision", d.pb_precision),
        ("pb_new_fraction", d.pb_new_fraction),
    ] {
        let _ = writeln!(diag, "{k}\t{}", fmt_opt(v));
    }
    let _ = writeln!(diag, "pb_excluded_conversations\t{}", report.pb_excluded_conversations);
    files.push(("diagnostics.tsv", diag));

    files.push(("report.txt", render_text(report)));
    files
}

fn render_text(report: &ComparisonReport) -> String {
    let platforms = report.platforms();
    let metrics = &report.correlations.metrics;
    let mut s = String::from("Conversation participation report\n\n");

    s.push_str("Corpus\n");
    let _ = writeln!(s, "  {:<12}{:>15}{:>10}", "platform", "conversations", "posts");
    for c in &report.counts {
        let _ = writeln!(s, "  {:<12}{:>15}{:>10}", c.platform.as_str(), c.conversations, c.posts);
    }
    s.push('\n');

    let _ = writeln!(s, "Platform means ({} aggregation)", report.aggregation.as_str());
    if report.is_single_platform() {
        s.push_str("  single platform: no cross-platform comparison\n");
    }
    let _ = write!(s, "  {:<12}", "metric");
    for p in &platforms {
        let _ = write!(s, "{:>12}", p.as_str());
    }
    s.push('\n');
    let mut rows: Vec<Metric> = metrics.clone();
    if rows.contains(&Metric::Pb) {
        rows.insert(rows.iter().position(|m| *m == Metric::Pb).unwrap() + 1, Metric::PbRaw);
    }
    for m in rows {
        let _ = write!(s, "  {:<12}", label(m));
        for &p in &platforms {
            let _ = write!(s, "{:>12}", fmt_opt(report.mean(m, p)));
        }
        s.push('\n');
    }
    if metrics.contains(&Metric::Pb) {
        let _ = writeln!(
            s,
            "  * divided by the repetition probability; {} conversation(s) without repeat authors left out",
            report.pb_excluded_conversations
        );
    }
    s.push('\n');

    s.push_str("Correlations (Pearson r over conversation means, n in parentheses)\n");
    let _ = write!(s, "  {:<12}", "");
    for m in metrics {
        let _ = write!(s, "{:>20}", m.as_str());
    }
    s.push('\n');
    for (i, m) in metrics.iter().enumerate() {
        let _ = write!(s, "  {:<12}", m.as_str());
        for j in 0..metrics.len() {
            let cell = format!("{} ({})", fmt_opt(report.correlations.r[i][j]), report.correlations.n[i][j]);
            let _ = write!(s, "{cell:>20}");
        }
        s.push('\n');
    }
    s.push('\n');

    let d = &report.diagnostics;
    s.push_str("Classifiers\n");
    let _ = writeln!(s, "  rb precision at 0.5   {}", fmt_opt(d.rb_precision));
    let _ = writeln!(s, "  rb recall at 0.5      {}", fmt_opt(d.rb_recall));
    let _ = writeln!(s, "  pb precision          {}", fmt_opt(d.pb_precision));
    let _ = writeln!(s, "  pb predicted NEW      {}", fmt_opt(d.pb_new_fraction));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_stage_leaves_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        {
            let mut s = Staging::new(&out).unwrap();
            s.write("scores/a.tsv", "x").unwrap();
        }
        assert!(!out.exists());
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_moves_files() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        let mut s = Staging::new(&out).unwrap();
        s.write("scores/a.tsv", "x").unwrap();
        s.write("b.txt", "y").unwrap();
        let sums = s.checksums().unwrap();
        assert_eq!(sums[0].0, "b.txt");
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(out.join("scores/a.tsv")).unwrap(), "x");
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
    }

    #[test]
    fn classifier_summary_round_trips() {
        let mut c = ClassifierSummary::default();
        c.push("rb", "precision", "0.980000");
        c.push("pb", "new_fraction", "0.812000");
        let back = ClassifierSummary::parse(&c.to_tsv()).unwrap();
        assert_eq!(back, c);
        let d = back.diagnostics();
        assert_eq!(d.rb_precision, Some(0.98));
        assert_eq!(d.pb_precision, None);
    }
}
