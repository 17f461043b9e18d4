//! Aggregation of score tables, cross-metric correlation and the
//! platform comparison report.

use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::corpus::Corpus;
use crate::score::{Metric, ScoreTable};
use crate::tree::Platform;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("samples have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("at least two samples are needed, got {0}")]
    TooFewSamples(usize),
    #[error("a sample has zero variance")]
    ZeroVariance,
}

/// Pearson product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AggregationMode {
    /// Authors to conversation, then conversations to platform.
    #[default]
    TwoStage,
    /// All author rows of a platform at once.
    Pooled,
}

impl AggregationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::TwoStage => "two-stage",
            AggregationMode::Pooled => "pooled",
        }
    }
}

impl FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-stage" => Ok(AggregationMode::TwoStage),
            "pooled" => Ok(AggregationMode::Pooled),
            other => Err(alloc::format!("unknown aggregation `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("score table for {0} has no rows")]
    EmptyTable(Metric),
    #[error("no score table for metric {0}")]
    MetricMissing(Metric),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConversationMean {
    pub platform: Platform,
    pub conversation_id: String,
    /// `None` when no author row of the conversation is defined.
    pub mean: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean over defined author rows per conversation, sorted by
/// (platform, conversation id).
pub fn conversation_means(table: &ScoreTable) -> Vec<ConversationMean> {
    let mut keyed: Vec<(Platform, &str, Option<f64>)> = table
        .rows
        .iter()
        .map(|r| (r.platform, r.conversation_id.as_str(), r.score))
        .collect();
    keyed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut out: Vec<ConversationMean> = Vec::new();
    let mut i = 0;
    while i < keyed.len() {
        let (platform, conv) = (keyed[i].0, keyed[i].1);
        let mut j = i;
        while j < keyed.len() && keyed[j].0 == platform && keyed[j].1 == conv {
            j += 1;
        }
        // Sum in a fixed order so results do not depend on row order.
        let mut scores: Vec<f64> = keyed[i..j].iter().filter_map(|k| k.2).collect();
        scores.sort_by(f64::total_cmp);
        out.push(ConversationMean {
            platform,
            conversation_id: conv.into(),
            mean: mean(scores),
        });
        i = j;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlatformMean {
    pub metric: Metric,
    pub platform: Platform,
    /// `None` when nothing on the platform is defined.
    pub mean: Option<f64>,
    /// Conversations that contributed a defined value.
    pub conversations: usize,
}

/// Per-platform means of one table.
pub fn aggregate_table(table: &ScoreTable, mode: AggregationMode) -> Result<Vec<PlatformMean>, ReportError> {
    if table.is_empty() {
        return Err(ReportError::EmptyTable(table.metric));
    }
    let conv = conversation_means(table);
    let mut platforms: Vec<Platform> = conv.iter().map(|c| c.platform).collect();
    platforms.dedup();
    Ok(platforms
        .into_iter()
        .map(|platform| {
            let in_platform = conv.iter().filter(|c| c.platform == platform);
            let defined: Vec<f64> = in_platform.filter_map(|c| c.mean).collect();
            let value = match mode {
                AggregationMode::TwoStage => mean(defined.iter().copied()),
                AggregationMode::Pooled => {
                    let mut rows: Vec<f64> = table
                        .rows
                        .iter()
                        .filter(|r| r.platform == platform)
                        .filter_map(|r| r.score)
                        .collect();
                    rows.sort_by(f64::total_cmp);
                    mean(rows)
                }
            };
            PlatformMean {
                metric: table.metric,
                platform,
                mean: value,
                conversations: defined.len(),
            }
        })
        .collect())
}

/// Per (metric, platform) means for several tables.
pub fn aggregate(tables: &[ScoreTable], mode: AggregationMode) -> Result<Vec<PlatformMean>, ReportError> {
    let mut out = Vec::new();
    for t in tables {
        out.extend(aggregate_table(t, mode)?);
    }
    Ok(out)
}

/// Pairwise Pearson correlation of per-conversation means.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub metrics: Vec<Metric>,
    /// `None` where the coefficient is undefined (too few or constant samples).
    pub r: Vec<Vec<Option<f64>>>,
    /// Conversations where both metrics are defined.
    pub n: Vec<Vec<usize>>,
}

pub fn correlation_matrix(tables: &[&ScoreTable]) -> CorrelationMatrix {
    let means: Vec<Vec<ConversationMean>> = tables.iter().map(|t| conversation_means(t)).collect();
    let k = tables.len();
    let mut r = alloc::vec![alloc::vec![None; k]; k];
    let mut n = alloc::vec![alloc::vec![0usize; k]; k];
    for a in 0..k {
        for b in a..k {
            let (xs, ys) = paired(&means[a], &means[b]);
            n[a][b] = xs.len();
            n[b][a] = xs.len();
            let value = if a == b { Some(1.0) } else { pearson(&xs, &ys).ok() };
            r[a][b] = value;
            r[b][a] = value;
        }
    }
    CorrelationMatrix {
        metrics: tables.iter().map(|t| t.metric).collect(),
        r,
        n,
    }
}

fn paired(a: &[ConversationMean], b: &[ConversationMean]) -> (Vec<f64>, Vec<f64>) {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let ka = (a[i].platform, a[i].conversation_id.as_str());
        let kb = (b[j].platform, b[j].conversation_id.as_str());
        match ka.cmp(&kb) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                if let (Some(x), Some(y)) = (a[i].mean, b[j].mean) {
                    xs.push(x);
                    ys.push(y);
                }
                i += 1;
                j += 1;
            }
        }
    }
    (xs, ys)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlatformCount {
    pub platform: Platform,
    pub conversations: usize,
    pub posts: usize,
}

pub fn corpus_counts(corpus: &Corpus) -> Vec<PlatformCount> {
    corpus
        .platforms()
        .into_iter()
        .map(|platform| {
            let trees = corpus.trees().iter().filter(|t| t.platform() == platform);
            let (conversations, posts) = trees.fold((0, 0), |(c, p), t| (c + 1, p + t.len()));
            PlatformCount {
                platform,
                conversations,
                posts,
            }
        })
        .collect()
}

/// Classifier figures carried into the report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassifierDiagnostics {
    pub rb_precision: Option<f64>,
    pub rb_recall: Option<f64>,
    pub pb_precision: Option<f64>,
    pub pb_new_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub aggregation: AggregationMode,
    /// Means of every supplied table, including raw prediction scores.
    pub means: Vec<PlatformMean>,
    pub correlations: CorrelationMatrix,
    pub diagnostics: ClassifierDiagnostics,
    pub counts: Vec<PlatformCount>,
    /// Conversations left out of the normalized prediction mean.
    pub pb_excluded_conversations: usize,
}

impl ComparisonReport {
    pub fn platforms(&self) -> Vec<Platform> {
        self.counts.iter().map(|c| c.platform).collect()
    }

    pub fn is_single_platform(&self) -> bool {
        self.counts.len() < 2
    }

    pub fn mean(&self, metric: Metric, platform: Platform) -> Option<f64> {
        self.means
            .iter()
            .find(|m| m.metric == metric && m.platform == platform)
            .and_then(|m| m.mean)
    }
}

/// Assembles the report. Every metric in `required` must have a non-empty
/// table; correlations cover the required metrics in the given order.
pub fn build_report(
    counts: Vec<PlatformCount>,
    tables: &[ScoreTable],
    required: &[Metric],
    diagnostics: ClassifierDiagnostics,
    mode: AggregationMode,
) -> Result<ComparisonReport, ReportError> {
    let mut selected = Vec::with_capacity(required.len());
    for &m in required {
        match tables.iter().find(|t| t.metric == m) {
            Some(t) if !t.is_empty() => selected.push(t),
            _ => return Err(ReportError::MetricMissing(m)),
        }
    }
    let mut ordered: Vec<ScoreTable> = tables.to_vec();
    ordered.sort_by_key(|t| t.metric);
    let means = aggregate(&ordered, mode)?;
    let pb_excluded_conversations = tables
        .iter()
        .find(|t| t.metric == Metric::Pb)
        .map(|t| conversation_means(t).iter().filter(|c| c.mean.is_none()).count())
        .unwrap_or(0);
    Ok(ComparisonReport {
        aggregation: mode,
        means,
        correlations: correlation_matrix(&selected),
        diagnostics,
        counts,
        pb_excluded_conversations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::ScoreRow;
    use crate::tree::AuthorId;

    fn row(platform: Platform, conv: &str, author: &str, score: Option<f64>) -> ScoreRow {
        ScoreRow {
            platform,
            conversation_id: conv.into(),
            author: AuthorId::new(author).unwrap(),
            score,
        }
    }

    #[test]
    fn pearson_fixtures() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &down).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(StatsError::TooFewSamples(1)));
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn two_stage_and_pooled_means() {
        let p = Platform::Reddit;
        let table = ScoreTable {
            metric: Metric::Baseline,
            rows: alloc::vec![
                row(p, "c1", "a", Some(0.2)),
                row(p, "c1", "b", Some(0.6)),
                row(p, "c2", "a", Some(0.8)),
            ],
        };
        let two = aggregate_table(&table, AggregationMode::TwoStage).unwrap();
        assert!((two[0].mean.unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(two[0].conversations, 2);
        let pooled = aggregate_table(&table, AggregationMode::Pooled).unwrap();
        assert!((pooled[0].mean.unwrap() - 1.6 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn undefined_rows_are_skipped() {
        let table = ScoreTable {
            metric: Metric::Pb,
            rows: alloc::vec![
                row(Platform::Twitter, "c1", "a", None),
                row(Platform::Twitter, "c2", "a", Some(0.5)),
            ],
        };
        let m = aggregate_table(&table, AggregationMode::TwoStage).unwrap();
        assert_eq!((m[0].mean, m[0].conversations), (Some(0.5), 1));
    }

    #[test]
    fn empty_table_is_an_error() {
        assert_eq!(
            aggregate_table(&ScoreTable::new(Metric::Rb), AggregationMode::TwoStage),
            Err(ReportError::EmptyTable(Metric::Rb))
        );
        assert_eq!(
            build_report(Vec::new(), &[], &[Metric::Rb], ClassifierDiagnostics::default(), AggregationMode::TwoStage),
            Err(ReportError::MetricMissing(Metric::Rb))
        );
    }

    #[test]
    fn correlation_matrix_shape() {
        let mk = |metric, vals: &[f64]| ScoreTable {
            metric,
            rows: vals
                .iter()
                .enumerate()
                .map(|(i, v)| row(Platform::Reddit, &alloc::format!("c{i}"), "a", Some(*v)))
                .collect(),
        };
        let a = mk(Metric::Baseline, &[1.0, 2.0, 3.0, 4.0]);
        let b = mk(Metric::Rb, &[2.0, 1.0, 4.0, 3.0]);
        let c = mk(Metric::Centrality, &[0.0, 0.0, 0.0, 0.0]);
        let m = correlation_matrix(&[&a, &b, &c]);
        assert_eq!(m.r[0][0], Some(1.0));
        assert!((m.r[0][1].unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(m.r[1][0], m.r[0][1]);
        assert_eq!(m.r[0][2], None);
        assert_eq!(m.n[0][1], 4);
    }
}
