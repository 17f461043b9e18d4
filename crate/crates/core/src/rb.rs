//! Response-based metric: a binary classifier learns, from reply facts,
//! how likely an author is to have read an earlier post, and authors are
//! scored by their mean predicted probability.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::corpus::Corpus;
use crate::nn::{self, Activation, Example, Loss, ModelParams, NnError, TrainConfig};
use crate::score::{Metric, ScoreRow, ScoreTable};
use crate::tree::{AuthorId, ConversationTree, NodeIndex, PathMode};

/// Which earlier posts count as positively seen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PositiveRule {
    /// Only the post the author replied to.
    #[default]
    Parent,
    /// Every ancestor of the author's post.
    Ancestors,
}

impl PositiveRule {
    pub fn as_str(self) -> &'static str {
        match self {
            PositiveRule::Parent => "parent",
            PositiveRule::Ancestors => "ancestors",
        }
    }
}

impl FromStr for PositiveRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parent" => Ok(PositiveRule::Parent),
            "ancestors" => Ok(PositiveRule::Ancestors),
            other => Err(alloc::format!("unknown positive rule `{other}`")),
        }
    }
}

/// One-hot distance buckets `1..=cap` followed by an overflow bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureLayout {
    pub distance_cap: usize,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        Self { distance_cap: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DistanceBucket {
    Exact(usize),
    Overflow,
}

impl fmt::Display for DistanceBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceBucket::Exact(d) => write!(f, "{d}"),
            DistanceBucket::Overflow => f.write_str("overflow"),
        }
    }
}

impl FeatureLayout {
    pub fn buckets(&self) -> usize {
        self.distance_cap + 1
    }

    pub fn dim(&self) -> usize {
        2 * self.buckets() + 1
    }

    /// Bucket for a distance; `None` (undefined distance) lands in overflow.
    pub fn bucket(&self, distance: Option<usize>) -> DistanceBucket {
        match distance {
            Some(d) if (1..=self.distance_cap).contains(&d) => DistanceBucket::Exact(d),
            _ => DistanceBucket::Overflow,
        }
    }

    fn bucket_offset(&self, bucket: DistanceBucket) -> usize {
        match bucket {
            DistanceBucket::Exact(d) => d - 1,
            DistanceBucket::Overflow => self.distance_cap,
        }
    }

    pub fn all_buckets(&self) -> Vec<DistanceBucket> {
        (1..=self.distance_cap)
            .map(DistanceBucket::Exact)
            .chain(core::iter::once(DistanceBucket::Overflow))
            .collect()
    }
}

/// Encoded features of one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    pub reply_bucket: DistanceBucket,
    pub root_bucket: DistanceBucket,
    /// `log(1 + Δseconds)` divided by the corpus maximum, in `[0, 1]`.
    pub time: f64,
}

impl FeatureVector {
    pub fn to_dense(&self, layout: &FeatureLayout) -> Vec<f64> {
        let mut v = alloc::vec![0.0; layout.dim()];
        v[layout.bucket_offset(self.reply_bucket)] = 1.0;
        v[layout.buckets() + layout.bucket_offset(self.root_bucket)] = 1.0;
        v[2 * layout.buckets()] = self.time;
        v
    }
}

/// Scale for the time feature: the largest `log(1 + Δ)` seen in training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeScale {
    pub max_log_delta: f64,
}

impl TimeScale {
    pub fn feature(&self, delta: u64) -> f64 {
        if self.max_log_delta <= 0.0 {
            return 0.0;
        }
        (libm::log1p(delta as f64) / self.max_log_delta).clamp(0.0, 1.0)
    }
}

/// A candidate (author's post, earlier foreign post) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairExample {
    /// The author's post.
    pub v_i: NodeIndex,
    /// The earlier post by someone else.
    pub v_j: NodeIndex,
    pub reply_distance: Option<usize>,
    /// Root distance of `v_j`.
    pub root_distance: usize,
    pub time_delta: u64,
    pub label: bool,
}

impl PairExample {
    pub fn features(&self, layout: &FeatureLayout, scale: &TimeScale) -> FeatureVector {
        FeatureVector {
            reply_bucket: layout.bucket(self.reply_distance),
            root_bucket: layout.bucket(Some(self.root_distance)),
            time: scale.feature(self.time_delta),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairOptions {
    pub positives: PositiveRule,
    pub path_mode: PathMode,
}

/// Every pair `(v_i, v_j)` with `v_j` strictly earlier than `v_i` and
/// written by a different author.
pub fn build_pairs(tree: &ConversationTree, options: &PairOptions) -> Vec<PairExample> {
    let mut out = Vec::new();
    for v_i in 1..tree.len() {
        let author = tree.author(v_i);
        let t_i = tree.timestamp(v_i);
        for v_j in (0..tree.len()).filter(|&j| tree.timestamp(j) < t_i && tree.author(j) != author) {
            let label = match options.positives {
                PositiveRule::Parent => tree.parent(v_i) == Some(v_j),
                PositiveRule::Ancestors => tree.is_ancestor_or_self(v_j, v_i),
            };
            out.push(PairExample {
                v_i,
                v_j,
                reply_distance: options.path_mode.distance(tree, v_i, v_j),
                root_distance: tree.root_distance_at(v_j),
                time_delta: t_i - tree.timestamp(v_j),
                label,
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(pairs: impl IntoIterator<Item = (f64, bool)>, threshold: f64) -> Self {
        let mut m = Self::default();
        for (p, label) in pairs {
            match (p >= threshold, label) {
                (true, true) => m.true_positives += 1,
                (true, false) => m.false_positives += 1,
                (false, false) => m.true_negatives += 1,
                (false, true) => m.false_negatives += 1,
            }
        }
        m
    }

    /// 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(
            self.true_positives + self.true_negatives,
            self.true_positives + self.true_negatives + self.false_positives + self.false_negatives,
        )
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub const PRECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct RbConfig {
    pub hidden_units: usize,
    pub hidden_activation: Activation,
    pub train: TrainConfig,
    pub layout: FeatureLayout,
    pub pairs: PairOptions,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self {
            hidden_units: 16,
            hidden_activation: Activation::Relu,
            train: TrainConfig {
                learning_rate: 0.05,
                epochs: 50,
                batch_size: 32,
                seed: 0,
            },
            layout: FeatureLayout::default(),
            pairs: PairOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RbError {
    #[error("training pairs are all labelled {0}")]
    DegenerateLabels(u8),
    #[error("corpus yields no training pairs")]
    NoPairs,
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("model expects {expected} features, layout gives {found}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// A response-based classifier and the feature encoding it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct RbModel {
    pub params: ModelParams,
    pub layout: FeatureLayout,
    pub time_scale: TimeScale,
    pub trained: bool,
}

impl RbModel {
    /// A trained model from persisted parts.
    pub fn from_parts(params: ModelParams, layout: FeatureLayout, time_scale: TimeScale) -> Result<Self, RbError> {
        if params.input_dim() != layout.dim() {
            return Err(RbError::LayoutMismatch {
                expected: params.input_dim(),
                found: layout.dim(),
            });
        }
        Ok(Self {
            params,
            layout,
            time_scale,
            trained: true,
        })
    }

    /// An all-zero network that has not seen any data.
    pub fn untrained(layout: FeatureLayout, hidden_units: usize) -> Self {
        Self {
            params: ModelParams::zeros(layout.dim(), &[hidden_units], Activation::Relu, 1, Activation::Sigmoid),
            layout,
            time_scale: TimeScale { max_log_delta: 1.0 },
            trained: false,
        }
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<f64, RbError> {
        Ok(self.params.forward(&features.to_dense(&self.layout))?[0])
    }

    pub fn predict_pair(&self, pair: &PairExample) -> Result<f64, RbError> {
        self.predict(&pair.features(&self.layout, &self.time_scale))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbDiagnostics {
    pub pairs: usize,
    pub positives: usize,
    pub confusion: ConfusionMatrix,
}

impl RbDiagnostics {
    pub fn precision(&self) -> f64 {
        self.confusion.precision()
    }

    pub fn recall(&self) -> f64 {
        self.confusion.recall()
    }
}

pub fn time_scale_for(corpus: &Corpus, options: &PairOptions) -> TimeScale {
    let max_log_delta = corpus
        .trees()
        .iter()
        .flat_map(|t| build_pairs(t, options))
        .map(|p| libm::log1p(p.time_delta as f64))
        .fold(0.0, f64::max);
    TimeScale { max_log_delta }
}

/// Trains the response-based classifier on every pair in the corpus and
/// reports its training precision at threshold 0.5.
pub fn train_rb(corpus: &Corpus, config: &RbConfig) -> Result<(RbModel, RbDiagnostics), RbError> {
    let scale = time_scale_for(corpus, &config.pairs);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for tree in corpus.trees() {
        for pair in build_pairs(tree, &config.pairs) {
            data.push(Example {
                x: pair.features(&config.layout, &scale).to_dense(&config.layout),
                y: alloc::vec![if pair.label { 1.0 } else { 0.0 }],
            });
            labels.push(pair.label);
        }
    }
    if data.is_empty() {
        return Err(RbError::NoPairs);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(RbError::DegenerateLabels(0));
    }
    if positives == labels.len() {
        return Err(RbError::DegenerateLabels(1));
    }

    let init = ModelParams::init(
        config.layout.dim(),
        &[config.hidden_units],
        config.hidden_activation,
        1,
        Activation::Sigmoid,
        config.train.seed,
    )?;
    let params = nn::train(&init, &data, Loss::Bce, &config.train)?;
    let model = RbModel::from_parts(params, config.layout, scale)?;
    let diagnostics = evaluate_rb(corpus, &model, &config.pairs)?;
    Ok((model, diagnostics))
}

/// Confusion counts of a model over every pair in a corpus.
pub fn evaluate_rb(corpus: &Corpus, model: &RbModel, options: &PairOptions) -> Result<RbDiagnostics, RbError> {
    let mut predictions = Vec::new();
    for tree in corpus.trees() {
        for pair in build_pairs(tree, options) {
            predictions.push((model.predict_pair(&pair)?, pair.label));
        }
    }
    if predictions.is_empty() {
        return Err(RbError::NoPairs);
    }
    Ok(RbDiagnostics {
        pairs: predictions.len(),
        positives: predictions.iter().filter(|p| p.1).count(),
        confusion: ConfusionMatrix::from_predictions(predictions, PRECISION_THRESHOLD),
    })
}

/// Mean predicted probability over each author's candidate pairs; authors
/// without pairs get no row.
pub fn rb_tree_scores(tree: &ConversationTree, model: &RbModel, options: &PairOptions) -> Result<Vec<ScoreRow>, RbError> {
    if !model.trained {
        return Err(RbError::UntrainedModel);
    }
    let authors = tree.authors();
    let mut sums = alloc::vec![(0.0f64, 0usize); authors.len()];
    for pair in build_pairs(tree, options) {
        let slot = author_slot(&authors, tree.author(pair.v_i));
        sums[slot].0 += model.predict_pair(&pair)?;
        sums[slot].1 += 1;
    }
    Ok(authors
        .into_iter()
        .zip(sums)
        .filter(|(_, (_, n))| *n > 0)
        .map(|(author, (s, n))| ScoreRow {
            platform: tree.platform(),
            conversation_id: tree.conversation_id().into(),
            author: author.clone(),
            score: Some(s / n as f64),
        })
        .collect())
}

fn author_slot(authors: &[&AuthorId], author: &AuthorId) -> usize {
    authors.iter().position(|a| *a == author).expect("author participates")
}

pub fn rb_scores(corpus: &Corpus, model: &RbModel, options: &PairOptions) -> Result<ScoreTable, RbError> {
    let mut table = ScoreTable::new(Metric::Rb);
    for tree in corpus.trees() {
        table.rows.extend(rb_tree_scores(tree, model, options)?);
    }
    Ok(table)
}

/// Predicted probability for a probe activating one reply-distance bucket,
/// with the root bucket at 2 and the time feature at 0.5.
pub fn extract_distance_embedding(model: &RbModel) -> Result<Vec<(DistanceBucket, f64)>, RbError> {
    let layout = model.layout;
    let root_bucket = layout.bucket(Some(2));
    layout
        .all_buckets()
        .into_iter()
        .map(|b| {
            let probe = FeatureVector {
                reply_bucket: b,
                root_bucket,
                time: 0.5,
            };
            Ok((b, model.predict(&probe)?))
        })
        .collect()
}
