//! Prediction-based metric.
//!
//! Each chronological prefix of a conversation becomes a context in which
//! the author of the next post is hidden (its position in the tree is not).
//! A softmax classifier chooses among the participants seen so far, held in
//! slots by order of first appearance, plus a NEW class for first-time
//! authors. An author's score is the mean probability the model gives their
//! slot, divided by the conversation's repetition probability.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::nn::{self, Activation, Example, Loss, ModelParams, NnError, TrainConfig};
use crate::score::{Metric, ScoreRow, ScoreTable};
use crate::tree::{AuthorId, ConversationTree, NodeIndex};

/// Features per slot in the dense encoding.
pub const SLOT_FEATURES: usize = 4;
/// Global features in the dense encoding.
pub const GLOBAL_FEATURES: usize = 3;

/// Elapsed times are scaled by `log(1 + one week)`.
const LOG_TIME_NORM: f64 = 13.312_654_757_285_246;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PbTarget {
    Slot(usize),
    New,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotFeatures {
    /// Posts by the slot author within the prefix.
    pub post_count: usize,
    /// Path distance from the author's latest post to the post being replied to.
    pub distance: usize,
    /// `log(1 + Δseconds)` since the author's latest post.
    pub log_time_since: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GlobalFeatures {
    pub prefix_size: usize,
    /// Largest root distance within the prefix.
    pub depth: usize,
    pub leaf_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionContext {
    pub conversation_id: String,
    /// Number of posts visible; the context predicts the author of post `k`.
    pub k: usize,
    /// The post the hidden author replied to.
    pub reply_target: NodeIndex,
    pub slots: Vec<AuthorId>,
    pub slot_features: Vec<SlotFeatures>,
    pub global: GlobalFeatures,
    pub target: PbTarget,
}

impl PredictionContext {
    pub fn input_dim(max_slots: usize) -> usize {
        max_slots * SLOT_FEATURES + GLOBAL_FEATURES
    }

    pub fn to_dense(&self, max_slots: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; Self::input_dim(max_slots)];
        let k = self.k as f64;
        for (s, f) in self.slot_features.iter().enumerate().take(max_slots) {
            let base = s * SLOT_FEATURES;
            v[base] = 1.0;
            v[base + 1] = f.post_count as f64 / k;
            v[base + 2] = 1.0 / (1.0 + f.distance as f64);
            v[base + 3] = (f.log_time_since / LOG_TIME_NORM).min(1.0);
        }
        let g = max_slots * SLOT_FEATURES;
        v[g] = self.global.prefix_size as f64 / crate::tree::MAX_TREE_SIZE as f64;
        v[g + 1] = self.global.depth as f64 / crate::tree::MAX_TREE_SIZE as f64;
        v[g + 2] = self.global.leaf_count as f64 / k;
        v
    }

    pub fn class_index(target: PbTarget, max_slots: usize) -> usize {
        match target {
            PbTarget::Slot(s) => s,
            PbTarget::New => max_slots,
        }
    }
}

/// One context per prefix length `1..n`; authors past `max_slots` in order
/// of first appearance are folded into NEW.
pub fn build_contexts(tree: &ConversationTree, max_slots: usize) -> Vec<PredictionContext> {
    let n = tree.len();
    let mut out = Vec::with_capacity(n - 1);
    let mut slots: Vec<AuthorId> = Vec::new();
    // per slot: (post count, latest post)
    let mut state: Vec<(usize, NodeIndex)> = Vec::new();
    let mut depth = 0usize;
    let mut has_child = alloc::vec![false; n];
    let mut leaves = 0usize;

    for k in 1..n {
        // Fold post k-1 into the prefix.
        let last = k - 1;
        let author = tree.author(last);
        match slots.iter().position(|a| a == author) {
            Some(s) => state[s] = (state[s].0 + 1, last),
            None if slots.len() < max_slots => {
                slots.push(author.clone());
                state.push((1, last));
            }
            None => {}
        }
        depth = depth.max(tree.root_distance_at(last));
        leaves += 1;
        if let Some(p) = tree.parent(last) {
            if !has_child[p] {
                has_child[p] = true;
                leaves -= 1;
            }
        }

        let reply_target = tree.parent(k).expect("non-root post has a parent");
        let t_k = tree.timestamp(k);
        let slot_features = state
            .iter()
            .map(|&(count, latest)| SlotFeatures {
                post_count: count,
                distance: tree.path_distance_at(latest, reply_target),
                log_time_since: libm::log1p((t_k - tree.timestamp(latest)) as f64),
            })
            .collect();
        let target = match slots.iter().position(|a| a == tree.author(k)) {
            Some(s) => PbTarget::Slot(s),
            None => PbTarget::New,
        };
        out.push(PredictionContext {
            conversation_id: tree.conversation_id().into(),
            k,
            reply_target,
            slots: slots.clone(),
            slot_features,
            global: GlobalFeatures {
                prefix_size: k,
                depth,
                leaf_count: leaves,
            },
            target,
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionProbability {
    pub conversation_id: String,
    pub value: f64,
}

/// Share of posts after the first whose author had already written.
/// Validated trees have at least two posts, so this is always defined.
pub fn repetition_probability(tree: &ConversationTree) -> RepetitionProbability {
    let mut seen: Vec<&AuthorId> = Vec::new();
    let mut repeats = 0usize;
    for p in tree.posts() {
        if seen.contains(&&p.author) {
            repeats += 1;
        } else {
            seen.push(&p.author);
        }
    }
    RepetitionProbability {
        conversation_id: tree.conversation_id().into(),
        value: repeats as f64 / (tree.len() - 1) as f64,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbConfig {
    pub max_slots: usize,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub train: TrainConfig,
}

impl Default for PbConfig {
    fn default() -> Self {
        Self {
            max_slots: 20,
            hidden: alloc::vec![64, 64, 32, 32, 16],
            hidden_activation: Activation::Relu,
            train: TrainConfig {
                learning_rate: 0.01,
                epochs: 100,
                batch_size: 32,
                seed: 0,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PbError {
    #[error("corpus yields no prediction contexts")]
    EmptyContexts,
    #[error("max_slots must be at least 1")]
    NoSlots,
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("model expects {expected} inputs, {found} for the configured slots")]
    SlotMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbModel {
    pub params: ModelParams,
    pub max_slots: usize,
    pub trained: bool,
}

impl PbModel {
    pub fn from_parts(params: ModelParams, max_slots: usize) -> Result<Self, PbError> {
        let found = PredictionContext::input_dim(max_slots);
        if params.input_dim() != found || params.output_dim() != max_slots + 1 {
            return Err(PbError::SlotMismatch {
                expected: params.input_dim(),
                found,
            });
        }
        Ok(Self {
            params,
            max_slots,
            trained: true,
        })
    }

    /// Class distribution over `[slot 0, .., slot S-1, NEW]`, restricted to
    /// occupied slots and NEW.
    pub fn predict(&self, ctx: &PredictionContext) -> Result<Vec<f64>, PbError> {
        let mut p = self.params.forward(&ctx.to_dense(self.max_slots))?;
        let filled = ctx.slots.len().min(self.max_slots);
        p[filled..self.max_slots].iter_mut().for_each(|v| *v = 0.0);
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            p.iter_mut().for_each(|v| *v /= total);
        } else {
            p.iter_mut().for_each(|v| *v = 0.0);
            p[self.max_slots] = 1.0;
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbDiagnostics {
    pub contexts: usize,
    /// Share of contexts whose most likely class is the true one.
    pub precision: f64,
    /// Share of contexts whose most likely class is NEW.
    pub new_fraction: f64,
    /// Share of contexts whose true class is NEW.
    pub new_target_fraction: f64,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate_pb(corpus: &Corpus, model: &PbModel) -> Result<PbDiagnostics, PbError> {
    let (mut contexts, mut hits, mut new_pred, mut new_true) = (0usize, 0usize, 0usize, 0usize);
    for tree in corpus.trees() {
        for ctx in build_contexts(tree, model.max_slots) {
            let best = argmax(&model.predict(&ctx)?);
            let truth = PredictionContext::class_index(ctx.target, model.max_slots);
            contexts += 1;
            hits += usize::from(best == truth);
            new_pred += usize::from(best == model.max_slots);
            new_true += usize::from(ctx.target == PbTarget::New);
        }
    }
    if contexts == 0 {
        return Err(PbError::EmptyContexts);
    }
    let c = contexts as f64;
    Ok(PbDiagnostics {
        contexts,
        precision: hits as f64 / c,
        new_fraction: new_pred as f64 / c,
        new_target_fraction: new_true as f64 / c,
    })
}

/// Trains the next-author classifier with categorical cross-entropy.
pub fn train_pb(corpus: &Corpus, config: &PbConfig) -> Result<(PbModel, PbDiagnostics), PbError> {
    if config.max_slots == 0 {
        return Err(PbError::NoSlots);
    }
    let classes = config.max_slots + 1;
    let data: Vec<Example> = corpus
        .trees()
        .iter()
        .flat_map(|t| build_contexts(t, config.max_slots))
        .map(|ctx| {
            let mut y = alloc::vec![0.0; classes];
            y[PredictionContext::class_index(ctx.target, config.max_slots)] = 1.0;
            Example {
                x: ctx.to_dense(config.max_slots),
                y,
            }
        })
        .collect();
    if data.is_empty() {
        return Err(PbError::EmptyContexts);
    }
    let init = ModelParams::init(
        PredictionContext::input_dim(config.max_slots),
        &config.hidden,
        config.hidden_activation,
        classes,
        Activation::Softmax,
        config.train.seed,
    )?;
    let params = nn::train(&init, &data, Loss::Cce, &config.train)?;
    let model = PbModel::from_parts(params, config.max_slots)?;
    let diagnostics = evaluate_pb(corpus, &model)?;
    Ok((model, diagnostics))
}

/// Raw and normalized prediction scores of one conversation.
#[derive(Clone, Debug, PartialEq)]
pub struct PbTreeScores {
    pub raw: Vec<ScoreRow>,
    /// Raw score over repetition probability; `None` when that is 0.
    pub normalized: Vec<ScoreRow>,
    pub repetition: f64,
}

pub fn pb_tree_scores(tree: &ConversationTree, model: &PbModel) -> Result<PbTreeScores, PbError> {
    if !model.trained {
        return Err(PbError::UntrainedModel);
    }
    let authors = tree.authors();
    let mut sums = alloc::vec![0.0f64; authors.len()];
    let contexts = build_contexts(tree, model.max_slots);
    for ctx in &contexts {
        let p = model.predict(ctx)?;
        for (s, slot_author) in ctx.slots.iter().enumerate() {
            let a = authors.iter().position(|a| *a == slot_author).expect("slot author participates");
            sums[a] += p[s];
        }
    }
    let repetition = repetition_probability(tree).value;
    let row = |author: &AuthorId, score| ScoreRow {
        platform: tree.platform(),
        conversation_id: tree.conversation_id().into(),
        author: author.clone(),
        score,
    };
    let n = contexts.len() as f64;
    let raw: Vec<ScoreRow> = authors.iter().zip(&sums).map(|(a, s)| row(a, Some(s / n))).collect();
    let normalized = raw
        .iter()
        .map(|r| {
            let v = r.score.expect("raw scores are defined");
            row(&r.author, (repetition > 0.0).then(|| v / repetition))
        })
        .collect();
    Ok(PbTreeScores {
        raw,
        normalized,
        repetition,
    })
}

/// Normalized and raw score tables for the whole corpus.
pub fn pb_scores(corpus: &Corpus, model: &PbModel) -> Result<(ScoreTable, ScoreTable), PbError> {
    let mut normalized = ScoreTable::new(Metric::Pb);
    let mut raw = ScoreTable::new(Metric::PbRaw);
    for tree in corpus.trees() {
        let s = pb_tree_scores(tree, model)?;
        normalized.rows.extend(s.normalized);
        raw.rows.extend(s.raw);
    }
    Ok((normalized, raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::test_util::tree;

    #[test]
    fn two_post_tree_has_one_new_context() {
        let t = tree(&[("r", None, "A"), ("x", Some("r"), "B")]);
        let ctx = build_contexts(&t, 20);
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx[0].target, PbTarget::New);
        assert_eq!(ctx[0].slot_features[0].distance, 0);
    }

    #[test]
    fn returning_author_targets_their_slot() {
        let t = tree(&[("r", None, "A"), ("x", Some("r"), "B"), ("y", Some("x"), "A")]);
        let ctx = build_contexts(&t, 20);
        assert_eq!(ctx.iter().map(|c| c.target).collect::<Vec<_>>(), [PbTarget::New, PbTarget::Slot(0)]);
        let c = &ctx[1];
        assert_eq!(c.slots.len(), 2);
        // y replies to x: A's latest post r is one step away, B wrote x.
        assert_eq!(c.slot_features[0].distance, 1);
        assert_eq!(c.slot_features[1].distance, 0);
        assert_eq!(c.global, GlobalFeatures { prefix_size: 2, depth: 2, leaf_count: 1 });
    }

    #[test]
    fn authors_past_capacity_fold_into_new() {
        // 25 distinct authors replying to the root, then author 22 again.
        let names: Vec<String> = (0..26).map(|i| alloc::format!("p{i}")).collect();
        let authors: Vec<String> = (0..25).map(|i| alloc::format!("a{i}")).chain([String::from("a22")]).collect();
        let nodes: Vec<(&str, Option<&str>, &str)> = (0..26)
            .map(|i| (names[i].as_str(), if i == 0 { None } else { Some("p0") }, authors[i].as_str()))
            .collect();
        let t = tree(&nodes);
        let ctx = build_contexts(&t, 20);
        assert_eq!(ctx.len(), 25);
        assert!(ctx.iter().all(|c| c.slots.len() <= 20));
        assert_eq!(ctx[24].target, PbTarget::New);
    }

    #[test]
    fn repetition_examples() {
        let distinct = tree(&[("r", None, "A"), ("x", Some("r"), "B"), ("y", Some("r"), "C")]);
        assert_eq!(repetition_probability(&distinct).value, 0.0);
        let solo = tree(&[("r", None, "A"), ("x", Some("r"), "A"), ("y", Some("x"), "A")]);
        assert_eq!(repetition_probability(&solo).value, 1.0);
        let mixed = tree(&[("r", None, "A"), ("x", Some("r"), "B"), ("y", Some("x"), "A"), ("z", Some("y"), "C")]);
        assert_eq!(repetition_probability(&mixed).value, 1.0 / 3.0);
    }

    #[test]
    fn dense_encoding_layout() {
        let t = tree(&[("r", None, "A"), ("x", Some("r"), "B"), ("y", Some("x"), "A")]);
        let c = &build_contexts(&t, 3)[1];
        let v = c.to_dense(3);
        assert_eq!(v.len(), 15);
        assert_eq!(&v[0..3], &[1.0, 0.5, 0.5]);
        assert_eq!(&v[4..7], &[1.0, 0.5, 1.0]);
        assert_eq!(v[8], 0.0);
    }

    #[test]
    fn untrained_model_cannot_score() {
        let t = tree(&[("r", None, "A"), ("x", Some("r"), "B")]);
        let params = ModelParams::zeros(PredictionContext::input_dim(2), &[], Activation::Relu, 3, Activation::Softmax);
        let model = PbModel { params, max_slots: 2, trained: false };
        assert_eq!(pb_tree_scores(&t, &model), Err(PbError::UntrainedModel));
    }

    #[test]
    fn prediction_mass_stays_on_occupied_slots() {
        let t = tree(&[("r", None, "A"), ("x", Some("r"), "B"), ("y", Some("x"), "A")]);
        let params = ModelParams::zeros(PredictionContext::input_dim(4), &[], Activation::Relu, 5, Activation::Softmax);
        let model = PbModel::from_parts(params, 4).unwrap();
        let ctx = build_contexts(&t, 4);
        let p = model.predict(&ctx[0]).unwrap();
        assert_eq!(p, [0.5, 0.0, 0.0, 0.0, 0.5]);
        let s = pb_tree_scores(&t, &model).unwrap();
        // A: (1/2 + 1/3) / 2, B: (0 + 1/3) / 2
        assert!((s.raw[0].score.unwrap() - 5.0 / 12.0).abs() < 1e-15);
        assert!((s.raw[1].score.unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.repetition, 0.5);
        assert!((s.normalized[0].score.unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }
}
