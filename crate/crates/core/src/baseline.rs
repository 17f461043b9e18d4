//! Rule-based seen-probability baseline.
//!
//! For an author and an earlier post `j`, two decay terms are combined:
//! a reply-distance term averaged over the author's later posts and a
//! root-distance term for `j`. The two are joined as a probabilistic union
//! of independent events.

use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::score::{Metric, ScoreRow, ScoreTable};
use crate::tree::{AuthorId, ConversationTree, NodeIndex, PathMode, TreeError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineParams {
    /// Decay base applied per reply-distance step.
    pub zeta_base: f64,
    /// Decay base applied per root-distance step.
    pub theta_base: f64,
    pub path_mode: PathMode,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            zeta_base: 0.5,
            theta_base: 0.25,
            path_mode: PathMode::Undirected,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeenProbability {
    pub author: AuthorId,
    pub node: NodeIndex,
    pub zeta: f64,
    pub theta: f64,
    pub combined: f64,
}

/// `a ∪ b` for independent events.
pub fn noisy_or(a: f64, b: f64) -> f64 {
    a + b - a * b
}

pub(crate) fn powu(base: f64, exp: usize) -> f64 {
    let (mut acc, mut b, mut e) = (1.0, base, exp);
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

pub fn zeta_at(tree: &ConversationTree, author: &AuthorId, node: NodeIndex, params: &BaselineParams) -> f64 {
    let t_node = tree.timestamp(node);
    let mut sum = 0.0;
    let mut count = 0usize;
    for ix in (0..tree.len()).filter(|&ix| ix != node && tree.author(ix) == author && tree.timestamp(ix) > t_node) {
        count += 1;
        if let Some(d) = params.path_mode.distance(tree, node, ix) {
            sum += powu(params.zeta_base, d - 1);
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

pub fn theta_at(tree: &ConversationTree, node: NodeIndex, params: &BaselineParams) -> f64 {
    powu(params.theta_base, tree.root_distance_at(node) - 1)
}

pub fn seen_at(tree: &ConversationTree, author: &AuthorId, node: NodeIndex, params: &BaselineParams) -> SeenProbability {
    let zeta = zeta_at(tree, author, node, params);
    let theta = theta_at(tree, node, params);
    let combined = if tree.author(node) == author {
        1.0
    } else {
        noisy_or(zeta, theta)
    };
    SeenProbability {
        author: author.clone(),
        node,
        zeta,
        theta,
        combined,
    }
}

/// Reply-distance decay term for `node_id`.
pub fn zeta(tree: &ConversationTree, author: &AuthorId, node_id: &str, params: &BaselineParams) -> Result<f64, TreeError> {
    Ok(zeta_at(tree, author, tree.index_of(node_id)?, params))
}

/// Root-distance decay term for `node_id`.
pub fn theta(tree: &ConversationTree, node_id: &str, params: &BaselineParams) -> Result<f64, TreeError> {
    Ok(theta_at(tree, tree.index_of(node_id)?, params))
}

pub fn seen_baseline(
    tree: &ConversationTree,
    author: &AuthorId,
    node_id: &str,
    params: &BaselineParams,
) -> Result<SeenProbability, TreeError> {
    Ok(seen_at(tree, author, tree.index_of(node_id)?, params))
}

/// One row per participating author: the mean seen-probability over the
/// foreign posts written before the author's last post, or 1.0 when there
/// are none.
pub fn baseline_tree_scores(tree: &ConversationTree, params: &BaselineParams) -> Vec<ScoreRow> {
    tree.authors()
        .into_iter()
        .map(|author| {
            let last = (0..tree.len())
                .rev()
                .find(|&ix| tree.author(ix) == author)
                .expect("participating author has a post");
            let t_last = tree.timestamp(last);
            let (mut sum, mut count) = (0.0, 0usize);
            for j in (0..tree.len()).filter(|&j| tree.author(j) != author && tree.timestamp(j) < t_last) {
                sum += seen_at(tree, author, j, params).combined;
                count += 1;
            }
            let score = if count == 0 { 1.0 } else { sum / count as f64 };
            ScoreRow {
                platform: tree.platform(),
                conversation_id: tree.conversation_id().into(),
                author: author.clone(),
                score: Some(score),
            }
        })
        .collect()
}

pub fn baseline_scores(corpus: &Corpus, params: &BaselineParams) -> ScoreTable {
    ScoreTable {
        metric: Metric::Baseline,
        rows: corpus
            .trees()
            .iter()
            .flat_map(|t| baseline_tree_scores(t, params))
            .collect(),
    }
}
