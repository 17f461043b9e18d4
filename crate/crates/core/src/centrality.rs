//! Flow centrality: the share of conversation flows in which an author
//! holds a post.

use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::corpus::Corpus;
use crate::score::{Metric, ScoreRow, ScoreTable};
use crate::tree::{AuthorId, ConversationTree};

/// Whether a flow's first and last posts count towards centrality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EndpointMode {
    #[default]
    Exclude,
    Include,
}

impl EndpointMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EndpointMode::Exclude => "exclude",
            EndpointMode::Include => "include",
        }
    }
}

impl FromStr for EndpointMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exclude" => Ok(EndpointMode::Exclude),
            "include" => Ok(EndpointMode::Include),
            other => Err(alloc::format!("unknown endpoint mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuthorCentrality {
    pub conversation_id: String,
    pub author: AuthorId,
    pub value: f64,
}

/// Centrality of every participating author, in order of first appearance.
pub fn flow_centrality(tree: &ConversationTree, mode: EndpointMode) -> Vec<AuthorCentrality> {
    let flows = tree.flows();
    let authors = tree.authors();
    let mut hits = alloc::vec![0usize; authors.len()];
    let mut present = alloc::vec![false; authors.len()];
    for flow in &flows {
        present.iter_mut().for_each(|p| *p = false);
        let counted = match mode {
            EndpointMode::Exclude => flow.interior(),
            EndpointMode::Include => flow.nodes(),
        };
        for &ix in counted {
            let slot = authors
                .iter()
                .position(|a| *a == tree.author(ix))
                .expect("author of a tree post participates");
            present[slot] = true;
        }
        for (h, &p) in hits.iter_mut().zip(&present) {
            *h += usize::from(p);
        }
    }
    authors
        .into_iter()
        .zip(hits)
        .map(|(author, h)| AuthorCentrality {
            conversation_id: tree.conversation_id().into(),
            author: author.clone(),
            value: h as f64 / flows.len() as f64,
        })
        .collect()
}

pub fn centrality_tree_scores(tree: &ConversationTree, mode: EndpointMode) -> Vec<ScoreRow> {
    flow_centrality(tree, mode)
        .into_iter()
        .map(|c| ScoreRow {
            platform: tree.platform(),
            conversation_id: c.conversation_id,
            author: c.author,
            score: Some(c.value),
        })
        .collect()
}

pub fn centrality_scores(corpus: &Corpus, mode: EndpointMode) -> ScoreTable {
    ScoreTable {
        metric: Metric::Centrality,
        rows: corpus
            .trees()
            .iter()
            .flat_map(|t| centrality_tree_scores(t, mode))
            .collect(),
    }
}
