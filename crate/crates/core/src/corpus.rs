use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::tree::{ConversationTree, Platform};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("conversation id `{0}` appears more than once")]
    DuplicateConversation(String),
}

/// A set of validated conversation trees with unique conversation ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    trees: Vec<ConversationTree>,
    source: String,
}

impl Corpus {
    pub fn new(trees: Vec<ConversationTree>, source: impl Into<String>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for t in &trees {
            if !seen.insert(t.conversation_id()) {
                return Err(CorpusError::DuplicateConversation(t.conversation_id().into()));
            }
        }
        Ok(Self {
            trees,
            source: source.into(),
        })
    }

    pub fn trees(&self) -> &[ConversationTree] {
        &self.trees
    }

    pub fn into_trees(self) -> Vec<ConversationTree> {
        self.trees
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn post_count(&self) -> usize {
        self.trees.iter().map(ConversationTree::len).sum()
    }

    /// Platforms present, in their natural order.
    pub fn platforms(&self) -> Vec<Platform> {
        let set: BTreeSet<Platform> = self.trees.iter().map(ConversationTree::platform).collect();
        set.into_iter().collect()
    }

    /// Concatenates two corpora; conversation ids must stay unique.
    pub fn merge(self, other: Corpus) -> Result<Corpus, CorpusError> {
        let source = if other.source.is_empty() {
            self.source
        } else {
            alloc::format!("{}+{}", self.source, other.source)
        };
        let mut trees = self.trees;
        trees.extend(other.trees);
        Corpus::new(trees, source)
    }
}
