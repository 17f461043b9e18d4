//! Author participation metrics over conversation reply trees.
//!
//! A conversation is a reply tree of at most 100 posts. Four measures
//! estimate how consistently and centrally each author took part:
//!
//! * [`baseline`]: rule-based seen-probabilities from reply and root distance decay.
//! * [`rb`]: a classifier trained on reply facts, averaged per author.
//! * [`pb`]: next-author prediction probabilities, normalized by repetition.
//! * [`centrality`]: the share of root-to-leaf flows an author sits inside.
//!
//! [`report`] aggregates score tables per platform and correlates the
//! measures. The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baseline;
pub mod centrality;
pub mod corpus;
pub mod nn;
pub mod pb;
pub mod rb;
pub mod report;
pub mod score;
pub mod synth;
pub mod tree;

pub use corpus::{Corpus, CorpusError};
pub use score::{Metric, ScoreRow, ScoreTable};
pub use tree::{validate_tree, AuthorId, ConversationTree, Flow, NodeIndex, PathMode, Platform, Post, TreeError};
