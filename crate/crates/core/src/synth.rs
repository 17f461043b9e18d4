//! Seeded synthetic conversation generator.
//!
//! Two dials shape each conversation: how often an existing participant
//! writes again (`revisit_rate`) and how often a reply goes straight to the
//! root (`root_attachment_bias`). Non-root replies pick uniformly among the
//! most recent posts, so low root bias yields deeper trees.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::tree::{validate_tree, AuthorId, Platform, Post, MAX_TREE_SIZE};

/// Non-root replies attach to one of this many most recent posts.
pub const RECENCY_WINDOW: usize = 5;

const BASE_TIMESTAMP: u64 = 1_600_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_conversations: usize,
    /// Inclusive bounds on posts per conversation, within `[2, 100]`.
    pub size_range: (usize, usize),
    pub root_attachment_bias: f64,
    pub revisit_rate: f64,
    pub seed: u64,
    pub platform: Platform,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_conversations: 100,
            size_range: (5, 40),
            root_attachment_bias: 0.3,
            revisit_rate: 0.4,
            seed: 0,
            platform: Platform::Synthetic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let (lo, hi) = self.size_range;
        if lo < 2 || hi > MAX_TREE_SIZE || lo > hi {
            return Err(SynthError::InvalidConfig(format!(
                "size range ({lo}, {hi}) must satisfy 2 <= min <= max <= {MAX_TREE_SIZE}"
            )));
        }
        for (name, p) in [
            ("root_attachment_bias", self.root_attachment_bias),
            ("revisit_rate", self.revisit_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::InvalidConfig(format!("{name} = {p} is not a probability")));
            }
        }
        if self.n_conversations == 0 {
            return Err(SynthError::InvalidConfig("n_conversations must be positive".into()));
        }
        Ok(())
    }
}

/// Generates a corpus; equal configs give equal corpora.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trees = Vec::with_capacity(config.n_conversations);
    for i in 0..config.n_conversations {
        let conversation_id = format!("{}-{:04}", config.platform, i);
        let posts = generate_conversation(config, &conversation_id, &mut rng);
        trees.push(validate_tree(posts).expect("generated conversations are valid trees"));
    }
    Ok(Corpus::new(trees, format!("synthetic(seed={})", config.seed)).expect("generated ids are unique"))
}

fn generate_conversation(config: &SynthConfig, conversation_id: &str, rng: &mut ChaCha8Rng) -> Vec<Post> {
    let (lo, hi) = config.size_range;
    let size = rng.gen_range(lo..=hi);
    let mut participants: Vec<AuthorId> = Vec::new();
    let fresh = |participants: &mut Vec<AuthorId>| {
        let a = AuthorId::new(format!("{conversation_id}-u{}", participants.len())).expect("non-empty");
        participants.push(a.clone());
        a
    };

    let mut posts: Vec<Post> = Vec::with_capacity(size);
    let mut ts = BASE_TIMESTAMP + rng.gen_range(0..10_000_000u64);
    let root_author = fresh(&mut participants);
    posts.push(Post {
        id: format!("{conversation_id}-p0"),
        parent_id: None,
        author: root_author,
        timestamp: ts,
        conversation_id: conversation_id.into(),
        platform: config.platform,
    });

    for k in 1..size {
        let author = if rng.gen_bool(config.revisit_rate) {
            participants[rng.gen_range(0..participants.len())].clone()
        } else {
            fresh(&mut participants)
        };
        let parent = if rng.gen_bool(config.root_attachment_bias) {
            0
        } else {
            rng.gen_range(k.saturating_sub(RECENCY_WINDOW)..k)
        };
        ts += rng.gen_range(1..=600u64);
        posts.push(Post {
            id: format!("{conversation_id}-p{k}"),
            parent_id: Some(posts[parent].id.clone()),
            author,
            timestamp: ts,
            conversation_id: conversation_id.into(),
            platform: config.platform,
        });
    }
    posts
}
