//! Tab-separated corpus files.
//!
//! One post per line: `id, parent_id, author, timestamp, conversation_id,
//! platform`. An empty `parent_id` marks the root. A first line whose first
//! field is `id` is a header and is skipped.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use cccp_core::{validate_tree, AuthorId, Corpus, CorpusError, Platform, Post, TreeError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const HEADER: &str = "id\tparent_id\tauthor\ttimestamp\tconversation_id\tplatform";

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed record at {source_name}:{line}: {reason}")]
    MalformedRecord {
        source_name: String,
        line: usize,
        reason: String,
    },
    #[error("no valid conversation in {source_name} ({skipped} skipped)")]
    EmptyCorpus { source_name: String, skipped: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// A conversation left out of the corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct Skipped {
    pub conversation_id: String,
    pub platform: Platform,
    pub error: TreeError,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub records: usize,
    pub loaded: usize,
    pub skipped: Vec<Skipped>,
}

impl LoadReport {
    fn absorb(&mut self, other: LoadReport) {
        self.records += other.records;
        self.loaded += other.loaded;
        self.skipped.extend(other.skipped);
    }
}

fn parse_record(line: &str) -> Result<Post, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 tab-separated fields, found {}", fields.len()));
    }
    let [id, parent, author, ts, conv, platform] = [fields[0], fields[1], fields[2], fields[3], fields[4], fields[5]];
    if id.is_empty() {
        return Err("empty id".into());
    }
    if conv.is_empty() {
        return Err("empty conversation_id".into());
    }
    let author = AuthorId::new(author).map_err(|e| e.to_string())?;
    let timestamp = ts.parse::<u64>().map_err(|_| format!("timestamp `{ts}` is not a non-negative integer"))?;
    let platform = platform.parse::<Platform>().map_err(|e| e.to_string())?;
    Ok(Post {
        id: id.into(),
        parent_id: (!parent.is_empty()).then(|| parent.into()),
        author,
        timestamp,
        conversation_id: conv.into(),
        platform,
    })
}

/// Parses corpus text. Conversations that fail validation are skipped and
/// listed in the report; the corpus keeps first-appearance order.
pub fn parse_corpus(text: &str, source_name: &str) -> Result<(Corpus, LoadReport), LoadError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<Post>> = BTreeMap::new();
    let mut report = LoadReport::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() || (i == 0 && line.split('\t').next() == Some("id")) {
            continue;
        }
        let post = parse_record(line).map_err(|reason| LoadError::MalformedRecord {
            source_name: source_name.into(),
            line: i + 1,
            reason,
        })?;
        report.records += 1;
        let group = groups.entry(post.conversation_id.clone()).or_insert_with(|| {
            order.push(post.conversation_id.clone());
            Vec::new()
        });
        group.push(post);
    }

    let mut trees = Vec::new();
    for conv in order {
        let posts = groups.remove(&conv).expect("grouped above");
        let platform = posts[0].platform;
        match validate_tree(posts) {
            Ok(tree) => trees.push(tree),
            Err(error) => report.skipped.push(Skipped {
                conversation_id: conv,
                platform,
                error,
            }),
        }
    }
    if trees.is_empty() {
        return Err(LoadError::EmptyCorpus {
            source_name: source_name.into(),
            skipped: report.skipped.len(),
        });
    }
    report.loaded = trees.len();
    Ok((Corpus::new(trees, source_name)?, report))
}

pub fn load_corpus(path: &Path) -> Result<(Corpus, LoadReport), LoadError> {
    let text = fs::read_to_string(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            LoadError::FileNotFound(path.into())
        } else {
            LoadError::Io {
                path: path.into(),
                source,
            }
        }
    })?;
    parse_corpus(&text, &path.display().to_string())
}

/// Loads and merges several files into one corpus.
pub fn load_corpora(paths: &[PathBuf]) -> Result<(Corpus, LoadReport), LoadError> {
    let mut merged: Option<Corpus> = None;
    let mut report = LoadReport::default();
    for path in paths {
        let (corpus, r) = load_corpus(path)?;
        report.absorb(r);
        merged = Some(match merged {
            None => corpus,
            Some(m) => m.merge(corpus)?,
        });
    }
    let corpus = merged.ok_or_else(|| LoadError::EmptyCorpus {
        source_name: "no input".into(),
        skipped: 0,
    })?;
    Ok((corpus, report))
}

/// Corpus text in the input format, header included.
pub fn corpus_to_tsv(corpus: &Corpus) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for tree in corpus.trees() {
        for p in tree.posts() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                p.id,
                p.parent_id.as_deref().unwrap_or(""),
                p.author.as_str(),
                p.timestamp,
                p.conversation_id,
                p.platform.as_str()
            ));
        }
    }
    out
}

/// Keeps at most `cap` conversations per platform, chosen with a seeded
/// shuffle; kept conversations stay in corpus order.
pub fn cap_per_platform(corpus: Corpus, cap: usize, seed: u64) -> Result<Corpus, CorpusError> {
    let source = corpus.source().to_string();
    let trees = corpus.into_trees();
    let mut keep = vec![false; trees.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for platform in Platform::ALL {
        let mut idx: Vec<usize> = (0..trees.len()).filter(|&i| trees[i].platform() == platform).collect();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(cap) {
            keep[i] = true;
        }
    }
    let kept = trees.into_iter().zip(keep).filter(|(_, k)| *k).map(|(t, _)| t).collect();
    Corpus::new(kept, source)
}
