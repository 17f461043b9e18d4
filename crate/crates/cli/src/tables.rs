//! Score tables and audit exports as tab-separated text.

use cccp_core::pb::{build_contexts, PbTarget};
use cccp_core::rb::{build_pairs, PairOptions};
use cccp_core::{AuthorId, ConversationTree, Metric, Platform, ScoreRow, ScoreTable};

pub const SCORE_HEADER: &str = "platform\tconversation_id\tauthor\tscore";

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("missing header `{SCORE_HEADER}`")]
    MissingHeader,
}

/// Six decimals, or `NA` for an undefined value.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".into(),
    }
}

pub fn score_table_to_tsv(table: &ScoreTable) -> String {
    let mut out = String::from(SCORE_HEADER);
    out.push('\n');
    for r in &table.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.platform.as_str(),
            r.conversation_id,
            r.author.as_str(),
            fmt_opt(r.score)
        ));
    }
    out
}

pub fn parse_score_table(metric: Metric, text: &str) -> Result<ScoreTable, TableError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SCORE_HEADER => {}
        _ => return Err(TableError::MissingHeader),
    }
    let mut table = ScoreTable::new(metric);
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| TableError::Malformed { line: i + 1, reason };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", f.len())));
        }
        let platform: Platform = f[0].parse().map_err(|e: cccp_core::tree::UnknownPlatform| bad(e.to_string()))?;
        let author = AuthorId::new(f[2]).map_err(|e| bad(e.to_string()))?;
        let score = match f[3] {
            "NA" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(format!("bad score `{s}`")))?),
        };
        table.rows.push(ScoreRow {
            platform,
            conversation_id: f[1].into(),
            author,
            score,
        });
    }
    Ok(table)
}

pub const PAIRS_HEADER: &str = "conversation_id\tauthor\tv_i\tv_j\treply_distance\troot_distance\ttime_delta\tlabel";

/// Candidate pairs of one conversation, one line each.
pub fn pairs_tsv(tree: &ConversationTree, options: &PairOptions) -> String {
    let mut out = String::new();
    for p in build_pairs(tree, options) {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            tree.conversation_id(),
            tree.author(p.v_i).as_str(),
            tree.post(p.v_i).id,
            tree.post(p.v_j).id,
            p.reply_distance.map_or_else(|| "NA".to_string(), |d| d.to_string()),
            p.root_distance,
            p.time_delta,
            u8::from(p.label)
        ));
    }
    out
}

pub const CONTEXTS_HEADER: &str = "conversation_id\tk\treply_target\tslot\tauthor\tpost_count\tdistance\tlog_time_since\tprefix_size\tdepth\tleaves\ttarget";

/// Prediction contexts of one conversation, one line per occupied slot.
pub fn contexts_tsv(tree: &ConversationTree, max_slots: usize) -> String {
    let mut out = String::new();
    for c in build_contexts(tree, max_slots) {
        let target = match c.target {
            PbTarget::Slot(s) => s.to_string(),
            PbTarget::New => "NEW".into(),
        };
        for (s, (author, f)) in c.slots.iter().zip(&c.slot_features).enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{}\t{}\t{}\n",
                c.conversation_id,
                c.k,
                tree.post(c.reply_target).id,
                s,
                author.as_str(),
                f.post_count,
                f.distance,
                f.log_time_since,
                c.global.prefix_size,
                c.global.depth,
                c.global.leaf_count,
                target
            ));
        }
    }
    out
}
