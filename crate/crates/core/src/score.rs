use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::tree::{AuthorId, Platform};

/// The measures a [`ScoreTable`] can hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Baseline,
    Rb,
    /// Prediction-based score divided by the conversation's repetition probability.
    Pb,
    /// Prediction-based score before normalization.
    PbRaw,
    Centrality,
}

impl Metric {
    /// The four measures compared across platforms.
    pub const REPORTED: [Metric; 4] = [Metric::Baseline, Metric::Rb, Metric::Pb, Metric::Centrality];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Baseline => "baseline",
            Metric::Rb => "rb",
            Metric::Pb => "pb",
            Metric::PbRaw => "pb_raw",
            Metric::Centrality => "centrality",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Metric::Baseline),
            "rb" => Ok(Metric::Rb),
            "pb" => Ok(Metric::Pb),
            "pb_raw" => Ok(Metric::PbRaw),
            "centrality" => Ok(Metric::Centrality),
            other => Err(alloc::format!("unknown metric `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub platform: Platform,
    pub conversation_id: String,
    pub author: AuthorId,
    /// `None` when the score is undefined for this conversation.
    pub score: Option<f64>,
}

/// Per (platform, conversation, author) values of one measure.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub metric: Metric,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(metric: Metric) -> Self {
        Self { metric, rows: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
