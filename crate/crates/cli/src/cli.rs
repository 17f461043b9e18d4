//! Command-line interface.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_metrics, FileConfig, Overrides, RunConfig};
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(name = "cccp", version, about = "Conversation participation metrics over reply trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and report skipped conversations.
    IngestCheck {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Also write the summary files here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the classifiers and save them under --out.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write pairs.tsv and contexts.tsv.
        #[arg(long)]
        export_features: bool,
    },
    /// Score a corpus, using classifiers saved by `train`.
    Score {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        /// Directory holding models/rb.model and models/pb.model.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the report files from saved score tables.
    Report {
        /// Directory written by `score` or `run`.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Metrics that must be present (default: every table found).
        #[arg(long)]
        metrics: Option<String>,
        /// two-stage or pooled.
        #[arg(long, default_value = "two-stage")]
        agg: String,
    },
    /// Train, score and report in one go.
    Run {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write pairs.tsv and contexts.tsv.
        #[arg(long)]
        export_features: bool,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Tab-separated corpus file; repeat for several.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Generate the corpus instead of reading one.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, env = "CCCP_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_conversations: Option<usize>,
    #[arg(long)]
    pub revisit_rate: Option<f64>,
    #[arg(long)]
    pub root_bias: Option<f64>,
    /// Keep at most N conversations per platform (seeded choice).
    #[arg(long)]
    pub cap_per_platform: Option<usize>,
    /// TOML file with defaults; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-conversation work.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Comma list of baseline, rb, pb, centrality, or `all`.
    #[arg(long)]
    pub metrics: Option<String>,
    /// undirected or ancestor-only.
    #[arg(long)]
    pub path_mode: Option<String>,
    /// parent or ancestors.
    #[arg(long)]
    pub rb_positives: Option<String>,
    /// exclude or include.
    #[arg(long)]
    pub centrality_endpoints: Option<String>,
    /// two-stage or pooled.
    #[arg(long)]
    pub agg: Option<String>,
    #[arg(long)]
    pub zeta_base: Option<f64>,
    #[arg(long)]
    pub theta_base: Option<f64>,
}

fn resolve(corpus: CorpusArgs, metrics: Option<MetricArgs>) -> Result<RunConfig> {
    let file = match &corpus.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let m = metrics.unwrap_or(MetricArgs {
        metrics: Some("baseline".into()),
        path_mode: None,
        rb_positives: None,
        centrality_endpoints: None,
        agg: None,
        zeta_base: None,
        theta_base: None,
    });
    let o = Overrides {
        inputs: corpus.input,
        synthetic: corpus.synthetic,
        seed: corpus.seed,
        n_conversations: corpus.n_conversations,
        revisit_rate: corpus.revisit_rate,
        root_bias: corpus.root_bias,
        cap_per_platform: corpus.cap_per_platform,
        metrics: m.metrics,
        path_mode: m.path_mode,
        rb_positives: m.rb_positives,
        centrality_endpoints: m.centrality_endpoints,
        aggregation: m.agg,
        zeta_base: m.zeta_base,
        theta_base: m.theta_base,
        jobs: corpus.jobs,
    };
    RunConfig::resolve(&file, &o)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestCheck { corpus, out } => {
            let cfg = resolve(corpus, None)?;
            print!("{}", pipeline::ingest_check(&cfg, out.as_deref())?);
        }
        Command::Train {
            corpus,
            metrics,
            out,
            export_features,
        } => {
            let cfg = resolve(corpus, Some(metrics))?;
            let t = pipeline::run_train(&cfg, &out, export_features)?;
            if let Some(d) = &t.rb {
                println!("rb: {} pairs, precision {:.6}", d.pairs, d.precision());
            }
            if let Some(d) = &t.pb {
                println!("pb: {} contexts, precision {:.6}, NEW predicted {:.6}", d.contexts, d.precision, d.new_fraction);
            }
            println!("models written to {}", out.display());
        }
        Command::Score {
            corpus,
            metrics,
            models,
            out,
        } => {
            let cfg = resolve(corpus, Some(metrics))?;
            pipeline::run_score(&cfg, models.as_deref(), &out)?;
            println!("scores written to {}", out.display());
        }
        Command::Report { from, out, metrics, agg } => {
            let metrics = metrics.as_deref().map(parse_metrics).transpose()?;
            let mode = agg.parse().map_err(anyhow::Error::msg)?;
            pipeline::run_report(&from, &out, metrics.as_deref(), mode)?;
            print!("{}", std::fs::read_to_string(out.join("report.txt"))?);
        }
        Command::Run {
            corpus,
            metrics,
            out,
            export_features,
        } => {
            let cfg = resolve(corpus, Some(metrics))?;
            pipeline::run_all(&cfg, &out, export_features)?;
            print!("{}", std::fs::read_to_string(out.join("report.txt"))?);
        }
    }
    Ok(())
}
