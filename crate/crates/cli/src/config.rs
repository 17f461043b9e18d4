//! TOML configuration and the resolved settings of a run.
//!
//! Precedence is built-in defaults, then the config file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cccp_core::baseline::BaselineParams;
use cccp_core::centrality::EndpointMode;
use cccp_core::nn::{Activation, TrainConfig};
use cccp_core::pb::PbConfig;
use cccp_core::rb::{FeatureLayout, PairOptions, PositiveRule, RbConfig};
use cccp_core::report::AggregationMode;
use cccp_core::synth::SynthConfig;
use cccp_core::{Metric, PathMode, Platform};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub metrics: Option<String>,
    pub baseline: BaselineSection,
    pub rb: RbSection,
    pub pb: PbSection,
    pub centrality: CentralitySection,
    pub report: ReportSection,
    pub synthetic: Vec<SyntheticProfile>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub zeta_base: Option<f64>,
    pub theta_base: Option<f64>,
    pub path_mode: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RbSection {
    pub positives: Option<String>,
    pub hidden_units: Option<usize>,
    pub hidden_activation: Option<String>,
    pub distance_cap: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PbSection {
    pub max_slots: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub hidden_activation: Option<String>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CentralitySection {
    pub endpoints: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub aggregation: Option<String>,
}

/// One generated sub-corpus. Missing fields take the generator defaults.
#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticProfile {
    pub platform: Option<String>,
    pub n_conversations: Option<usize>,
    pub size_min: Option<usize>,
    pub size_max: Option<usize>,
    pub revisit_rate: Option<f64>,
    pub root_bias: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Flag values that override the config file. `None` means "not given".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub inputs: Vec<PathBuf>,
    pub synthetic: bool,
    pub seed: Option<u64>,
    pub n_conversations: Option<usize>,
    pub revisit_rate: Option<f64>,
    pub root_bias: Option<f64>,
    pub cap_per_platform: Option<usize>,
    pub metrics: Option<String>,
    pub path_mode: Option<String>,
    pub rb_positives: Option<String>,
    pub centrality_endpoints: Option<String>,
    pub aggregation: Option<String>,
    pub zeta_base: Option<f64>,
    pub theta_base: Option<f64>,
    pub jobs: Option<usize>,
}

/// Where the corpus comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum CorpusSource {
    Files(Vec<PathBuf>),
    Synthetic(Vec<SynthConfig>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub source: CorpusSource,
    pub cap_per_platform: Option<usize>,
    pub metrics: Vec<Metric>,
    pub baseline: BaselineParams,
    pub rb: RbConfig,
    pub pb: PbConfig,
    pub endpoints: EndpointMode,
    pub aggregation: AggregationMode,
    pub jobs: usize,
}

/// Parses `all` or a comma list of reported metrics, keeping the canonical order.
pub fn parse_metrics(s: &str) -> Result<Vec<Metric>> {
    let mut chosen = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            chosen.extend(Metric::REPORTED);
            continue;
        }
        let m: Metric = part.parse().map_err(anyhow::Error::msg)?;
        if !Metric::REPORTED.contains(&m) {
            bail!("`{part}` is not a selectable metric (use baseline, rb, pb, centrality or all)");
        }
        chosen.push(m);
    }
    let metrics: Vec<Metric> = Metric::REPORTED.into_iter().filter(|m| chosen.contains(m)).collect();
    if metrics.is_empty() {
        bail!("no metric selected");
    }
    Ok(metrics)
}

fn parse_with<T: std::str::FromStr>(what: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow::anyhow!("invalid {what} `{v}`: {e}"))
}

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

impl RunConfig {
    pub fn resolve(file: &FileConfig, o: &Overrides) -> Result<Self> {
        let seed = o.seed.or(file.seed).unwrap_or(0);

        let source = if !o.inputs.is_empty() {
            if o.synthetic {
                bail!("--input and --synthetic are mutually exclusive");
            }
            CorpusSource::Files(o.inputs.clone())
        } else if o.synthetic {
            let profiles = if file.synthetic.is_empty() {
                vec![SyntheticProfile::default()]
            } else {
                file.synthetic.clone()
            };
            let mut configs = Vec::with_capacity(profiles.len());
            for (i, p) in profiles.iter().enumerate() {
                let d = SynthConfig::default();
                let platform = match &p.platform {
                    Some(s) => parse_with::<Platform>("platform", s)?,
                    None => d.platform,
                };
                let cfg = SynthConfig {
                    n_conversations: o.n_conversations.or(p.n_conversations).unwrap_or(d.n_conversations),
                    size_range: (p.size_min.unwrap_or(d.size_range.0), p.size_max.unwrap_or(d.size_range.1)),
                    root_attachment_bias: o.root_bias.or(p.root_bias).unwrap_or(d.root_attachment_bias),
                    revisit_rate: o.revisit_rate.or(p.revisit_rate).unwrap_or(d.revisit_rate),
                    seed: seed.wrapping_add(i as u64),
                    platform,
                };
                cfg.validate().map_err(|e| anyhow::anyhow!("synthetic profile {}: {e}", i + 1))?;
                configs.push(cfg);
            }
            CorpusSource::Synthetic(configs)
        } else {
            bail!("no corpus given: pass --input PATH or --synthetic");
        };

        let metrics = parse_metrics(&pick(&o.metrics, &file.metrics).unwrap_or_else(|| "all".into()))?;

        let path_mode = match pick(&o.path_mode, &file.baseline.path_mode) {
            Some(s) => parse_with::<PathMode>("path mode", &s)?,
            None => PathMode::default(),
        };
        let base = BaselineParams::default();
        let baseline = BaselineParams {
            zeta_base: o.zeta_base.or(file.baseline.zeta_base).unwrap_or(base.zeta_base),
            theta_base: o.theta_base.or(file.baseline.theta_base).unwrap_or(base.theta_base),
            path_mode,
        };
        for (name, v) in [("zeta base", baseline.zeta_base), ("theta base", baseline.theta_base)] {
            if !(0.0..=1.0).contains(&v) {
                bail!("{name} must lie in [0, 1], got {v}");
            }
        }

        let rb_default = RbConfig::default();
        let positives = match pick(&o.rb_positives, &file.rb.positives) {
            Some(s) => parse_with::<PositiveRule>("positive rule", &s)?,
            None => PositiveRule::default(),
        };
        let rb_act = match &file.rb.hidden_activation {
            Some(s) => parse_with::<Activation>("activation", s)?,
            None => rb_default.hidden_activation,
        };
        let rb = RbConfig {
            hidden_units: file.rb.hidden_units.unwrap_or(rb_default.hidden_units),
            hidden_activation: rb_act,
            train: TrainConfig {
                learning_rate: file.rb.learning_rate.unwrap_or(rb_default.train.learning_rate),
                epochs: file.rb.epochs.unwrap_or(rb_default.train.epochs),
                batch_size: file.rb.batch_size.unwrap_or(rb_default.train.batch_size),
                seed,
            },
            layout: FeatureLayout {
                distance_cap: file.rb.distance_cap.unwrap_or(rb_default.layout.distance_cap),
            },
            pairs: PairOptions { positives, path_mode },
        };
        rb.train.validate().map_err(|e| anyhow::anyhow!("[rb] {e}"))?;
        if rb.layout.distance_cap == 0 || rb.hidden_units == 0 {
            bail!("[rb] distance_cap and hidden_units must be positive");
        }

        let pb_default = PbConfig::default();
        let pb_act = match &file.pb.hidden_activation {
            Some(s) => parse_with::<Activation>("activation", s)?,
            None => pb_default.hidden_activation,
        };
        let pb = PbConfig {
            max_slots: file.pb.max_slots.unwrap_or(pb_default.max_slots),
            hidden: file.pb.hidden.clone().unwrap_or(pb_default.hidden),
            hidden_activation: pb_act,
            train: TrainConfig {
                learning_rate: file.pb.learning_rate.unwrap_or(pb_default.train.learning_rate),
                epochs: file.pb.epochs.unwrap_or(pb_default.train.epochs),
                batch_size: file.pb.batch_size.unwrap_or(pb_default.train.batch_size),
                seed,
            },
        };
        pb.train.validate().map_err(|e| anyhow::anyhow!("[pb] {e}"))?;
        if pb.max_slots == 0 || pb.hidden.contains(&0) {
            bail!("[pb] max_slots and hidden widths must be positive");
        }

        let endpoints = match pick(&o.centrality_endpoints, &file.centrality.endpoints) {
            Some(s) => parse_with::<EndpointMode>("endpoint mode", &s)?,
            None => EndpointMode::default(),
        };
        let aggregation = match pick(&o.aggregation, &file.report.aggregation) {
            Some(s) => parse_with::<AggregationMode>("aggregation", &s)?,
            None => AggregationMode::default(),
        };
        let jobs = o.jobs.unwrap_or(1);
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }

        Ok(Self {
            seed,
            source,
            cap_per_platform: o.cap_per_platform,
            metrics,
            baseline,
            rb,
            pb,
            endpoints,
            aggregation,
            jobs,
        })
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }

    /// The settings as recorded in the manifest.
    pub fn to_json(&self) -> serde_json::Value {
        let source = match &self.source {
            CorpusSource::Files(paths) => json!({
                "inputs": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            }),
            CorpusSource::Synthetic(cfgs) => json!({
                "synthetic": cfgs.iter().map(|c| json!({
                    "platform": c.platform.as_str(),
                    "n_conversations": c.n_conversations,
                    "size_min": c.size_range.0,
                    "size_max": c.size_range.1,
                    "revisit_rate": c.revisit_rate,
                    "root_bias": c.root_attachment_bias,
                    "seed": c.seed,
                })).collect::<Vec<_>>(),
            }),
        };
        let train = |t: &TrainConfig| {
            json!({
                "learning_rate": t.learning_rate,
                "epochs": t.epochs,
                "batch_size": t.batch_size,
                "seed": t.seed,
            })
        };
        json!({
            "seed": self.seed,
            "source": source,
            "cap_per_platform": self.cap_per_platform,
            "metrics": self.metrics.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
            "baseline": {
                "zeta_base": self.baseline.zeta_base,
                "theta_base": self.baseline.theta_base,
                "path_mode": self.baseline.path_mode.as_str(),
            },
            "rb": {
                "positives": self.rb.pairs.positives.as_str(),
                "hidden_units": self.rb.hidden_units,
                "hidden_activation": self.rb.hidden_activation.as_str(),
                "distance_cap": self.rb.layout.distance_cap,
                "train": train(&self.rb.train),
            },
            "pb": {
                "max_slots": self.pb.max_slots,
                "hidden": self.pb.hidden,
                "hidden_activation": self.pb.hidden_activation.as_str(),
                "train": train(&self.pb.train),
            },
            "centrality": { "endpoints": self.endpoints.as_str() },
            "report": { "aggregation": self.aggregation.as_str() },
            "jobs": self.jobs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> Overrides {
        Overrides {
            synthetic: true,
            ..Overrides::default()
        }
    }

    #[test]
    fn defaults_match_the_library() {
        let cfg = RunConfig::resolve(&FileConfig::default(), &synthetic()).unwrap();
        assert_eq!(cfg.metrics, Metric::REPORTED.to_vec());
        assert_eq!(cfg.rb.hidden_units, RbConfig::default().hidden_units);
        assert_eq!(cfg.pb.hidden, PbConfig::default().hidden);
        assert_eq!(cfg.baseline, BaselineParams::default());
        assert_eq!(cfg.aggregation, AggregationMode::TwoStage);
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str(
            "seed = 3\nmetrics = \"rb\"\n[baseline]\nzeta_base = 0.4\n[rb]\nepochs = 7\n\
             [[synthetic]]\nplatform = \"reddit\"\nrevisit_rate = 0.6\n\
             [[synthetic]]\nplatform = \"twitter\"\n",
        )
        .unwrap();
        let o = Overrides {
            seed: Some(9),
            zeta_base: Some(0.3),
            metrics: Some("baseline,centrality".into()),
            ..synthetic()
        };
        let cfg = RunConfig::resolve(&file, &o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.baseline.zeta_base, 0.3);
        assert_eq!(cfg.rb.train.epochs, 7);
        assert_eq!(cfg.metrics, vec![Metric::Baseline, Metric::Centrality]);
        match cfg.source {
            CorpusSource::Synthetic(c) => {
                assert_eq!(c.len(), 2);
                assert_eq!((c[0].platform, c[0].revisit_rate, c[0].seed), (Platform::Reddit, 0.6, 9));
                assert_eq!((c[1].platform, c[1].seed), (Platform::Twitter, 10));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(toml::from_str::<FileConfig>("[rb]\nwidth = 3\n").is_err());
        assert!(parse_metrics("pb_raw").is_err());
        assert!(parse_metrics("").is_err());
        assert_eq!(parse_metrics("centrality,baseline").unwrap(), vec![Metric::Baseline, Metric::Centrality]);
        let bad = Overrides {
            revisit_rate: Some(1.5),
            ..synthetic()
        };
        assert!(RunConfig::resolve(&FileConfig::default(), &bad).is_err());
        assert!(RunConfig::resolve(&FileConfig::default(), &Overrides::default()).is_err());
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        for name in ["default.toml", "platform_contrast.toml"] {
            FileConfig::load(&dir.join(name)).unwrap();
        }
    }
}
