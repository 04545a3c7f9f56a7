use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use lsimpute::graph::ExtractionConfig;
use lsimpute::lsi::{LsiConfig, UnreachablePolicy};
use lsimpute::node2vec::{SgnsConfig, WalkConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// N-Triples dump, optionally gzipped.
    pub graph_dump: Option<PathBuf>,
    /// Directory holding nodes.tsv and edges.tsv.
    pub graph_dir: Option<PathBuf>,
    pub domain_embeddings: Option<PathBuf>,
    pub semantic_embeddings: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Terms to filter from the corpus, one per line.
    pub terms: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_resamples: usize,
    pub seed: u64,
    /// Seed of the trained/imputed vocabulary split.
    pub split_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_resamples: lsimpute::eval::DEFAULT_RESAMPLES,
            seed: 1,
            split_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub extraction: ExtractionConfig,
    pub walk: WalkConfig,
    /// Skip-gram settings for walk corpora.
    pub node2vec: SgnsConfig,
    /// Skip-gram settings for the text corpus.
    pub sgns: SgnsConfig,
    pub lsi: LsiConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            extraction: ExtractionConfig::default(),
            walk: WalkConfig::default(),
            node2vec: SgnsConfig::for_walks(),
            sgns: SgnsConfig::default(),
            lsi: LsiConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl PipelineConfig {
    /// Parses a JSON config layered over the defaults: keys missing at any
    /// depth keep their default, unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        let mut base = serde_json::to_value(PipelineConfig::default())?;
        merge(&mut base, user);
        Ok(serde_json::from_value(base)?)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                Self::from_json(&text).with_context(|| format!("invalid config {}", p.display()))
            }
        }
    }

    /// Checks every sub-config and reports all failures at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let checks = [
            ("extraction", self.extraction.validate()),
            ("walk", self.walk.validate()),
            ("node2vec", self.node2vec.validate()),
            ("sgns", self.sgns.validate()),
            ("lsi", self.lsi.validate()),
        ];
        for (name, r) in checks {
            if let Err(e) = r {
                problems.push(format!("{name}: {e}"));
            }
        }
        if self.eval.n_resamples < 1 {
            problems.push("eval: n_resamples must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            bail!("configuration invalid:\n  {}", problems.join("\n  "))
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct WalkFlags {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub n_walks: Option<usize>,
    #[arg(long)]
    pub walk_length: Option<usize>,
    #[arg(long)]
    pub walk_seed: Option<u64>,
}

impl WalkFlags {
    pub fn apply(&self, c: &mut WalkConfig) {
        set(&mut c.p, self.p);
        set(&mut c.q, self.q);
        set(&mut c.n_walks, self.n_walks);
        set(&mut c.walk_length, self.walk_length);
        set(&mut c.seed, self.walk_seed);
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SgnsFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub negative: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sample: Option<f64>,
    #[arg(long)]
    pub min_count: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; more than one trades determinism for speed.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl SgnsFlags {
    pub fn apply(&self, c: &mut SgnsConfig) {
        set(&mut c.dim, self.dim);
        set(&mut c.window, self.window);
        set(&mut c.epochs, self.epochs);
        set(&mut c.negative, self.negative);
        set(&mut c.alpha, self.alpha);
        set(&mut c.sample, self.sample);
        set(&mut c.min_count, self.min_count);
        set(&mut c.seed, self.seed);
        set(&mut c.threads, self.threads);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Error,
    AnchorMean,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LsiFlags {
    /// Minimum degree of the neighbourhood graph.
    #[arg(long)]
    pub k: Option<usize>,
    /// Convergence threshold of the power iteration.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub unreachable_policy: Option<PolicyArg>,
}

impl LsiFlags {
    pub fn apply(&self, c: &mut LsiConfig) {
        set(&mut c.k, self.k);
        set(&mut c.eta, self.eta);
        set(&mut c.max_iters, self.max_iters);
        if let Some(p) = self.unreachable_policy {
            c.unreachable_policy = match p {
                PolicyArg::Error => UnreachablePolicy::Error,
                PolicyArg::AnchorMean => UnreachablePolicy::AnchorMean,
            };
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalFlags {
    #[arg(long)]
    pub n_resamples: Option<usize>,
    #[arg(long)]
    pub eval_seed: Option<u64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

impl EvalFlags {
    pub fn apply(&self, c: &mut EvalConfig) {
        set(&mut c.n_resamples, self.n_resamples);
        set(&mut c.seed, self.eval_seed);
        set(&mut c.split_seed, self.split_seed);
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Flag value, else config value, else an error naming both.
pub fn pick(flag: &Option<PathBuf>, cfg: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    match flag.as_ref().or(cfg.as_ref()) {
        Some(p) => Ok(p.clone()),
        None => bail!("missing {what}: pass --{} or set paths.{} in the config", what.replace('_', "-"), what),
    }
}
